//! Image foresting transform by seed competition.
//!
//! Seeds start at cost zero and conquer the rest of the graph in
//! non-decreasing order of path cost, where a path costs the largest arc
//! weight along it. Each node ends up in the tree of the seed offering the
//! cheapest such path and inherits that seed's label.

mod graph;
mod oracle;
mod queue;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::Label;

pub use graph::{GenericGraph, GraphError, WeightQuantizer, DEFAULT_WEIGHT_LEVELS};
pub use oracle::minimax_oracle;
pub use queue::BUCKET_BUDGET;

use queue::FifoQueue;

/// Cost of a node no seed can reach.
pub const INFINITE_COST: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IftError {
    #[error("seed set is empty")]
    EmptySeedSet,
    #[error("seed node {node} outside graph of {node_count} nodes")]
    SeedOutOfRange { node: usize, node_count: usize },
    #[error("node {0} seeded more than once")]
    DuplicateSeed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SeedSet {
    entries: Vec<(usize, Label)>,
}

impl SeedSet {
    pub fn new(entries: Vec<(usize, Label)>) -> Self {
        Self { entries }
    }

    pub fn push(&mut self, node: usize, label: Label) {
        self.entries.push((node, label));
    }

    pub fn entries(&self) -> &[(usize, Label)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn validate(&self, node_count: usize) -> Result<(), IftError> {
        if self.entries.is_empty() {
            return Err(IftError::EmptySeedSet);
        }
        let mut seen = HashSet::with_capacity(self.entries.len());
        for &(node, _) in &self.entries {
            if node >= node_count {
                return Err(IftError::SeedOutOfRange { node, node_count });
            }
            if !seen.insert(node) {
                return Err(IftError::DuplicateSeed(node));
            }
        }
        Ok(())
    }
}

/// Optimum-path forest: cost, predecessor, root and label per node.
/// Unreached nodes have cost [`INFINITE_COST`] and no root or label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestResult {
    pub cost: Vec<u32>,
    pub predecessor: Vec<Option<usize>>,
    pub root: Vec<Option<usize>>,
    pub label: Vec<Option<Label>>,
}

impl ForestResult {
    pub fn node_count(&self) -> usize {
        self.cost.len()
    }

    pub fn is_reached(&self, node: usize) -> bool {
        self.cost[node] != INFINITE_COST
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn save_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load_json(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// Path-cost extension rule. Only the max-arc rule is exposed publicly; the
/// engine is written against this trait so it stays in one place.
trait Connectivity {
    fn extend(&self, path_cost: u32, arc_weight: u32) -> u32;
    /// Upper bound on any finite path cost for `graph`.
    fn max_cost(&self, graph: &GenericGraph) -> u32;
}

struct MaxArc;

impl Connectivity for MaxArc {
    #[inline]
    fn extend(&self, path_cost: u32, arc_weight: u32) -> u32 {
        path_cost.max(arc_weight)
    }

    fn max_cost(&self, graph: &GenericGraph) -> u32 {
        graph.max_weight()
    }
}

/// Seed competition under the max-arc path cost.
///
/// Ties between equal costs go to whichever node entered the queue first; a
/// node is only re-conquered by a strictly cheaper path.
pub fn ift_sc(graph: &GenericGraph, seeds: &SeedSet) -> Result<ForestResult, IftError> {
    run(graph, seeds, &MaxArc)
}

fn run(graph: &GenericGraph, seeds: &SeedSet, f: &impl Connectivity) -> Result<ForestResult, IftError> {
    let n = graph.node_count();
    seeds.validate(n)?;

    let mut cost = vec![INFINITE_COST; n];
    let mut predecessor = vec![None; n];
    let mut root = vec![None; n];
    let mut label = vec![None; n];
    let mut done = vec![false; n];

    let mut queue = FifoQueue::for_max_key(f.max_cost(graph));
    for &(s, l) in seeds.entries() {
        cost[s] = 0;
        root[s] = Some(s);
        label[s] = Some(l);
        queue.push(0, s);
    }

    while let Some((key, p)) = queue.pop() {
        if done[p] || key != cost[p] {
            continue;
        }
        done[p] = true;
        for (q, w) in graph.neighbors(p) {
            if done[q] {
                continue;
            }
            let through = f.extend(cost[p], w);
            if through < cost[q] {
                cost[q] = through;
                predecessor[q] = Some(p);
                root[q] = root[p];
                label[q] = label[p];
                queue.push(through, q);
            }
        }
    }

    Ok(ForestResult {
        cost,
        predecessor,
        root,
        label,
    })
}
