use thiserror::Error;

use crate::scalar::Scalar;

/// Quantization range used for arc weights: integers in `[0, DEFAULT_WEIGHT_LEVELS]`.
pub const DEFAULT_WEIGHT_LEVELS: u32 = 1023;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("arc ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
}

/// Symmetric weighted graph in compressed adjacency form.
///
/// Arcs are inserted as undirected pairs; duplicates collapse to the smaller
/// weight. Each node's neighbors are stored sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<u32>,
    max_weight: u32,
}

impl GenericGraph {
    pub fn from_arcs(
        node_count: usize,
        arcs: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, GraphError> {
        let arcs: Vec<(usize, usize, u32)> = arcs.into_iter().collect();
        let mut degree = vec![0usize; node_count + 1];
        for &(p, q, _) in &arcs {
            if p >= node_count || q >= node_count {
                return Err(GraphError::NodeOutOfRange(p, q, node_count));
            }
            if p == q {
                return Err(GraphError::SelfLoop(p));
            }
            degree[p] += 1;
            degree[q] += 1;
        }
        let mut offsets = vec![0usize; node_count + 1];
        for i in 0..node_count {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut slots = vec![(0usize, 0u32); offsets[node_count]];
        for &(p, q, w) in &arcs {
            slots[fill[p]] = (q, w);
            fill[p] += 1;
            slots[fill[q]] = (p, w);
            fill[q] += 1;
        }

        let mut targets = Vec::with_capacity(slots.len());
        let mut weights = Vec::with_capacity(slots.len());
        let mut new_offsets = Vec::with_capacity(node_count + 1);
        new_offsets.push(0);
        let mut max_weight = 0;
        for p in 0..node_count {
            let seg = &mut slots[offsets[p]..offsets[p + 1]];
            seg.sort_unstable();
            let mut last: Option<usize> = None;
            for &(q, w) in seg.iter() {
                // sorted by (q, w): the first occurrence carries the minimum weight
                if last == Some(q) {
                    continue;
                }
                last = Some(q);
                targets.push(q);
                weights.push(w);
                max_weight = max_weight.max(w);
            }
            new_offsets.push(targets.len());
        }
        Ok(Self {
            offsets: new_offsets,
            targets,
            weights,
            max_weight,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of directed arcs (twice the number of undirected pairs).
    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    pub fn max_weight(&self) -> u32 {
        self.max_weight
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn weight(&self, p: usize, q: usize) -> Option<u32> {
        let range = self.offsets[p]..self.offsets[p + 1];
        let seg = &self.targets[range.clone()];
        seg.binary_search(&q).ok().map(|i| self.weights[range.start + i])
    }
}

/// Maps real weights linearly onto `[0, levels]`, rounding half up, with the
/// largest input weight landing on `levels`.
#[derive(Debug, Clone, Copy)]
pub struct WeightQuantizer<T> {
    levels: T,
    max_weight: T,
}

impl<T: Scalar> WeightQuantizer<T> {
    pub fn fit(max_weight: T, levels: u32) -> Self {
        Self {
            levels: T::lit(levels as f64),
            max_weight,
        }
    }

    pub fn fit_to(weights: impl IntoIterator<Item = T>, levels: u32) -> Self {
        let max = weights.into_iter().fold(T::zero(), |m, w| m.max(w));
        Self::fit(max, levels)
    }

    #[inline]
    pub fn quantize(&self, w: T) -> u32 {
        if self.max_weight <= T::zero() {
            return 0;
        }
        let w = w.max(T::zero()).min(self.max_weight);
        let v = (w * self.levels / self.max_weight + T::lit(0.5)).floor();
        v.to_u32().unwrap_or(u32::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcs_are_symmetric_and_deduplicated() {
        let g = GenericGraph::from_arcs(3, [(0, 1, 4), (1, 0, 2), (1, 2, 9)]).unwrap();
        assert_eq!(g.weight(0, 1), Some(2));
        assert_eq!(g.weight(1, 0), Some(2));
        assert_eq!(g.weight(2, 1), Some(9));
        assert_eq!(g.weight(0, 2), None);
        assert_eq!(g.arc_count(), 4);
        assert_eq!(g.max_weight(), 9);
    }

    #[test]
    fn rejects_bad_arcs() {
        assert_eq!(
            GenericGraph::from_arcs(2, [(0, 0, 1)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            GenericGraph::from_arcs(2, [(0, 2, 1)]),
            Err(GraphError::NodeOutOfRange(0, 2, 2))
        );
    }

    #[test]
    fn quantizer_maps_max_to_top_level() {
        let q = WeightQuantizer::fit(10.0f64, DEFAULT_WEIGHT_LEVELS);
        assert_eq!(q.quantize(10.0), 1023);
        assert_eq!(q.quantize(0.0), 0);
        // 5 * 102.3 = 511.5 rounds half up
        assert_eq!(q.quantize(5.0), 512);
        let zero = WeightQuantizer::fit(0.0f64, DEFAULT_WEIGHT_LEVELS);
        assert_eq!(zero.quantize(3.0), 0);
    }
}
