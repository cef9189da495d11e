//! Spatiotemporal superpixel graph over a window of frames, and label
//! prediction on it by seed competition from the first frame's mask.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::flow::{mean_superpixel_flow, FlowError, FlowField};
use crate::ift::{ift_sc, GenericGraph, IftError, SeedSet, WeightQuantizer, DEFAULT_WEIGHT_LEVELS};
use crate::imgcore::{
    color_distance, seed_pixels_from_label, ImageError, Label, LabelMap, BACKGROUND,
    FORWARD_NEIGHBORS_8,
};
use crate::scalar::Scalar;
use crate::superpix::SuperpixelDecomposition;

pub const DEFAULT_RHO_E: usize = 2;
pub const DEFAULT_RHO_D: usize = 3;

#[derive(Debug, Error)]
pub enum VideoSegError {
    #[error("window [{start}, {end}] spans fewer than two frames")]
    WindowTooShort { start: usize, end: usize },
    #[error("window of {frames} frames needs {frames} decompositions and {} flows, got {decomps} and {flows}", frames - 1)]
    CoverageGap {
        frames: usize,
        decomps: usize,
        flows: usize,
    },
    #[error("frame sizes differ inside the window")]
    DimensionMismatch,
    #[error("no superpixel received a seed")]
    NoSeeds,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Ift(#[from] IftError),
}

/// Inclusive frame range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Spatial,
    Temporal,
}

/// How a superpixel is moved for the warped-overlap test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpMode {
    /// Every member pixel moves by the superpixel's rounded mean displacement.
    #[default]
    MeanDisplacement,
    /// Every member pixel moves by its own rounded flow vector.
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub weight_levels: u32,
    /// Squared color distance instead of the plain norm.
    pub squared_distance: bool,
    pub warp: WarpMode,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            weight_levels: DEFAULT_WEIGHT_LEVELS,
            squared_distance: false,
            warp: WarpMode::MeanDisplacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphArc<T> {
    pub p: usize,
    pub q: usize,
    pub kind: ArcKind,
    pub weight: T,
    pub quantized: u32,
}

/// Superpixels of every frame in a window, linked by shared pixel edges
/// within a frame and by (warped) overlap between consecutive frames.
#[derive(Debug, Clone)]
pub struct SpatioTemporalGraph<T> {
    window: Window,
    frame_offsets: Vec<usize>,
    mean_colors: Vec<[T; 3]>,
    arcs: Vec<GraphArc<T>>,
    graph: GenericGraph,
}

impl<T: Scalar> SpatioTemporalGraph<T> {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn node_count(&self) -> usize {
        self.mean_colors.len()
    }

    /// Global node id of superpixel index `k` in window frame `f` (0-based
    /// within the window).
    pub fn node(&self, f: usize, k: usize) -> usize {
        debug_assert!(self.frame_offsets[f] + k < self.frame_offsets[f + 1]);
        self.frame_offsets[f] + k
    }

    /// `(window frame, superpixel index)` of a global node id.
    pub fn locate(&self, node: usize) -> (usize, usize) {
        let f = self.frame_offsets.partition_point(|&o| o <= node) - 1;
        (f, node - self.frame_offsets[f])
    }

    pub fn frame_nodes(&self, f: usize) -> std::ops::Range<usize> {
        self.frame_offsets[f]..self.frame_offsets[f + 1]
    }

    pub fn mean_color(&self, node: usize) -> [T; 3] {
        self.mean_colors[node]
    }

    pub fn arcs(&self) -> &[GraphArc<T>] {
        &self.arcs
    }

    pub fn graph(&self) -> &GenericGraph {
        &self.graph
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Node {
            id: usize,
            frame: usize,
            superpixel: usize,
            mean_color: [f64; 3],
        }
        #[derive(Serialize)]
        struct Arc {
            p: usize,
            q: usize,
            kind: ArcKind,
            weight: f64,
            quantized: u32,
        }
        #[derive(Serialize)]
        struct Dump {
            window: Window,
            nodes: Vec<Node>,
            arcs: Vec<Arc>,
        }
        let nodes = (0..self.node_count())
            .map(|id| {
                let (f, k) = self.locate(id);
                let c = self.mean_colors[id];
                Node {
                    id,
                    frame: self.window.start + f,
                    superpixel: k + 1,
                    mean_color: [c[0].as_f64(), c[1].as_f64(), c[2].as_f64()],
                }
            })
            .collect();
        let arcs = self
            .arcs
            .iter()
            .map(|a| Arc {
                p: a.p,
                q: a.q,
                kind: a.kind,
                weight: a.weight.as_f64(),
                quantized: a.quantized,
            })
            .collect();
        serde_json::to_string(&Dump {
            window: self.window,
            nodes,
            arcs,
        })
        .expect("graph serializes")
    }

    pub fn save_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

fn spatial_pairs<T: Scalar>(d: &SuperpixelDecomposition<T>) -> Vec<(usize, usize)> {
    let (w, h) = d.dims();
    let mut pairs = HashSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = d.index_of(y * w + x);
            for (dx, dy) in FORWARD_NEIGHBORS_8 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let b = d.index_of(ny as usize * w + nx as usize);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    let mut pairs: Vec<_> = pairs.into_iter().collect();
    pairs.sort_unstable();
    pairs
}

/// Pairs `(superpixel in a, superpixel in b)` that overlap directly, after
/// moving `a` forward along the flow, or after moving `b` backward along the
/// negated flow.
fn temporal_pairs<T: Scalar>(
    a: &SuperpixelDecomposition<T>,
    b: &SuperpixelDecomposition<T>,
    flow: &FlowField<T>,
    warp: WarpMode,
) -> Result<Vec<(usize, usize)>, VideoSegError> {
    let (w, h) = a.dims();
    let mean_a = mean_superpixel_flow(a, flow)?;
    let mean_b = mean_superpixel_flow(b, flow)?;
    let round = |v: [T; 2]| {
        (
            v[0].round().to_i64().unwrap_or(0),
            v[1].round().to_i64().unwrap_or(0),
        )
    };
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64;
    let mut pairs = HashSet::new();
    for i in 0..w * h {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        let pa = a.index_of(i);
        let qb = b.index_of(i);
        pairs.insert((pa, qb));

        let (du, dv) = match warp {
            WarpMode::MeanDisplacement => mean_a.rounded(pa),
            WarpMode::PerPixel => round(flow.at(i)),
        };
        if inside(x + du, y + dv) {
            pairs.insert((pa, b.index_of((y + dv) as usize * w + (x + du) as usize)));
        }

        let (du, dv) = match warp {
            WarpMode::MeanDisplacement => mean_b.rounded(qb),
            WarpMode::PerPixel => round(flow.at(i)),
        };
        if inside(x - du, y - dv) {
            pairs.insert((a.index_of((y - dv) as usize * w + (x - du) as usize), qb));
        }
    }
    let mut pairs: Vec<_> = pairs.into_iter().collect();
    pairs.sort_unstable();
    Ok(pairs)
}

/// Builds the graph for `window`. `decomps[f]` is the decomposition of frame
/// `window.start + f`; `flows[f]` is the forward flow from that frame to the
/// next.
pub fn build_graph<T: Scalar>(
    decomps: &[&SuperpixelDecomposition<T>],
    flows: &[&FlowField<T>],
    window: Window,
    options: &GraphOptions,
) -> Result<SpatioTemporalGraph<T>, VideoSegError> {
    if window.is_empty() || window.len() < 2 {
        return Err(VideoSegError::WindowTooShort {
            start: window.start,
            end: window.end,
        });
    }
    let frames = window.len();
    if decomps.len() != frames || flows.len() != frames - 1 {
        return Err(VideoSegError::CoverageGap {
            frames,
            decomps: decomps.len(),
            flows: flows.len(),
        });
    }
    let dims = decomps[0].dims();
    if decomps.iter().any(|d| d.dims() != dims) || flows.iter().any(|f| f.dims() != dims) {
        return Err(VideoSegError::DimensionMismatch);
    }

    let mut frame_offsets = Vec::with_capacity(frames + 1);
    let mut mean_colors = Vec::new();
    frame_offsets.push(0);
    for d in decomps {
        mean_colors.extend((0..d.count()).map(|k| d.mean_color(k)));
        frame_offsets.push(mean_colors.len());
    }

    let distance = |p: usize, q: usize| {
        let d = color_distance(mean_colors[p], mean_colors[q]);
        if options.squared_distance {
            d * d
        } else {
            d
        }
    };

    let mut arcs: Vec<GraphArc<T>> = Vec::new();
    for (f, d) in decomps.iter().enumerate() {
        let off = frame_offsets[f];
        for (a, b) in spatial_pairs(d) {
            let (p, q) = (off + a, off + b);
            arcs.push(GraphArc {
                p,
                q,
                kind: ArcKind::Spatial,
                weight: distance(p, q),
                quantized: 0,
            });
        }
    }
    for f in 0..frames - 1 {
        let (off_a, off_b) = (frame_offsets[f], frame_offsets[f + 1]);
        for (a, b) in temporal_pairs(decomps[f], decomps[f + 1], flows[f], options.warp)? {
            let (p, q) = (off_a + a, off_b + b);
            arcs.push(GraphArc {
                p,
                q,
                kind: ArcKind::Temporal,
                weight: distance(p, q),
                quantized: 0,
            });
        }
    }

    let quantizer = WeightQuantizer::fit_to(arcs.iter().map(|a| a.weight), options.weight_levels);
    for a in &mut arcs {
        a.quantized = quantizer.quantize(a.weight);
    }
    let graph = GenericGraph::from_arcs(
        mean_colors.len(),
        arcs.iter().map(|a| (a.p, a.q, a.quantized)),
    )
    .expect("arcs reference valid, distinct nodes");

    Ok(SpatioTemporalGraph {
        window,
        frame_offsets,
        mean_colors,
        arcs,
        graph,
    })
}

/// Superpixel seeds of the window's first frame, as `(superpixel index, label)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelSeedSet {
    entries: Vec<(usize, Label)>,
}

impl SuperpixelSeedSet {
    pub fn new(entries: Vec<(usize, Label)>) -> Self {
        Self { entries }
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
}

/// Seeds superpixels of the previous frame from its accepted label.
///
/// Pixel seeds come from eroding each object by `rho_e` and taking the
/// complement of the objects dilated by `rho_d`. A superpixel containing any
/// seed pixel becomes a seed with the label most of its seed pixels carry;
/// count ties go to the smaller label, so background wins them. An object too
/// thin to survive erosion is seeded from its full region instead.
pub fn superpixel_seeds_from_label<T: Scalar>(
    label_prev: &LabelMap,
    decomp_prev: &SuperpixelDecomposition<T>,
    rho_e: usize,
    rho_d: usize,
) -> Result<SuperpixelSeedSet, VideoSegError> {
    if label_prev.dims() != decomp_prev.dims() {
        return Err(VideoSegError::DimensionMismatch);
    }
    let pixels = match seed_pixels_from_label(label_prev, rho_e, rho_d) {
        Err(ImageError::EmptyObjectSeeds { label }) => {
            log::warn!("object {label} vanishes under erosion by {rho_e}; seeding without erosion");
            seed_pixels_from_label(label_prev, 0, rho_d)?
        }
        other => other?,
    };
    let n = decomp_prev.count();
    let mut counts = vec![[0u32; 256]; n];
    let mut any = vec![false; n];
    for (i, l) in pixels.iter_indexed() {
        let k = decomp_prev.index_of(i);
        counts[k][l as usize] += 1;
        any[k] = true;
    }
    let entries: Vec<(usize, Label)> = (0..n)
        .filter(|&k| any[k])
        .map(|k| {
            let mut best = 0usize;
            for l in 1..256 {
                if counts[k][l] > counts[k][best] {
                    best = l;
                }
            }
            (k, best as Label)
        })
        .collect();
    if entries.is_empty() {
        return Err(VideoSegError::NoSeeds);
    }
    Ok(SuperpixelSeedSet { entries })
}

/// Output of a window prediction.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Pixel label maps for frames `start + 1 ..= end`.
    pub labels: Vec<LabelMap>,
    /// Label of every graph node.
    pub node_labels: Vec<Label>,
    /// Nodes no seed reached; they were labeled background.
    pub unreached: usize,
}

pub fn predict_labels<T: Scalar>(
    graph: &SpatioTemporalGraph<T>,
    seeds: &SuperpixelSeedSet,
    decomps: &[&SuperpixelDecomposition<T>],
) -> Result<Prediction, VideoSegError> {
    if decomps.len() != graph.window.len() {
        return Err(VideoSegError::CoverageGap {
            frames: graph.window.len(),
            decomps: decomps.len(),
            flows: graph.window.len() - 1,
        });
    }
    if seeds.is_empty() {
        return Err(VideoSegError::NoSeeds);
    }
    let seed_set = SeedSet::new(
        seeds
            .entries
            .iter()
            .map(|&(k, l)| (graph.node(0, k), l))
            .collect(),
    );
    let forest = ift_sc(&graph.graph, &seed_set)?;
    let mut unreached = 0;
    let node_labels: Vec<Label> = forest
        .label
        .iter()
        .map(|l| {
            l.unwrap_or_else(|| {
                unreached += 1;
                BACKGROUND
            })
        })
        .collect();
    if unreached > 0 {
        log::warn!("{unreached} superpixel nodes unreached by any seed; labeled background");
    }
    let labels = (1..graph.window.len())
        .map(|f| render_frame(graph, &node_labels, f, decomps[f]))
        .collect();
    Ok(Prediction {
        labels,
        node_labels,
        unreached,
    })
}

fn render_frame<T: Scalar>(
    graph: &SpatioTemporalGraph<T>,
    node_labels: &[Label],
    f: usize,
    decomp: &SuperpixelDecomposition<T>,
) -> LabelMap {
    let (w, h) = decomp.dims();
    let off = graph.frame_offsets[f];
    let labels = decomp
        .assignment()
        .iter()
        .map(|&id| node_labels[off + id as usize - 1])
        .collect();
    LabelMap::new(w, h, labels).expect("decomposition covers the frame")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::ColorFrame;
    use crate::superpix::slico;

    fn frame_of(w: usize, h: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> ColorFrame<f64> {
        ColorFrame::new(w, h, (0..w * h).map(|i| f(i % w, i / w)).collect()).unwrap()
    }

    fn whole(w: usize, h: usize) -> SuperpixelDecomposition<f64> {
        let f = ColorFrame::uniform(w, h, [10.0, 0.0, 0.0]).unwrap();
        SuperpixelDecomposition::from_assignment(&f, vec![1; w * h])
    }

    #[test]
    fn two_whole_frame_superpixels_make_one_temporal_arc() {
        let d = whole(4, 4);
        let flow = FlowField::zeros(4, 4);
        let g = build_graph(&[&d, &d], &[&flow], Window::new(0, 1), &GraphOptions::default()).unwrap();
        assert_eq!(g.arcs().len(), 1);
        assert_eq!(g.arcs()[0].kind, ArcKind::Temporal);
        assert_eq!(g.graph().arc_count(), 2);
    }

    #[test]
    fn halves_share_one_spatial_arc_with_color_weight() {
        let f = frame_of(4, 2, |x, _| if x < 2 { [10.0, 0.0, 0.0] } else { [13.0, 4.0, 0.0] });
        let d = SuperpixelDecomposition::from_assignment(&f, vec![1, 1, 2, 2, 1, 1, 2, 2]);
        let flow = FlowField::zeros(4, 2);
        let g = build_graph(&[&d, &d], &[&flow], Window::new(3, 4), &GraphOptions::default()).unwrap();
        let spatial: Vec<_> = g.arcs().iter().filter(|a| a.kind == ArcKind::Spatial).collect();
        assert_eq!(spatial.len(), 2); // one per frame
        assert_eq!(spatial[0].weight, 5.0);
        assert_eq!((spatial[0].p, spatial[0].q), (0, 1));
        let sq = GraphOptions { squared_distance: true, ..Default::default() };
        let g2 = build_graph(&[&d, &d], &[&flow], Window::new(3, 4), &sq).unwrap();
        assert_eq!(g2.arcs().iter().find(|a| a.kind == ArcKind::Spatial).unwrap().weight, 25.0);
        assert!(g.to_json().contains("\"kind\":\"spatial\""));
    }

    #[test]
    fn warped_overlap_adds_temporal_arcs() {
        // 12x4 frames split into three 4-wide columns; flow moves everything right by 4
        let f = frame_of(12, 4, |x, _| [(x / 4) as f64 * 50.0, 128.0, 128.0]);
        let ids: Vec<u32> = (0..48).map(|i| (i % 12 / 4) as u32 + 1).collect();
        let d = SuperpixelDecomposition::from_assignment(&f, ids);
        let flow = FlowField::constant(12, 4, [4.0, 0.0]);
        let g = build_graph(&[&d, &d], &[&flow], Window::new(0, 1), &GraphOptions::default()).unwrap();
        let temporal: HashSet<(usize, usize)> = g
            .arcs()
            .iter()
            .filter(|a| a.kind == ArcKind::Temporal)
            .map(|a| (a.p, a.q - 3))
            .collect();
        // direct (k,k); forward k -> k+1; backward: column k of frame 1 pulled from k-1
        let expected: HashSet<(usize, usize)> = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)].into();
        assert_eq!(temporal, expected);
        // symmetry of the underlying graph
        for a in g.arcs() {
            assert_eq!(g.graph().weight(a.p, a.q), g.graph().weight(a.q, a.p));
        }
    }

    #[test]
    fn window_errors() {
        let d = whole(4, 4);
        let flow = FlowField::zeros(4, 4);
        assert!(matches!(
            build_graph(&[&d], &[], Window::new(2, 2), &GraphOptions::default()),
            Err(VideoSegError::WindowTooShort { .. })
        ));
        assert!(matches!(
            build_graph(&[&d, &d], &[], Window::new(0, 1), &GraphOptions::default()),
            Err(VideoSegError::CoverageGap { .. })
        ));
        let other = whole(5, 4);
        assert!(matches!(
            build_graph(&[&d, &other], &[&flow], Window::new(0, 1), &GraphOptions::default()),
            Err(VideoSegError::DimensionMismatch)
        ));
    }

    #[test]
    fn node_registry_round_trips() {
        let a = whole(4, 4);
        let f = frame_of(4, 4, |x, _| [x as f64 * 10.0, 0.0, 0.0]);
        let b = SuperpixelDecomposition::from_assignment(&f, (0..16).map(|i| (i % 4) as u32 + 1).collect());
        let flow = FlowField::zeros(4, 4);
        let g = build_graph(&[&a, &b, &a], &[&flow, &flow], Window::new(5, 7), &GraphOptions::default()).unwrap();
        assert_eq!(g.node_count(), 6);
        for id in 0..6 {
            let (f, k) = g.locate(id);
            assert_eq!(g.node(f, k), id);
        }
        assert_eq!(g.locate(5), (2, 0));
        assert_eq!(g.frame_nodes(1), 1..5);
    }

    #[test]
    fn majority_rule_for_superpixel_seeds() {
        // one 10-pixel superpixel split 7 object / 3 background pixels, radii 0
        let f = ColorFrame::uniform(10, 1, [0.0, 128.0, 128.0]).unwrap();
        let d = SuperpixelDecomposition::from_assignment(&f, vec![1; 10]);
        let l = LabelMap::new(10, 1, vec![1, 1, 1, 1, 1, 1, 1, 0, 0, 0]).unwrap();
        let s = superpixel_seeds_from_label(&l, &d, 0, 0).unwrap();
        assert_eq!(s.entries(), &[(0, 1)]);
        // 5 / 5 tie goes to background
        let l = LabelMap::new(10, 1, vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(superpixel_seeds_from_label(&l, &d, 0, 0).unwrap().entries(), &[(0, 0)]);
    }

    #[test]
    fn ring_superpixel_is_not_seeded() {
        // 30x30, object square 10..20; superpixel 2 is a 1-pixel-wide ring at the object border
        let f = ColorFrame::uniform(30, 30, [0.0, 128.0, 128.0]).unwrap();
        let mut ids = vec![1u32; 900];
        let mut label = LabelMap::filled(30, 30, 0);
        for y in 0..30 {
            for x in 0..30 {
                if (10..20).contains(&x) && (10..20).contains(&y) {
                    label.set(x, y, 1);
                }
                let ring = (x == 10 || x == 19) && (10..20).contains(&y)
                    || (y == 10 || y == 19) && (10..20).contains(&x);
                if ring {
                    ids[y * 30 + x] = 2;
                }
            }
        }
        let d = SuperpixelDecomposition::from_assignment(&f, ids);
        let s = superpixel_seeds_from_label(&label, &d, 2, 3).unwrap();
        assert!(s.entries().iter().all(|&(k, _)| k != 1));
        assert_eq!(s.entries(), &[(0, 0)]);
    }

    fn disk_scene(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> (ColorFrame<f64>, LabelMap) {
        let f = frame_of(w, h, |x, y| {
            let inside = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r;
            if inside { [200.0, 90.0, 160.0] } else { [60.0, 140.0, 110.0] }
        });
        let mut l = LabelMap::filled(w, h, 0);
        for y in 0..h {
            for x in 0..w {
                if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                    l.set(x, y, 1);
                }
            }
        }
        (f, l)
    }

    fn iou(a: &LabelMap, b: &LabelMap) -> f64 {
        let (mut i, mut u) = (0, 0);
        for (x, y) in a.labels().iter().zip(b.labels()) {
            if *x > 0 && *y > 0 {
                i += 1;
            }
            if *x > 0 || *y > 0 {
                u += 1;
            }
        }
        i as f64 / u as f64
    }

    #[test]
    fn static_scene_prediction() {
        let (f, l) = disk_scene(60, 50, 30.0, 25.0, 12.0);
        let d = slico(&f, 5, 10).unwrap();
        let flow = FlowField::zeros(60, 50);
        let g = build_graph(&[&d, &d], &[&flow], Window::new(0, 1), &GraphOptions::default()).unwrap();
        let seeds = superpixel_seeds_from_label(&l, &d, 2, 3).unwrap();
        let p = predict_labels(&g, &seeds, &[&d, &d]).unwrap();
        assert_eq!(p.labels.len(), 1);
        assert!(iou(&p.labels[0], &l) >= 0.9);
        // seed purity
        for &(k, lab) in seeds.entries() {
            assert_eq!(p.node_labels[k], lab);
        }
        assert_eq!(p.unreached, 0);
    }

    #[test]
    fn all_background_seeds_predict_background() {
        let (f, _) = disk_scene(30, 30, 15.0, 15.0, 6.0);
        let d = slico(&f, 5, 5).unwrap();
        let flow = FlowField::zeros(30, 30);
        let g = build_graph(&[&d, &d, &d], &[&flow, &flow], Window::new(0, 2), &GraphOptions::default()).unwrap();
        let seeds = superpixel_seeds_from_label(&LabelMap::filled(30, 30, 0), &d, 2, 3).unwrap();
        let p = predict_labels(&g, &seeds, &[&d, &d, &d]).unwrap();
        assert!(p.labels.iter().all(|l| !l.has_object()));
    }

    #[test]
    fn vanishing_object_still_yields_full_labelings() {
        let (f0, l0) = disk_scene(40, 40, 20.0, 20.0, 8.0);
        let (f1, _) = disk_scene(40, 40, -100.0, -100.0, 1.0);
        let (f2, _) = disk_scene(40, 40, 10.0, 30.0, 6.0);
        let ds: Vec<_> = [&f0, &f1, &f2].iter().map(|f| slico(f, 5, 5).unwrap()).collect();
        let flow = FlowField::zeros(40, 40);
        let refs: Vec<&SuperpixelDecomposition<f64>> = ds.iter().collect();
        let g = build_graph(&refs, &[&flow, &flow], Window::new(0, 2), &GraphOptions::default()).unwrap();
        let seeds = superpixel_seeds_from_label(&l0, &ds[0], 2, 3).unwrap();
        let p = predict_labels(&g, &seeds, &refs).unwrap();
        assert_eq!(p.labels.len(), 2);
        for l in &p.labels {
            assert_eq!(l.labels().len(), 1600);
            assert!(l.labels().iter().all(|&v| v <= 1));
        }
    }
}
