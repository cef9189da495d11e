//! Fuzzy object models and model-based refinement.
//!
//! The model blends the signed distance maps of the flow-propagated label
//! (`Ẽ`) and the graph-predicted label (`Ê`) with a per-pixel weight `W̃`:
//!
//! ```text
//! O(p)   = [Ẽ(p)·W̃(p) + Ê(p)·(1 − W̃(p))] · [L̃(p) = L̂(p)]
//! Oᵂ(p)  = Ẽ(p) if W̃(p) ≥ γ, else O(p)
//! ```
//!
//! so the model is zero wherever the two labels disagree. Thresholding it
//! gives foreground and background seeds for seed competition on the pixel
//! graph, which fills in the uncertainty band between them.

mod edt;
mod propagate;

use thiserror::Error;

use crate::ift::{ift_sc, ForestResult, GenericGraph, IftError, SeedSet, WeightQuantizer, DEFAULT_WEIGHT_LEVELS};
use crate::imgcore::{
    encode_gray8_png, pixel_arcs, ColorFrame, ImageError, Label, LabelMap, SeedPixels, BACKGROUND,
};
use crate::scalar::Scalar;

pub use edt::{signed_edt, signed_edt_per_object, SignedDistanceMap};
pub use propagate::{
    propagate_label, propagate_weights, weight_image, weight_image_prev, DiffusionInpainter,
    Inpainter, PrecomputedInpainter,
};

pub const DEFAULT_ALPHA_F: f64 = 3.0;
pub const DEFAULT_ALPHA_B: f64 = -2.0;
pub const DEFAULT_GAMMA: f64 = 0.6;

#[derive(Debug, Error)]
pub enum FomError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("gamma {0} outside [0, 1]")]
    GammaOutOfRange(f64),
    #[error("thresholds must satisfy alpha_b < 0 < alpha_f (got alpha_b={alpha_b}, alpha_f={alpha_f})")]
    InvalidThresholds { alpha_f: f64, alpha_b: f64 },
    #[error("the model yields no foreground seeds")]
    NoForegroundSeeds,
    #[error("the same number of distance maps is required for both labels ({0} vs {1})")]
    ObjectCountMismatch(usize, usize),
    #[error(transparent)]
    Ift(#[from] IftError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Per-pixel weight in `[0, 1]` of the propagated distance map.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightImage<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> WeightImage<T> {
    /// Values are clamped into `[0, 1]`.
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), width * height);
        let values = values
            .into_iter()
            .map(|v| v.max(T::zero()).min(T::one()))
            .collect();
        Self {
            width,
            height,
            values,
        }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn to_png(&self) -> Vec<u8> {
        let data: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v.as_f64() * 255.0).round() as u8)
            .collect();
        encode_gray8_png(self.width, self.height, &data)
    }
}

/// Signed fuzzy model, one plane per object (`plane(k)` for object `k ≥ 1`).
/// Positive values lean foreground, negative background, zero is uncertain.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyObjectImage<T> {
    width: usize,
    height: usize,
    planes: Vec<Vec<T>>,
}

impl<T: Scalar> FuzzyObjectImage<T> {
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<T>>) -> Self {
        assert!(!planes.is_empty(), "a fuzzy model has at least one object plane");
        assert!(planes.iter().all(|p| p.len() == width * height));
        Self {
            width,
            height,
            planes,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn object_count(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, object: Label) -> &[T] {
        &self.planes[object as usize - 1]
    }

    /// Value of the first object's plane.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.planes[0][y * self.width + x]
    }

    /// Largest plane value at a pixel.
    pub fn max_at(&self, index: usize) -> T {
        self.planes
            .iter()
            .map(|p| p[index])
            .fold(T::neg_infinity(), T::max)
    }

    /// Gray rendering: 128 is zero, the largest magnitude maps to 0 or 255.
    pub fn to_png(&self) -> Vec<u8> {
        let n = self.width * self.height;
        let values: Vec<f64> = (0..n).map(|i| self.max_at(i).as_f64()).collect();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let data: Vec<u8> = values
            .iter()
            .map(|&v| {
                let g = if scale > 0.0 { 128.0 + 127.0 * v / scale } else { 128.0 };
                g.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        encode_gray8_png(self.width, self.height, &data)
    }
}

fn check_inputs<T: Scalar>(
    e_tilde: &[SignedDistanceMap<T>],
    e_hat: &[SignedDistanceMap<T>],
    w_tilde: &WeightImage<T>,
    l_tilde: &LabelMap,
    l_hat: &LabelMap,
) -> Result<(usize, usize), FomError> {
    if e_tilde.len() != e_hat.len() || e_tilde.is_empty() {
        return Err(FomError::ObjectCountMismatch(e_tilde.len(), e_hat.len()));
    }
    let dims = l_tilde.dims();
    let all = e_tilde
        .iter()
        .chain(e_hat)
        .map(|m| m.dims())
        .chain([w_tilde.dims(), l_hat.dims()]);
    for d in all {
        if d != dims {
            return Err(FomError::DimensionMismatch(dims, d));
        }
    }
    Ok(dims)
}

/// Weighted blend of the two signed distance maps of every object, zeroed
/// where `l_tilde` and `l_hat` disagree. `e_tilde[k-1]` and `e_hat[k-1]` are
/// the maps of object `k`.
pub fn fuzzy_image<T: Scalar>(
    e_tilde: &[SignedDistanceMap<T>],
    e_hat: &[SignedDistanceMap<T>],
    w_tilde: &WeightImage<T>,
    l_tilde: &LabelMap,
    l_hat: &LabelMap,
) -> Result<FuzzyObjectImage<T>, FomError> {
    let (w, h) = check_inputs(e_tilde, e_hat, w_tilde, l_tilde, l_hat)?;
    let planes = e_tilde
        .iter()
        .zip(e_hat)
        .map(|(et, eh)| {
            (0..w * h)
                .map(|i| {
                    if l_tilde.at(i) != l_hat.at(i) {
                        return T::zero();
                    }
                    let wt = w_tilde.at(i);
                    et.at(i) * wt + eh.at(i) * (T::one() - wt)
                })
                .collect()
        })
        .collect();
    Ok(FuzzyObjectImage::from_planes(w, h, planes))
}

/// [`fuzzy_image`], except that pixels with weight at least `gamma` take the
/// propagated map `Ẽ` unconditionally.
pub fn fuzzy_image_weighted<T: Scalar>(
    e_tilde: &[SignedDistanceMap<T>],
    e_hat: &[SignedDistanceMap<T>],
    w_tilde: &WeightImage<T>,
    l_tilde: &LabelMap,
    l_hat: &LabelMap,
    gamma: T,
) -> Result<FuzzyObjectImage<T>, FomError> {
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(FomError::GammaOutOfRange(gamma.as_f64()));
    }
    let base = fuzzy_image(e_tilde, e_hat, w_tilde, l_tilde, l_hat)?;
    let (w, h) = base.dims();
    let planes = base
        .planes
        .into_iter()
        .zip(e_tilde)
        .map(|(plane, et)| {
            plane
                .into_iter()
                .enumerate()
                .map(|(i, o)| if w_tilde.at(i) >= gamma { et.at(i) } else { o })
                .collect()
        })
        .collect();
    Ok(FuzzyObjectImage::from_planes(w, h, planes))
}

/// Number of object planes needed to model both labels (at least one).
pub fn model_object_count(l_tilde: &LabelMap, l_hat: &LabelMap) -> Label {
    l_tilde.object_count().max(l_hat.object_count()).max(1)
}

/// Seeds from a fuzzy model: object `k` where its plane is the largest and
/// reaches `alpha_f`; background where every plane is at most `alpha_b`.
pub fn model_seeds<T: Scalar>(
    model: &FuzzyObjectImage<T>,
    alpha_f: T,
    alpha_b: T,
) -> Result<SeedPixels, FomError> {
    let seeds = threshold_model(model, alpha_f, alpha_b)?;
    if !seeds.has_object_seed() {
        return Err(FomError::NoForegroundSeeds);
    }
    Ok(seeds)
}

/// [`model_seeds`] without the foreground requirement, so a model that lost
/// the object still yields its background seeds.
pub fn threshold_model<T: Scalar>(
    model: &FuzzyObjectImage<T>,
    alpha_f: T,
    alpha_b: T,
) -> Result<SeedPixels, FomError> {
    if !(alpha_b < T::zero() && T::zero() < alpha_f) {
        return Err(FomError::InvalidThresholds {
            alpha_f: alpha_f.as_f64(),
            alpha_b: alpha_b.as_f64(),
        });
    }
    let (w, h) = model.dims();
    let mut seeds = SeedPixels::new(w, h);
    for i in 0..w * h {
        let mut best = 0usize;
        for k in 1..model.planes.len() {
            if model.planes[k][i] > model.planes[best][i] {
                best = k;
            }
        }
        let v = model.planes[best][i];
        if v >= alpha_f {
            seeds.set_index(i, (best + 1) as Label);
        } else if v <= alpha_b {
            seeds.set_index(i, BACKGROUND);
        }
    }
    Ok(seeds)
}

/// Pixel graph of a frame: 8-adjacency, weights quantized from the color
/// difference norm.
pub fn pixel_graph<T: Scalar>(frame: &ColorFrame<T>) -> GenericGraph {
    let arcs = pixel_arcs(frame);
    let q = WeightQuantizer::fit_to(arcs.iter().map(|a| a.2), DEFAULT_WEIGHT_LEVELS);
    GenericGraph::from_arcs(
        frame.width() * frame.height(),
        arcs.into_iter().map(|(p, r, w)| (p, r, q.quantize(w))),
    )
    .expect("pixel arcs are valid")
}

/// Seed competition on the pixel graph from model seeds, with optional user
/// scribbles taking precedence at shared pixels.
pub fn refine<T: Scalar>(
    frame: &ColorFrame<T>,
    seeds: &SeedPixels,
    extra_scribbles: Option<&SeedPixels>,
) -> Result<(LabelMap, ForestResult), FomError> {
    refine_on(frame, &pixel_graph(frame), seeds, extra_scribbles)
}

/// [`refine`] with a prebuilt pixel graph.
pub fn refine_on<T: Scalar>(
    frame: &ColorFrame<T>,
    graph: &GenericGraph,
    seeds: &SeedPixels,
    extra_scribbles: Option<&SeedPixels>,
) -> Result<(LabelMap, ForestResult), FomError> {
    if seeds.dims() != frame.dims() {
        return Err(FomError::DimensionMismatch(seeds.dims(), frame.dims()));
    }
    let mut merged = seeds.clone();
    if let Some(extra) = extra_scribbles {
        merged.merge_override(extra)?;
    }
    let seed_set = SeedSet::new(merged.iter_indexed().collect());
    let forest = ift_sc(graph, &seed_set)?;
    let labels = forest
        .label
        .iter()
        .map(|l| l.unwrap_or(BACKGROUND))
        .collect();
    let label = LabelMap::new(frame.width(), frame.height(), labels)?;
    Ok((label, forest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn const_map(v: f64) -> Vec<SignedDistanceMap<f64>> {
        vec![SignedDistanceMap::new(1, 1, vec![v])]
    }

    fn one(l: u8) -> LabelMap {
        LabelMap::new(1, 1, vec![l]).unwrap()
    }

    fn w(v: f64) -> WeightImage<f64> {
        WeightImage::constant(1, 1, v)
    }

    #[test]
    fn blend_arithmetic() {
        let o = fuzzy_image(&const_map(4.0), &const_map(2.0), &w(0.5), &one(1), &one(1)).unwrap();
        assert_eq!(o.get(0, 0), 3.0);
        let o = fuzzy_image(&const_map(4.0), &const_map(2.0), &w(1.0), &one(0), &one(0)).unwrap();
        assert_eq!(o.get(0, 0), 4.0);
    }

    #[test]
    fn disagreement_is_zero() {
        for (et, eh) in [(4.0, 2.0), (-7.0, 9.5), (0.3, -0.3)] {
            let o = fuzzy_image(&const_map(et), &const_map(eh), &w(0.5), &one(1), &one(0)).unwrap();
            assert_eq!(o.get(0, 0), 0.0);
        }
    }

    #[test]
    fn weighted_branches() {
        let (et, eh) = (const_map(4.0), const_map(2.0));
        let o = fuzzy_image_weighted(&et, &eh, &w(0.7), &one(1), &one(0), 0.6).unwrap();
        assert_eq!(o.get(0, 0), 4.0);
        let o = fuzzy_image_weighted(&et, &eh, &w(0.5), &one(1), &one(1), 0.6).unwrap();
        assert_eq!(o.get(0, 0), 3.0);
        let o = fuzzy_image_weighted(&et, &eh, &w(0.0), &one(1), &one(0), 0.0).unwrap();
        assert_eq!(o.get(0, 0), 4.0);
        assert!(matches!(
            fuzzy_image_weighted(&et, &eh, &w(0.5), &one(1), &one(1), 1.5),
            Err(FomError::GammaOutOfRange(_))
        ));
    }

    #[test]
    fn dimension_checks() {
        let big = vec![SignedDistanceMap::new(2, 1, vec![0.0, 0.0])];
        assert!(matches!(
            fuzzy_image(&big, &const_map(1.0), &w(0.5), &one(1), &one(1)),
            Err(FomError::DimensionMismatch(..))
        ));
    }

    fn model(v: f64) -> FuzzyObjectImage<f64> {
        FuzzyObjectImage::from_planes(3, 1, vec![vec![3.0, v, -5.0]])
    }

    #[test]
    fn thresholds_are_inclusive() {
        let s = model_seeds(&model(0.0), 3.0, -2.0).unwrap();
        assert_eq!(s.get(0, 0), Some(1));
        assert_eq!(s.get(1, 0), None);
        assert_eq!(s.get(2, 0), Some(0));
        let s = model_seeds(&model(-2.5), 3.0, -2.0).unwrap();
        assert_eq!(s.get(1, 0), Some(0));
        let s = model_seeds(&model(-2.0), 3.0, -2.0).unwrap();
        assert_eq!(s.get(1, 0), Some(0));
    }

    #[test]
    fn seeds_errors() {
        let m = FuzzyObjectImage::from_planes(2, 1, vec![vec![1.0, -5.0]]);
        assert!(matches!(model_seeds(&m, 3.0, -2.0), Err(FomError::NoForegroundSeeds)));
        assert!(matches!(model_seeds(&m, 3.0, 1.0), Err(FomError::InvalidThresholds { .. })));
    }

    #[test]
    fn multi_object_seeds_pick_the_dominant_plane() {
        let m = FuzzyObjectImage::from_planes(3, 1, vec![vec![5.0, -4.0, -3.0], vec![-4.0, 6.0, -2.5]]);
        let s = model_seeds(&m, 3.0, -2.0).unwrap();
        assert_eq!(s.get(0, 0), Some(1));
        assert_eq!(s.get(1, 0), Some(2));
        assert_eq!(s.get(2, 0), Some(0));
    }

    fn disk_frame(w: usize, h: usize, r: f64) -> (ColorFrame<f64>, LabelMap) {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let mut l = LabelMap::filled(w, h, 0);
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
                    l.set(i % w, i / w, 1);
                    [180.0, 100.0, 150.0]
                } else {
                    [70.0, 140.0, 110.0]
                }
            })
            .collect();
        (ColorFrame::new(w, h, data).unwrap(), l)
    }

    fn iou(a: &LabelMap, b: &LabelMap) -> f64 {
        let inter = a.labels().iter().zip(b.labels()).filter(|(x, y)| **x > 0 && **y > 0).count();
        let union = a.labels().iter().zip(b.labels()).filter(|(x, y)| **x > 0 || **y > 0).count();
        inter as f64 / union as f64
    }

    #[test]
    fn refine_recovers_synthetic_disk() {
        let (f, gt) = disk_frame(50, 40, 12.0);
        let seeds = crate::imgcore::seed_pixels_from_label(&gt, 2, 3).unwrap();
        let (l, forest) = refine(&f, &seeds, None).unwrap();
        assert!(iou(&l, &gt) >= 0.95);
        assert_eq!(forest.node_count(), 2000);
        for (x, y, k) in seeds.iter() {
            assert_eq!(l.get(x, y), k);
        }
    }

    #[test]
    fn refine_closes_seed_holes() {
        let (f, gt) = disk_frame(40, 40, 12.0);
        let mut seeds = crate::imgcore::seed_pixels_from_label(&gt, 0, 3).unwrap();
        let mut holed = SeedPixels::new(40, 40);
        for (x, y, k) in seeds.iter() {
            let hole = (x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2) <= 25.0;
            if !hole {
                holed.insert(x, y, k).unwrap();
            }
        }
        seeds = holed;
        let (l, _) = refine(&f, &seeds, None).unwrap();
        for y in 15..26 {
            for x in 15..26 {
                if (x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2) <= 25.0 {
                    assert_eq!(l.get(x, y), 1);
                }
            }
        }
    }

    #[test]
    fn refine_with_only_background_seeds() {
        let (f, _) = disk_frame(20, 20, 5.0);
        let mut s = SeedPixels::new(20, 20);
        s.insert(0, 0, 0).unwrap();
        let (l, _) = refine(&f, &s, None).unwrap();
        assert!(!l.has_object());
        assert!(matches!(
            refine(&f, &SeedPixels::new(20, 20), None),
            Err(FomError::Ift(IftError::EmptySeedSet))
        ));
    }

    #[test]
    fn scribbles_override_model_seeds() {
        let (f, gt) = disk_frame(30, 30, 8.0);
        let seeds = crate::imgcore::seed_pixels_from_label(&gt, 2, 3).unwrap();
        let mut scribble = SeedPixels::new(30, 30);
        scribble.insert(15, 15, 0).unwrap();
        let (l, _) = refine(&f, &seeds, Some(&scribble)).unwrap();
        assert_eq!(l.get(15, 15), 0);
    }

    #[test]
    fn renderings() {
        let m = FuzzyObjectImage::from_planes(3, 1, vec![vec![-4.0, 0.0, 2.0]]);
        let img = image::load_from_memory(&m.to_png()).unwrap().to_luma8();
        assert_eq!(img.as_raw(), &vec![1, 128, 192]);
        let wi = WeightImage::new(2, 1, vec![0.0, 1.0]);
        let img = image::load_from_memory(&wi.to_png()).unwrap().to_luma8();
        assert_eq!(img.as_raw(), &vec![0, 255]);
    }

    fn arb_pair() -> impl Strategy<Value = (LabelMap, LabelMap, Vec<f64>)> {
        (
            proptest::collection::vec(0u8..2, 64),
            proptest::collection::vec(0u8..2, 64),
            proptest::collection::vec(0.0f64..=1.0, 64),
        )
            .prop_map(|(a, b, w)| (LabelMap::new(8, 8, a).unwrap(), LabelMap::new(8, 8, b).unwrap(), w))
    }

    proptest! {
        #[test]
        fn model_properties((lt, lh, wv) in arb_pair()) {
            let et = signed_edt_per_object::<f64>(&lt, 1);
            let eh = signed_edt_per_object::<f64>(&lh, 1);
            let wt = WeightImage::new(8, 8, wv);
            let o = fuzzy_image(&et, &eh, &wt, &lt, &lh).unwrap();
            for i in 0..64 {
                let v = o.plane(1)[i];
                if lt.at(i) != lh.at(i) {
                    prop_assert_eq!(v, 0.0);
                } else if lt.at(i) == 1 {
                    prop_assert!(v >= 0.0);
                } else {
                    prop_assert!(v < 0.0);
                }
            }
            // equal weights reduce to the plain average
            let half = fuzzy_image(&et, &eh, &WeightImage::constant(8, 8, 0.5), &lt, &lt).unwrap();
            let self_avg = fuzzy_image(&et, &et, &WeightImage::constant(8, 8, 0.5), &lt, &lt).unwrap();
            for i in 0..64 {
                prop_assert!((half.plane(1)[i] - (et[0].at(i) + eh[0].at(i)) / 2.0).abs() < 1e-12);
                prop_assert_eq!(self_avg.plane(1)[i], et[0].at(i));
            }
            if let Ok(s) = model_seeds(&o, 3.0, -2.0) {
                for (i, k) in s.iter_indexed() {
                    prop_assert_eq!(lt.at(i), k);
                    prop_assert_eq!(lh.at(i), k);
                }
            }
            // lowering gamma never shrinks the set of pixels taking the propagated branch
            let mut prev = 0;
            for g in [1.0, 0.8, 0.6, 0.4, 0.2, 0.0] {
                let n = (0..64).filter(|&i| wt.at(i) >= g).count();
                prop_assert!(n >= prev);
                prev = n;
                let ow = fuzzy_image_weighted(&et, &eh, &wt, &lt, &lh, g).unwrap();
                for i in 0..64 {
                    let expect = if wt.at(i) >= g { et[0].at(i) } else { o.plane(1)[i] };
                    prop_assert_eq!(ow.plane(1)[i], expect);
                }
            }
        }
    }
}
