//! Dense forward optical flow between consecutive frames.
//!
//! [`compute_flow`] is a coarse-to-fine Horn–Schunck estimator with image
//! warping between pyramid levels. Externally computed flow can be read and
//! written as Middlebury `.flo` files.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::imgcore::ColorFrame;
use crate::scalar::Scalar;
use crate::superpix::SuperpixelDecomposition;

const FLO_MAGIC: &[u8; 4] = b"PIEH";

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("not a .flo file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("truncated .flo file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("invalid .flo dimensions {0}x{1}")]
    BadDimensions(i32, i32),
    #[error("non-finite flow vector at pixel {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel displacement `(u, v)` from frame `t` toward frame `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    width: usize,
    height: usize,
    vectors: Vec<[T; 2]>,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(width: usize, height: usize, vectors: Vec<[T; 2]>) -> Result<Self, FlowError> {
        if vectors.len() != width * height {
            return Err(FlowError::DimensionMismatch((width, height), (vectors.len(), 1)));
        }
        if let Some(i) = vectors.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(FlowError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [T::zero(), T::zero()])
    }

    pub fn constant(width: usize, height: usize, uv: [T; 2]) -> Self {
        Self {
            width,
            height,
            vectors: vec![uv; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> [T; 2] {
        self.vectors[index]
    }

    /// Vector at `(x, y)` with coordinates clamped into the domain.
    pub fn get_clamped(&self, x: i64, y: i64) -> [T; 2] {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(x, y)
    }

    pub fn vectors(&self) -> &[[T; 2]] {
        &self.vectors
    }

    /// Middlebury `.flo` encoding.
    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.vectors.len() * 8);
        out.extend_from_slice(FLO_MAGIC);
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&(v[0].as_f64() as f32).to_le_bytes());
            out.extend_from_slice(&(v[1].as_f64() as f32).to_le_bytes());
        }
        out
    }

    pub fn from_flo_bytes(bytes: &[u8]) -> Result<Self, FlowError> {
        if bytes.len() < 12 {
            if bytes.len() >= 4 && &bytes[..4] != FLO_MAGIC {
                return Err(FlowError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(FlowError::TruncatedFile {
                expected: 12,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != FLO_MAGIC {
            return Err(FlowError::BadMagic(magic));
        }
        let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if w <= 0 || h <= 0 {
            return Err(FlowError::BadDimensions(w, h));
        }
        let (w, h) = (w as usize, h as usize);
        let expected = 12 + w * h * 8;
        if bytes.len() < expected {
            return Err(FlowError::TruncatedFile {
                expected,
                found: bytes.len(),
            });
        }
        let f = |o: usize| T::lit(f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64);
        let vectors = (0..w * h)
            .map(|i| [f(12 + i * 8), f(16 + i * 8)])
            .collect();
        Self::new(w, h, vectors)
    }
}

pub fn save_flo<T: Scalar>(field: &FlowField<T>, path: &Path) -> Result<(), FlowError> {
    std::fs::write(path, field.to_flo_bytes())?;
    Ok(())
}

pub fn load_flo<T: Scalar>(path: &Path) -> Result<FlowField<T>, FlowError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    FlowField::from_flo_bytes(&bytes)
}

/// Sidecar flow file name for the pair `t → t + 1`.
pub fn flow_file_name(t: usize) -> String {
    format!("flow_{t:05}.flo")
}

/// Mean displacement of each superpixel, indexed by zero-based superpixel index.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelFlow<T> {
    means: Vec<[T; 2]>,
}

impl<T: Scalar> SuperpixelFlow<T> {
    pub fn new(means: Vec<[T; 2]>) -> Self {
        Self { means }
    }

    pub fn mean(&self, k: usize) -> [T; 2] {
        self.means[k]
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Mean displacement rounded to whole pixels.
    pub fn rounded(&self, k: usize) -> (i64, i64) {
        let [u, v] = self.means[k];
        (
            u.round().to_i64().unwrap_or(0),
            v.round().to_i64().unwrap_or(0),
        )
    }
}

pub fn mean_superpixel_flow<T: Scalar>(
    decomp: &SuperpixelDecomposition<T>,
    field: &FlowField<T>,
) -> Result<SuperpixelFlow<T>, FlowError> {
    if decomp.dims() != field.dims() {
        return Err(FlowError::DimensionMismatch(decomp.dims(), field.dims()));
    }
    let n = decomp.count();
    let mut sums = vec![[T::zero(); 2]; n];
    for (i, v) in field.vectors.iter().enumerate() {
        let s = &mut sums[decomp.index_of(i)];
        s[0] = s[0] + v[0];
        s[1] = s[1] + v[1];
    }
    let means = sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let m = T::from_usize_lossy(decomp.size(k).max(1));
            [s[0] / m, s[1] / m]
        })
        .collect();
    Ok(SuperpixelFlow { means })
}

/// Parameters of the baseline estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HornSchunckParams {
    /// Maximum pyramid depth; the coarsest level keeps both sides ≥ 8 pixels.
    pub max_levels: usize,
    /// Smoothness weight.
    pub alpha: f64,
    /// Re-linearizations per level.
    pub warps: usize,
    /// Jacobi sweeps per warp.
    pub iterations: usize,
}

impl Default for HornSchunckParams {
    fn default() -> Self {
        Self {
            max_levels: 5,
            alpha: 8.0,
            warps: 3,
            iterations: 60,
        }
    }
}

#[derive(Clone)]
struct Plane<T> {
    w: usize,
    h: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            data: vec![T::zero(); w * h],
        }
    }

    #[inline]
    fn at(&self, x: i64, y: i64) -> T {
        let x = x.clamp(0, self.w as i64 - 1) as usize;
        let y = y.clamp(0, self.h as i64 - 1) as usize;
        self.data[y * self.w + x]
    }

    fn bilinear(&self, x: T, y: T) -> T {
        let max_x = T::from_usize_lossy(self.w - 1);
        let max_y = T::from_usize_lossy(self.h - 1);
        let x = x.max(T::zero()).min(max_x);
        let y = y.max(T::zero()).min(max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0.to_i64().unwrap_or(0), y0.to_i64().unwrap_or(0));
        let a = self.at(xi, yi);
        let b = self.at(xi + 1, yi);
        let c = self.at(xi, yi + 1);
        let d = self.at(xi + 1, yi + 1);
        let one = T::one();
        (a * (one - fx) + b * fx) * (one - fy) + (c * (one - fx) + d * fx) * fy
    }

    /// Separable [1 4 6 4 1] / 16 smoothing with clamped borders.
    fn smooth(&self) -> Self {
        let k = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| T::lit(v / 16.0));
        let mut tmp = Plane::new(self.w, self.h);
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                tmp.data[y as usize * self.w + x as usize] =
                    (0..5).map(|i| k[i] * self.at(x + i as i64 - 2, y)).sum();
            }
        }
        let mut out = Plane::new(self.w, self.h);
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                out.data[y as usize * self.w + x as usize] =
                    (0..5).map(|i| k[i] * tmp.at(x, y + i as i64 - 2)).sum();
            }
        }
        out
    }

    fn downsample(&self) -> Self {
        let s = self.smooth();
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut out = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = s.at(2 * x as i64, 2 * y as i64);
            }
        }
        out
    }
}

fn luma_plane<T: Scalar>(f: &ColorFrame<T>) -> Plane<T> {
    Plane {
        w: f.width(),
        h: f.height(),
        data: f.luma(),
    }
}

/// Forward flow from `frame_a` to `frame_b` with default parameters.
pub fn compute_flow<T: Scalar>(
    frame_a: &ColorFrame<T>,
    frame_b: &ColorFrame<T>,
) -> Result<FlowField<T>, FlowError> {
    compute_flow_with(frame_a, frame_b, &HornSchunckParams::default())
}

pub fn compute_flow_with<T: Scalar>(
    frame_a: &ColorFrame<T>,
    frame_b: &ColorFrame<T>,
    params: &HornSchunckParams,
) -> Result<FlowField<T>, FlowError> {
    if frame_a.dims() != frame_b.dims() {
        return Err(FlowError::DimensionMismatch(frame_a.dims(), frame_b.dims()));
    }
    let mut pyr_a = vec![luma_plane(frame_a).smooth()];
    let mut pyr_b = vec![luma_plane(frame_b).smooth()];
    while pyr_a.len() < params.max_levels.max(1) {
        let last = pyr_a.last().unwrap();
        if last.w.div_ceil(2) < 8 || last.h.div_ceil(2) < 8 {
            break;
        }
        let next_a = last.downsample();
        let next_b = pyr_b.last().unwrap().downsample();
        pyr_a.push(next_a);
        pyr_b.push(next_b);
    }

    let alpha2 = T::lit(params.alpha * params.alpha);
    let coarsest = pyr_a.last().unwrap();
    let mut u = Plane::new(coarsest.w, coarsest.h);
    let mut v = Plane::new(coarsest.w, coarsest.h);

    for level in (0..pyr_a.len()).rev() {
        let a = &pyr_a[level];
        let b = &pyr_b[level];
        if u.w != a.w || u.h != a.h {
            u = upsample_flow(&u, a.w, a.h);
            v = upsample_flow(&v, a.w, a.h);
        }
        for _ in 0..params.warps {
            refine_level(a, b, &mut u, &mut v, alpha2, params.iterations);
        }
    }

    let vectors = u.data.iter().zip(&v.data).map(|(&u, &v)| [u, v]).collect();
    FlowField::new(frame_a.width(), frame_a.height(), vectors)
}

fn upsample_flow<T: Scalar>(coarse: &Plane<T>, w: usize, h: usize) -> Plane<T> {
    let mut out = Plane::new(w, h);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for y in 0..h {
        for x in 0..w {
            let cx = (T::from_usize_lossy(x) + half) * half - half;
            let cy = (T::from_usize_lossy(y) + half) * half - half;
            out.data[y * w + x] = coarse.bilinear(cx, cy) * two;
        }
    }
    out
}

/// One warp: linearize `b` around the current flow and run Jacobi sweeps of
/// the Horn–Schunck update on the total flow.
fn refine_level<T: Scalar>(
    a: &Plane<T>,
    b: &Plane<T>,
    u: &mut Plane<T>,
    v: &mut Plane<T>,
    alpha2: T,
    iterations: usize,
) {
    let (w, h) = (a.w, a.h);
    let mut warped = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            warped.data[i] = b.bilinear(
                T::from_usize_lossy(x) + u.data[i],
                T::from_usize_lossy(y) + v.data[i],
            );
        }
    }
    let half = T::lit(0.5);
    let mut ix = vec![T::zero(); w * h];
    let mut iy = vec![T::zero(); w * h];
    let mut it = vec![T::zero(); w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let gx = |p: &Plane<T>| (p.at(x + 1, y) - p.at(x - 1, y)) * half;
            let gy = |p: &Plane<T>| (p.at(x, y + 1) - p.at(x, y - 1)) * half;
            ix[i] = (gx(a) + gx(&warped)) * half;
            iy[i] = (gy(a) + gy(&warped)) * half;
            it[i] = warped.data[i] - a.data[i];
        }
    }
    let u0 = u.data.clone();
    let v0 = v.data.clone();
    let edge = T::lit(1.0 / 6.0);
    let diag = T::lit(1.0 / 12.0);
    let mut next_u = u.data.clone();
    let mut next_v = v.data.clone();
    for _ in 0..iterations {
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let i = y as usize * w + x as usize;
                let avg = |p: &Plane<T>| {
                    edge * (p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y - 1) + p.at(x, y + 1))
                        + diag
                            * (p.at(x - 1, y - 1)
                                + p.at(x + 1, y - 1)
                                + p.at(x - 1, y + 1)
                                + p.at(x + 1, y + 1))
                };
                let ub = avg(u);
                let vb = avg(v);
                let num = ix[i] * (ub - u0[i]) + iy[i] * (vb - v0[i]) + it[i];
                let den = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];
                let common = num / den;
                next_u[i] = ub - ix[i] * common;
                next_v[i] = vb - iy[i] * common;
            }
        }
        std::mem::swap(&mut u.data, &mut next_u);
        std::mem::swap(&mut v.data, &mut next_v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Smooth periodic texture shifted by `(tx, ty)`: pixel `(x, y)` of the
    /// result shows the base texture at `(x - tx, y - ty)` with wrap-around.
    pub(crate) fn textured(w: usize, h: usize, tx: i64, ty: i64) -> ColorFrame<f64> {
        let tau = std::f64::consts::TAU;
        let data = (0..w * h)
            .map(|i| {
                let x = (i % w) as i64 - tx;
                let y = (i / w) as i64 - ty;
                let xf = x.rem_euclid(w as i64) as f64 / w as f64;
                let yf = y.rem_euclid(h as i64) as f64 / h as f64;
                let l = 128.0
                    + 40.0 * (tau * 3.0 * xf).sin()
                    + 35.0 * (tau * 4.0 * yf).cos()
                    + 25.0 * (tau * (5.0 * xf + 2.0 * yf)).sin()
                    + 15.0 * (tau * (2.0 * xf - 7.0 * yf)).cos();
                [l, 128.0, 128.0]
            })
            .collect();
        ColorFrame::new(w, h, data).unwrap()
    }

    fn interior_mean(f: &FlowField<f64>, margin: usize) -> [f64; 2] {
        let mut s = [0.0, 0.0];
        let mut n = 0.0;
        for y in margin..f.height() - margin {
            for x in margin..f.width() - margin {
                let v = f.get(x, y);
                s[0] += v[0];
                s[1] += v[1];
                n += 1.0;
            }
        }
        [s[0] / n, s[1] / n]
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = textured(64, 48, 0, 0);
        let f = compute_flow(&a, &a).unwrap();
        assert!(f.vectors().iter().all(|v| v[0].abs() < 0.1 && v[1].abs() < 0.1));
    }

    #[test]
    fn recovers_horizontal_translation() {
        let a = textured(96, 64, 0, 0);
        let b = textured(96, 64, 3, 0);
        let m = interior_mean(&compute_flow(&a, &b).unwrap(), 8);
        assert!((m[0] - 3.0).abs() < 0.5 && m[1].abs() < 0.5, "{m:?}");
    }

    #[test]
    fn recovers_upward_translation() {
        let a = textured(96, 64, 0, 0);
        let b = textured(96, 64, 0, -2);
        let m = interior_mean(&compute_flow(&a, &b).unwrap(), 8);
        assert!(m[0].abs() < 0.5 && (m[1] + 2.0).abs() < 0.5, "{m:?}");
    }

    #[test]
    fn mismatched_frames_error() {
        let a = textured(16, 16, 0, 0);
        let b = textured(16, 17, 0, 0);
        assert!(matches!(compute_flow(&a, &b), Err(FlowError::DimensionMismatch(..))));
    }

    #[test]
    fn flo_layout_for_two_by_one_field() {
        let f = FlowField::new(2, 1, vec![[1.5f64, -0.5], [0.0, 0.0]]).unwrap();
        let bytes = f.to_flo_bytes();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"PIEH");
        expected.extend_from_slice(&[2, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0]);
        expected.extend_from_slice(&[0x00, 0x00, 0xC0, 0x3F]); // 1.5f32
        expected.extend_from_slice(&[0x00, 0x00, 0x00, 0xBF]); // -0.5f32
        expected.extend_from_slice(&[0; 8]);
        assert_eq!(bytes.len(), 28);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn flo_errors() {
        let mut bytes = FlowField::<f32>::zeros(2, 2).to_flo_bytes();
        assert!(matches!(
            FlowField::<f32>::from_flo_bytes(&bytes[..20]),
            Err(FlowError::TruncatedFile { expected: 44, found: 20 })
        ));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(FlowField::<f32>::from_flo_bytes(&bytes), Err(FlowError::BadMagic(_))));
    }

    #[test]
    fn flo_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(flow_file_name(3));
        let f = FlowField::new(3, 1, vec![[0.25f64, 1.0], [-2.0, 0.5], [7.0, -7.75]]).unwrap();
        save_flo(&f, &p).unwrap();
        assert_eq!(load_flo::<f64>(&p).unwrap(), f);
        assert!(p.ends_with("flow_00003.flo"));
    }

    fn two_column_decomp() -> SuperpixelDecomposition<f64> {
        let frame = ColorFrame::uniform(2, 2, [0.0, 128.0, 128.0]).unwrap();
        SuperpixelDecomposition::from_assignment(&frame, vec![1, 2, 1, 2])
    }

    #[test]
    fn superpixel_means() {
        let d = two_column_decomp();
        let c = mean_superpixel_flow(&d, &FlowField::constant(2, 2, [2.0, 1.0])).unwrap();
        assert_eq!(c.mean(0), [2.0, 1.0]);
        assert_eq!(c.mean(1), [2.0, 1.0]);
        let f = FlowField::new(2, 2, vec![[1.0, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(mean_superpixel_flow(&d, &f).unwrap().mean(0), [2.0, 0.0]);
        assert!(mean_superpixel_flow(&d, &FlowField::zeros(3, 2)).is_err());
    }

    proptest! {
        #[test]
        fn flo_round_trip_is_bit_exact(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<[f32; 2]> = (0..w * h).map(|_| [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)]).collect();
            let f = FlowField::new(w, h, v).unwrap();
            let back = FlowField::<f32>::from_flo_bytes(&f.to_flo_bytes()).unwrap();
            for (a, b) in f.vectors().iter().zip(back.vectors()) {
                prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
                prop_assert_eq!(a[1].to_bits(), b[1].to_bits());
            }
        }

        #[test]
        fn superpixel_means_match_brute_force(ids in proptest::collection::vec(1u32..5, 24), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            // compact ids to 1..=n so every superpixel is nonempty
            let mut distinct: Vec<u32> = ids.clone();
            distinct.sort();
            distinct.dedup();
            let ids: Vec<u32> = ids.iter().map(|i| distinct.binary_search(i).unwrap() as u32 + 1).collect();
            let frame = ColorFrame::uniform(6, 4, [0.0, 128.0, 128.0]).unwrap();
            let d = SuperpixelDecomposition::from_assignment(&frame, ids.clone());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<[f64; 2]> = (0..24).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
            let field = FlowField::new(6, 4, v.clone()).unwrap();
            let means = mean_superpixel_flow(&d, &field).unwrap();
            for k in 0..d.count() {
                let members: Vec<usize> = (0..24).rev().filter(|&i| ids[i] as usize == k + 1).collect();
                let n = members.len() as f64;
                let su: f64 = members.iter().map(|&i| v[i][0]).sum::<f64>() / n;
                let sv: f64 = members.iter().map(|&i| v[i][1]).sum::<f64>() / n;
                prop_assert!((means.mean(k)[0] - su).abs() < 1e-12);
                prop_assert!((means.mean(k)[1] - sv).abs() < 1e-12);
            }
        }
    }
}
