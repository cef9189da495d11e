//! Frames, label maps, seed sets and the pixel-level primitives shared by the
//! rest of the crate: color conversion, disk morphology, seed extraction from a
//! label map and pixel-graph arc weights.

mod io;
mod morph;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;

pub use io::{
    encode_gray16_png, encode_gray8_png, encode_label_png, encode_rgb8_png, frame_file_name,
    load_frame, load_frame_sequence, load_label, load_label_sequence, load_mask, mask_file_name,
    save_label, save_png_bytes,
};
pub use morph::{morph_disk, seed_pixels_from_label, MorphMode};

/// Object label; `0` is background, objects are `1..=K`.
pub type Label = u8;

pub const BACKGROUND: Label = 0;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("image must be at least 1x1, got {0}x{1}")]
    EmptyImage(usize, usize),
    #[error("channel value {0} outside [0, 255]")]
    ValueOutOfRange(f64),
    #[error("pixel ({x}, {y}) outside the {width}x{height} domain")]
    OutOfDomain {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("pixel ({x}, {y}) seeded twice")]
    DuplicateSeed { x: usize, y: usize },
    #[error("object {label} erodes to an empty seed region")]
    EmptyObjectSeeds { label: Label },
    #[error("no files named {pattern} found in {dir}")]
    EmptySequence { dir: String, pattern: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {source}")]
    Codec {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// BT.601 full-range RGB to YCbCr, each output clamped to `[0, 255]`.
pub fn to_ycbcr<T: Scalar>(rgb: [T; 3]) -> [T; 3] {
    let [r, g, b] = rgb;
    let c = T::lit;
    let y = c(0.299) * r + c(0.587) * g + c(0.114) * b;
    let cb = c(128.0) - c(0.168_736) * r - c(0.331_264) * g + c(0.5) * b;
    let cr = c(128.0) + c(0.5) * r - c(0.418_688) * g - c(0.081_312) * b;
    [clamp255(y), clamp255(cb), clamp255(cr)]
}

/// Inverse of [`to_ycbcr`], used for rendering frames back to RGB.
pub fn to_rgb<T: Scalar>(ycc: [T; 3]) -> [T; 3] {
    let [y, cb, cr] = ycc;
    let c = T::lit;
    let cb = cb - c(128.0);
    let cr = cr - c(128.0);
    let r = y + c(1.402) * cr;
    let g = y - c(0.344_136) * cb - c(0.714_136) * cr;
    let b = y + c(1.772) * cb;
    [clamp255(r), clamp255(g), clamp255(b)]
}

fn clamp255<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::lit(255.0))
}

/// A color frame stored in YCbCr, row-major, each channel in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFrame<T> {
    width: usize,
    height: usize,
    data: Vec<[T; 3]>,
}

impl<T: Scalar> ColorFrame<T> {
    /// Wraps YCbCr pixel data, checking dimensions and channel ranges.
    pub fn new(width: usize, height: usize, data: Vec<[T; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage(width, height));
        }
        if data.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        for px in &data {
            for &v in px {
                if !(v >= T::zero() && v <= T::lit(255.0)) {
                    return Err(ImageError::ValueOutOfRange(v.as_f64()));
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Converts RGB pixel data to a YCbCr frame.
    pub fn from_rgb(width: usize, height: usize, rgb: &[[T; 3]]) -> Result<Self, ImageError> {
        for px in rgb {
            for &v in px {
                if !(v >= T::zero() && v <= T::lit(255.0)) {
                    return Err(ImageError::ValueOutOfRange(v.as_f64()));
                }
            }
        }
        Self::new(width, height, rgb.iter().map(|&p| to_ycbcr(p)).collect())
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let data = img
            .pixels()
            .map(|p| to_ycbcr([T::lit(p[0] as f64), T::lit(p[1] as f64), T::lit(p[2] as f64)]))
            .collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut raw = Vec::with_capacity(self.data.len() * 3);
        for &px in &self.data {
            for v in to_rgb(px) {
                raw.push(v.as_f64().round() as u8);
            }
        }
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn uniform(width: usize, height: usize, ycc: [T; 3]) -> Result<Self, ImageError> {
        Self::new(width, height, vec![ycc; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> [T; 3] {
        self.data[index]
    }

    pub fn pixels(&self) -> &[[T; 3]] {
        &self.data
    }

    /// Luma plane, row-major.
    pub fn luma(&self) -> Vec<T> {
        self.data.iter().map(|p| p[0]).collect()
    }
}

/// Per-pixel object labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage(width, height));
        }
        if labels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                expected: (width, height),
                actual: (labels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Self {
        assert!(width > 0 && height > 0, "label map must be non-empty");
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    /// Label `1` where the mask is set, background elsewhere.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            labels: mask.bits.iter().map(|&b| Label::from(b)).collect(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> Label {
        self.labels[index]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: Label) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [Label] {
        &mut self.labels
    }

    /// Largest label present (K); `0` for an all-background map.
    pub fn object_count(&self) -> Label {
        self.labels.iter().copied().max().unwrap_or(BACKGROUND)
    }

    /// Object labels that occur at least once, ascending.
    pub fn present_objects(&self) -> Vec<Label> {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (1..=255u8).filter(|&l| seen[l as usize]).collect()
    }

    pub fn has_object(&self) -> bool {
        self.labels.iter().any(|&l| l != BACKGROUND)
    }

    pub fn region(&self, label: Label) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Union of all object regions.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l != BACKGROUND).collect(),
        }
    }

    /// Every nonzero label mapped to `1`.
    pub fn binarized(&self) -> Self {
        LabelMap::from_mask(&self.foreground())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if bits.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                expected: (width, height),
                actual: (bits.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Labeled seed pixels, keyed by position so no pixel is seeded twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedPixels {
    width: usize,
    height: usize,
    entries: BTreeMap<usize, Label>,
}

impl SeedPixels {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            entries: BTreeMap::new(),
        }
    }

    /// Builds a seed set from `(x, y, label)` triples, rejecting duplicates and
    /// out-of-domain coordinates.
    pub fn from_entries(
        width: usize,
        height: usize,
        entries: impl IntoIterator<Item = (usize, usize, Label)>,
    ) -> Result<Self, ImageError> {
        let mut seeds = Self::new(width, height);
        for (x, y, label) in entries {
            seeds.insert(x, y, label)?;
        }
        Ok(seeds)
    }

    pub fn insert(&mut self, x: usize, y: usize, label: Label) -> Result<(), ImageError> {
        self.check(x as i64, y as i64)?;
        let idx = y * self.width + x;
        if self.entries.contains_key(&idx) {
            return Err(ImageError::DuplicateSeed { x, y });
        }
        self.entries.insert(idx, label);
        Ok(())
    }

    /// Inserts or replaces the seed at `(x, y)`.
    pub fn set(&mut self, x: usize, y: usize, label: Label) -> Result<(), ImageError> {
        self.check(x as i64, y as i64)?;
        self.entries.insert(y * self.width + x, label);
        Ok(())
    }

    pub(crate) fn set_index(&mut self, index: usize, label: Label) {
        debug_assert!(index < self.width * self.height);
        self.entries.insert(index, label);
    }

    /// Overlays `other` on top of `self`; `other` wins where both are seeded.
    pub fn merge_override(&mut self, other: &SeedPixels) -> Result<(), ImageError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(ImageError::DimensionMismatch {
                expected: (self.width, self.height),
                actual: (other.width, other.height),
            });
        }
        self.entries
            .extend(other.entries.iter().map(|(&k, &v)| (k, v)));
        Ok(())
    }

    fn check(&self, x: i64, y: i64) -> Result<(), ImageError> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return Err(ImageError::OutOfDomain {
                x,
                y,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Label> {
        self.entries.get(&(y * self.width + x)).copied()
    }

    /// `(linear index, label)` in raster order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.entries.iter().map(|(&i, &l)| (i, l))
    }

    /// `(x, y, label)` in raster order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Label)> + '_ {
        let w = self.width;
        self.entries.iter().map(move |(&i, &l)| (i % w, i / w, l))
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.entries.values().filter(|&&l| l == label).count()
    }

    pub fn has_object_seed(&self) -> bool {
        self.entries.values().any(|&l| l != BACKGROUND)
    }
}

/// The 8 neighbor offsets.
pub const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Forward half of the 8-neighborhood; each undirected pixel pair appears once.
pub const FORWARD_NEIGHBORS_8: [(i64, i64); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

/// Arc weight between two 8-adjacent pixels: the Euclidean norm of their
/// YCbCr difference.
pub fn pixel_arc_weight<T: Scalar>(frame: &ColorFrame<T>, p: (usize, usize), q: (usize, usize)) -> T {
    debug_assert!(p.0.abs_diff(q.0) <= 1 && p.1.abs_diff(q.1) <= 1);
    color_distance(frame.get(p.0, p.1), frame.get(q.0, q.1))
}

#[inline]
pub fn color_distance<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

/// All undirected 8-adjacency arcs `(p, q, weight)` of a frame, with `p < q`
/// as linear indices.
pub fn pixel_arcs<T: Scalar>(frame: &ColorFrame<T>) -> Vec<(usize, usize, T)> {
    let (w, h) = frame.dims();
    let mut arcs = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            for (dx, dy) in FORWARD_NEIGHBORS_8 {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                arcs.push((p, q, color_distance(frame.at(p), frame.at(q))));
            }
        }
    }
    arcs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gray_is_a_fixed_point() {
        let out = to_ycbcr([128.0f64, 128.0, 128.0]);
        for v in out {
            assert_abs_diff_eq!(v, 128.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn black_has_neutral_chroma() {
        let out = to_ycbcr([0.0f64, 0.0, 0.0]);
        assert_eq!(out, [0.0, 128.0, 128.0]);
    }

    #[test]
    fn pure_red() {
        // Hand evaluation of the BT.601 full-range rows:
        // Y  = 0.299 * 255                = 76.245
        // Cb = 128 - 0.168736 * 255       = 84.97232
        // Cr = 128 + 0.5 * 255 = 255.5    -> clamped to 255
        let out = to_ycbcr([255.0f64, 0.0, 0.0]);
        assert_abs_diff_eq!(out[0], 76.245, epsilon = 1e-9);
        assert_abs_diff_eq!(out[1], 84.97232, epsilon = 1e-9);
        assert_eq!(out[2], 255.0);
    }

    #[test]
    fn rgb_round_trip_is_close() {
        for rgb in [[10.0f64, 200.0, 30.0], [40.0, 60.0, 200.0], [90.0, 90.0, 12.0]] {
            let back = to_rgb(to_ycbcr(rgb));
            for c in 0..3 {
                assert_abs_diff_eq!(back[c], rgb[c], epsilon = 0.05);
            }
        }
    }

    #[test]
    fn f32_frames_work() {
        let f = ColorFrame::<f32>::from_rgb(1, 1, &[[255.0, 0.0, 0.0]]).unwrap();
        assert!((f.get(0, 0)[0] - 76.245).abs() < 1e-3);
    }

    #[test]
    fn frame_rejects_out_of_range() {
        assert!(matches!(
            ColorFrame::<f64>::new(1, 1, vec![[300.0, 0.0, 0.0]]),
            Err(ImageError::ValueOutOfRange(_))
        ));
        assert!(matches!(
            ColorFrame::<f64>::new(0, 1, vec![]),
            Err(ImageError::EmptyImage(0, 1))
        ));
    }

    #[test]
    fn arc_weight_examples() {
        let f = ColorFrame::new(2, 1, vec![[10.0f64, 0.0, 0.0], [13.0, 4.0, 0.0]]).unwrap();
        assert_eq!(pixel_arc_weight(&f, (0, 0), (1, 0)), 5.0);
        assert_eq!(pixel_arc_weight(&f, (1, 0), (0, 0)), 5.0);
        let g = ColorFrame::uniform(2, 2, [7.0f64, 8.0, 9.0]).unwrap();
        assert_eq!(pixel_arc_weight(&g, (0, 0), (1, 1)), 0.0);
    }

    #[test]
    fn arc_list_matches_per_pair_norm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<[f64; 3]> = (0..64)
            .map(|_| [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)])
            .collect();
        let f = ColorFrame::new(8, 8, data.clone()).unwrap();
        let arcs = pixel_arcs(&f);
        // every unordered 8-adjacent pair exactly once
        let mut expected = 0;
        for p in 0..64usize {
            for q in (p + 1)..64 {
                let (px, py, qx, qy) = (p % 8, p / 8, q % 8, q / 8);
                if px.abs_diff(qx) <= 1 && py.abs_diff(qy) <= 1 {
                    expected += 1;
                    let arc = arcs.iter().find(|a| a.0 == p && a.1 == q).expect("pair present");
                    let d: f64 = (0..3).map(|c| (data[p][c] - data[q][c]).powi(2)).sum::<f64>().sqrt();
                    assert_abs_diff_eq!(arc.2, d, epsilon = 1e-12);
                }
            }
        }
        assert_eq!(arcs.len(), expected);
    }

    #[test]
    fn seed_pixels_reject_duplicates_and_outside() {
        let mut s = SeedPixels::new(3, 3);
        s.insert(1, 1, 1).unwrap();
        assert!(matches!(s.insert(1, 1, 0), Err(ImageError::DuplicateSeed { .. })));
        assert!(matches!(s.insert(3, 0, 0), Err(ImageError::OutOfDomain { .. })));
        let mut over = SeedPixels::new(3, 3);
        over.insert(1, 1, 0).unwrap();
        s.merge_override(&over).unwrap();
        assert_eq!(s.get(1, 1), Some(0));
    }

    #[test]
    fn label_map_objects() {
        let l = LabelMap::new(3, 1, vec![0, 2, 2]).unwrap();
        assert_eq!(l.object_count(), 2);
        assert_eq!(l.present_objects(), vec![2]);
        assert_eq!(l.binarized().labels(), &[0, 1, 1]);
    }
}
