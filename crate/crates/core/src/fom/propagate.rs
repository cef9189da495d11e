use crate::flow::SuperpixelFlow;
use crate::imgcore::{BinaryMask, ColorFrame, LabelMap, BACKGROUND};
use crate::scalar::Scalar;
use crate::superpix::SuperpixelDecomposition;

use super::{FomError, WeightImage};

/// Destination of every pixel when moved by its superpixel's rounded mean
/// displacement; `None` when it leaves the frame.
fn destinations<'a, T: Scalar>(
    decomp: &'a SuperpixelDecomposition<T>,
    spflow: &'a SuperpixelFlow<T>,
) -> impl Iterator<Item = (usize, Option<usize>)> + 'a {
    let (w, h) = decomp.dims();
    (0..w * h).map(move |i| {
        let (du, dv) = spflow.rounded(decomp.index_of(i));
        let x = (i % w) as i64 + du;
        let y = (i / w) as i64 + dv;
        let dest = (x >= 0 && y >= 0 && x < w as i64 && y < h as i64)
            .then(|| y as usize * w + x as usize);
        (i, dest)
    })
}

fn check_dims<T: Scalar>(
    label: &LabelMap,
    decomp: &SuperpixelDecomposition<T>,
    spflow: &SuperpixelFlow<T>,
) -> Result<(), FomError> {
    if label.dims() != decomp.dims() {
        return Err(FomError::DimensionMismatch(label.dims(), decomp.dims()));
    }
    if spflow.len() != decomp.count() {
        return Err(FomError::DimensionMismatch((spflow.len(), 1), (decomp.count(), 1)));
    }
    Ok(())
}

/// Moves the previous label into the current frame by per-superpixel mean
/// flow. Where several pixels land on the same spot the higher label wins;
/// spots nobody lands on are background.
pub fn propagate_label<T: Scalar>(
    label_prev: &LabelMap,
    decomp_prev: &SuperpixelDecomposition<T>,
    spflow: &SuperpixelFlow<T>,
) -> Result<LabelMap, FomError> {
    check_dims(label_prev, decomp_prev, spflow)?;
    let mut out = LabelMap::filled(label_prev.width(), label_prev.height(), BACKGROUND);
    let dst = out.labels_mut();
    for (i, dest) in destinations(decomp_prev, spflow) {
        if let Some(d) = dest {
            dst[d] = dst[d].max(label_prev.at(i));
        }
    }
    Ok(out)
}

/// Moves a weight image along with the label. At a collision the value
/// travels with the winning label (first source in raster order among equal
/// labels); uncovered pixels get the neutral weight 0.5.
pub fn propagate_weights<T: Scalar>(
    weights_prev: &WeightImage<T>,
    label_prev: &LabelMap,
    decomp_prev: &SuperpixelDecomposition<T>,
    spflow: &SuperpixelFlow<T>,
) -> Result<WeightImage<T>, FomError> {
    check_dims(label_prev, decomp_prev, spflow)?;
    if weights_prev.dims() != label_prev.dims() {
        return Err(FomError::DimensionMismatch(weights_prev.dims(), label_prev.dims()));
    }
    let (w, h) = label_prev.dims();
    let mut winner: Vec<Option<u8>> = vec![None; w * h];
    let mut values = vec![T::lit(0.5); w * h];
    for (i, dest) in destinations(decomp_prev, spflow) {
        if let Some(d) = dest {
            let l = label_prev.at(i);
            if winner[d].is_none_or(|cur| l > cur) {
                winner[d] = Some(l);
                values[d] = weights_prev.at(i);
            }
        }
    }
    Ok(WeightImage::new(w, h, values))
}

/// Fills a masked region of a frame from its surroundings.
pub trait Inpainter<T: Scalar> {
    fn inpaint(&self, frame: &ColorFrame<T>, mask: &BinaryMask) -> ColorFrame<T>;
}

/// Harmonic fill: masked pixels are repeatedly replaced by the mean of their
/// 4-neighbors until the largest update drops below `tolerance`.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionInpainter {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for DiffusionInpainter {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-3,
        }
    }
}

const NEIGHBORS_4: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

impl<T: Scalar> Inpainter<T> for DiffusionInpainter {
    fn inpaint(&self, frame: &ColorFrame<T>, mask: &BinaryMask) -> ColorFrame<T> {
        let (w, h) = frame.dims();
        let masked = mask.bits();
        if !masked.iter().any(|&b| !b) {
            return frame.clone();
        }
        let mut data: Vec<[T; 3]> = frame.pixels().to_vec();
        let neighbors = |i: usize| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            NEIGHBORS_4.iter().filter_map(move |&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
                    .then(|| ny as usize * w + nx as usize)
            })
        };

        // onion-peel initialization from the known border inward
        let mut known: Vec<bool> = masked.iter().map(|&b| !b).collect();
        let mut front: Vec<usize> = (0..w * h)
            .filter(|&i| masked[i] && neighbors(i).any(|j| known[j]))
            .collect();
        while !front.is_empty() {
            for &i in &front {
                let mut sum = [T::zero(); 3];
                let mut n = T::zero();
                for j in neighbors(i).filter(|&j| known[j]) {
                    for c in 0..3 {
                        sum[c] = sum[c] + data[j][c];
                    }
                    n = n + T::one();
                }
                data[i] = [sum[0] / n, sum[1] / n, sum[2] / n];
            }
            for &i in &front {
                known[i] = true;
            }
            let mut next: Vec<usize> = front
                .iter()
                .flat_map(|&i| neighbors(i))
                .filter(|&j| !known[j])
                .collect();
            next.sort_unstable();
            next.dedup();
            front = next;
        }

        let targets: Vec<usize> = (0..w * h).filter(|&i| masked[i]).collect();
        let tol = T::lit(self.tolerance);
        for _ in 0..self.max_iterations {
            let mut change = T::zero();
            for &i in &targets {
                let mut sum = [T::zero(); 3];
                let mut n = T::zero();
                for j in neighbors(i) {
                    for c in 0..3 {
                        sum[c] = sum[c] + data[j][c];
                    }
                    n = n + T::one();
                }
                let new = [sum[0] / n, sum[1] / n, sum[2] / n];
                for c in 0..3 {
                    change = change.max((new[c] - data[i][c]).abs());
                }
                data[i] = new;
            }
            if change < tol {
                break;
            }
        }
        ColorFrame::new(w, h, data).expect("averages stay within the channel range")
    }
}

/// Returns a fixed, externally produced inpainting regardless of the mask.
#[derive(Debug, Clone)]
pub struct PrecomputedInpainter<T> {
    pub image: ColorFrame<T>,
}

impl<T: Scalar> Inpainter<T> for PrecomputedInpainter<T> {
    fn inpaint(&self, _frame: &ColorFrame<T>, _mask: &BinaryMask) -> ColorFrame<T> {
        self.image.clone()
    }
}

/// `1 - J` in the previous frame, where `J` is the L1 color difference between
/// the frame and its inpainting over the (binarized) object, divided by its
/// frame maximum.
pub fn weight_image_prev<T: Scalar>(
    frame_prev: &ColorFrame<T>,
    label_prev: &LabelMap,
    inpainter: &dyn Inpainter<T>,
) -> Result<WeightImage<T>, FomError> {
    if frame_prev.dims() != label_prev.dims() {
        return Err(FomError::DimensionMismatch(frame_prev.dims(), label_prev.dims()));
    }
    let (w, h) = frame_prev.dims();
    let filled = inpainter.inpaint(frame_prev, &label_prev.foreground());
    if filled.dims() != frame_prev.dims() {
        return Err(FomError::DimensionMismatch(filled.dims(), frame_prev.dims()));
    }
    let diff: Vec<T> = frame_prev
        .pixels()
        .iter()
        .zip(filled.pixels())
        .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).abs()).sum())
        .collect();
    let max = diff.iter().fold(T::zero(), |m, &d| m.max(d));
    let values = diff
        .iter()
        .map(|&d| if max > T::zero() { T::one() - d / max } else { T::one() })
        .collect();
    Ok(WeightImage::new(w, h, values))
}

/// Weight image for the current frame: [`weight_image_prev`] carried along by
/// the same per-superpixel displacement as the label.
pub fn weight_image<T: Scalar>(
    frame_prev: &ColorFrame<T>,
    label_prev: &LabelMap,
    decomp_prev: &SuperpixelDecomposition<T>,
    spflow: &SuperpixelFlow<T>,
    inpainter: &dyn Inpainter<T>,
) -> Result<WeightImage<T>, FomError> {
    let prev = weight_image_prev(frame_prev, label_prev, inpainter)?;
    propagate_weights(&prev, label_prev, decomp_prev, spflow)
}
