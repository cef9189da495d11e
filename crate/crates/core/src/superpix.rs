//! SLICO superpixels: SLIC clustering in (YCbCr, x, y) with a per-cluster
//! color normalizer that adapts to the largest color distance seen inside the
//! cluster on the previous pass, followed by connectivity enforcement.

use std::collections::VecDeque;

use thiserror::Error;

use crate::imgcore::{encode_gray16_png, encode_rgb8_png, ColorFrame, NEIGHBORS_8};
use crate::scalar::Scalar;

pub const DEFAULT_GRID_STEP: usize = 5;
pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuperpixelError {
    #[error("frame {width}x{height} is smaller than grid step {grid_step}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        grid_step: usize,
    },
    #[error("grid step must be at least 2, got {0}")]
    GridStepTooSmall(usize),
    #[error("at least one iteration is required")]
    NoIterations,
}

/// Partition of a frame into 8-connected superpixels with ids `1..=count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelDecomposition<T> {
    width: usize,
    height: usize,
    assignment: Vec<u32>,
    mean_color: Vec<[T; 3]>,
    centroid: Vec<[T; 2]>,
    size: Vec<usize>,
}

impl<T: Scalar> SuperpixelDecomposition<T> {
    /// Builds a decomposition from an id map, recomputing per-superpixel
    /// statistics from `frame`. Ids must be exactly `1..=n`.
    pub fn from_assignment(frame: &ColorFrame<T>, assignment: Vec<u32>) -> Self {
        let (w, h) = frame.dims();
        assert_eq!(assignment.len(), w * h, "assignment must cover the frame");
        let n = assignment.iter().copied().max().unwrap_or(0) as usize;
        let mut sum_c = vec![[T::zero(); 3]; n];
        let mut sum_xy = vec![[T::zero(); 2]; n];
        let mut size = vec![0usize; n];
        for (i, &id) in assignment.iter().enumerate() {
            assert!(id >= 1, "superpixel ids start at 1");
            let k = id as usize - 1;
            let c = frame.at(i);
            for ch in 0..3 {
                sum_c[k][ch] = sum_c[k][ch] + c[ch];
            }
            sum_xy[k][0] = sum_xy[k][0] + T::from_usize_lossy(i % w);
            sum_xy[k][1] = sum_xy[k][1] + T::from_usize_lossy(i / w);
            size[k] += 1;
        }
        let mean_color = sum_c
            .iter()
            .zip(&size)
            .map(|(s, &m)| {
                let m = T::from_usize_lossy(m.max(1));
                [s[0] / m, s[1] / m, s[2] / m]
            })
            .collect();
        let centroid = sum_xy
            .iter()
            .zip(&size)
            .map(|(s, &m)| {
                let m = T::from_usize_lossy(m.max(1));
                [s[0] / m, s[1] / m]
            })
            .collect();
        Self {
            width: w,
            height: h,
            assignment,
            mean_color,
            centroid,
            size,
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

    pub fn count(&self) -> usize {
        self.size.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Superpixel id (1-based) of a pixel.
    #[inline]
    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        self.assignment[y * self.width + x]
    }

    /// Zero-based superpixel index of a linear pixel index.
    #[inline]
    pub fn index_of(&self, pixel: usize) -> usize {
        self.assignment[pixel] as usize - 1
    }

    /// Mean YCbCr color of the superpixel with zero-based index `k`.
    pub fn mean_color(&self, k: usize) -> [T; 3] {
        self.mean_color[k]
    }

    pub fn centroid(&self, k: usize) -> [T; 2] {
        self.centroid[k]
    }

    pub fn size(&self, k: usize) -> usize {
        self.size[k]
    }

    /// Member pixels (linear indices, raster order) of every superpixel.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.size.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &id) in self.assignment.iter().enumerate() {
            out[id as usize - 1].push(i);
        }
        out
    }

    /// Assignment map as a 16-bit grayscale PNG (ids saturate at 65535).
    pub fn assignment_png(&self) -> Vec<u8> {
        let data: Vec<u16> = self
            .assignment
            .iter()
            .map(|&id| id.min(u16::MAX as u32) as u16)
            .collect();
        encode_gray16_png(self.width, self.height, &data)
    }

    /// The frame with superpixel boundaries painted yellow.
    pub fn boundary_overlay_png(&self, frame: &ColorFrame<T>) -> Vec<u8> {
        let mut img = frame.to_rgb8();
        let (w, h) = (self.width as i64, self.height as i64);
        for y in 0..h {
            for x in 0..w {
                let id = self.assignment[(y * w + x) as usize];
                let edge = [(1, 0), (0, 1)].iter().any(|&(dx, dy)| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx < w && ny < h && self.assignment[(ny * w + nx) as usize] != id
                });
                if edge {
                    img.put_pixel(x as u32, y as u32, image::Rgb([255, 255, 0]));
                }
            }
        }
        encode_rgb8_png(&img)
    }
}

struct Center<T> {
    color: [T; 3],
    x: T,
    y: T,
}

fn initial_centers<T: Scalar>(frame: &ColorFrame<T>, step: usize) -> Vec<Center<T>> {
    let (w, h) = frame.dims();
    let nx = (w / step).max(1);
    let ny = (h / step).max(1);
    let gradient = |x: usize, y: usize| -> T {
        let at = |x: i64, y: i64| {
            frame.get(
                x.clamp(0, w as i64 - 1) as usize,
                y.clamp(0, h as i64 - 1) as usize,
            )
        };
        let (x, y) = (x as i64, y as i64);
        let sq = |a: [T; 3], b: [T; 3]| -> T { (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum() };
        sq(at(x + 1, y), at(x - 1, y)) + sq(at(x, y + 1), at(x, y - 1))
    };
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = ((2 * i + 1) * w) / (2 * nx);
            let cy = ((2 * j + 1) * h) / (2 * ny);
            // move to the lowest-gradient pixel of the 3x3 neighborhood, staying put on ties
            let (mut bx, mut by) = (cx, cy);
            let mut best = gradient(cx, cy);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (x, y) = (cx as i64 + dx, cy as i64 + dy);
                    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                        continue;
                    }
                    let g = gradient(x as usize, y as usize);
                    if g < best {
                        best = g;
                        bx = x as usize;
                        by = y as usize;
                    }
                }
            }
            centers.push(Center {
                color: frame.get(bx, by),
                x: T::from_usize_lossy(bx),
                y: T::from_usize_lossy(by),
            });
        }
    }
    centers
}

/// SLICO superpixels from a regular grid of centers `grid_step` apart.
pub fn slico<T: Scalar>(
    frame: &ColorFrame<T>,
    grid_step: usize,
    iterations: usize,
) -> Result<SuperpixelDecomposition<T>, SuperpixelError> {
    let (w, h) = frame.dims();
    if grid_step < 2 {
        return Err(SuperpixelError::GridStepTooSmall(grid_step));
    }
    if grid_step > w.min(h) {
        return Err(SuperpixelError::FrameTooSmall {
            width: w,
            height: h,
            grid_step,
        });
    }
    if iterations == 0 {
        return Err(SuperpixelError::NoIterations);
    }

    let mut centers = initial_centers(frame, grid_step);
    let k = centers.len();
    let step = T::from_usize_lossy(grid_step);
    let inv_spatial = T::one() / (step * step);
    let mut max_color = vec![T::lit(100.0); k];
    let mut labels: Vec<Option<u32>> = vec![None; w * h];
    let mut best = vec![T::infinity(); w * h];
    let mut color_dist = vec![T::zero(); w * h];

    for pass in 0..iterations {
        best.iter_mut().for_each(|d| *d = T::infinity());
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - step).floor().max(T::zero()).to_usize().unwrap_or(0);
            let y0 = (c.y - step).floor().max(T::zero()).to_usize().unwrap_or(0);
            let x1 = (c.x + step).ceil().to_usize().unwrap_or(0).min(w - 1);
            let y1 = (c.y + step).ceil().to_usize().unwrap_or(0).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let p = frame.at(i);
                    let dc: T = (0..3).map(|ch| (p[ch] - c.color[ch]) * (p[ch] - c.color[ch])).sum();
                    let dx = T::from_usize_lossy(x) - c.x;
                    let dy = T::from_usize_lossy(y) - c.y;
                    let d = dc / max_color[ci] + (dx * dx + dy * dy) * inv_spatial;
                    if d < best[i] {
                        best[i] = d;
                        labels[i] = Some(ci as u32);
                        color_dist[i] = dc;
                    }
                }
            }
        }

        if pass == 0 {
            max_color.iter_mut().for_each(|m| *m = T::one());
        }
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = *l {
                let m = &mut max_color[l as usize];
                if *m < color_dist[i] {
                    *m = color_dist[i];
                }
            }
        }

        let mut sums = vec![([T::zero(); 3], T::zero(), T::zero(), 0usize); k];
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = *l {
                let s = &mut sums[l as usize];
                let p = frame.at(i);
                for (acc, v) in s.0.iter_mut().zip(p) {
                    *acc = *acc + v;
                }
                s.1 = s.1 + T::from_usize_lossy(i % w);
                s.2 = s.2 + T::from_usize_lossy(i / w);
                s.3 += 1;
            }
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.3 > 0 {
                let m = T::from_usize_lossy(s.3);
                c.color = [s.0[0] / m, s.0[1] / m, s.0[2] / m];
                c.x = s.1 / m;
                c.y = s.2 / m;
            }
        }
    }

    let assignment = enforce_connectivity(w, h, &labels);
    Ok(SuperpixelDecomposition::from_assignment(frame, assignment))
}

/// Keeps the largest 8-connected component of every cluster and folds every
/// other component into its largest 8-adjacent kept superpixel (ties to the
/// smaller id). Kept components are numbered `1..` in raster order.
fn enforce_connectivity(w: usize, h: usize, labels: &[Option<u32>]) -> Vec<u32> {
    let n = w * h;
    let mut component = vec![usize::MAX; n];
    let mut comp_pixels: Vec<Vec<usize>> = Vec::new();
    let mut comp_cluster: Vec<Option<u32>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let cid = comp_pixels.len();
        let cluster = labels[start];
        let mut pixels = Vec::new();
        component[start] = cid;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            let (x, y) = ((p % w) as i64, (p / w) as i64);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if component[q] == usize::MAX && labels[q] == cluster {
                    component[q] = cid;
                    queue.push_back(q);
                }
            }
        }
        comp_pixels.push(pixels);
        comp_cluster.push(cluster);
    }

    // largest component per cluster wins; earlier components win size ties
    let mut keeper: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for (cid, cluster) in comp_cluster.iter().enumerate() {
        if let Some(c) = cluster {
            let e = keeper.entry(*c).or_insert(cid);
            if comp_pixels[cid].len() > comp_pixels[*e].len() {
                *e = cid;
            }
        }
    }
    let mut kept: Vec<bool> = vec![false; comp_pixels.len()];
    for &cid in keeper.values() {
        kept[cid] = true;
    }

    let mut assignment = vec![0u32; n];
    let mut sizes: Vec<usize> = vec![0];
    // components were discovered in raster order of their first pixel
    for (cid, pixels) in comp_pixels.iter().enumerate() {
        if kept[cid] {
            let id = sizes.len() as u32;
            sizes.push(pixels.len());
            for &p in pixels {
                assignment[p] = id;
            }
        }
    }

    let mut pending: Vec<usize> = (0..comp_pixels.len()).filter(|&c| !kept[c]).collect();
    while !pending.is_empty() {
        let mut deferred = Vec::new();
        for cid in pending {
            let mut best: Option<u32> = None;
            for &p in &comp_pixels[cid] {
                let (x, y) = ((p % w) as i64, (p / w) as i64);
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let id = assignment[ny as usize * w + nx as usize];
                    if id == 0 {
                        continue;
                    }
                    best = Some(match best {
                        None => id,
                        Some(b) => {
                            let (sb, si) = (sizes[b as usize], sizes[id as usize]);
                            if si > sb || (si == sb && id < b) {
                                id
                            } else {
                                b
                            }
                        }
                    });
                }
            }
            match best {
                Some(id) => {
                    for &p in &comp_pixels[cid] {
                        assignment[p] = id;
                    }
                    sizes[id as usize] += comp_pixels[cid].len();
                }
                None => deferred.push(cid),
            }
        }
        pending = deferred;
    }
    assignment
}
