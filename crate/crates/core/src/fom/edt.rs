use crate::imgcore::{Label, LabelMap};
use crate::scalar::Scalar;

/// Signed Euclidean distance to the boundary of one object: `+d` inside,
/// where `d` is the distance to the nearest pixel outside the object, and
/// `-d` outside, with `d` the distance to the nearest object pixel. When one
/// side is empty the whole map takes `±` the image diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> SignedDistanceMap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
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
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas). Infinite samples contribute no parabola.
fn squared_dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    // k = number of parabolas in the envelope
    let mut k = 0usize;
    for q in 0..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            if k == 0 {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                k = 1;
                break;
            }
            let p = v[k - 1];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * (q as f64 - p as f64));
            if s <= z[k - 1] {
                k -= 1;
                continue;
            }
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            k += 1;
            break;
        }
    }
    if k == 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let d = q as f64 - v[j] as f64;
        *o = d * d + f[v[j]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest `feature` pixel.
pub(crate) fn squared_edt(width: usize, height: usize, feature: &[bool]) -> Vec<f64> {
    let n = width.max(height);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut col_in = vec![0f64; height];
    let mut col_out = vec![0f64; height];
    let mut grid: Vec<f64> = feature
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    for x in 0..width {
        for y in 0..height {
            col_in[y] = grid[y * width + x];
        }
        squared_dt_1d(&col_in, &mut col_out, &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0f64; width];
    for y in 0..height {
        let row = &grid[y * width..(y + 1) * width];
        squared_dt_1d(row, &mut row_out, &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

pub fn signed_edt<T: Scalar>(label: &LabelMap, object: Label) -> SignedDistanceMap<T> {
    let (w, h) = label.dims();
    let inside: Vec<bool> = label.labels().iter().map(|&l| l == object).collect();
    let n_in = inside.iter().filter(|&&b| b).count();
    let diag = T::lit(((w * w + h * h) as f64).sqrt());
    if n_in == 0 {
        return SignedDistanceMap::new(w, h, vec![-diag; w * h]);
    }
    if n_in == w * h {
        return SignedDistanceMap::new(w, h, vec![diag; w * h]);
    }
    let outside: Vec<bool> = inside.iter().map(|&b| !b).collect();
    let to_outside = squared_edt(w, h, &outside);
    let to_inside = squared_edt(w, h, &inside);
    let values = inside
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b {
                T::lit(to_outside[i].sqrt())
            } else {
                -T::lit(to_inside[i].sqrt())
            }
        })
        .collect();
    SignedDistanceMap::new(w, h, values)
}

/// Signed maps for objects `1..=objects`.
pub fn signed_edt_per_object<T: Scalar>(label: &LabelMap, objects: Label) -> Vec<SignedDistanceMap<T>> {
    (1..=objects).map(|k| signed_edt(label, k)).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// O(n²) nearest-pixel search.
    pub(crate) fn brute_signed(label: &LabelMap, object: Label) -> Vec<f64> {
        let (w, h) = label.dims();
        let diag = ((w * w + h * h) as f64).sqrt();
        let l = label.labels();
        (0..w * h)
            .map(|i| {
                let inside = l[i] == object;
                let mut best = f64::INFINITY;
                for (j, &lj) in l.iter().enumerate() {
                    if (lj == object) != inside {
                        let dx = (i % w) as f64 - (j % w) as f64;
                        let dy = (i / w) as f64 - (j / w) as f64;
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
                if best.is_infinite() {
                    best = diag;
                }
                if inside { best } else { -best }
            })
            .collect()
    }

    #[test]
    fn single_pixel() {
        let mut l = LabelMap::filled(5, 5, 0);
        l.set(2, 2, 1);
        let d = signed_edt::<f64>(&l, 1);
        assert_eq!(d.get(2, 2), 1.0);
        assert_eq!(d.get(1, 2), -1.0);
        assert_eq!(d.get(2, 3), -1.0);
        assert_eq!(d.get(1, 1), -(2f64.sqrt()));
        assert_eq!(d.values(), brute_signed(&l, 1).as_slice());
    }

    #[test]
    fn half_plane() {
        let mut l = LabelMap::filled(8, 3, 0);
        for y in 0..3 {
            for x in 4..8 {
                l.set(x, y, 1);
            }
        }
        let d = signed_edt::<f64>(&l, 1);
        let row: Vec<f64> = (0..8).map(|x| d.get(x, 1)).collect();
        assert_eq!(row, vec![-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_sides_are_capped_at_diagonal() {
        let l = LabelMap::filled(3, 4, 0);
        assert!(signed_edt::<f64>(&l, 1).values().iter().all(|&v| v == -5.0));
        let l = LabelMap::filled(3, 4, 1);
        assert!(signed_edt::<f64>(&l, 1).values().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn random_masks_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
            let density = rng.gen_range(0.05..0.95);
            let labels = (0..w * h).map(|_| (rng.gen::<f64>() < density) as u8).collect();
            let l = LabelMap::new(w, h, labels).unwrap();
            assert_eq!(signed_edt::<f64>(&l, 1).values(), brute_signed(&l, 1).as_slice());
        }
    }
}
