use super::{BinaryMask, ImageError, LabelMap, SeedPixels, BACKGROUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphMode {
    Erode,
    Dilate,
}

/// Offsets `(dx, dy)` with `dx² + dy² ≤ radius²`.
fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

/// Binary erosion or dilation by a discrete disk. Pixels outside the image
/// count as background, so erosion eats in from the frame border.
pub fn morph_disk(mask: &BinaryMask, radius: usize, mode: MorphMode) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as i64, mask.height as i64);
    let offsets = disk_offsets(radius);
    let mut out = BinaryMask::empty(mask.width, mask.height);
    match mode {
        MorphMode::Dilate => {
            for y in 0..h {
                for x in 0..w {
                    if !mask.bits[(y * w + x) as usize] {
                        continue;
                    }
                    for &(dx, dy) in &offsets {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h {
                            out.bits[(ny * w + nx) as usize] = true;
                        }
                    }
                }
            }
        }
        MorphMode::Erode => {
            for y in 0..h {
                for x in 0..w {
                    if !mask.bits[(y * w + x) as usize] {
                        continue;
                    }
                    out.bits[(y * w + x) as usize] = offsets.iter().all(|&(dx, dy)| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0 && ny >= 0 && nx < w && ny < h && mask.bits[(ny * w + nx) as usize]
                    });
                }
            }
        }
    }
    out
}

/// Seeds derived from a label map: the erosion of every object region by
/// `rho_e` keeps the object's label, and everything outside the dilation of
/// the union of objects by `rho_d` becomes background. The ring in between is
/// left unseeded.
pub fn seed_pixels_from_label(
    label: &LabelMap,
    rho_e: usize,
    rho_d: usize,
) -> Result<SeedPixels, ImageError> {
    let (w, h) = label.dims();
    let mut seeds = SeedPixels::new(w, h);
    for k in label.present_objects() {
        let core = morph_disk(&label.region(k), rho_e, MorphMode::Erode);
        if core.count() == 0 {
            return Err(ImageError::EmptyObjectSeeds { label: k });
        }
        for (i, &b) in core.bits.iter().enumerate() {
            if b {
                seeds.set_index(i, k);
            }
        }
    }
    let grown = morph_disk(&label.foreground(), rho_d, MorphMode::Dilate);
    for (i, &b) in grown.bits.iter().enumerate() {
        if !b {
            seeds.set_index(i, BACKGROUND);
        }
    }
    Ok(seeds)
}
