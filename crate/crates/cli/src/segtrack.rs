//! SegTrackv2 import: `JPEGImages/<seq>/*` and `GroundTruth/<seq>/*`, where
//! multi-object sequences keep one subdirectory per object (`1/`, `2/`, ...).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use fomtrace_core::imgcore::{frame_file_name, mask_file_name, save_label};
use fomtrace_core::LabelMap;

use crate::bad_input;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| bad_input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Object directories in id order, or the sequence directory itself when
/// it holds a single object.
fn object_dirs(gt: &Path) -> Result<Vec<PathBuf>> {
    let mut numbered: Vec<(u32, PathBuf)> = std::fs::read_dir(gt)
        .map_err(|e| bad_input(format!("{}: {e}", gt.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| Some((p.file_name()?.to_str()?.parse().ok()?, p)))
        .collect();
    numbered.sort();
    Ok(if numbered.is_empty() {
        vec![gt.to_path_buf()]
    } else {
        numbered.into_iter().map(|(_, p)| p).collect()
    })
}

pub fn import(root: &Path, sequence: &str, out: &Path) -> Result<()> {
    let frames = image_files(&root.join("JPEGImages").join(sequence))?;
    if frames.is_empty() {
        bail!(bad_input(format!("no frames for sequence {sequence} under {}", root.display())));
    }
    let objects = object_dirs(&root.join("GroundTruth").join(sequence))?;
    if objects.len() > usize::from(u8::MAX) {
        bail!(bad_input(format!("{} objects exceed the label range", objects.len())));
    }
    let masks = objects.iter().map(|d| image_files(d)).collect::<Result<Vec<_>>>()?;
    for (dir, files) in objects.iter().zip(&masks) {
        if files.len() != frames.len() {
            bail!(bad_input(format!(
                "{} has {} masks for {} frames",
                dir.display(),
                files.len(),
                frames.len()
            )));
        }
    }
    let (frames_out, gt_out) = (out.join("frames"), out.join("gt"));
    for d in [&frames_out, &gt_out] {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for (t, frame) in frames.iter().enumerate() {
        let img = image::open(frame).map_err(|e| bad_input(format!("{}: {e}", frame.display())))?.to_rgb8();
        let (w, h) = img.dimensions();
        img.save(frames_out.join(frame_file_name(t)))
            .with_context(|| format!("writing frame {t}"))?;
        let mut label = LabelMap::filled(w as usize, h as usize, 0);
        for (k, files) in masks.iter().enumerate() {
            let path = &files[t];
            let gray = image::open(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?.to_luma8();
            if gray.dimensions() != (w, h) {
                bail!(bad_input(format!("{} is not {w}x{h}", path.display())));
            }
            for (x, y, p) in gray.enumerate_pixels() {
                if p.0[0] > 127 {
                    label.set(x as usize, y as usize, k as u8 + 1);
                }
            }
        }
        save_label(&label, &gt_out.join(mask_file_name(t))).with_context(|| format!("writing mask {t}"))?;
    }
    println!("imported {} frames and {} object(s) into {}", frames.len(), objects.len(), out.display());
    Ok(())
}
