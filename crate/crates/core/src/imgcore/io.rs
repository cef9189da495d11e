use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma};

use super::{ColorFrame, ImageError, LabelMap};
use crate::scalar::Scalar;

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:05}.png")
}

pub fn mask_file_name(t: usize) -> String {
    format!("mask_{t:05}.png")
}

fn codec_err(path: &Path) -> impl FnOnce(image::ImageError) -> ImageError + '_ {
    move |source| ImageError::Codec {
        path: path.display().to_string(),
        source,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads an RGB image file and converts it to YCbCr.
pub fn load_frame<T: Scalar>(path: &Path) -> Result<ColorFrame<T>, ImageError> {
    let img = image::open(path).map_err(codec_err(path))?.to_rgb8();
    Ok(ColorFrame::from_rgb8(&img))
}

/// Loads an 8-bit grayscale mask whose pixel values are label ids.
pub fn load_label(path: &Path) -> Result<LabelMap, ImageError> {
    let img = image::open(path).map_err(codec_err(path))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    LabelMap::new(w, h, img.into_raw())
}

/// Loads a mask that is either a label-id image or a binary 0/255 image;
/// in the latter case 255 becomes object 1.
pub fn load_mask(path: &Path) -> Result<LabelMap, ImageError> {
    let label = load_label(path)?;
    if label.labels().iter().all(|&l| l == 0 || l == 255) {
        let bits = label.labels().iter().map(|&l| u8::from(l == 255)).collect();
        return LabelMap::new(label.width(), label.height(), bits);
    }
    Ok(label)
}

pub fn save_label(label: &LabelMap, path: &Path) -> Result<(), ImageError> {
    save_png_bytes(&encode_label_png(label), path)
}

pub fn save_png_bytes(bytes: &[u8], path: &Path) -> Result<(), ImageError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn encode<P, C>(img: &ImageBuffer<P, C>) -> Vec<u8>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding cannot fail");
    out.into_inner()
}

pub fn encode_label_png(label: &LabelMap) -> Vec<u8> {
    encode_gray8_png(label.width(), label.height(), label.labels())
}

pub fn encode_gray8_png(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let img: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .expect("buffer length matches dimensions");
    encode(&img)
}

pub fn encode_gray16_png(width: usize, height: usize, data: &[u16]) -> Vec<u8> {
    let img: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .expect("buffer length matches dimensions");
    encode(&img)
}

pub fn encode_rgb8_png(img: &image::RgbImage) -> Vec<u8> {
    encode(img)
}

fn load_numbered<R>(
    dir: &Path,
    name: fn(usize) -> String,
    mut load: impl FnMut(&Path) -> Result<R, ImageError>,
) -> Result<Vec<R>, ImageError> {
    let mut out = Vec::new();
    loop {
        let path = dir.join(name(out.len()));
        if !path.is_file() {
            break;
        }
        out.push(load(&path)?);
    }
    if out.is_empty() {
        return Err(ImageError::EmptySequence {
            dir: dir.display().to_string(),
            pattern: name(0),
        });
    }
    Ok(out)
}

/// Loads `frame_00000.png, frame_00001.png, …` until the first gap.
pub fn load_frame_sequence<T: Scalar>(dir: &Path) -> Result<Vec<ColorFrame<T>>, ImageError> {
    load_numbered(dir, frame_file_name, load_frame)
}

/// Loads `mask_00000.png, mask_00001.png, …` until the first gap.
pub fn load_label_sequence(dir: &Path) -> Result<Vec<LabelMap>, ImageError> {
    load_numbered(dir, mask_file_name, load_label)
}
