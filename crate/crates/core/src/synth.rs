//! Synthetic sequences with exact ground truth.

use crate::imgcore::{ColorFrame, LabelMap};
use crate::scalar::Scalar;

/// Axis-aligned rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// A static region painted with the object's texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Patch {
    Rect(Rect),
    /// Annular sector around `center`: radii in `(inner, outer]`, angles in
    /// degrees from the +x axis (y pointing down) within `[from, to]`.
    Arc {
        center: (f64, f64),
        inner: f64,
        outer: f64,
        from: f64,
        to: f64,
    },
}

impl Patch {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Patch::Rect(r) => (r.x0..r.x1).contains(&x) && (r.y0..r.y1).contains(&y),
            Patch::Arc {
                center,
                inner,
                outer,
                from,
                to,
            } => {
                let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
                let d = (dx * dx + dy * dy).sqrt();
                let a = dy.atan2(dx).to_degrees().rem_euclid(360.0);
                d > inner && d <= outer && a >= from && a <= to
            }
        }
    }

    fn origin(&self) -> (f64, f64) {
        match *self {
            Patch::Rect(r) => (r.x0 as f64, r.y0 as f64),
            Patch::Arc { center, .. } => center,
        }
    }
}

/// A textured disk moving at constant velocity over a static textured
/// background, optionally with a static patch painted with the disk's own
/// texture.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskScene {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub radius: f64,
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub object_rgb: [f64; 3],
    pub background_rgb: [f64; 3],
    pub texture: f64,
    /// Texture amplitude of the disk and the patch.
    pub object_texture: f64,
    pub patch: Option<Patch>,
}

impl DiskScene {
    /// 160×120, 20 frames, radius 20, 3 px per frame to the right.
    pub fn tracking() -> Self {
        Self {
            width: 160,
            height: 120,
            frames: 20,
            radius: 20.0,
            start: (40.0, 60.0),
            velocity: (3.0, 0.0),
            object_rgb: [220.0, 120.0, 60.0],
            background_rgb: [40.0, 90.0, 150.0],
            texture: 18.0,
            object_texture: 18.0,
            patch: None,
        }
    }

    /// The tracking scene plus a thin arc continuing the disk's texture
    /// around its starting position, closer than the seed dilation radius.
    pub fn leak() -> Self {
        let base = Self::tracking();
        Self {
            patch: Some(Patch::Arc {
                center: base.start,
                inner: base.radius,
                outer: base.radius + 2.8,
                from: 100.0,
                to: 260.0,
            }),
            ..base
        }
    }

    pub fn center(&self, t: usize) -> (f64, f64) {
        (
            self.start.0 + self.velocity.0 * t as f64,
            self.start.1 + self.velocity.1 * t as f64,
        )
    }

    fn inside(&self, t: usize, x: usize, y: usize) -> bool {
        let (cx, cy) = self.center(t);
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= self.radius * self.radius
    }

    fn object_color(&self, u: f64, v: f64) -> [f64; 3] {
        let a = self.object_texture;
        let s = (0.55 * u).sin() * (0.45 * v).cos();
        let c = (0.3 * u + 0.5 * v).cos();
        [
            self.object_rgb[0] + a * s,
            self.object_rgb[1] + a * c,
            self.object_rgb[2] + 0.5 * a * (s - c),
        ]
    }

    fn background_color(&self, x: f64, y: f64) -> [f64; 3] {
        let a = self.texture;
        let s = (0.37 * x + 0.21 * y).sin();
        let c = (0.29 * y).cos() * (0.17 * x).sin();
        [
            self.background_rgb[0] + a * c,
            self.background_rgb[1] + a * s,
            self.background_rgb[2] + 0.5 * a * (s + c),
        ]
    }

    pub fn frame<T: Scalar>(&self, t: usize) -> ColorFrame<T> {
        let (cx, cy) = self.center(t);
        let rgb: Vec<[T; 3]> = (0..self.width * self.height)
            .map(|i| {
                let (x, y) = (i % self.width, i / self.width);
                let c = if self.inside(t, x, y) {
                    self.object_color(x as f64 - cx, y as f64 - cy)
                } else if let Some(p) = self.patch.filter(|p| p.contains(x, y)) {
                    let (ox, oy) = p.origin();
                    self.object_color(x as f64 - ox, y as f64 - oy)
                } else {
                    self.background_color(x as f64, y as f64)
                };
                c.map(|v| T::lit(v.clamp(0.0, 255.0)))
            })
            .collect();
        ColorFrame::from_rgb(self.width, self.height, &rgb).expect("valid synthetic frame")
    }

    pub fn label(&self, t: usize) -> LabelMap {
        let labels = (0..self.width * self.height)
            .map(|i| u8::from(self.inside(t, i % self.width, i / self.width)))
            .collect();
        LabelMap::new(self.width, self.height, labels).expect("valid synthetic label")
    }

    pub fn frames<T: Scalar>(&self) -> Vec<ColorFrame<T>> {
        (0..self.frames).map(|t| self.frame(t)).collect()
    }

    pub fn labels(&self) -> Vec<LabelMap> {
        (0..self.frames).map(|t| self.label(t)).collect()
    }
}
