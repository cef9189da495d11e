//! The per-frame tracking session: predict, model, refine, correct, accept.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{sequence_report, EffortEntry, EvalError, ReportMeta, SequenceReport};
use crate::flow::{compute_flow, flow_file_name, load_flo, mean_superpixel_flow, FlowError, FlowField};
use crate::fom::{
    fuzzy_image, fuzzy_image_weighted, model_object_count, model_seeds, propagate_label, refine,
    signed_edt_per_object, threshold_model, weight_image, DiffusionInpainter, FomError,
    FuzzyObjectImage, Inpainter, WeightImage, DEFAULT_ALPHA_B, DEFAULT_ALPHA_F, DEFAULT_GAMMA,
};
use crate::imgcore::{
    load_label, mask_file_name, save_label, save_png_bytes, seed_pixels_from_label, ColorFrame,
    ImageError, Label, LabelMap, SeedPixels, BACKGROUND,
};
use crate::scalar::Scalar;
use crate::superpix::{slico, SuperpixelDecomposition, SuperpixelError, DEFAULT_GRID_STEP, DEFAULT_ITERATIONS};
use crate::videoseg::{
    build_graph, predict_labels, superpixel_seeds_from_label, GraphOptions, VideoSegError, Window,
    WarpMode, DEFAULT_RHO_D, DEFAULT_RHO_E,
};

pub const DEFAULT_WINDOW: usize = 30;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("the initial mask has no object pixel")]
    EmptyInitialMask,
    #[error("a session needs at least two frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {t} is {actual:?}, expected {expected:?}")]
    DimensionMismatch {
        t: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("frame {0} has not been stepped")]
    NothingToAccept(usize),
    #[error("frame {0} has no refined label to correct")]
    NotStepped(usize),
    #[error("every frame has been accepted")]
    Finished,
    #[error("the session has already started")]
    AlreadyStarted,
    #[error(transparent)]
    Superpixel(#[from] SuperpixelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    VideoSeg(#[from] VideoSegError),
    #[error(transparent)]
    Fom(#[from] FomError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Superpixel seed competition only.
    Spift,
    /// Model refinement with equal weights.
    #[default]
    Fomtrace,
    /// Model refinement with inpainting-derived weights.
    Fomtracew,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spift => "spift",
            Mode::Fomtrace => "fomtrace",
            Mode::Fomtracew => "fomtracew",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spift" => Ok(Mode::Spift),
            "fomtrace" => Ok(Mode::Fomtrace),
            "fomtracew" => Ok(Mode::Fomtracew),
            other => Err(format!("unknown mode {other:?} (expected spift, fomtrace or fomtracew)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: Mode,
    pub gamma: f64,
    /// Frames after the previous one in each prediction window.
    pub window: usize,
    pub grid_step: usize,
    pub slic_iterations: usize,
    pub rho_e: usize,
    pub rho_d: usize,
    pub alpha_f: f64,
    pub alpha_b: f64,
    pub squared_distance: bool,
    pub warp: WarpMode,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fomtrace,
            gamma: DEFAULT_GAMMA,
            window: DEFAULT_WINDOW,
            grid_step: DEFAULT_GRID_STEP,
            slic_iterations: DEFAULT_ITERATIONS,
            rho_e: DEFAULT_RHO_E,
            rho_d: DEFAULT_RHO_D,
            alpha_f: DEFAULT_ALPHA_F,
            alpha_b: DEFAULT_ALPHA_B,
            squared_distance: false,
            warp: WarpMode::MeanDisplacement,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.grid_step < 2 {
            return bad(format!("grid_step {} below 2", self.grid_step));
        }
        if self.slic_iterations == 0 {
            return bad("slic_iterations must be at least 1".into());
        }
        if !(self.alpha_b < 0.0 && 0.0 < self.alpha_f) {
            return bad(format!(
                "need alpha_b < 0 < alpha_f, got alpha_b={} alpha_f={}",
                self.alpha_b, self.alpha_f
            ));
        }
        Ok(())
    }

    fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            squared_distance: self.squared_distance,
            warp: self.warp,
            ..GraphOptions::default()
        }
    }
}

/// A brush stroke: disks of `radius` stamped along the polyline `points`
/// (pixel coordinates, `[x, y]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub label: Label,
    pub points: Vec<[f64; 2]>,
    pub radius: f64,
}

/// Rasterizes strokes into seeds; a later stroke overwrites an earlier one
/// where they overlap. Parts outside the frame are dropped.
pub fn rasterize_strokes(strokes: &[Stroke], width: usize, height: usize) -> SeedPixels {
    let mut seeds = SeedPixels::new(width, height);
    for s in strokes {
        let r = s.radius.max(0.0);
        let mut stamp = |cx: f64, cy: f64| {
            let (x0, x1) = ((cx - r).floor().max(0.0), (cx + r).ceil().min(width as f64 - 1.0));
            let (y0, y1) = ((cy - r).floor().max(0.0), (cy + r).ceil().min(height as f64 - 1.0));
            if x0 > x1 || y0 > y1 {
                return;
            }
            for y in y0 as usize..=y1 as usize {
                for x in x0 as usize..=x1 as usize {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx * dx + dy * dy <= r * r {
                        seeds.set(x, y, s.label).expect("inside the frame");
                    }
                }
            }
            let (rx, ry) = (cx.round(), cy.round());
            if rx >= 0.0 && ry >= 0.0 && rx < width as f64 && ry < height as f64 {
                seeds.set(rx as usize, ry as usize, s.label).expect("inside the frame");
            }
        };
        let Some(&first) = s.points.first() else {
            continue;
        };
        stamp(first[0], first[1]);
        for pair in s.points.windows(2) {
            let ([ax, ay], [bx, by]) = (pair[0], pair[1]);
            let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
            let n = (len / 0.5).ceil().max(1.0) as usize;
            for i in 1..=n {
                let f = i as f64 / n as f64;
                stamp(ax + f * (bx - ax), ay + f * (by - ay));
            }
        }
    }
    seeds
}

/// One correction of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: usize,
    pub markers: usize,
    pub seconds: f64,
    pub mode: Mode,
}

/// Where the model's per-pixel weights come from in [`Mode::Fomtracew`].
pub enum WeightSource<T: Scalar> {
    Inpainting(Box<dyn Inpainter<T> + Send + Sync>),
    Constant(T),
}

impl<T: Scalar> Default for WeightSource<T> {
    fn default() -> Self {
        WeightSource::Inpainting(Box::new(DiffusionInpainter::default()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptOutcome {
    /// The session moved on to this frame.
    Next(usize),
    Done,
}

/// Working state of the frame awaiting acceptance.
#[derive(Debug, Clone)]
struct FrameWork {
    base_seeds: SeedPixels,
    scribbles: SeedPixels,
    paused: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionState {
    t: usize,
    frame_count: usize,
    done: bool,
    flow_dir: Option<PathBuf>,
}

/// Labels and intermediates of one session over a fixed sequence of frames.
pub struct Session<T: Scalar> {
    config: SessionConfig,
    frames: Arc<Vec<ColorFrame<T>>>,
    flow_dir: Option<PathBuf>,
    weights: WeightSource<T>,
    decomps: Vec<Option<SuperpixelDecomposition<T>>>,
    flows: Vec<Option<FlowField<T>>>,
    t: usize,
    done: bool,
    accepted: Vec<Option<LabelMap>>,
    predicted: Vec<Option<LabelMap>>,
    refined: Vec<Option<LabelMap>>,
    automatic: Vec<Option<LabelMap>>,
    models: Vec<Option<FuzzyObjectImage<T>>>,
    weight_images: Vec<Option<WeightImage<T>>>,
    work: Option<FrameWork>,
    log: Vec<LogEntry>,
}

impl<T: Scalar> std::fmt::Debug for Session<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("frames", &self.frames.len())
            .field("t", &self.t)
            .field("done", &self.done)
            .finish_non_exhaustive()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> PipelineError + '_ {
    move |source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<S: serde::de::DeserializeOwned>(path: &Path) -> Result<S, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Pixel seeds of a label, falling back to no erosion for thin objects.
fn label_seeds(label: &LabelMap, rho_e: usize, rho_d: usize) -> Result<SeedPixels, ImageError> {
    match seed_pixels_from_label(label, rho_e, rho_d) {
        Err(ImageError::EmptyObjectSeeds { .. }) => seed_pixels_from_label(label, 0, rho_d),
        other => other,
    }
}

impl<T: Scalar> Session<T> {
    /// Starts a session at frame 1 with `l0` accepted for frame 0.
    pub fn init(frames: Vec<ColorFrame<T>>, l0: LabelMap, config: SessionConfig) -> Result<Self, PipelineError> {
        Self::init_shared(Arc::new(frames), l0, config)
    }

    pub fn init_shared(
        frames: Arc<Vec<ColorFrame<T>>>,
        l0: LabelMap,
        config: SessionConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let n = frames.len();
        if n < 2 {
            return Err(PipelineError::TooFewFrames(n));
        }
        let dims = frames[0].dims();
        for (t, f) in frames.iter().enumerate() {
            if f.dims() != dims {
                return Err(PipelineError::DimensionMismatch {
                    t,
                    expected: dims,
                    actual: f.dims(),
                });
            }
        }
        if l0.dims() != dims {
            return Err(PipelineError::DimensionMismatch {
                t: 0,
                expected: dims,
                actual: l0.dims(),
            });
        }
        if !l0.has_object() {
            return Err(PipelineError::EmptyInitialMask);
        }
        let mut accepted = vec![None; n];
        accepted[0] = Some(l0);
        Ok(Self {
            config,
            frames,
            flow_dir: None,
            weights: WeightSource::default(),
            decomps: (0..n).map(|_| None).collect(),
            flows: (0..n - 1).map(|_| None).collect(),
            t: 1,
            done: false,
            accepted,
            predicted: vec![None; n],
            refined: vec![None; n],
            automatic: vec![None; n],
            models: vec![None; n],
            weight_images: vec![None; n],
            work: None,
            log: Vec::new(),
        })
    }

    /// Directory holding `flow_%05d.flo` files to use instead of computing flow.
    pub fn with_flow_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.flow_dir = dir;
        self
    }

    pub fn with_weight_source(mut self, source: WeightSource<T>) -> Self {
        self.weights = source;
        self
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Takes effect from the next step.
    pub fn set_config(&mut self, config: SessionConfig) -> Result<(), PipelineError> {
        config.validate()?;
        if config.grid_step != self.config.grid_step || config.slic_iterations != self.config.slic_iterations {
            self.decomps.iter_mut().for_each(|d| *d = None);
        }
        self.config = config;
        Ok(())
    }

    pub fn frames(&self) -> &Arc<Vec<ColorFrame<T>>> {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// Frame awaiting acceptance (equal to the frame count once done).
    pub fn current(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Whether the current frame has been stepped and awaits acceptance.
    pub fn is_stepped(&self) -> bool {
        self.work.is_some()
    }

    /// Whether the model of the current frame lost the object.
    pub fn is_paused(&self) -> bool {
        self.work.as_ref().is_some_and(|w| w.paused)
    }

    pub fn accepted(&self, t: usize) -> Option<&LabelMap> {
        self.accepted.get(t)?.as_ref()
    }

    pub fn predicted(&self, t: usize) -> Option<&LabelMap> {
        self.predicted.get(t)?.as_ref()
    }

    pub fn refined(&self, t: usize) -> Option<&LabelMap> {
        self.refined.get(t)?.as_ref()
    }

    pub fn model(&self, t: usize) -> Option<&FuzzyObjectImage<T>> {
        self.models.get(t)?.as_ref()
    }

    pub fn weight_image(&self, t: usize) -> Option<&WeightImage<T>> {
        self.weight_images.get(t)?.as_ref()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    fn decomposition(&mut self, t: usize) -> Result<(), PipelineError> {
        if self.decomps[t].is_none() {
            let d = slico(&self.frames[t], self.config.grid_step, self.config.slic_iterations)?;
            self.decomps[t] = Some(d);
        }
        Ok(())
    }

    fn flow(&mut self, t: usize) -> Result<(), PipelineError> {
        if self.flows[t].is_some() {
            return Ok(());
        }
        let sidecar = self
            .flow_dir
            .as_ref()
            .map(|d| d.join(flow_file_name(t)))
            .filter(|p| p.is_file());
        let field = match sidecar {
            Some(path) => {
                let f = load_flo(&path)?;
                if f.dims() != self.dims() {
                    return Err(PipelineError::DimensionMismatch {
                        t,
                        expected: self.dims(),
                        actual: f.dims(),
                    });
                }
                f
            }
            None => compute_flow(&self.frames[t], &self.frames[t + 1])?,
        };
        self.flows[t] = Some(field);
        Ok(())
    }

    fn window_at(&self, t: usize) -> Window {
        Window::new(t - 1, (t - 1 + self.config.window).min(self.frames.len() - 1))
    }

    /// Superpixel prediction over `window` seeded from `seed_label` on its
    /// first frame; labels for frames `start + 1 ..= end`.
    fn predict_window(&mut self, window: Window, seed_label: &LabelMap) -> Result<Vec<LabelMap>, PipelineError> {
        let (w, h) = self.dims();
        if !seed_label.has_object() {
            return Ok(vec![LabelMap::filled(w, h, BACKGROUND); window.len() - 1]);
        }
        for f in window.start..=window.end {
            self.decomposition(f)?;
        }
        for f in window.start..window.end {
            self.flow(f)?;
        }
        let decomps: Vec<&SuperpixelDecomposition<T>> = (window.start..=window.end)
            .map(|f| self.decomps[f].as_ref().expect("computed above"))
            .collect();
        let flows: Vec<&FlowField<T>> = (window.start..window.end)
            .map(|f| self.flows[f].as_ref().expect("computed above"))
            .collect();
        let seeds = superpixel_seeds_from_label(seed_label, decomps[0], self.config.rho_e, self.config.rho_d)?;
        let graph = build_graph(&decomps, &flows, window, &self.config.graph_options())?;
        Ok(predict_labels(&graph, &seeds, &decomps)?.labels)
    }

    /// Predicts, models and refines the current frame. Reads only the frames
    /// of the window starting at the previous frame and the previous accepted
    /// label.
    pub fn step(&mut self) -> Result<&LabelMap, PipelineError> {
        self.step_with(&mut |_| {})
    }

    /// [`Session::step`] reporting progress fractions in `[0, 1]`.
    pub fn step_with(&mut self, progress: &mut dyn FnMut(f64)) -> Result<&LabelMap, PipelineError> {
        if self.done {
            return Err(PipelineError::Finished);
        }
        let t = self.t;
        let prev = self.accepted[t - 1].clone().expect("previous frame accepted");
        let (w, h) = self.dims();
        let window = self.window_at(t);
        progress(0.0);
        let predicted = self.predict_window(window, &prev)?.swap_remove(0);
        progress(0.6);

        let cfg = self.config.clone();
        let (refined, model, weights, work) = match cfg.mode {
            Mode::Spift => {
                let base = label_seeds(&predicted, cfg.rho_e, cfg.rho_d)?;
                let paused = !predicted.has_object();
                let work = FrameWork {
                    base_seeds: base,
                    scribbles: SeedPixels::new(w, h),
                    paused,
                };
                (predicted.clone(), None, None, work)
            }
            Mode::Fomtrace | Mode::Fomtracew => {
                self.decomposition(t - 1)?;
                self.flow(t - 1)?;
                let decomp = self.decomps[t - 1].as_ref().expect("computed above");
                let spflow = mean_superpixel_flow(decomp, self.flows[t - 1].as_ref().expect("computed above"))?;
                let l_tilde = propagate_label(&prev, decomp, &spflow)?;
                let k = model_object_count(&l_tilde, &predicted);
                let e_tilde = signed_edt_per_object::<T>(&l_tilde, k);
                let e_hat = signed_edt_per_object::<T>(&predicted, k);
                let (model, weights) = if cfg.mode == Mode::Fomtrace {
                    let wt = WeightImage::constant(w, h, T::lit(0.5));
                    (fuzzy_image(&e_tilde, &e_hat, &wt, &l_tilde, &predicted)?, wt)
                } else {
                    let wt = match &self.weights {
                        WeightSource::Inpainting(inp) => {
                            weight_image(&self.frames[t - 1], &prev, decomp, &spflow, inp.as_ref())?
                        }
                        WeightSource::Constant(c) => WeightImage::constant(w, h, *c),
                    };
                    let m = fuzzy_image_weighted(&e_tilde, &e_hat, &wt, &l_tilde, &predicted, T::lit(cfg.gamma))?;
                    (m, wt)
                };
                progress(0.8);
                let (af, ab) = (T::lit(cfg.alpha_f), T::lit(cfg.alpha_b));
                let (base, paused) = match model_seeds(&model, af, ab) {
                    Ok(s) => (s, false),
                    Err(FomError::NoForegroundSeeds) => {
                        log::warn!("frame {t}: the model lost the object; pausing with an empty label");
                        (threshold_model(&model, af, ab)?, true)
                    }
                    Err(e) => return Err(e.into()),
                };
                let refined = if paused {
                    LabelMap::filled(w, h, BACKGROUND)
                } else {
                    refine(&self.frames[t], &base, None)?.0
                };
                let work = FrameWork {
                    base_seeds: base,
                    scribbles: SeedPixels::new(w, h),
                    paused,
                };
                (refined, Some(model), Some(weights), work)
            }
        };
        self.predicted[t] = Some(predicted);
        self.automatic[t] = Some(refined.clone());
        self.refined[t] = Some(refined);
        self.models[t] = model;
        self.weight_images[t] = weights;
        self.work = Some(work);
        progress(1.0);
        Ok(self.refined[t].as_ref().expect("just stored"))
    }

    /// Applies user strokes to the current frame; each stroke counts as one
    /// marker.
    pub fn correct(&mut self, strokes: &[Stroke], elapsed_s: f64) -> Result<&LabelMap, PipelineError> {
        let (w, h) = self.dims();
        let seeds = rasterize_strokes(strokes, w, h);
        self.correct_seeds(&seeds, strokes.len(), elapsed_s)
    }

    /// Merges `scribbles` into the current frame's scribbles (new ones win)
    /// and re-runs refinement from the model seeds plus all scribbles.
    pub fn correct_seeds(
        &mut self,
        scribbles: &SeedPixels,
        markers: usize,
        elapsed_s: f64,
    ) -> Result<&LabelMap, PipelineError> {
        if self.done {
            return Err(PipelineError::Finished);
        }
        let t = self.t;
        let work = self.work.as_mut().ok_or(PipelineError::NotStepped(t))?;
        if !scribbles.is_empty() {
            work.scribbles.merge_override(scribbles)?;
            let (label, _) = refine(&self.frames[t], &work.base_seeds, Some(&work.scribbles))?;
            work.paused = work.paused && !label.has_object();
            self.refined[t] = Some(label);
        }
        if markers > 0 || elapsed_s > 0.0 {
            self.log.push(LogEntry {
                t,
                markers,
                seconds: elapsed_s,
                mode: self.config.mode,
            });
        }
        Ok(self.refined[t].as_ref().expect("stepped frame has a label"))
    }

    /// Freezes the refined label of the current frame and moves on.
    pub fn accept(&mut self) -> Result<AcceptOutcome, PipelineError> {
        if self.done {
            return Err(PipelineError::Finished);
        }
        if self.work.take().is_none() {
            return Err(PipelineError::NothingToAccept(self.t));
        }
        self.accepted[self.t] = self.refined[self.t].clone();
        self.t += 1;
        if self.t == self.frames.len() {
            self.done = true;
            Ok(AcceptOutcome::Done)
        } else {
            Ok(AcceptOutcome::Next(self.t))
        }
    }

    /// Labels every remaining frame without corrections and returns labels
    /// for frames `1..n`. Superpixel-only mode chains whole windows from the
    /// first label instead of stepping frame by frame.
    pub fn run_uninterrupted(&mut self) -> Result<Vec<LabelMap>, PipelineError> {
        if self.t != 1 || self.work.is_some() || self.done {
            return Err(PipelineError::AlreadyStarted);
        }
        if self.config.mode == Mode::Spift {
            let n = self.frames.len();
            let mut seed_label = self.accepted[0].clone().expect("initial label");
            let mut start = 0;
            while start < n - 1 {
                let window = Window::new(start, (start + self.config.window).min(n - 1));
                let labels = self.predict_window(window, &seed_label)?;
                for (i, l) in labels.into_iter().enumerate() {
                    let f = window.start + 1 + i;
                    self.predicted[f] = Some(l.clone());
                    self.automatic[f] = Some(l.clone());
                    self.refined[f] = Some(l.clone());
                    self.accepted[f] = Some(l);
                }
                seed_label = self.accepted[window.end].clone().expect("just stored");
                start = window.end;
            }
            self.t = n;
            self.done = true;
        } else {
            while !self.done {
                self.step()?;
                self.accept()?;
            }
        }
        Ok(self.accepted[1..].iter().map(|l| l.clone().expect("all accepted")).collect())
    }

    /// Scores accepted frames `1..t`. With ground truth (indexed by frame),
    /// accepted labels are compared against it; without, the automatic
    /// result of each frame is compared against what the user accepted.
    pub fn report(&self, sequence: &str, ground_truth: Option<&[LabelMap]>) -> Result<SequenceReport, PipelineError> {
        let frames: Vec<usize> = (1..self.t).collect();
        let accepted: Vec<LabelMap> = frames
            .iter()
            .map(|&f| self.accepted[f].clone().expect("accepted"))
            .collect();
        let (preds, gts): (Vec<LabelMap>, Vec<LabelMap>) = match ground_truth {
            Some(gt) => {
                let gts = frames
                    .iter()
                    .map(|&f| gt.get(f).cloned())
                    .collect::<Option<Vec<_>>>()
                    .ok_or(EvalError::LengthMismatch {
                        preds: self.frames.len(),
                        gts: gt.len(),
                    })?;
                (accepted, gts)
            }
            None => {
                let auto = frames
                    .iter()
                    .map(|&f| self.automatic[f].clone().unwrap_or_else(|| accepted[f - 1].clone()))
                    .collect();
                (auto, accepted)
            }
        };
        let effort: Vec<EffortEntry> = self
            .log
            .iter()
            .map(|e| EffortEntry {
                t: e.t,
                markers: e.markers,
                seconds: e.seconds,
            })
            .collect();
        let meta = ReportMeta {
            sequence: sequence.to_string(),
            mode: self.config.mode.name().to_string(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
        };
        Ok(sequence_report(meta, &preds, &gts, 1, Some(&effort))?)
    }

    /// Writes `config.json`, `log.json`, `state.json` and the label folders
    /// `accepted/`, `predicted/`, `refined/` and `models/`.
    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&self.config, &dir.join("config.json"))?;
        write_json(&self.log, &dir.join("log.json"))?;
        let state = SessionState {
            t: self.t,
            frame_count: self.frames.len(),
            done: self.done,
            flow_dir: self.flow_dir.clone(),
        };
        write_json(&state, &dir.join("state.json"))?;
        for (name, labels) in [
            ("accepted", &self.accepted),
            ("predicted", &self.predicted),
            ("refined", &self.refined),
        ] {
            for (t, l) in labels.iter().enumerate() {
                if let Some(l) = l {
                    save_label(l, &dir.join(name).join(mask_file_name(t)))?;
                }
            }
        }
        for (t, m) in self.models.iter().enumerate() {
            if let Some(m) = m {
                save_png_bytes(&m.to_png(), &dir.join("models").join(format!("model_{t:05}.png")))?;
            }
        }
        Ok(())
    }

    /// Restores a session saved by [`Session::save`] over the same frames.
    /// The frame in progress, if any, has to be stepped again.
    pub fn load(dir: &Path, frames: Vec<ColorFrame<T>>) -> Result<Self, PipelineError> {
        let config: SessionConfig = read_json(&dir.join("config.json"))?;
        let log: Vec<LogEntry> = read_json(&dir.join("log.json"))?;
        let state: SessionState = read_json(&dir.join("state.json"))?;
        if state.frame_count != frames.len() {
            return Err(PipelineError::InvalidConfig(format!(
                "saved session has {} frames, got {}",
                state.frame_count,
                frames.len()
            )));
        }
        let l0 = load_label(&dir.join("accepted").join(mask_file_name(0)))?;
        let mut s = Self::init(frames, l0, config)?.with_flow_dir(state.flow_dir);
        for t in 1..state.t {
            s.accepted[t] = Some(load_label(&dir.join("accepted").join(mask_file_name(t)))?);
        }
        for (name, slot) in [("predicted", &mut s.predicted), ("refined", &mut s.refined)] {
            for (t, l) in slot.iter_mut().enumerate().skip(1) {
                let p = dir.join(name).join(mask_file_name(t));
                if p.is_file() {
                    *l = Some(load_label(&p)?);
                }
            }
        }
        for t in 1..state.t {
            s.automatic[t] = s.refined[t].clone();
        }
        s.t = state.t;
        s.done = state.done;
        s.log = log;
        Ok(s)
    }
}
