//! Desk-scale optimization of per-pixel logit maps, with and without the
//! differentiable binarization branch.
//!
//! Each scene owns a probability logit map `v` and, in db mode, a threshold
//! logit map `v_t` with `T = t_min + (t_max - t_min) * sigmoid(v_t)`. Both
//! start at zero and follow plain gradient descent on the mean-over-scenes
//! loss.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::binarization::{db_forward, sigmoid};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::fmt::fmt_g;
use crate::loss::{bce_hard_negative, cutoff_and_ties, negatives_to_keep, threshold_l1, total_loss, LossWeights, MinedBce};
use crate::map::FloatMap;
use crate::postprocess::{form_boxes, PostprocessConfig};
use crate::synth::Scene;

/// Logits are projected onto `[-LOGIT_BOUND, LOGIT_BOUND]` after each step
/// so sigmoid outputs stay strictly inside (0, 1).
pub const LOGIT_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    PlainBce,
    Db,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::PlainBce => "plain_bce",
            Self::Db => "db",
        }
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "plain_bce" => Ok(Self::PlainBce),
            "db" => Ok(Self::Db),
            _ => Err(Error::Domain(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub steps: usize,
    pub lr: f64,
    pub k: f64,
    pub weights: LossWeights,
    /// Drives the pixel sample of the finite-difference check.
    pub seed: u64,
    pub t_min: f64,
    pub t_max: f64,
    pub iou_thresh: f64,
    pub postprocess: PostprocessConfig,
    /// Pixels checked against finite differences at step 0; 0 skips it.
    pub fd_check_pixels: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Db,
            steps: 500,
            lr: 5000.0,
            k: 50.0,
            weights: LossWeights::default(),
            seed: 0,
            t_min: 0.3,
            t_max: 0.7,
            iou_thresh: 0.5,
            postprocess: PostprocessConfig::default(),
            fd_check_pixels: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Domain("steps must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Domain(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Domain(format!("amplifying factor {} must be positive", self.k)));
        }
        if !(self.t_min < self.t_max) {
            return Err(Error::Domain("t_min must be below t_max".into()));
        }
        self.weights.validate()?;
        self.postprocess.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub mode: TrainMode,
    /// Loss at each step, before that step's update.
    pub loss_curve: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Mean |dL/dv| at step 0 over band pixels (threshold mask minus shrunk
    /// text) and over shrunk text pixels.
    pub band_grad_mean: f64,
    pub interior_grad_mean: f64,
    pub fd_check: Option<GradCheck>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for (i, l) in self.loss_curve.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", fmt_g(*l, 9));
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode: {}", self.mode.name());
        let _ = writeln!(s, "steps: {}", self.loss_curve.len());
        if let Some(l) = self.loss_curve.last() {
            let _ = writeln!(s, "final_loss: {}", fmt_g(*l, 9));
        }
        for (k, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f_measure", self.f_measure),
            ("band_grad_mean", self.band_grad_mean),
            ("interior_grad_mean", self.interior_grad_mean),
        ] {
            let _ = writeln!(s, "{k}: {}", fmt_g(v, 9));
        }
        if let Some(c) = &self.fd_check {
            let _ = writeln!(s, "fd_checked: {}", c.checked);
            let _ = writeln!(s, "fd_max_rel_err: {}", fmt_g(c.max_rel_err, 9));
        }
        s
    }

    /// Writes `loss.csv` and `summary.txt`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("loss.csv"), self.to_csv())?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

/// Per-scene logit maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MapParams {
    pub v: Vec<FloatMap>,
    /// Empty in plain mode.
    pub v_t: Vec<FloatMap>,
}

impl MapParams {
    pub fn zeros(scenes: &[Scene], mode: TrainMode) -> Self {
        let maps = || scenes.iter().map(|s| FloatMap::zeros(s.height, s.width)).collect();
        Self {
            v: maps(),
            v_t: if mode == TrainMode::Db { maps() } else { Vec::new() },
        }
    }

    /// Uniform logits in `[-scale, scale]`, for checks away from the tied
    /// zero initialization.
    pub fn random(scenes: &[Scene], mode: TrainMode, seed: u64, scale: f64) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut p = Self::zeros(scenes, mode);
        for m in p.v.iter_mut().chain(p.v_t.iter_mut()) {
            for x in m.data_mut() {
                *x = rng.random_range(-scale..scale);
            }
        }
        p
    }
}

struct SceneEval {
    loss: f64,
    grad_v: FloatMap,
    grad_vt: Option<FloatMap>,
    mined: Vec<MinedBce>,
    /// Mined maps (P, and B in db mode) for the tie analysis.
    preds: Vec<FloatMap>,
}

fn scene_objective(scene: &Scene, v: &FloatMap, v_t: Option<&FloatMap>, cfg: &TrainConfig) -> Result<SceneEval> {
    let l = &scene.labels;
    let w = &cfg.weights;
    let p = v.map(sigmoid);
    let ls = bce_hard_negative(&p, &l.prob_target, &l.prob_mask, w.neg_ratio)?;
    match (cfg.mode, v_t) {
        (TrainMode::PlainBce, _) => {
            let mut grad_v = ls.grad.clone();
            for (g, &pi) in grad_v.data_mut().iter_mut().zip(p.data()) {
                *g *= pi * (1.0 - pi);
            }
            Ok(SceneEval {
                loss: ls.loss,
                grad_v,
                grad_vt: None,
                mined: vec![ls],
                preds: vec![p],
            })
        }
        (TrainMode::Db, Some(v_t)) => {
            let span = cfg.t_max - cfg.t_min;
            let s_t = v_t.map(sigmoid);
            let t = s_t.map(|s| cfg.t_min + span * s);
            let b = db_forward(&p, &t, cfg.k)?;
            let lb = bce_hard_negative(&b, &l.prob_target, &l.prob_mask, w.neg_ratio)?;
            let (lt, lt_grad) = threshold_l1(&t, &l.thresh_target, &l.thresh_mask)?;
            let mut grad_v = FloatMap::zeros(p.height(), p.width());
            let mut grad_vt = FloatMap::zeros(p.height(), p.width());
            let rows = grad_v.data_mut().iter_mut().zip(grad_vt.data_mut()).zip(p.data()).zip(b.data());
            let grads = ls.grad.data().iter().zip(lb.grad.data()).zip(lt_grad.data()).zip(s_t.data());
            for ((((gv, gvt), &pi), &bi), (((&gs, &gb), &gt), &si)) in rows.zip(grads) {
                let g_b = w.alpha * gb * cfg.k * bi * (1.0 - bi);
                *gv = (gs + g_b) * pi * (1.0 - pi);
                *gvt = (w.beta * gt - g_b) * span * si * (1.0 - si);
            }
            Ok(SceneEval {
                loss: total_loss(ls.loss, lb.loss, lt, w),
                grad_v,
                grad_vt: Some(grad_vt),
                mined: vec![ls, lb],
                preds: vec![p, b],
            })
        }
        (TrainMode::Db, None) => Err(Error::Domain("db mode needs threshold logits".into())),
    }
}

fn evaluate_all(scenes: &[Scene], params: &MapParams, cfg: &TrainConfig) -> Result<Vec<SceneEval>> {
    let n = scenes.len() as f64;
    scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut e = scene_objective(s, &params.v[i], params.v_t.get(i), cfg)?;
            // mean over scenes
            e.loss /= n;
            for g in e.grad_v.data_mut().iter_mut().chain(e.grad_vt.iter_mut().flat_map(|m| m.data_mut())) {
                *g /= n;
            }
            Ok(e)
        })
        .collect()
}

fn descend(params: &mut MapParams, evals: &[SceneEval], lr: f64) {
    let step = |v: &mut FloatMap, g: &FloatMap| {
        v.data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(x, g)| *x = (*x - lr * g).clamp(-LOGIT_BOUND, LOGIT_BOUND))
    };
    params.v.par_iter_mut().zip(evals.par_iter()).for_each(|(v, e)| step(v, &e.grad_v));
    params.v_t.par_iter_mut().zip(evals.par_iter()).for_each(|(v, e)| {
        if let Some(g) = &e.grad_vt {
            step(v, g)
        }
    });
}

const IN_MASK: u8 = 1;
const POSITIVE: u8 = 2;
const IN_BAND: u8 = 4;

/// Label maps packed into one byte per pixel.
fn label_flags(scene: &Scene) -> Vec<u8> {
    let l = &scene.labels;
    let pairs = l.prob_mask.data().iter().zip(l.prob_target.data());
    pairs
        .zip(l.thresh_mask.data())
        .map(|((&m, &y), &b)| (m > 0.5) as u8 * IN_MASK | (y > 0.5) as u8 * POSITIVE | (b > 0.5) as u8 * IN_BAND)
        .collect()
}

/// Last argument and result of a pure function. Converged maps are mostly
/// runs of identical logits, so repeating the previous pixel is common.
#[derive(Clone, Copy)]
struct Memo {
    x: u64,
    y: f64,
}

impl Memo {
    fn new(f: impl Fn(f64) -> f64) -> Self {
        Self { x: 0f64.to_bits(), y: f(0.0) }
    }

    #[inline]
    fn get(&mut self, x: f64, f: impl Fn(f64) -> f64) -> f64 {
        if x.to_bits() != self.x {
            self.x = x.to_bits();
            self.y = f(x);
        }
        self.y
    }
}

#[derive(Default)]
struct Scratch {
    p: Vec<f64>,
    s: Vec<f64>,
    b: Vec<f64>,
    neg_p: Vec<u64>,
    neg_b: Vec<u64>,
}

/// Running state of one mined BCE term, visited in row-major order.
struct MinedTerm {
    cutoff: u64,
    ties: usize,
    inv: f64,
    total: f64,
    ln_p: Memo,
    ln_q: Memo,
}

fn ln_1m(p: f64) -> f64 {
    (-p).ln_1p()
}

impl MinedTerm {
    fn new(negatives: &mut [u64], n_pos: usize, neg_ratio: f64) -> Self {
        let keep = negatives_to_keep(n_pos, negatives.len(), neg_ratio);
        let (cutoff, ties) = cutoff_and_ties(negatives, keep);
        let n = n_pos + keep;
        let inv = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        Self {
            cutoff,
            ties,
            inv,
            total: 0.0,
            ln_p: Memo::new(f64::ln),
            ln_q: Memo::new(ln_1m),
        }
    }

    /// Gradient at a masked pixel; adds its loss if selected.
    #[inline]
    fn visit(&mut self, p: f64, positive: bool) -> f64 {
        if positive {
            self.total -= self.ln_p.get(p, f64::ln);
            return -self.inv / p;
        }
        let b = p.to_bits();
        let take = b > self.cutoff || (b == self.cutoff && self.ties > 0);
        if b == self.cutoff && take {
            self.ties -= 1;
        }
        if take {
            self.total -= self.ln_q.get(p, ln_1m);
            self.inv / (1.0 - p)
        } else {
            0.0
        }
    }

    fn loss(&self) -> f64 {
        self.total * self.inv
    }
}

fn inside_unit(x: f64, i: usize) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("prediction {x} at pixel {i} not inside (0, 1)")))
    }
}

/// `scene_objective` plus the descent update for one scene, computed in two
/// streaming passes instead of a dozen full-size maps. Gives the same bits.
/// Returns the scene's share of the mean loss.
fn fused_step(
    flags: &[u8],
    thresh_target: &FloatMap,
    v: &mut FloatMap,
    v_t: Option<&mut FloatMap>,
    cfg: &TrainConfig,
    n_scenes: f64,
    sc: &mut Scratch,
) -> Result<f64> {
    let w = &cfg.weights;
    let lr = cfg.lr;
    let bound = |x: f64| x.clamp(-LOGIT_BOUND, LOGIT_BOUND);
    sc.p.clear();
    sc.neg_p.clear();
    let mut n_pos = 0usize;
    let mut sig_v = Memo::new(sigmoid);
    let Some(v_t) = v_t else {
        for (i, (&f, &z)) in flags.iter().zip(v.data()).enumerate() {
            let p = sig_v.get(z, sigmoid);
            sc.p.push(p);
            if f & IN_MASK != 0 {
                inside_unit(p, i)?;
                if f & POSITIVE != 0 {
                    n_pos += 1;
                } else {
                    sc.neg_p.push(p.to_bits());
                }
            }
        }
        let mut ls = MinedTerm::new(&mut sc.neg_p, n_pos, w.neg_ratio);
        for ((x, &f), &p) in v.data_mut().iter_mut().zip(flags).zip(&sc.p) {
            let g = if f & IN_MASK != 0 { ls.visit(p, f & POSITIVE != 0) } else { 0.0 };
            let g = g * (p * (1.0 - p)) / n_scenes;
            *x = bound(*x - lr * g);
        }
        return Ok(ls.loss() / n_scenes);
    };

    let span = cfg.t_max - cfg.t_min;
    sc.s.clear();
    sc.b.clear();
    sc.neg_b.clear();
    let mut n_band = 0usize;
    let (mut sig_t, mut sig_b) = (sig_v, sig_v);
    for (i, ((&f, &z), &zt)) in flags.iter().zip(v.data()).zip(v_t.data()).enumerate() {
        let p = sig_v.get(z, sigmoid);
        let s = sig_t.get(zt, sigmoid);
        let b = sig_b.get(cfg.k * (p - (cfg.t_min + span * s)), sigmoid);
        sc.p.push(p);
        sc.s.push(s);
        sc.b.push(b);
        n_band += (f & IN_BAND != 0) as usize;
        if f & IN_MASK != 0 {
            inside_unit(p, i)?;
            inside_unit(b, i)?;
            if f & POSITIVE != 0 {
                n_pos += 1;
            } else {
                sc.neg_p.push(p.to_bits());
                sc.neg_b.push(b.to_bits());
            }
        }
    }
    let mut ls = MinedTerm::new(&mut sc.neg_p, n_pos, w.neg_ratio);
    let mut lb = MinedTerm::new(&mut sc.neg_b, n_pos, w.neg_ratio);
    let inv_t = if n_band == 0 { 0.0 } else { 1.0 / n_band as f64 };
    let mut total_t = 0.0;
    let params = v.data_mut().iter_mut().zip(v_t.data_mut());
    let inputs = flags.iter().zip(thresh_target.data()).zip(&sc.p).zip(&sc.s).zip(&sc.b);
    for ((x, xt), ((((&f, &y_t), &pi), &si), &bi)) in params.zip(inputs) {
        let (gs, gb) = if f & IN_MASK != 0 {
            let pos = f & POSITIVE != 0;
            (ls.visit(pi, pos), lb.visit(bi, pos))
        } else {
            (0.0, 0.0)
        };
        let gt = if f & IN_BAND != 0 {
            let d = (cfg.t_min + span * si) - y_t;
            total_t += d.abs();
            if d > 0.0 {
                inv_t
            } else if d < 0.0 {
                -inv_t
            } else {
                0.0
            }
        } else {
            0.0
        };
        let g_b = w.alpha * gb * cfg.k * bi * (1.0 - bi);
        let gv = (gs + g_b) * pi * (1.0 - pi) / n_scenes;
        let gvt = (w.beta * gt - g_b) * span * si * (1.0 - si) / n_scenes;
        *x = bound(*x - lr * gv);
        *xt = bound(*xt - lr * gvt);
    }
    let lt = total_t * inv_t;
    Ok(total_loss(ls.loss(), lb.loss(), lt, w) / n_scenes)
}

fn fused_descend(
    scenes: &[Scene],
    flags: &[Vec<u8>],
    params: &mut MapParams,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let n = scenes.len() as f64;
    let heads: Vec<Option<&mut FloatMap>> = if params.v_t.is_empty() {
        (0..scenes.len()).map(|_| None).collect()
    } else {
        params.v_t.iter_mut().map(Some).collect()
    };
    params
        .v
        .par_iter_mut()
        .zip(heads)
        .zip(scenes.par_iter().zip(flags))
        .map_init(Scratch::default, |sc, ((v, v_t), (s, f))| {
            fused_step(f, &s.labels.thresh_target, v, v_t, cfg, n, sc)
        })
        .collect()
}

fn boundary_stats(scenes: &[Scene], evals: &[SceneEval]) -> (f64, f64) {
    let (mut band, mut nb, mut inner, mut ni) = (0.0, 0usize, 0.0, 0usize);
    for (s, e) in scenes.iter().zip(evals) {
        let l = &s.labels;
        for (i, g) in e.grad_v.data().iter().enumerate() {
            if l.prob_target.data()[i] > 0.5 {
                inner += g.abs();
                ni += 1;
            } else if l.thresh_mask.data()[i] > 0.5 {
                band += g.abs();
                nb += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (mean(band, nb), mean(inner, ni))
}

/// Precision, recall and F over all scenes, boxes formed on `sigmoid(v)`.
pub fn detection_scores(scenes: &[Scene], params: &MapParams, cfg: &TrainConfig) -> Result<(f64, f64, f64)> {
    let per_scene: Vec<(usize, usize, usize)> = scenes
        .par_iter()
        .zip(params.v.par_iter())
        .map(|(s, v)| {
            let dets = form_boxes(&v.map(sigmoid), &cfg.postprocess)?;
            let r = evaluate(&dets, &s.polygons, cfg.iou_thresh);
            Ok((r.matches.len(), dets.len(), s.polygons.len()))
        })
        .collect::<Result<_>>()?;
    let (tp, nd, ng) = per_scene
        .iter()
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let ratio = |d: usize| match d {
        0 if nd == 0 && ng == 0 => 1.0,
        0 => 0.0,
        _ => tp as f64 / d as f64,
    };
    let (p, r) = (ratio(nd), ratio(ng));
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok((p, r, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
}

const FD_STEP: f64 = 1e-5;

/// Whether pixel `i` cannot change the mined selection under a perturbation
/// of `margin` in its prediction. Selection is piecewise constant, so the
/// loss is only differentiable where this holds.
fn selection_stable(scene: &Scene, m: &MinedBce, pred: &FloatMap, i: usize, margin: f64) -> bool {
    let l = &scene.labels;
    if l.prob_mask.data()[i] <= 0.5 || l.prob_target.data()[i] > 0.5 {
        return true;
    }
    let (mut sel_min, mut unsel_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (j, &p) in pred.data().iter().enumerate() {
        if j == i || l.prob_mask.data()[j] <= 0.5 || l.prob_target.data()[j] > 0.5 {
            continue;
        }
        if m.grad.data()[j] != 0.0 {
            sel_min = sel_min.min(p);
        } else {
            unsel_max = unsel_max.max(p);
        }
    }
    let p = pred.data()[i];
    if m.grad.data()[i] != 0.0 {
        p - margin > unsel_max
    } else {
        p + margin < sel_min
    }
}

/// Compares trainer gradients with central differences of the full
/// mean-over-scenes loss at `n_pixels` random pixels (and heads, in db mode)
/// where the hard-negative selection is locally constant. Pixels whose
/// selection would flip are redrawn.
pub fn gradient_check(scenes: &[Scene], params: &MapParams, cfg: &TrainConfig, n_pixels: usize) -> Result<GradCheck> {
    cfg.validate()?;
    let evals = evaluate_all(scenes, params, cfg)?;
    let base: Vec<f64> = evals.iter().map(|e| e.loss).collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let heads = if cfg.mode == TrainMode::Db { 2 } else { 1 };
    let n_scenes = scenes.len() as f64;
    let mut work = params.clone();
    let (mut checked, mut max_rel_err, mut tries) = (0, 0.0f64, 0usize);
    while checked < n_pixels && tries < 1000 * n_pixels.max(1) {
        tries += 1;
        let s = rng.random_range(0..scenes.len());
        let i = rng.random_range(0..params.v[s].data().len());
        let head = rng.random_range(0..heads);
        // bound on how far the perturbation moves P or B
        let margin = 10.0 * FD_STEP * (1.0 + cfg.k);
        let e = &evals[s];
        if !e.mined.iter().zip(&e.preds).all(|(m, p)| selection_stable(&scenes[s], m, p, i, margin)) {
            continue;
        }
        let analytic = if head == 0 {
            e.grad_v.data()[i]
        } else {
            e.grad_vt.as_ref().map_or(0.0, |g| g.data()[i])
        };
        let mut total_at = |delta: f64| -> Result<f64> {
            let map = if head == 0 { &mut work.v[s] } else { &mut work.v_t[s] };
            let orig = map.data()[i];
            map.data_mut()[i] = orig + delta;
            let r = scene_objective(&scenes[s], &work.v[s], work.v_t.get(s), cfg);
            let map = if head == 0 { &mut work.v[s] } else { &mut work.v_t[s] };
            map.data_mut()[i] = orig;
            let local = r?.loss / n_scenes;
            Ok(base.iter().enumerate().map(|(j, &b)| if j == s { local } else { b }).sum())
        };
        let fd = (total_at(FD_STEP)? - total_at(-FD_STEP)?) / (2.0 * FD_STEP);
        let scale = analytic.abs().max(fd.abs());
        let rel = if scale == 0.0 { 0.0 } else { (analytic - fd).abs() / scale };
        max_rel_err = max_rel_err.max(rel);
        checked += 1;
    }
    Ok(GradCheck { checked, max_rel_err })
}

pub fn optimize_maps(scenes: &[Scene], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::Domain("no scenes to train on".into()));
    }
    let mut params = MapParams::zeros(scenes, cfg.mode);
    let fd_check = match cfg.fd_check_pixels {
        0 => None,
        n => Some(gradient_check(scenes, &params, cfg, n)?),
    };
    let mut report = TrainReport {
        mode: cfg.mode,
        loss_curve: Vec::with_capacity(cfg.steps),
        precision: 0.0,
        recall: 0.0,
        f_measure: 0.0,
        band_grad_mean: 0.0,
        interior_grad_mean: 0.0,
        fd_check,
    };
    let flags: Vec<Vec<u8>> = scenes.iter().map(label_flags).collect();
    for step in 0..cfg.steps {
        let diverged = |report| Error::Divergence {
            step,
            report: Box::new(report),
        };
        // the first step keeps full gradient maps for the boundary statistics
        let losses = if step == 0 {
            evaluate_all(scenes, &params, cfg).map(|evals| {
                (report.band_grad_mean, report.interior_grad_mean) = boundary_stats(scenes, &evals);
                descend(&mut params, &evals, cfg.lr);
                evals.iter().map(|e| e.loss).collect::<Vec<_>>()
            })
        } else {
            fused_descend(scenes, &flags, &mut params, cfg)
        };
        let loss: f64 = match losses {
            Ok(l) => l.iter().sum(),
            Err(Error::Domain(_)) => return Err(diverged(report)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(report));
        }
        report.loss_curve.push(loss);
    }
    (report.precision, report.recall, report.f_measure) = detection_scores(scenes, &params, cfg)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub plain: TrainReport,
    pub db: TrainReport,
    /// db F minus plain F.
    pub f_delta: f64,
    /// db band gradient over plain band gradient at step 0.
    pub band_gradient_ratio: f64,
}

pub fn compare_modes(scenes: &[Scene], base: &TrainConfig) -> Result<ModeComparison> {
    let plain = optimize_maps(scenes, &TrainConfig { mode: TrainMode::PlainBce, ..base.clone() })?;
    let db = optimize_maps(scenes, &TrainConfig { mode: TrainMode::Db, ..base.clone() })?;
    Ok(ModeComparison {
        f_delta: db.f_measure - plain.f_measure,
        band_gradient_ratio: db.band_grad_mean / plain.band_grad_mean,
        plain,
        db,
    })
}
