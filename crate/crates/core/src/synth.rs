//! Deterministic synthetic scenes: non-overlapping text-like polygons, their
//! label maps, a noisy probability map and idealized multi-scale features.
//!
//! All randomness comes from one `Xoshiro256PlusPlus` stream seeded with
//! `seed_from_u64(seed)`, consumed in a fixed order: placement, then map
//! noise, then stage features.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Polygon};
use crate::labelgen::{generate_labels, LabelBundle, LabelConfig};
use crate::map::FloatMap;
use crate::tensor::Tensor;

pub const MAX_REJECTIONS: usize = 1000;
pub const MARGIN_PX: f64 = 2.0;
pub const NOISE_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rect,
    RotRect,
    CurvedBand,
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" => Ok(Self::Rect),
            "rot_rect" => Ok(Self::RotRect),
            "curved_band" => Ok(Self::CurvedBand),
            _ => Err(Error::Domain(format!("unknown shape {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub n_instances: usize,
    /// Range of the short side (text height) in pixels.
    pub scale_range: (f64, f64),
    /// Range of long side / short side.
    pub aspect_range: (f64, f64),
    pub shape: ShapeKind,
    pub labels: LabelConfig,
    /// `(n_stages, channels)` for idealized stage features.
    pub features: Option<(usize, usize)>,
}

impl SceneSpec {
    pub fn new(seed: u64, height: usize, width: usize, n_instances: usize, shape: ShapeKind) -> Self {
        Self {
            seed,
            height,
            width,
            n_instances,
            scale_range: (12.0, 24.0),
            aspect_range: (1.0, 3.0),
            shape,
            labels: LabelConfig::default(),
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub polygons: Vec<Polygon>,
    pub labels: LabelBundle,
    pub stage_features: Option<Vec<Tensor>>,
    pub noisy_prob: Option<FloatMap>,
    /// Instances that could not be placed within the rejection budget.
    pub placement_shortfall: usize,
}

fn sample(rng: &mut Xoshiro256PlusPlus, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn candidate(rng: &mut Xoshiro256PlusPlus, spec: &SceneSpec) -> Option<Polygon> {
    let short = sample(rng, spec.scale_range);
    let long = short * sample(rng, spec.aspect_range);
    let (w, h) = (spec.width as f64, spec.height as f64);
    match spec.shape {
        ShapeKind::Rect => {
            let x = rng.random_range(0.0..1.0) * (w - long - 2.0 * MARGIN_PX);
            let y = rng.random_range(0.0..1.0) * (h - short - 2.0 * MARGIN_PX);
            let (x, y) = ((x + MARGIN_PX).round(), (y + MARGIN_PX).round());
            Polygon::rect(x, y, x + long, y + short).ok()
        }
        ShapeKind::RotRect => {
            let theta = rng.random_range(-PI / 4.0..PI / 4.0);
            let cx = rng.random_range(0.0..w);
            let cy = rng.random_range(0.0..h);
            let (c, s) = (theta.cos(), theta.sin());
            let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)].map(|(u, v)| {
                let (dx, dy) = (u * long, v * short);
                Point::new(cx + dx * c - dy * s, cy + dx * s + dy * c)
            });
            Polygon::new(corners.to_vec()).ok()
        }
        ShapeKind::CurvedBand => {
            let amp = rng.random_range(0.1..0.4) * short;
            let phase = rng.random_range(0.0..2.0 * PI);
            let x0 = rng.random_range(0.0..w);
            let yc = rng.random_range(0.0..h);
            let length = long.max(2.0 * short);
            // centreline y = yc + amp sin(pi t + phase), t in [0, 1]
            let centre = |t: f64| {
                let y = yc + amp * (PI * t + phase).sin();
                let slope = amp * PI * (PI * t + phase).cos() / length;
                let norm = (1.0 + slope * slope).sqrt();
                (Point::new(x0 + t * length, y), (-slope / norm, 1.0 / norm))
            };
            let mut top = Vec::with_capacity(8);
            let mut bottom = Vec::with_capacity(8);
            for i in 0..8 {
                let (p, (nx, ny)) = centre(i as f64 / 7.0);
                top.push(Point::new(p.x - nx * short / 2.0, p.y - ny * short / 2.0));
                bottom.push(Point::new(p.x + nx * short / 2.0, p.y + ny * short / 2.0));
            }
            bottom.reverse();
            top.extend(bottom);
            Polygon::new(top).ok()
        }
    }
}

fn fits(poly: &Polygon, placed: &[Polygon], w: f64, h: f64) -> bool {
    let (x0, y0, x1, y1) = poly.bounds();
    if x0 < MARGIN_PX || y0 < MARGIN_PX || x1 > w - MARGIN_PX || y1 > h - MARGIN_PX {
        return false;
    }
    // padded bounding boxes must be disjoint
    placed.iter().all(|q| {
        let (a0, b0, a1, b1) = q.bounds();
        x1 + MARGIN_PX <= a0 || a1 + MARGIN_PX <= x0 || y1 + MARGIN_PX <= b0 || b1 + MARGIN_PX <= y0
    })
}

/// 3x3 mean over the in-bounds neighbourhood.
pub fn box_blur(m: &FloatMap) -> FloatMap {
    let (h, w) = m.shape();
    let mut out = FloatMap::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let (mut s, mut n) = (0.0, 0.0);
            for r in i.saturating_sub(1)..(i + 2).min(h) {
                for c in j.saturating_sub(1)..(j + 2).min(w) {
                    s += m.get(r, c);
                    n += 1.0;
                }
            }
            out.set(i, j, s / n);
        }
    }
    out
}

/// Average-pools by `factor` and expands back with nearest neighbour.
fn pool_expand(m: &FloatMap, factor: usize) -> FloatMap {
    let (h, w) = m.shape();
    let mut out = FloatMap::zeros(h, w);
    for bi in (0..h).step_by(factor) {
        for bj in (0..w).step_by(factor) {
            let (ri, rj) = ((bi + factor).min(h), (bj + factor).min(w));
            let mut s = 0.0;
            for i in bi..ri {
                for j in bj..rj {
                    s += m.get(i, j);
                }
            }
            let mean = s / ((ri - bi) * (rj - bj)) as f64;
            for i in bi..ri {
                for j in bj..rj {
                    out.set(i, j, mean);
                }
            }
        }
    }
    out
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.labels.validate()?;
    let (lo, hi) = spec.scale_range;
    if !(lo > 0.0 && hi >= lo) || !(spec.aspect_range.0 >= 1.0 && spec.aspect_range.1 >= spec.aspect_range.0) {
        return Err(Error::Domain("invalid scale or aspect range".into()));
    }
    let (w, h) = (spec.width as f64, spec.height as f64);
    if spec.n_instances > 0 && lo * spec.aspect_range.0 + 2.0 * MARGIN_PX > w.min(h) {
        return Err(Error::Domain("scale range does not fit inside the scene".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let mut polygons = Vec::with_capacity(spec.n_instances);
    let mut rejections = 0;
    while polygons.len() < spec.n_instances && rejections < MAX_REJECTIONS {
        match candidate(&mut rng, spec) {
            Some(p) if fits(&p, &polygons, w, h) && geometry::area(&p) > 0.0 => polygons.push(p),
            _ => rejections += 1,
        }
    }
    let labels = generate_labels(&polygons, spec.height, spec.width, &spec.labels)?;

    let mut noisy = box_blur(&labels.prob_target);
    for v in noisy.data_mut() {
        *v = (*v + rng.random_range(-NOISE_AMPLITUDE..NOISE_AMPLITUDE)).clamp(0.0, 1.0);
    }

    let stage_features = spec.features.map(|(n_stages, channels)| {
        let base = box_blur(&labels.prob_target);
        (0..n_stages)
            .map(|s| {
                let coarse = pool_expand(&base, 1 << s);
                let border = pool_expand(&labels.thresh_target, 1 << s);
                let mut data = Vec::with_capacity(channels * spec.height * spec.width);
                for c in 0..channels {
                    let src = if c % 2 == 0 { &coarse } else { &border };
                    let gain = 1.0 - 0.5 * c as f64 / channels as f64;
                    data.extend(src.data().iter().map(|&v| gain * v + rng.random_range(-0.05..0.05)));
                }
                Tensor::new(vec![channels, spec.height, spec.width], data).expect("sized by construction")
            })
            .collect()
    });

    Ok(Scene {
        seed: spec.seed,
        height: spec.height,
        width: spec.width,
        placement_shortfall: spec.n_instances - polygons.len(),
        polygons,
        labels,
        stage_features,
        noisy_prob: Some(noisy),
    })
}

/// `n` scenes from `template`, scene `i` seeded with `seed * 1000 + i`.
pub fn generate_suite(template: &SceneSpec, seed: u64, n: usize) -> Result<Vec<Scene>> {
    (0..n as u64)
        .map(|i| {
            generate_scene(&SceneSpec {
                seed: seed.wrapping_mul(1000).wrapping_add(i),
                ..template.clone()
            })
        })
        .collect()
}

impl Scene {
    /// Writes polygons, maps, stage features and a `manifest.txt` listing
    /// each artifact as `file kind dims...`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = format!("# seed {} shortfall {}\n", self.seed, self.placement_shortfall);
        fs::write(dir.join("polygons.txt"), geometry::format_polygons(&self.polygons))?;
        manifest.push_str(&format!("polygons.txt polygons {}\n", self.polygons.len()));
        let l = &self.labels;
        let mut maps = vec![
            ("prob_target", &l.prob_target),
            ("prob_mask", &l.prob_mask),
            ("thresh_target", &l.thresh_target),
            ("thresh_mask", &l.thresh_mask),
        ];
        if let Some(n) = &self.noisy_prob {
            maps.push(("noisy_prob", n));
        }
        for (name, m) in maps {
            m.save(dir.join(format!("{name}.f32map")))?;
            manifest.push_str(&format!("{name}.f32map map {} {}\n", m.height(), m.width()));
        }
        for (i, t) in self.stage_features.iter().flatten().enumerate() {
            let s = t.shape();
            FloatMap::from_vec(s[0] * s[1], s[2], t.data().to_vec())?.save(dir.join(format!("stage_{i}.f32map")))?;
            manifest.push_str(&format!("stage_{i}.f32map tensor {} {} {}\n", s[0], s[1], s[2]));
        }
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }
}
