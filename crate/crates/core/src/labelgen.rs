//! Probability-map and threshold-map training targets from polygon
//! annotations.

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Polygon};
use crate::map::FloatMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    pub shrink_ratio: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            shrink_ratio: 0.4,
            t_min: 0.3,
            t_max: 0.7,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink_ratio > 0.0 && self.shrink_ratio < 1.0) {
            return Err(Error::Domain(format!("shrink ratio {} not in (0, 1)", self.shrink_ratio)));
        }
        if !(0.0 <= self.t_min && self.t_min < self.t_max && self.t_max <= 1.0) {
            return Err(Error::Domain(format!(
                "threshold range [{}, {}] must satisfy 0 <= t_min < t_max <= 1",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelBundle {
    pub prob_target: FloatMap,
    pub prob_mask: FloatMap,
    pub thresh_target: FloatMap,
    pub thresh_mask: FloatMap,
}

/// Shrunk and dilated shapes derived from one annotated polygon.
#[derive(Debug, Clone)]
pub struct InstanceGeometry {
    pub offset: f64,
    pub shrunk: Vec<Polygon>,
    pub dilated: Option<Polygon>,
}

pub fn instance_geometry(poly: &Polygon, shrink_ratio: f64) -> InstanceGeometry {
    let offset = geometry::shrink_offset(poly, shrink_ratio);
    if !(offset.is_finite() && offset > 0.0) {
        return InstanceGeometry {
            offset,
            shrunk: Vec::new(),
            dilated: None,
        };
    }
    InstanceGeometry {
        offset,
        shrunk: geometry::offset(poly, -offset),
        dilated: geometry::offset(poly, offset).into_iter().next(),
    }
}

/// Pixel index range `[lo, hi)` whose centres may fall in `[a, b]`.
fn pixel_span(a: f64, b: f64, n: usize) -> (usize, usize) {
    let lo = (a - 0.5).ceil().max(0.0);
    let hi = ((b - 0.5).floor() + 1.0).min(n as f64);
    if hi <= lo {
        (0, 0)
    } else {
        (lo as usize, hi as usize)
    }
}

fn for_each_covered_pixel(poly: &Polygon, h: usize, w: usize, mut f: impl FnMut(usize, usize)) {
    let (x0, y0, x1, y1) = poly.bounds();
    let (r0, r1) = pixel_span(y0, y1, h);
    let (c0, c1) = pixel_span(x0, x1, w);
    for i in r0..r1 {
        for j in c0..c1 {
            if poly.contains(Point::new(j as f64 + 0.5, i as f64 + 0.5)) {
                f(i, j);
            }
        }
    }
}

/// Binary raster: pixel `(i, j)` is set when its centre `(j + 0.5, i + 0.5)`
/// lies inside `poly` or on its boundary.
pub fn rasterize(poly: &Polygon, h: usize, w: usize) -> FloatMap {
    let mut m = FloatMap::zeros(h, w);
    rasterize_into(&mut m, poly);
    m
}

pub fn rasterize_into(map: &mut FloatMap, poly: &Polygon) {
    let (h, w) = map.shape();
    for_each_covered_pixel(poly, h, w, |i, j| map.set(i, j, 1.0));
}

pub fn generate_labels(polys: &[Polygon], h: usize, w: usize, cfg: &LabelConfig) -> Result<LabelBundle> {
    cfg.validate()?;
    let mut prob_target = FloatMap::zeros(h, w);
    let mut thresh_target = FloatMap::filled(h, w, cfg.t_min);
    let mut thresh_mask = FloatMap::zeros(h, w);
    let span = cfg.t_max - cfg.t_min;

    for poly in polys {
        let inst = instance_geometry(poly, cfg.shrink_ratio);
        // every shrunk piece is a positive region
        for piece in &inst.shrunk {
            rasterize_into(&mut prob_target, piece);
        }
        let Some(dilated) = &inst.dilated else {
            continue;
        };
        for_each_covered_pixel(dilated, h, w, |i, j| {
            thresh_mask.set(i, j, 1.0);
            let d = poly.boundary_distance(Point::new(j as f64 + 0.5, i as f64 + 0.5));
            let v = cfg.t_max - span * (d / inst.offset).min(1.0);
            if v > thresh_target.get(i, j) {
                thresh_target.set(i, j, v);
            }
        });
    }

    Ok(LabelBundle {
        prob_target,
        prob_mask: FloatMap::filled(h, w, 1.0),
        thresh_target,
        thresh_mask,
    })
}
