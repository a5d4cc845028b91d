//! Box formation from a probability map: threshold, 8-connected components,
//! contour tracing with Douglas-Peucker simplification, scoring and unclip
//! dilation.

use std::collections::{HashMap, VecDeque};

use crate::binarization::standard_binarize;
use crate::error::{Error, Result};
use crate::fmt::fmt_f;
use crate::geometry::{self, Point, Polygon};
use crate::map::FloatMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub polygon: Polygon,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessConfig {
    pub bin_thresh: f64,
    pub unclip_ratio: f64,
    pub min_region_px: usize,
    pub score_thresh: f64,
    pub max_detections: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            bin_thresh: 0.2,
            unclip_ratio: 1.5,
            min_region_px: 4,
            score_thresh: 0.5,
            max_detections: 1000,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.bin_thresh) || !unit.contains(&self.score_thresh) {
            return Err(Error::Domain("thresholds must lie in [0, 1]".into()));
        }
        if !(self.unclip_ratio > 0.0 && self.unclip_ratio.is_finite()) {
            return Err(Error::Domain(format!("unclip ratio {} must be positive", self.unclip_ratio)));
        }
        Ok(())
    }
}

/// Foreground pixels of one component as `(row, col)`, row-major sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub pixels: Vec<(usize, usize)>,
}

impl Region {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// 8-connected components of the pixels `> 0.5`, ordered by their first
/// pixel in row-major order.
pub fn connected_components(bin: &FloatMap) -> Vec<Region> {
    let (h, w) = bin.shape();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if seen[start] || bin.data()[start] <= 0.5 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / w, idx % w);
            pixels.push((r, c));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if !seen[n] && bin.data()[n] > 0.5 {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        pixels.sort_unstable();
        out.push(Region { pixels });
    }
    out
}

type Corner = (i64, i64);

/// Outer pixel-edge boundary of `region`, corners in `(x, y)` = `(col, row)`
/// lattice units, positively oriented. Diagonal neighbours stay on one
/// contour.
fn trace_outer_boundary(region: &Region) -> Vec<Corner> {
    let set: std::collections::HashSet<(i64, i64)> =
        region.pixels.iter().map(|&(r, c)| (r as i64, c as i64)).collect();
    let fg = |r: i64, c: i64| set.contains(&(r, c));
    let mut next: HashMap<Corner, Vec<Corner>> = HashMap::new();
    let mut add = |a: Corner, b: Corner| next.entry(a).or_default().push(b);
    for &(r, c) in &region.pixels {
        let (r, c) = (r as i64, c as i64);
        if !fg(r - 1, c) {
            add((c, r), (c + 1, r));
        }
        if !fg(r, c + 1) {
            add((c + 1, r), (c + 1, r + 1));
        }
        if !fg(r + 1, c) {
            add((c + 1, r + 1), (c, r + 1));
        }
        if !fg(r, c - 1) {
            add((c, r + 1), (c, r));
        }
    }
    let (r0, c0) = region.pixels[0];
    let start = (c0 as i64, r0 as i64);
    let mut ring = vec![start];
    let mut prev = start;
    let mut cur = (start.0 + 1, start.1);
    let limit = 4 * region.len() + 4;
    while cur != start && ring.len() <= limit {
        ring.push(cur);
        let outs = &next[&cur];
        let chosen = if outs.len() == 1 {
            outs[0]
        } else {
            // saddle: take the right-hand turn so the diagonal pixel stays
            // on this contour
            let d_in = (cur.0 - prev.0, cur.1 - prev.1);
            *outs
                .iter()
                .find(|o| {
                    let d_out = (o.0 - cur.0, o.1 - cur.1);
                    d_in.0 * d_out.1 - d_in.1 * d_out.0 < 0
                })
                .unwrap_or(&outs[0])
        };
        prev = cur;
        cur = chosen;
    }
    ring
}

fn drop_collinear(ring: Vec<Point>) -> Vec<Point> {
    let n = ring.len();
    if n < 3 {
        return ring;
    }
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) != 0.0
        })
        .map(|i| ring[i])
        .collect()
}

fn douglas_peucker(pts: &[Point], tol: f64, keep: &mut Vec<bool>, lo: usize, hi: usize) {
    if hi <= lo + 1 {
        return;
    }
    let (a, b) = (pts[lo], pts[hi % pts.len()]);
    let (mut far, mut dmax) = (lo, -1.0);
    for i in lo + 1..hi {
        let d = geometry::point_segment_distance(pts[i], a, b);
        if d > dmax {
            dmax = d;
            far = i;
        }
    }
    if dmax > tol {
        keep[far] = true;
        douglas_peucker(pts, tol, keep, lo, far);
        douglas_peucker(pts, tol, keep, far, hi);
    }
}

/// Closed-ring Douglas-Peucker anchored at vertex 0 and the vertex farthest
/// from it.
pub fn simplify_ring(ring: &[Point], tol: f64) -> Vec<Point> {
    let n = ring.len();
    if n <= 3 {
        return ring.to_vec();
    }
    let far = (1..n)
        .max_by(|&i, &j| ring[0].distance(ring[i]).total_cmp(&ring[0].distance(ring[j])))
        .unwrap_or(1);
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[far] = true;
    douglas_peucker(ring, tol, &mut keep, 0, far);
    douglas_peucker(ring, tol, &mut keep, far, n);
    ring.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let base = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= base + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Smallest-area enclosing rectangle (rotating edges of the convex hull).
pub fn min_area_rect(points: &[Point]) -> Option<Polygon> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return None;
    }
    let n = hull.len();
    let mut best: Option<(f64, [Point; 4])> = None;
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        let len = a.distance(b);
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let (vx, vy) = (-uy, ux);
        let (mut s0, mut s1, mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let s = (p.x - a.x) * ux + (p.y - a.y) * uy;
            let t = (p.x - a.x) * vx + (p.y - a.y) * vy;
            s0 = s0.min(s);
            s1 = s1.max(s);
            t0 = t0.min(t);
            t1 = t1.max(t);
        }
        let area = (s1 - s0) * (t1 - t0);
        if best.as_ref().is_none_or(|(ba, _)| area < *ba - 1e-12) {
            let at = |s: f64, t: f64| Point::new(a.x + s * ux + t * vx, a.y + s * uy + t * vy);
            best = Some((area, [at(s0, t0), at(s1, t0), at(s1, t1), at(s0, t1)]));
        }
    }
    best.and_then(|(_, c)| Polygon::new(c.to_vec()).ok())
}

pub const CONTOUR_TOLERANCE: f64 = 1.0;

/// Traces, simplifies and validates the outer contour; falls back to the
/// minimum-area bounding rectangle when fewer than three vertices survive
/// or the contour pinches at a diagonal.
pub fn region_to_polygon(region: &Region) -> Result<Polygon> {
    if region.is_empty() {
        return Err(Error::Domain("empty region".into()));
    }
    let ring: Vec<Point> = trace_outer_boundary(region)
        .into_iter()
        .map(|(x, y)| Point::new(x as f64, y as f64))
        .collect();
    let corners = drop_collinear(ring.clone());
    let simplified = simplify_ring(&corners, CONTOUR_TOLERANCE);
    if simplified.len() >= 3 {
        if let Ok(p) = Polygon::new(simplified) {
            return Ok(p);
        }
    }
    min_area_rect(&ring).ok_or_else(|| Error::Domain("degenerate region".into()))
}

/// Sutherland-Hodgman clip against `[0, w] x [0, h]`.
fn clip_to_bounds(poly: &Polygon, w: f64, h: f64) -> Vec<Point> {
    let mut pts = poly.vertices().to_vec();
    // (is x axis, limit, keep values >= limit)
    let planes = [(true, 0.0, true), (true, w, false), (false, 0.0, true), (false, h, false)];
    for (is_x, limit, lower) in planes {
        let coord = |p: Point| if is_x { p.x } else { p.y };
        let inside = |p: Point| if lower { coord(p) >= limit } else { coord(p) <= limit };
        let mut out = Vec::with_capacity(pts.len() + 2);
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            let (ia, ib) = (inside(a), inside(b));
            if ia {
                out.push(a);
            }
            if ia != ib {
                let t = (limit - coord(a)) / (coord(b) - coord(a));
                let mut x = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
                // land exactly on the clip line
                if is_x {
                    x.x = limit;
                } else {
                    x.y = limit;
                }
                out.push(x);
            }
        }
        pts = out;
        if pts.is_empty() {
            break;
        }
    }
    pts.dedup();
    while pts.len() > 1 && pts[0] == pts[pts.len() - 1] {
        pts.pop();
    }
    pts
}

pub fn form_boxes(p_map: &FloatMap, cfg: &PostprocessConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let (h, w) = p_map.shape();
    let bin = standard_binarize(p_map, cfg.bin_thresh);
    let mut dets = Vec::new();
    for region in connected_components(&bin) {
        if region.len() < cfg.min_region_px.max(1) {
            continue;
        }
        let score = region.pixels.iter().map(|&(r, c)| p_map.get(r, c)).sum::<f64>() / region.len() as f64;
        if score < cfg.score_thresh {
            continue;
        }
        let shrunk = region_to_polygon(&region)?;
        let d = geometry::unclip_offset(&shrunk, cfg.unclip_ratio);
        let Some(grown) = geometry::offset(&shrunk, d).into_iter().next() else {
            continue;
        };
        let clipped = drop_collinear(clip_to_bounds(&grown, w as f64, h as f64));
        let polygon = match Polygon::new(clipped.clone()) {
            Ok(p) => p,
            Err(_) => match min_area_rect(&clipped) {
                Some(p) => p,
                None => continue,
            },
        };
        dets.push(Detection {
            polygon,
            score: score.clamp(0.0, 1.0),
        });
    }
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    dets.truncate(cfg.max_detections);
    Ok(dets)
}

/// One `score;x1,y1,...` line per detection, score printed `%.4f`.
pub fn format_detections(dets: &[Detection]) -> String {
    dets.iter()
        .map(|d| format!("{};{}\n", fmt_f(d.score, 4), d.polygon))
        .collect()
}

/// Reads detection lines; lines without a `score;` prefix get score 1.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>> {
    Ok(geometry::parse_scored_polygons(text)?
        .into_iter()
        .map(|(s, polygon)| Detection {
            polygon,
            score: s.unwrap_or(1.0),
        })
        .collect())
}
