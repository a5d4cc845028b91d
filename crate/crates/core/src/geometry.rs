//! Polygon measurements, signed offsetting and point/segment distances.
//!
//! Offsetting translates every edge along its outward normal, joins
//! neighbouring edges with miters (bevels past a 2x miter limit), then
//! splits the raw offset ring at its self-intersections and keeps only the
//! loops that are counter-clockwise and lie at least `|delta|` away from the
//! source boundary. That is enough to reproduce clipping-library behaviour on
//! the convex and mildly concave polygons used for text annotation,
//! including neck splits when shrinking.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// A simple polygon stored counter-clockwise, i.e. with positive shoelace
/// area.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates and orients `vertices`. Clockwise input is reversed.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("{n} vertices, need at least 3")));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite coordinate".into()));
        }
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::InvalidPolygon(format!("duplicate consecutive vertex at {i}")));
            }
        }
        let signed = signed_area(&vertices);
        let scale = bbox_extent(&vertices).max(1e-300);
        if signed.abs() <= 1e-12 * scale * scale {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidPolygon("self-intersecting".into()));
        }
        let mut vertices = vertices;
        if signed < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| c.into()).collect())
    }

    /// Axis-aligned rectangle with corners `(x0, y0)` and `(x1, y1)`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect(),
        }
    }

    /// Even-odd containment; points on the boundary count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) <= 1e-9 {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the closest edge.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for Polygon {
    /// Shared polygon text format: `x1,y1,x2,y2,...`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.vertices.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    let twice: f64 = (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum();
    0.5 * twice
}

fn bbox_extent(v: &[Point]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in v {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    (x1 - x0).max(y1 - y0)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching included.
fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Index pairs `(i, j)`, `i < j`, of ring edges whose bounding boxes
/// overlap, in ascending order.
fn overlapping_edge_pairs(v: &[Point]) -> Vec<(usize, usize)> {
    let n = v.len();
    let boxes: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0).then(a.cmp(&b)));
    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].0 > boxes[i].1 {
                break;
            }
            if boxes[j].2 <= boxes[i].3 && boxes[i].2 <= boxes[j].3 {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn is_simple(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // adjacent edge folding back over this one
        let c = v[(i + 2) % n];
        if orient(a, b, c) == 0.0 && b.sub(a).dot(c.sub(b)) < 0.0 {
            return false;
        }
    }
    overlapping_edge_pairs(v).into_iter().all(|(i, j)| {
        j < i + 2 || (i == 0 && j == n - 1) || !segments_touch(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])
    })
}

/// Shoelace area; non-negative because polygons are stored CCW.
pub fn area(poly: &Polygon) -> f64 {
    signed_area(&poly.vertices)
}

pub fn perimeter(poly: &Polygon) -> f64 {
    poly.edges().map(|(a, b)| a.distance(b)).sum()
}

/// Shrink distance `A(1 - r^2) / L` used for probability-map labels.
pub fn shrink_offset(poly: &Polygon, r: f64) -> f64 {
    area(poly) * (1.0 - r * r) / perimeter(poly)
}

/// Dilation distance `A' r' / L'` used to restore detected shrunk regions.
pub fn unclip_offset(poly: &Polygon, r_prime: f64) -> f64 {
    area(poly) * r_prime / perimeter(poly)
}

/// Euclidean distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let ap = p.sub(a);
    let t = ap.dot(ab) / len2;
    if t <= 0.0 {
        p.distance(a)
    } else if t >= 1.0 {
        p.distance(b)
    } else {
        ab.cross(ap).abs() / len2.sqrt()
    }
}

/// Offsets `poly` by `delta` pixels: negative shrinks, positive dilates.
///
/// Shrinking may return no polygon (collapsed) or several (split at
/// necks). Dilating returns exactly one.
pub fn offset(poly: &Polygon, delta: f64) -> Vec<Polygon> {
    if delta == 0.0 {
        return vec![poly.clone()];
    }
    let raw = raw_offset_ring(poly, delta);
    let tol = 1e-7 * delta.abs().max(1.0);
    let min_area = 1e-9 * delta.abs().max(1.0).powi(2);
    let mut loops: Vec<Polygon> = split_loops(&raw)
        .into_iter()
        .filter(|l| l.len() >= 3 && signed_area(l) > min_area)
        .filter(|l| {
            l.iter().all(|&p| poly.boundary_distance(p) >= delta.abs() - tol)
                && (delta > 0.0 || l.iter().all(|&p| poly.contains(p)))
        })
        .filter_map(|l| Polygon::new(dedup_ring(l, tol)).ok())
        .collect();
    if delta > 0.0 && loops.len() > 1 {
        let keep = loops
            .iter()
            .enumerate()
            .max_by(|a, b| area(a.1).total_cmp(&area(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        loops = vec![loops.swap_remove(keep)];
    }
    loops
}

fn raw_offset_ring(poly: &Polygon, delta: f64) -> Vec<Point> {
    let v = &poly.vertices;
    let n = v.len();
    let dirs: Vec<Point> = (0..n).map(|i| v[(i + 1) % n].sub(v[i])).collect();
    let normals: Vec<Point> = dirs
        .iter()
        .map(|d| {
            let len = d.norm();
            // outward for positive shoelace orientation
            Point::new(d.y / len, -d.x / len)
        })
        .collect();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let n1 = normals[prev];
        let n2 = normals[i];
        let p = v[i];
        let p1 = p.add(n1.scale(delta));
        let p2 = p.add(n2.scale(delta));
        let c = n1.dot(n2);
        let turn = dirs[prev].cross(dirs[i]);
        if turn.abs() <= 1e-12 * dirs[prev].norm() * dirs[i].norm() && c > 0.0 {
            out.push(p1);
            continue;
        }
        let convex = turn > 0.0;
        let gap_side = convex == (delta > 0.0);
        if c >= -0.5 {
            out.push(p.add(n1.add(n2).scale(delta / (1.0 + c))));
        } else if gap_side {
            out.push(p1);
            out.push(p2);
        } else {
            out.push(p1);
            out.push(p);
            out.push(p2);
        }
    }
    dedup_ring(out, 0.0)
}

fn dedup_ring(mut ring: Vec<Point>, tol: f64) -> Vec<Point> {
    ring.dedup_by(|a, b| a.distance(*b) <= tol);
    while ring.len() > 1 && ring[0].distance(ring[ring.len() - 1]) <= tol {
        ring.pop();
    }
    ring
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Splits a closed, possibly self-intersecting ring into loops that do not
/// revisit any node.
fn split_loops(ring: &[Point]) -> Vec<Vec<Point>> {
    let n = ring.len();
    if n < 3 {
        return Vec::new();
    }
    const T_EPS: f64 = 1e-12;
    // per edge: (parameter, node id, point)
    let mut cuts: Vec<Vec<(f64, usize, Point)>> = vec![Vec::new(); n];
    let mut uf = UnionFind((0..n).collect());
    let mut points: Vec<Point> = ring.to_vec();

    for (i, j) in overlapping_edge_pairs(ring) {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let r = b.sub(a);
            let s = d.sub(c);
            let denom = r.cross(s);
            if denom == 0.0 {
                continue;
            }
            let qp = c.sub(a);
            let t = qp.cross(s) / denom;
            let u = qp.cross(r) / denom;
            if !(-T_EPS..=1.0 + T_EPS).contains(&t) || !(-T_EPS..=1.0 + T_EPS).contains(&u) {
                continue;
            }
            let id = points.len();
            let x = a.add(r.scale(t));
            points.push(x);
            uf.0.push(id);
            let place = |edge: usize, param: f64, uf: &mut UnionFind, cuts: &mut Vec<Vec<(f64, usize, Point)>>| {
                if param <= T_EPS {
                    uf.union(id, edge);
                } else if param >= 1.0 - T_EPS {
                    uf.union(id, (edge + 1) % n);
                } else {
                    cuts[edge].push((param, id, x));
                }
            };
            place(i, t, &mut uf, &mut cuts);
            place(j, u, &mut uf, &mut cuts);
        }
    }

    let mut seq: Vec<(usize, Point)> = Vec::with_capacity(points.len() * 2);
    for i in 0..n {
        seq.push((i, ring[i]));
        let mut c = std::mem::take(&mut cuts[i]);
        c.sort_by(|x, y| x.0.total_cmp(&y.0));
        seq.extend(c.into_iter().map(|(_, id, p)| (id, p)));
    }
    let mut resolved: Vec<(usize, Point)> = seq.into_iter().map(|(id, p)| (uf.find(id), p)).collect();
    resolved.dedup_by_key(|e| e.0);

    let mut loops = Vec::new();
    let mut stack: Vec<(usize, Point)> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    for (id, p) in resolved {
        if let Some(&j) = pos.get(&id) {
            let tail: Vec<(usize, Point)> = stack.drain(j + 1..).collect();
            for (tid, _) in &tail {
                pos.remove(tid);
            }
            let mut lp = vec![stack[j].1];
            lp.extend(tail.into_iter().map(|e| e.1));
            loops.push(lp);
        } else {
            pos.insert(id, stack.len());
            stack.push((id, p));
        }
    }
    loops.push(stack.into_iter().map(|e| e.1).collect());
    loops
}

/// Parses the shared polygon text format. A `score;` prefix, as written by
/// detection output, is accepted and ignored.
pub fn parse_polygons(text: &str) -> Result<Vec<Polygon>> {
    parse_scored_polygons(text).map(|v| v.into_iter().map(|(_, p)| p).collect())
}

/// Like [`parse_polygons`] but returns the optional `score;` prefix.
pub fn parse_scored_polygons(text: &str) -> Result<Vec<(Option<f64>, Polygon)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: ln + 1, msg };
        let (score, coords) = match line.split_once(';') {
            Some((s, rest)) => (
                Some(s.trim().parse::<f64>().map_err(|e| perr(format!("bad score {s:?}: {e}")))?),
                rest,
            ),
            None => (None, line),
        };
        let vals = coords
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| perr(format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() % 2 != 0 || vals.len() < 6 {
            return Err(perr(format!("expected an even count of at least 6 numbers, got {}", vals.len())));
        }
        let pts = vals.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        let poly = Polygon::new(pts).map_err(|e| perr(e.to_string()))?;
        out.push((score, poly));
    }
    Ok(out)
}

pub fn format_polygons(polys: &[Polygon]) -> String {
    polys.iter().map(|p| format!("{p}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(s: f64) -> Polygon {
        Polygon::rect(0.0, 0.0, s, s).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn area_and_perimeter() {
        assert_eq!(area(&square(1.0)), 1.0);
        assert_eq!(area(&square(10.0)), 100.0);
        assert_eq!(perimeter(&square(1.0)), 4.0);
        assert_eq!(perimeter(&square(10.0)), 40.0);
        let tri = Polygon::from_coords(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]).unwrap();
        assert_eq!(perimeter(&tri), 12.0);
        assert_eq!(area(&tri), 6.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).is_err());
        // bow-tie
        assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(Polygon::from_coords(&[(0.0, 0.0), (f64::NAN, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let cw = Polygon::from_coords(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(area(&cw), 1.0);
        assert_eq!(cw.vertices()[0], Point::new(1.0, 0.0));
    }

    #[test]
    fn offset_distances() {
        assert!(close(shrink_offset(&square(10.0), 0.4), 2.1));
        assert!(close(shrink_offset(&square(1.0), 0.4), 0.21));
        assert!(shrink_offset(&square(10.0), 1.0 - 1e-9) < 1e-7);
        assert!(close(unclip_offset(&square(5.8), 1.5), 2.175));
        assert!(close(unclip_offset(&square(10.0), 1.5), 3.75));
        assert_eq!(unclip_offset(&square(10.0), 0.0), 0.0);
    }

    #[test]
    fn segment_distance() {
        let (a, b) = (Point::new(-1.0, 0.0), Point::new(1.0, 0.0));
        assert_eq!(point_segment_distance(Point::new(0.0, 1.0), a, b), 1.0);
        assert_eq!(point_segment_distance(Point::new(2.0, 0.0), a, b), 1.0);
        assert_eq!(point_segment_distance(Point::new(0.3, 0.0), a, b), 0.0);
    }

    #[test]
    fn square_shrink_is_exact() {
        let out = offset(&square(10.0), -2.1);
        assert_eq!(out.len(), 1);
        let expect = Polygon::rect(2.1, 2.1, 10.0 - 2.1, 10.0 - 2.1).unwrap();
        assert_eq!(out[0], expect);
    }

    #[test]
    fn zero_offset_is_identity() {
        let p = Polygon::from_coords(&[(0.0, 0.0), (5.0, 1.0), (4.0, 6.0), (-1.0, 3.0)]).unwrap();
        assert_eq!(offset(&p, 0.0), vec![p]);
    }

    #[test]
    fn shrink_past_inradius_collapses() {
        assert!(offset(&square(10.0), -6.0).is_empty());
        assert!(offset(&Polygon::rect(0.0, 0.0, 10.0, 4.0).unwrap(), -2.5).is_empty());
    }

    #[test]
    fn dilate_square() {
        let out = offset(&square(10.0), 1.0);
        assert_eq!(out.len(), 1);
        assert!(close(area(&out[0]), 144.0));
    }

    #[test]
    fn dumbbell_splits_at_neck() {
        // Two 10x10 squares joined by a 2 px high bridge.
        let p = Polygon::from_coords(&[
            (0.0, 0.0),
            (10.0, 0.0),
            (10.0, 4.0),
            (20.0, 4.0),
            (20.0, 0.0),
            (30.0, 0.0),
            (30.0, 10.0),
            (20.0, 10.0),
            (20.0, 6.0),
            (10.0, 6.0),
            (10.0, 10.0),
            (0.0, 10.0),
        ])
        .unwrap();
        let out = offset(&p, -1.5);
        assert_eq!(out.len(), 2);
        for q in &out {
            assert!(close(area(q), 49.0), "area {}", area(q));
        }
        let grown = offset(&p, 1.5);
        assert_eq!(grown.len(), 1);
    }

    #[test]
    fn concave_dilation_fills_notch() {
        // U shape whose 2 px notch closes under a 1.5 px dilation.
        let u = Polygon::from_coords(&[
            (0.0, 0.0),
            (10.0, 0.0),
            (10.0, 10.0),
            (6.0, 10.0),
            (6.0, 3.0),
            (4.0, 3.0),
            (4.0, 10.0),
            (0.0, 10.0),
        ])
        .unwrap();
        let out = offset(&u, 1.5);
        assert_eq!(out.len(), 1);
        assert!(out[0].contains(Point::new(5.0, 9.0)));
    }

    #[test]
    fn parse_format() {
        let text = "# header\n0,0,1,0,1,1\n\n0.9000;0,0,2,0,2,2,0,2\n";
        let polys = parse_scored_polygons(text).unwrap();
        assert_eq!(polys.len(), 2);
        assert_eq!(polys[0].0, None);
        assert_eq!(polys[1].0, Some(0.9));
        assert_eq!(format_polygons(&[polys[0].1.clone()]), "0,0,1,0,1,1\n");
        assert!(matches!(parse_polygons("0,0,1,0,1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_polygons("\n0,0,a,0,1,1"), Err(Error::Parse { line: 2, .. })));
    }
}
