//! Single-match IoU evaluation: precision, recall and F-measure.

use crate::fmt::fmt_f;
use crate::geometry::Polygon;
use crate::postprocess::Detection;

pub const DEFAULT_GRID_SCALE: usize = 4;

/// Rasterized `|A & B| / |A | B|` on a grid over the joint bounding box with
/// `grid_scale` samples per pixel side.
pub fn polygon_iou(a: &Polygon, b: &Polygon, grid_scale: usize) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    if ax1 < bx0 || bx1 < ax0 || ay1 < by0 || by1 < ay0 {
        return 0.0;
    }
    let (x0, y0) = (ax0.min(bx0), ay0.min(by0));
    let (x1, y1) = (ax1.max(bx1), ay1.max(by1));
    let s = grid_scale.max(1) as f64;
    let nx = (((x1 - x0) * s).ceil() as usize).max(1);
    let ny = (((y1 - y0) * s).ceil() as usize).max(1);
    let (mut row_a, mut row_b) = (vec![false; nx], vec![false; nx]);
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..ny {
        let y = y0 + (i as f64 + 0.5) / s;
        fill_row(a, y, x0, s, &mut row_a);
        fill_row(b, y, x0, s, &mut row_b);
        for (&pa, &pb) in row_a.iter().zip(&row_b) {
            inter += (pa && pb) as usize;
            union += (pa || pb) as usize;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Marks the samples `x0 + (j + 0.5) / s` of one grid row that lie inside
/// `poly` (even-odd crossings of the line at height `y`).
fn fill_row(poly: &Polygon, y: f64, x0: f64, s: f64, row: &mut [bool]) {
    row.fill(false);
    let mut xs: Vec<f64> = poly
        .edges()
        .filter(|(a, b)| (a.y <= y) != (b.y <= y))
        .map(|(a, b)| a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y))
        .collect();
    xs.sort_by(f64::total_cmp);
    for span in xs.chunks_exact(2) {
        let lo = ((span[0] - x0) * s - 0.5).ceil().max(0.0) as usize;
        let hi = ((span[1] - x0) * s - 0.5).floor();
        if hi < 0.0 {
            continue;
        }
        for cell in row.iter_mut().take(hi as usize + 1).skip(lo) {
            *cell = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub matches: Vec<Match>,
    pub iou_thresh: f64,
}

impl EvalReport {
    /// `P<TAB>R<TAB>F`, each `%.4f`.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}",
            fmt_f(self.precision, 4),
            fmt_f(self.recall, 4),
            fmt_f(self.f_measure, 4)
        )
    }
}

fn ratio(num: usize, den: usize, both_empty: bool) -> f64 {
    match den {
        0 if both_empty => 1.0,
        0 => 0.0,
        _ => num as f64 / den as f64,
    }
}

/// Greedy matching in descending score order: each detection takes the
/// unmatched ground truth with the highest IoU at or above `iou_thresh`.
pub fn evaluate(dets: &[Detection], gts: &[Polygon], iou_thresh: f64) -> EvalReport {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = polygon_iou(&dets[d].polygon, gt, DEFAULT_GRID_SCALE);
            if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            taken[g] = true;
            matches.push(Match {
                detection: d,
                ground_truth: g,
                iou,
            });
        }
    }
    let tp = matches.len();
    let both_empty = dets.is_empty() && gts.is_empty();
    let precision = ratio(tp, dets.len(), both_empty);
    let recall = ratio(tp, gts.len(), both_empty);
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalReport {
        precision,
        recall,
        f_measure,
        matches,
        iou_thresh,
    }
}
