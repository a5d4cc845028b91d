//! Training objective: hard-negative-mined BCE for the probability and
//! approximate binary maps, masked L1 for the threshold map, and their
//! weighted sum. All terms are means over their sampled or banded set.

use crate::error::{Error, Result};
use crate::map::FloatMap;

/// Negatives kept when an image has no positive pixels.
pub const EMPTY_IMAGE_NEGATIVES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub neg_ratio: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 10.0,
            neg_ratio: 3.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.neg_ratio > 0.0) {
            return Err(Error::Domain(format!("invalid loss weights {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedBce {
    pub loss: f64,
    /// d loss / d pred; zero outside the sampled set.
    pub grad: FloatMap,
    pub positives: usize,
    pub negatives_selected: usize,
}

impl MinedBce {
    pub fn sampled(&self) -> usize {
        self.positives + self.negatives_selected
    }
}

pub(crate) fn negatives_to_keep(n_pos: usize, n_neg: usize, neg_ratio: f64) -> usize {
    if n_pos == 0 {
        EMPTY_IMAGE_NEGATIVES.min(n_neg)
    } else {
        ((neg_ratio * n_pos as f64).floor() as usize).min(n_neg)
    }
}

/// Bit pattern of the `keep`-th largest negative and how many negatives equal
/// to it are kept. Negatives above the cutoff are all kept; ties at the
/// cutoff are filled in row-major order. Bit patterns of positive floats
/// order like the floats.
pub(crate) fn cutoff_and_ties(negatives: &mut [u64], keep: usize) -> (u64, usize) {
    match keep {
        0 => (u64::MAX, 0),
        k => {
            let n = negatives.len();
            let c = *negatives.select_nth_unstable(n - k).1;
            let above = negatives[n - k + 1..].iter().filter(|&&b| b > c).count();
            (c, k - above)
        }
    }
}

/// BCE over all masked positives plus the `floor(neg_ratio * positives)`
/// masked negatives with the highest predicted probability. Ties are broken
/// by row-major index so the selection is deterministic.
pub fn bce_hard_negative(pred: &FloatMap, target: &FloatMap, mask: &FloatMap, neg_ratio: f64) -> Result<MinedBce> {
    pred.check_same_shape(target)?;
    pred.check_same_shape(mask)?;
    if !(neg_ratio > 0.0) {
        return Err(Error::Domain(format!("negative ratio {neg_ratio} must be positive")));
    }
    let p = pred.data();
    let (m, y) = (mask.data(), target.data());
    let mut n_pos = 0usize;
    let mut negatives: Vec<u64> = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        if m[i] <= 0.5 {
            continue;
        }
        if !(p[i] > 0.0 && p[i] < 1.0) {
            return Err(Error::Domain(format!("prediction {} at pixel {i} not inside (0, 1)", p[i])));
        }
        if y[i] > 0.5 {
            n_pos += 1;
        } else {
            negatives.push(p[i].to_bits());
        }
    }
    let keep = negatives_to_keep(n_pos, negatives.len(), neg_ratio);
    let (cutoff, mut ties) = cutoff_and_ties(&mut negatives, keep);

    let mut grad = FloatMap::zeros(pred.height(), pred.width());
    let n = n_pos + keep;
    if n == 0 {
        return Ok(MinedBce {
            loss: 0.0,
            grad,
            positives: 0,
            negatives_selected: 0,
        });
    }
    let inv = 1.0 / n as f64;
    let g = grad.data_mut();
    let mut total = 0.0;
    // row-major summation order
    for i in 0..p.len() {
        if m[i] <= 0.5 {
            continue;
        }
        if y[i] > 0.5 {
            total -= p[i].ln();
            g[i] = -inv / p[i];
        } else {
            let b = p[i].to_bits();
            let take = b > cutoff || (b == cutoff && ties > 0);
            if b == cutoff && take {
                ties -= 1;
            }
            if take {
                total -= (-p[i]).ln_1p();
                g[i] = inv / (1.0 - p[i]);
            }
        }
    }
    Ok(MinedBce {
        loss: total * inv,
        grad,
        positives: n_pos,
        negatives_selected: keep,
    })
}

/// Mean absolute error over the band mask; subgradient 0 at exact fits.
pub fn threshold_l1(pred: &FloatMap, target: &FloatMap, band_mask: &FloatMap) -> Result<(f64, FloatMap)> {
    pred.check_same_shape(target)?;
    pred.check_same_shape(band_mask)?;
    let count = band_mask.data().iter().filter(|&&m| m > 0.5).count();
    let mut grad = FloatMap::zeros(pred.height(), pred.width());
    if count == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / count as f64;
    let mut total = 0.0;
    let pairs = pred.data().iter().zip(target.data()).zip(band_mask.data());
    for (g, ((&p, &y), &m)) in grad.data_mut().iter_mut().zip(pairs) {
        if m <= 0.5 {
            continue;
        }
        let d = p - y;
        total += d.abs();
        *g = if d > 0.0 {
            inv
        } else if d < 0.0 {
            -inv
        } else {
            0.0
        };
    }
    Ok((total * inv, grad))
}

pub fn total_loss(ls: f64, lb: f64, lt: f64, w: &LossWeights) -> f64 {
    ls + w.alpha * lb + w.beta * lt
}
