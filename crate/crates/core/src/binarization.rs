//! Standard and differentiable binarization, and closed-form derivatives of
//! the per-pixel BCE terms with and without the DB step.
//!
//! Notation: `x = P - T` is the DB input, `y` a probability, `v` a
//! pre-sigmoid logit. `pos`/`neg` refer to the loss term for a positive
//! (`-ln y`) or negative (`-ln(1 - y)`) pixel.

use crate::error::{Error, Result};
use crate::fmt::fmt_g;
use crate::map::FloatMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbParams {
    pub k: f64,
}

impl Default for DbParams {
    fn default() -> Self {
        Self { k: 50.0 }
    }
}

impl DbParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("amplifying factor k = {k} must be positive")));
        }
        Ok(Self { k })
    }
}

/// Logistic function without overflow for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    let r = 1.0 / (1.0 + e);
    if z >= 0.0 {
        r
    } else {
        e * r
    }
}

/// `ln(1 + e^z)`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// 1 where `P >= t`, else 0.
pub fn standard_binarize(p_map: &FloatMap, t: f64) -> FloatMap {
    p_map.map(|p| if p >= t { 1.0 } else { 0.0 })
}

/// Approximate binary map `1 / (1 + e^{-k (P - T)})`.
pub fn db_forward(p_map: &FloatMap, t_map: &FloatMap, k: f64) -> Result<FloatMap> {
    p_map.zip_map(t_map, |p, t| sigmoid(k * (p - t)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchGrads {
    pub pos: f64,
    pub neg: f64,
}

/// Derivatives of `-ln B` and `-ln(1 - B)` with respect to `x` where
/// `B = sigmoid(k x)`; bounded in magnitude by `k`.
pub fn db_loss_grads(x: f64, k: f64) -> BranchGrads {
    BranchGrads {
        pos: -k * sigmoid(-k * x),
        neg: k * sigmoid(k * x),
    }
}

/// Derivatives of `-ln y` and `-ln(1 - y)` with respect to `y`; unbounded
/// as `y` approaches 0 or 1.
pub fn bce_logit_grads(y: f64) -> Result<BranchGrads> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("probability {y} must lie strictly inside (0, 1)")));
    }
    Ok(BranchGrads {
        pos: -1.0 / y,
        neg: 1.0 / (1.0 - y),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidChainGrads {
    /// `d/dv` of the plain BCE terms at `y = sigmoid(v)`.
    pub baseline: BranchGrads,
    /// `d/dv` of the DB terms at `x = sigmoid(v) - t`, by the chain rule.
    pub db: BranchGrads,
    /// The commonly quoted closed forms
    /// `-k e^{-kx - v} / ((1 + e^{-kv})^2 (1 + e^{-kx}))` and
    /// `k / (1 + e^{-kv})`. They do not equal the derivative of the composed
    /// loss (see `chain_rule_and_closed_form_disagree`) and are kept only to
    /// tabulate the published curves.
    pub db_closed_form: BranchGrads,
}

pub fn sigmoid_chain_grads(v: f64, k: f64, t: f64) -> SigmoidChainGrads {
    let y = sigmoid(v);
    // sigmoid'(v) = sigmoid(v) sigmoid(-v)
    let dy = y * sigmoid(-v);
    let x = y - t;
    let outer = db_loss_grads(x, k);
    let log_pos = k.ln() - k * x - v - 2.0 * softplus(-k * v) - softplus(-k * x);
    SigmoidChainGrads {
        baseline: BranchGrads {
            pos: -sigmoid(-v),
            neg: y,
        },
        db: BranchGrads {
            pos: outer.pos * dy,
            neg: outer.neg * dy,
        },
        db_closed_form: BranchGrads {
            pos: -log_pos.exp(),
            neg: k * sigmoid(k * v),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

pub const CURVE_COLUMNS: [&str; 16] = [
    "x",
    "step",
    "db",
    "y",
    "bce_d_pos",
    "bce_d_neg",
    "db_d_pos",
    "db_d_neg",
    "bce_sig_d_pos",
    "bce_sig_d_neg",
    "db_sig_d_pos",
    "db_sig_d_neg",
    "db_sig_closed_d_pos",
    "db_sig_closed_d_neg",
    "db_sig_x",
    "db_sig_value",
];

impl CurveTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV with a header row, `%.9g` values and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_g(v, 9)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Samples every derivative family over `samples` evenly spaced inputs in
/// `[lo, hi]`.
///
/// The input column doubles as `x = P - T` for the step/DB curves, and as
/// the logit `v` for the sigmoid-composed columns. The plain-BCE columns
/// are evaluated at `y = sigmoid(input)` so the table stays finite.
pub fn emit_derivative_curves(k: f64, t: f64, lo: f64, hi: f64, samples: usize) -> Result<CurveTable> {
    if samples < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {samples}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("invalid range [{lo}, {hi}]")));
    }
    DbParams::new(k)?;
    let rows = (0..samples)
        .map(|i| {
            let s = if i + 1 == samples {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            };
            let y = sigmoid(s);
            let bce = BranchGrads {
                pos: -1.0 / y,
                neg: 1.0 / (1.0 - y),
            };
            let db = db_loss_grads(s, k);
            let sc = sigmoid_chain_grads(s, k, t);
            let sig_x = y - t;
            vec![
                s,
                if s >= 0.0 { 1.0 } else { 0.0 },
                sigmoid(k * s),
                y,
                bce.pos,
                bce.neg,
                db.pos,
                db.neg,
                sc.baseline.pos,
                sc.baseline.neg,
                sc.db.pos,
                sc.db.neg,
                sc.db_closed_form.pos,
                sc.db_closed_form.neg,
                sig_x,
                sigmoid(k * sig_x),
            ]
        })
        .collect();
    Ok(CurveTable {
        columns: CURVE_COLUMNS.to_vec(),
        rows,
    })
}
