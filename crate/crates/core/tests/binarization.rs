use dbcore::binarization::{
    bce_logit_grads, db_forward, db_loss_grads, emit_derivative_curves, sigmoid_chain_grads, standard_binarize,
};
use dbcore::map::FloatMap;
use proptest::prelude::*;

fn one(v: f64) -> FloatMap {
    FloatMap::from_vec(1, 1, vec![v]).unwrap()
}

fn db1(p: f64, t: f64, k: f64) -> f64 {
    db_forward(&one(p), &one(t), k).unwrap().data()[0]
}

// Loss expressions written out directly; ln(1 + e^z) in a stable form.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn db_pos(x: f64, k: f64) -> f64 {
    softplus(-k * x)
}

fn db_neg(x: f64, k: f64) -> f64 {
    softplus(k * x)
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

proptest! {
    #[test]
    fn increasing_in_p_decreasing_in_t(p in 0.0f64..1.0, dp in 1e-4f64..0.1, t in 0.0f64..1.0, k in 1.0f64..100.0) {
        // strict only while the output is not rounded to exactly 0 or 1
        prop_assume!(k * (p - t - dp).abs().max((p + dp - t).abs()) <= 30.0);
        prop_assert!(db1(p + dp, t, k) > db1(p, t, k));
        prop_assert!(db1(p, t + dp, k) < db1(p, t, k));
    }

    #[test]
    fn odd_symmetry(p in 0.0f64..1.0, t in 0.0f64..1.0, k in 1.0f64..100.0) {
        prop_assert!((db1(p, t, k) + db1(2.0 * t - p, t, k) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn step_convergence(t in 0.05f64..0.95, x in 0.05f64..1.0, neg in any::<bool>(), k in 1.0f64..200.0) {
        let p = if neg { t - x } else { t + x };
        let step = standard_binarize(&one(p), t).data()[0];
        // the realized gap, plus one unit of rounding in the output near 1
        let delta = (p - t).abs();
        prop_assert!((db1(p, t, k) - step).abs() <= (-k * delta).exp() + f64::EPSILON);
    }

    #[test]
    fn db_grads_match_fd_and_stay_bounded(x in -1.0f64..1.0, k in 1.0f64..100.0) {
        let g = db_loss_grads(x, k);
        let h = 1e-6 / k;
        prop_assert!(rel(g.pos, central(|x| db_pos(x, k), x, h)) <= 1e-5);
        prop_assert!(rel(g.neg, central(|x| db_neg(x, k), x, h)) <= 1e-5);
        prop_assert!(g.pos.abs() <= k && g.neg.abs() <= k);
    }

    #[test]
    fn baseline_grads_match_fd(y in 0.01f64..0.99) {
        let g = bce_logit_grads(y).unwrap();
        prop_assert!(rel(g.pos, central(|y| -y.ln(), y, 1e-7)) <= 1e-5);
        prop_assert!(rel(g.neg, central(|y| -(1.0 - y).ln(), y, 1e-7)) <= 1e-5);
    }

    #[test]
    fn chain_grads_match_fd(v in -6.0f64..6.0, t in 0.1f64..0.9) {
        let k = 50.0;
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let g = sigmoid_chain_grads(v, k, t);
        prop_assert!(rel(g.baseline.pos, central(|v| -s(v).ln(), v, 1e-6)) <= 1e-5);
        prop_assert!(rel(g.baseline.neg, central(|v| -(1.0 - s(v)).ln(), v, 1e-6)) <= 1e-5);
        prop_assert!(rel(g.db.pos, central(|v| db_pos(s(v) - t, k), v, 1e-7)) <= 1e-5);
        prop_assert!(rel(g.db.neg, central(|v| db_neg(s(v) - t, k), v, 1e-7)) <= 1e-5);
    }
}

#[test]
fn boundary_values() {
    let g = db_loss_grads(0.0, 50.0);
    assert_eq!((g.pos, g.neg), (-25.0, 25.0));
    let b = bce_logit_grads(0.5).unwrap();
    assert_eq!((b.pos, b.neg), (-2.0, 2.0));
    assert_eq!(g.neg / b.neg, 12.5);
    assert!(bce_logit_grads(1.0 - 1e-6).unwrap().neg > 1e6 - 1.0);
    assert!(bce_logit_grads(0.0).is_err());
    assert!(bce_logit_grads(1.0).is_err());
}

#[test]
fn no_overflow_at_large_k() {
    let g = db_loss_grads(1.0, 1e4);
    assert!(g.pos.is_finite() && g.neg.is_finite());
    assert_eq!(db1(1.0, 0.0, 1e4), 1.0);
    assert_eq!(db1(0.0, 1.0, 1e4), 0.0);
}

#[test]
fn closed_form_differs_from_chain_rule() {
    // at v = 0, t = 0.5: chain rule gives k sigmoid(0) sigmoid'(0) = k / 8,
    // the quoted closed form k sigmoid(k v) = k / 2
    let g = sigmoid_chain_grads(0.0, 50.0, 0.5);
    assert!((g.db.neg - 6.25).abs() < 1e-12);
    assert!((g.db_closed_form.neg - 25.0).abs() < 1e-12);
}

#[test]
fn curve_table() {
    let t = emit_derivative_curves(50.0, 0.5, -1.0, 1.0, 201).unwrap();
    assert_eq!(t.rows.len(), 201);
    let csv = t.to_csv();
    assert!(csv.starts_with(&t.columns.join(",")));
    assert!(csv.ends_with('\n'));
    assert!(emit_derivative_curves(50.0, 0.5, 1.0, -1.0, 10).is_err());
}
