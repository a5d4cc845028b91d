use dbcore::eval::{evaluate, polygon_iou};
use dbcore::geometry::Polygon;
use dbcore::postprocess::Detection;
use proptest::prelude::*;

fn quad() -> impl Strategy<Value = Polygon> {
    (0.0f64..40.0, 0.0f64..40.0, 3.0f64..15.0, 3.0f64..15.0, proptest::collection::vec(-1.0f64..1.0, 4)).prop_map(
        |(x, y, w, h, j)| {
            Polygon::from_coords(&[(x + j[0], y), (x + w, y + j[1]), (x + w + j[2], y + h), (x, y + h + j[3])]).unwrap()
        },
    )
}

fn scene() -> impl Strategy<Value = (Vec<Detection>, Vec<Polygon>)> {
    (
        proptest::collection::vec((quad(), 0.0f64..1.0), 0..6),
        proptest::collection::vec(quad(), 0..6),
    )
        .prop_map(|(d, g)| {
            let dets = d.into_iter().map(|(polygon, score)| Detection { polygon, score }).collect();
            (dets, g)
        })
}

/// Same grid as the evaluator, but each sample tested with
/// `Polygon::contains` instead of scanline spans.
fn brute_iou(a: &Polygon, b: &Polygon, s: usize) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    let (x0, y0) = (ax0.min(bx0), ay0.min(by0));
    let (x1, y1) = (ax1.max(bx1), ay1.max(by1));
    let sf = s as f64;
    let nx = (((x1 - x0) * sf).ceil() as usize).max(1);
    let ny = (((y1 - y0) * sf).ceil() as usize).max(1);
    let (mut i, mut u) = (0usize, 0usize);
    for r in 0..ny {
        for c in 0..nx {
            let p = dbcore::geometry::Point::new(x0 + (c as f64 + 0.5) / sf, y0 + (r as f64 + 0.5) / sf);
            let (ina, inb) = (a.contains(p), b.contains(p));
            i += (ina && inb) as usize;
            u += (ina || inb) as usize;
        }
    }
    if u == 0 {
        0.0
    } else {
        i as f64 / u as f64
    }
}

proptest! {
    #[test]
    fn metrics_in_unit_range((dets, gts) in scene()) {
        let r = evaluate(&dets, &gts, 0.5);
        for v in [r.precision, r.recall, r.f_measure] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let p_r = r.precision + r.recall;
        let f = if p_r > 0.0 { 2.0 * r.precision * r.recall / p_r } else { 0.0 };
        prop_assert_eq!(r.f_measure, f);
    }

    #[test]
    fn false_positive_never_helps((dets, gts) in scene(), fp_score in 0.0f64..1.0) {
        // with no ground truth the empty-case convention decides recall; see
        // `fp_on_empty_scene_drops_convention`
        prop_assume!(!gts.is_empty());
        let base = evaluate(&dets, &gts, 0.5);
        let mut more = dets.clone();
        // far from every generated polygon
        more.push(Detection { polygon: Polygon::rect(500.0, 500.0, 510.0, 510.0).unwrap(), score: fp_score });
        let r = evaluate(&more, &gts, 0.5);
        prop_assert!(r.precision <= base.precision);
        prop_assert_eq!(r.recall, base.recall);
    }

    #[test]
    fn gt_order_irrelevant((dets, gts) in scene()) {
        let mut rev = gts.clone();
        rev.reverse();
        let (a, b) = (evaluate(&dets, &gts, 0.5), evaluate(&dets, &rev, 0.5));
        prop_assert_eq!((a.precision, a.recall, a.f_measure), (b.precision, b.recall, b.f_measure));
    }

    #[test]
    fn iou_symmetric_and_matches_brute_force(a in quad(), b in quad()) {
        let ab = polygon_iou(&a, &b, 4);
        prop_assert!((ab - polygon_iou(&b, &a, 4)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - brute_iou(&a, &b, 4)).abs() <= 0.01);
    }
}

#[test]
fn fp_on_empty_scene_drops_convention() {
    let fp = Detection { polygon: Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap(), score: 0.5 };
    let r = evaluate(&[], &[], 0.5);
    assert_eq!((r.precision, r.recall), (1.0, 1.0));
    let r = evaluate(&[fp], &[], 0.5);
    assert_eq!((r.precision, r.recall), (0.0, 0.0));
}

#[test]
fn iou_grid_error_is_small() {
    // [0, 10]^2 vs [2.5, 12.5]^2: 56.25 / 143.75
    let a = Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap();
    let b = Polygon::rect(2.5, 2.5, 12.5, 12.5).unwrap();
    assert!((polygon_iou(&a, &b, 4) - 56.25 / 143.75).abs() < 0.01);
}

#[test]
fn low_iou_is_not_a_match() {
    let gts = vec![Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap()];
    let dets = vec![Detection { polygon: Polygon::rect(6.0, 0.0, 16.0, 10.0).unwrap(), score: 0.9 }];
    let r = evaluate(&dets, &gts, 0.5);
    assert_eq!((r.precision, r.recall, r.f_measure), (0.0, 0.0, 0.0));
    assert_eq!(r.to_tsv(), "0.0000\t0.0000\t0.0000");
}
