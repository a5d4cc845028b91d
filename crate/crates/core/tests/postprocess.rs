use dbcore::binarization::standard_binarize;
use dbcore::eval::polygon_iou;
use dbcore::geometry::{offset, shrink_offset, Polygon};
use dbcore::labelgen::rasterize;
use dbcore::map::FloatMap;
use dbcore::postprocess::{connected_components, form_boxes, format_detections, parse_detections, PostprocessConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use std::f64::consts::TAU;

/// Smooth random field in (0, 1): sum of a few blobs.
fn field(seed: u64, h: usize, w: usize) -> FloatMap {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..6))
        .map(|_| {
            (
                rng.random_range(-5.0..w as f64 + 5.0),
                rng.random_range(-5.0..h as f64 + 5.0),
                rng.random_range(2.0..8.0),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let mut m = FloatMap::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let v: f64 = blobs
                .iter()
                .map(|&(x, y, s, a)| a * (-((j as f64 - x).powi(2) + (i as f64 - y).powi(2)) / (2.0 * s * s)).exp())
                .sum();
            m.set(i, j, v.min(0.999));
        }
    }
    m
}

/// Near-isotropic convex polygon: vertices on a circle, small angle jitter.
fn round_poly() -> impl Strategy<Value = Polygon> {
    (8usize..=16, 10.0f64..25.0, 30.0f64..34.0, 30.0f64..34.0).prop_flat_map(|(n, r, cx, cy)| {
        proptest::collection::vec(-0.2f64..0.2, n).prop_map(move |jit| {
            let step = TAU / n as f64;
            let coords: Vec<(f64, f64)> = jit
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let a = (i as f64 + j) * step;
                    (cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            Polygon::from_coords(&coords).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detections_stay_in_bounds(seed in any::<u64>(), unclip in 1.0f64..3.0) {
        let (h, w) = (40, 56);
        let cfg = PostprocessConfig { unclip_ratio: unclip, score_thresh: 0.0, ..Default::default() };
        for d in form_boxes(&field(seed, h, w), &cfg).unwrap() {
            for v in d.polygon.vertices() {
                prop_assert!(v.x >= 0.0 && v.x <= w as f64 && v.y >= 0.0 && v.y <= h as f64);
            }
            prop_assert!((0.0..=1.0).contains(&d.score));
        }
    }

    #[test]
    fn raising_bin_thresh_shrinks_foreground(seed in any::<u64>(), lo in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let m = field(seed, 32, 32);
        let a = standard_binarize(&m, lo);
        let b = standard_binarize(&m, (lo + dt).min(1.0));
        let pix = |bin: &FloatMap| connected_components(bin).iter().flat_map(|r| r.pixels.clone()).collect::<std::collections::BTreeSet<_>>();
        let (pa, pb) = (pix(&a), pix(&b));
        prop_assert!(pb.is_subset(&pa));
    }

    #[test]
    fn raising_score_thresh_drops_detections(seed in any::<u64>(), lo in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let m = field(seed, 32, 32);
        let cfg = PostprocessConfig { score_thresh: lo, ..Default::default() };
        let a = form_boxes(&m, &cfg).unwrap();
        let b = form_boxes(&m, &PostprocessConfig { score_thresh: (lo + dt).min(1.0), ..cfg }).unwrap();
        prop_assert!(b.len() <= a.len());
    }

    #[test]
    fn deterministic(seed in any::<u64>()) {
        let m = field(seed, 32, 32);
        let cfg = PostprocessConfig::default();
        prop_assert_eq!(form_boxes(&m, &cfg).unwrap(), form_boxes(&m, &cfg).unwrap());
    }

    #[test]
    fn shrink_then_unclip_round_trip(p in round_poly()) {
        let d = shrink_offset(&p, 0.4);
        let shrunk = offset(&p, -d);
        prop_assert_eq!(shrunk.len(), 1);
        let m = rasterize(&shrunk[0], 64, 64);
        let dets = form_boxes(&m, &PostprocessConfig::default()).unwrap();
        prop_assert_eq!(dets.len(), 1);
        let iou = polygon_iou(&dets[0].polygon, &p, 4);
        prop_assert!(iou >= 0.85, "iou {}", iou);
    }
}

#[test]
fn square_end_to_end() {
    let sq = Polygon::rect(5.0, 5.0, 15.0, 15.0).unwrap();
    let shrunk = offset(&sq, -2.1);
    let m = rasterize(&shrunk[0], 20, 20);
    let dets = form_boxes(&m, &PostprocessConfig::default()).unwrap();
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].score, 1.0);
    assert!(polygon_iou(&dets[0].polygon, &sq, 4) >= 0.9);
}

#[test]
fn small_and_faint_regions_dropped() {
    let mut m = FloatMap::zeros(10, 10);
    m.set(1, 1, 0.9);
    m.set(1, 2, 0.9);
    for i in 5..9 {
        for j in 5..9 {
            m.set(i, j, 0.3);
        }
    }
    assert!(form_boxes(&m, &PostprocessConfig::default()).unwrap().is_empty());
    let cfg = PostprocessConfig { score_thresh: 0.2, ..Default::default() };
    assert_eq!(form_boxes(&m, &cfg).unwrap().len(), 1);
}

#[test]
fn diagonal_pixels_join_one_component() {
    let mut m = FloatMap::zeros(4, 4);
    for k in 0..4 {
        m.set(k, k, 1.0);
    }
    assert_eq!(connected_components(&m).len(), 1);
}

#[test]
fn max_detections_keeps_highest_scores() {
    let mut m = FloatMap::zeros(10, 30);
    for (c0, v) in [(1, 0.6), (11, 0.9), (21, 0.7)] {
        for i in 2..8 {
            for j in c0..c0 + 6 {
                m.set(i, j, v);
            }
        }
    }
    let cfg = PostprocessConfig { max_detections: 2, ..Default::default() };
    let dets = form_boxes(&m, &cfg).unwrap();
    assert_eq!(dets.len(), 2);
    // mean of 36 equal values, up to summation rounding
    assert!((dets[0].score - 0.9).abs() < 1e-12);
    assert!((dets[1].score - 0.7).abs() < 1e-12);
}

#[test]
fn detection_text_round_trip() {
    let m = field(3, 32, 32);
    let dets = form_boxes(&m, &PostprocessConfig { score_thresh: 0.0, ..Default::default() }).unwrap();
    let text = format_detections(&dets);
    let back = parse_detections(&text).unwrap();
    assert_eq!(back.len(), dets.len());
    assert_eq!(format_detections(&back), text);
}

#[test]
fn bad_config_rejected() {
    let m = FloatMap::zeros(4, 4);
    assert!(form_boxes(&m, &PostprocessConfig { bin_thresh: 1.5, ..Default::default() }).is_err());
    assert!(form_boxes(&m, &PostprocessConfig { unclip_ratio: 0.0, ..Default::default() }).is_err());
}
