use dbcore::geometry::offset;
use dbcore::labelgen::{instance_geometry, rasterize_into, LabelConfig};
use dbcore::map::FloatMap;
use dbcore::synth::{generate_scene, generate_suite, Scene, SceneSpec, ShapeKind, MARGIN_PX};
use proptest::prelude::*;

fn check_label_invariants(s: &Scene, cfg: &LabelConfig) {
    let mut want = FloatMap::zeros(s.height, s.width);
    for p in &s.polygons {
        let g = instance_geometry(p, cfg.shrink_ratio);
        for piece in &g.shrunk {
            rasterize_into(&mut want, piece);
            if let Some(d) = &g.dilated {
                for v in piece.vertices() {
                    assert!(d.contains(*v), "seed {}", s.seed);
                }
            }
        }
        assert_eq!(g.shrunk, offset(p, -g.offset));
    }
    assert_eq!(s.labels.prob_target, want, "seed {}", s.seed);
    for &v in s.labels.thresh_target.data() {
        assert!(v >= cfg.t_min && v <= cfg.t_max);
    }
}

fn shape_kind() -> impl Strategy<Value = ShapeKind> {
    prop_oneof![Just(ShapeKind::Rect), Just(ShapeKind::RotRect), Just(ShapeKind::CurvedBand)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scenes_are_deterministic(seed in any::<u64>(), kind in shape_kind()) {
        let mut spec = SceneSpec::new(seed, 64, 80, 4, kind);
        spec.features = Some((2, 4));
        let (a, b) = (generate_scene(&spec).unwrap(), generate_scene(&spec).unwrap());
        prop_assert_eq!(&a.polygons, &b.polygons);
        prop_assert_eq!(&a.labels, &b.labels);
        prop_assert_eq!(&a.noisy_prob, &b.noisy_prob);
        prop_assert_eq!(&a.stage_features, &b.stage_features);
    }

    #[test]
    fn placement_respects_margin_and_separation(seed in any::<u64>(), kind in shape_kind(), n in 0usize..8) {
        let s = generate_scene(&SceneSpec::new(seed, 96, 96, n, kind)).unwrap();
        prop_assert_eq!(s.polygons.len() + s.placement_shortfall, n);
        for p in &s.polygons {
            let (x0, y0, x1, y1) = p.bounds();
            prop_assert!(x0 >= MARGIN_PX && y0 >= MARGIN_PX && x1 <= 96.0 - MARGIN_PX && y1 <= 96.0 - MARGIN_PX);
        }
        // pairwise disjoint rasters
        let mut cover = vec![0u8; 96 * 96];
        for p in &s.polygons {
            let mut m = FloatMap::zeros(96, 96);
            rasterize_into(&mut m, p);
            for (c, &v) in cover.iter_mut().zip(m.data()) {
                *c += (v == 1.0) as u8;
            }
        }
        prop_assert!(cover.iter().all(|&c| c <= 1));
    }

    #[test]
    fn every_scene_passes_label_invariants(seed in any::<u64>(), kind in shape_kind()) {
        let spec = SceneSpec::new(seed, 96, 96, 5, kind);
        check_label_invariants(&generate_scene(&spec).unwrap(), &spec.labels);
    }
}

#[test]
fn noisy_map_and_features_shapes() {
    let mut spec = SceneSpec::new(3, 32, 48, 2, ShapeKind::Rect);
    spec.features = Some((3, 8));
    let s = generate_scene(&spec).unwrap();
    let noisy = s.noisy_prob.unwrap();
    assert_eq!(noisy.shape(), (32, 48));
    assert!(noisy.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let f = s.stage_features.unwrap();
    assert_eq!(f.len(), 3);
    assert!(f.iter().all(|t| t.shape() == [8, 32, 48]));
}

#[test]
fn suite_seeds_are_distinct_and_stable() {
    let t = SceneSpec::new(0, 64, 64, 3, ShapeKind::RotRect);
    let a = generate_suite(&t, 7, 4).unwrap();
    let b = generate_suite(&t, 7, 4).unwrap();
    let seeds: Vec<u64> = a.iter().map(|s| s.seed).collect();
    assert_eq!(seeds, vec![7000, 7001, 7002, 7003]);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.polygons, y.polygons);
    }
    assert_ne!(a[0].polygons, a[1].polygons);
}

#[test]
fn export_is_byte_identical() {
    let mut spec = SceneSpec::new(11, 40, 40, 2, ShapeKind::CurvedBand);
    spec.features = Some((2, 4));
    let s = generate_scene(&spec).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    s.export(d1.path()).unwrap();
    generate_scene(&spec).unwrap().export(d2.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(d1.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "manifest.txt"));
    assert!(names.iter().any(|n| n == "stage_1.f32map"));
    for n in names {
        assert_eq!(std::fs::read(d1.path().join(&n)).unwrap(), std::fs::read(d2.path().join(&n)).unwrap());
    }
}

#[test]
fn impossible_scale_rejected() {
    let mut spec = SceneSpec::new(0, 10, 10, 1, ShapeKind::Rect);
    spec.scale_range = (20.0, 30.0);
    assert!(generate_scene(&spec).is_err());
    spec.n_instances = 0;
    assert!(generate_scene(&spec).unwrap().polygons.is_empty());
}

#[test]
fn shape_names_parse() {
    assert_eq!("rect".parse::<ShapeKind>().unwrap(), ShapeKind::Rect);
    assert_eq!("rot_rect".parse::<ShapeKind>().unwrap(), ShapeKind::RotRect);
    assert_eq!("curved_band".parse::<ShapeKind>().unwrap(), ShapeKind::CurvedBand);
    assert!("circle".parse::<ShapeKind>().is_err());
}
