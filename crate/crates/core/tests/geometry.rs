use dbcore::geometry::{
    area, format_polygons, offset, parse_polygons, perimeter, shrink_offset, unclip_offset, Point, Polygon,
};
use proptest::prelude::*;
use std::f64::consts::TAU;

/// Vertices on a circle with jittered angles: convex, and every exterior
/// turn stays under 120 degrees for n >= 5 with jitter below 0.3 of a step.
fn convex_poly() -> impl Strategy<Value = Polygon> {
    (5usize..=10, 5.0f64..40.0, 0.0f64..1.0, 0.0f64..1.0).prop_flat_map(|(n, radius, cx, cy)| {
        proptest::collection::vec(-0.3f64..0.3, n).prop_map(move |jit| {
            let step = TAU / n as f64;
            let coords: Vec<(f64, f64)> = jit
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    let a = (i as f64 + j) * step;
                    (50.0 + cx + radius * a.cos(), 50.0 + cy + radius * a.sin())
                })
                .collect();
            Polygon::from_coords(&coords).unwrap()
        })
    })
}

fn min_edge(p: &Polygon) -> f64 {
    p.edges().map(|(a, b)| a.distance(b)).fold(f64::INFINITY, f64::min)
}

fn max_vertex_gap(a: &Polygon, b: &Polygon) -> f64 {
    assert_eq!(a.len(), b.len());
    a.vertices()
        .iter()
        .zip(b.vertices())
        .map(|(p, q)| p.distance(*q))
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn shrink_reduces_area(p in convex_poly(), frac in 0.01f64..0.9) {
        let d = frac * shrink_offset(&p, 0.4) * 2.0;
        for piece in offset(&p, -d) {
            prop_assert!(area(&piece) < area(&p));
        }
    }

    #[test]
    fn convex_round_trip(p in convex_poly(), u in 0.1f64..1.0) {
        let d = 0.05 * min_edge(&p) * u;
        let inner = offset(&p, -d);
        prop_assert_eq!(inner.len(), 1);
        let back = offset(&inner[0], d);
        prop_assert_eq!(back.len(), 1);
        prop_assert!(max_vertex_gap(&back[0], &p) <= 1e-6);
    }

    #[test]
    fn shrink_offset_decreases_in_r(p in convex_poly(), r1 in 0.01f64..0.98, dr in 0.001f64..0.5) {
        let r2 = (r1 + dr).min(0.99);
        prop_assume!(r2 > r1);
        prop_assert!(shrink_offset(&p, r2) < shrink_offset(&p, r1));
    }

    #[test]
    fn zero_offset_is_identity(p in convex_poly()) {
        prop_assert_eq!(offset(&p, 0.0), vec![p]);
    }

    #[test]
    fn rectangle_shrinks_exactly(w in 1.0f64..100.0, h in 1.0f64..100.0, u in 0.01f64..0.99) {
        let d = u * w.min(h) / 2.0;
        let got = offset(&Polygon::rect(0.0, 0.0, w, h).unwrap(), -d);
        prop_assert_eq!(got.len(), 1);
        let want = Polygon::rect(d, d, w - d, h - d).unwrap();
        let mut a: Vec<(f64, f64)> = got[0].vertices().iter().map(|p| (p.x, p.y)).collect();
        let mut b: Vec<(f64, f64)> = want.vertices().iter().map(|p| (p.x, p.y)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn shrunk_pieces_lie_inside(p in convex_poly(), frac in 0.05f64..1.0) {
        let d = frac * shrink_offset(&p, 0.4);
        for piece in offset(&p, -d) {
            for v in piece.vertices() {
                prop_assert!(p.contains(*v));
            }
        }
    }

    #[test]
    fn text_format_round_trips(ps in proptest::collection::vec(convex_poly(), 0..5)) {
        let text = format_polygons(&ps);
        let back = parse_polygons(&text).unwrap();
        prop_assert_eq!(back.len(), ps.len());
        for (a, b) in back.iter().zip(&ps) {
            prop_assert!(max_vertex_gap(a, b) <= 1e-9 * 100.0);
        }
    }
}

#[test]
fn square_offsets_by_hand() {
    // A = 100, L = 40: D = 100 (1 - 0.16) / 40, D' = 5.8^2 1.5 / 23.2
    let sq = Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap();
    assert!((shrink_offset(&sq, 0.4) - 2.1).abs() < 1e-12);
    let s = Polygon::rect(0.0, 0.0, 5.8, 5.8).unwrap();
    assert!((unclip_offset(&s, 1.5) - 2.175).abs() < 1e-12);
    assert_eq!(area(&sq), 100.0);
    assert_eq!(perimeter(&sq), 40.0);
}

#[test]
fn clockwise_input_is_reoriented() {
    let cw = Polygon::from_coords(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]).unwrap();
    assert_eq!(area(&cw), 1.0);
}

#[test]
fn invalid_polygons_rejected() {
    assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
    assert!(Polygon::from_coords(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
    assert!(Polygon::from_coords(&[(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)]).is_err());
    assert!(parse_polygons("1,2,3").is_err());
}

#[test]
fn collapsed_shrink_is_empty() {
    let sq = Polygon::rect(0.0, 0.0, 2.0, 2.0).unwrap();
    assert!(offset(&sq, -1.5).is_empty());
}

#[test]
fn comments_and_blank_lines_ignored() {
    let ps = parse_polygons("# header\n\n0,0,4,0,4,4,0,4\n").unwrap();
    assert_eq!(ps.len(), 1);
    assert_eq!(ps[0].vertices()[0], Point::new(0.0, 0.0));
}
