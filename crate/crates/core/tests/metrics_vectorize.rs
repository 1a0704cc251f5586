mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topolens::metrics::{betti_curve, wasserstein};
use topolens::vectorize::{
    bilinear_at, persistence_image, Extents, PersistenceImageSpec, Weight,
};
use topolens::{PersistenceDiagram, PersistencePoint};

fn diagram_strategy(max: usize) -> impl Strategy<Value = PersistenceDiagram> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..=max)
        .prop_map(|v| PersistenceDiagram::from_pairs(&v.into_iter().map(|(b, p)| (b, b + p)).collect::<Vec<_>>()))
}

fn unit_spec(n: usize, weight: Weight) -> PersistenceImageSpec {
    PersistenceImageSpec::new(n, n, Extents::new(-1.0, 2.0, -1.0, 2.0).unwrap(), 0.1, weight).unwrap()
}

#[test]
fn w1_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let a = random_diagram(&mut rng, 5);
        let b = random_diagram(&mut rng, 5);
        let fast = wasserstein(&a, &b, 1.0).unwrap().cost;
        let slow = exhaustive_wasserstein(&a, &b, 1.0);
        assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");
        assert_eq!(fast.to_bits(), wasserstein(&b, &a, 1.0).unwrap().cost.to_bits());
    }
}

#[test]
fn w2_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let a = random_diagram(&mut rng, 4);
        let b = random_diagram(&mut rng, 4);
        let fast = wasserstein(&a, &b, 2.0).unwrap().cost;
        assert!((fast - exhaustive_wasserstein(&a, &b, 2.0)).abs() <= 1e-9);
    }
}

#[test]
fn single_point_to_empty() {
    let a = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
    let r = wasserstein(&a, &PersistenceDiagram::default(), 1.0).unwrap();
    assert!((r.cost - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(wasserstein(&a, &a, 1.0).unwrap().cost, 0.0);
}

#[test]
fn essential_points_rejected() {
    let mut a = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
    a.points.push(PersistencePoint::new(0.0, f64::INFINITY, 0, topolens::PointKind::Essential));
    assert!(wasserstein(&a, &a, 1.0).is_err());
}

#[test]
fn betti_examples() {
    let d = PersistenceDiagram::from_pairs(&[(0.0, 2.0)]);
    assert_eq!(betti_curve(&d, 0, 5, 0.0, 2.5).unwrap().samples, vec![1, 1, 1, 1, 0]);
    let d = PersistenceDiagram::from_pairs(&[(0.0, 2.0), (1.0, 3.0)]);
    assert_eq!(betti_curve(&d, 0, 3, 0.5, 2.5).unwrap().samples, vec![1, 2, 1]);
    assert!(betti_curve(&d, 0, 0, 0.0, 1.0).is_err());
    assert!(betti_curve(&d, 0, 4, 1.0, 1.0).is_err());
}

#[test]
fn image_pixels_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = PersistenceImageSpec::new(12, 9, Extents::new(0.0, 1.0, 0.0, 0.8).unwrap(), 0.1, Weight::Persistence).unwrap();
    for _ in 0..5 {
        let d = random_diagram(&mut rng, 4);
        let img = persistence_image(&d, &spec).unwrap();
        for row in 0..spec.n_y {
            for col in 0..spec.n_x {
                let (x0, x1) = (col as f64 / 12.0, (col + 1) as f64 / 12.0);
                let (y0, y1) = (row as f64 * 0.8 / 9.0, (row + 1) as f64 * 0.8 / 9.0);
                let expect: f64 = d
                    .points
                    .iter()
                    .map(|p| (p.death - p.birth) * gaussian_rect_quadrature(p.birth, p.death - p.birth, 0.1, x0, x1, y0, y1))
                    .sum();
                assert!((img.at(row, col) - expect).abs() <= 1e-12, "({row},{col})");
            }
        }
    }
}

#[test]
fn centred_point_mass() {
    let spec = PersistenceImageSpec::new(40, 40, Extents::new(0.0, 1.0, 0.0, 1.0).unwrap(), 0.1, Weight::Uniform).unwrap();
    let d = PersistenceDiagram::from_pairs(&[(0.5, 1.0)]);
    // edges sit exactly 5 sigma away, so 1 - (Phi(5) - Phi(-5))^2 of the mass is cut off
    let inside = gaussian_rect_quadrature(0.5, 0.5, 0.1, 0.0, 1.0, 0.0, 1.0);
    let total = persistence_image(&d, &spec).unwrap().total();
    assert!((total - inside).abs() <= 1e-12, "{total} vs {inside}");
    assert!((total - 1.0).abs() <= 1.2e-6);
    let spec = PersistenceImageSpec { weight: Weight::Persistence, ..spec };
    assert!((persistence_image(&d, &spec).unwrap().total() - 0.5).abs() <= 1e-6);
}

#[test]
fn diagonal_points_under_each_weight() {
    let d = PersistenceDiagram::from_pairs(&[(0.5, 0.5)]);
    assert_eq!(persistence_image(&d, &unit_spec(20, Weight::Persistence)).unwrap().total(), 0.0);
    let spec = PersistenceImageSpec::new(40, 40, Extents::new(0.0, 1.0, -0.5, 0.5).unwrap(), 0.1, Weight::Uniform).unwrap();
    let inside = gaussian_rect_quadrature(0.5, 0.0, 0.1, 0.0, 1.0, -0.5, 0.5);
    assert!((persistence_image(&d, &spec).unwrap().total() - inside).abs() <= 1e-12);
}

#[test]
fn lookup_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    use rand::Rng;
    let e = Extents::new(-0.5, 1.5, 0.0, 1.0).unwrap();
    for _ in 0..200 {
        let (n_x, n_y) = (rng.random_range(1..9), rng.random_range(1..9));
        let values: Vec<f64> = (0..n_x * n_y).map(|_| rng.random_range(0.0..1.0)).collect();
        let (b, p) = (rng.random_range(-1.0..2.0), rng.random_range(-0.5..1.5));
        let fx = (b + 0.5) / 2.0 * n_x as f64 - 0.5;
        let fy = p * n_y as f64 - 0.5;
        let got = bilinear_at(&values, n_x, n_y, &e, b, p);
        assert!((got - bilinear_oracle(&values, n_x, n_y, fx, fy)).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn w1_symmetric_and_exact(a in diagram_strategy(5), b in diagram_strategy(5)) {
        let ab = wasserstein(&a, &b, 1.0).unwrap();
        let ba = wasserstein(&b, &a, 1.0).unwrap();
        prop_assert_eq!(ab.cost.to_bits(), ba.cost.to_bits());
        prop_assert!((ab.cost - exhaustive_wasserstein(&a, &b, 1.0)).abs() <= 1e-9);
    }

    #[test]
    fn matching_covers_every_point(a in diagram_strategy(6), b in diagram_strategy(6)) {
        use topolens::metrics::Pairing;
        let r = wasserstein(&a, &b, 1.0).unwrap();
        let mut seen_a = vec![0; a.len()];
        let mut seen_b = vec![0; b.len()];
        for p in &r.assignment {
            match *p {
                Pairing::Points(i, j) => { seen_a[i] += 1; seen_b[j] += 1; }
                Pairing::FirstToDiagonal(i) => seen_a[i] += 1,
                Pairing::SecondToDiagonal(j) => seen_b[j] += 1,
            }
        }
        prop_assert!(seen_a.iter().chain(&seen_b).all(|&c| c == 1));
    }

    #[test]
    fn triangle_inequality(a in diagram_strategy(4), b in diagram_strategy(4), c in diagram_strategy(4)) {
        let w = |x: &PersistenceDiagram, y: &PersistenceDiagram| wasserstein(x, y, 1.0).unwrap().cost;
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
    }

    #[test]
    fn diagonal_points_cost_nothing(a in diagram_strategy(5), b in diagram_strategy(5), x in 0.0f64..1.0) {
        let mut a2 = a.clone();
        a2.points.push(PersistencePoint::ordinary(x, x));
        let before = wasserstein(&a, &b, 1.0).unwrap().cost;
        let after = wasserstein(&a2, &b, 1.0).unwrap().cost;
        prop_assert!((before - after).abs() <= 1e-12);
    }

    #[test]
    fn betti_nonnegative_and_zero_outside(a in diagram_strategy(6), n in 1usize..50) {
        let c = betti_curve(&a, 0, n, -1.0, 3.0).unwrap();
        let lo = a.points.iter().map(|p| p.birth).fold(f64::INFINITY, f64::min);
        let hi = a.points.iter().map(|p| p.death).fold(f64::NEG_INFINITY, f64::max);
        for (t, &s) in c.positions().iter().zip(&c.samples) {
            if *t < lo || *t >= hi {
                prop_assert_eq!(s, 0);
            }
        }
    }

    #[test]
    fn image_mass_conserved(a in diagram_strategy(8)) {
        // points lie in [0,1]x[0,1]; extents leave 10 sigma on every side
        for w in [Weight::Uniform, Weight::Persistence] {
            let img = persistence_image(&a, &unit_spec(30, w.clone())).unwrap();
            let expected: f64 = a.points.iter().map(|p| w.eval(p.birth, p.death - p.birth)).sum();
            prop_assert!((img.total() - expected).abs() <= 1e-6 * expected.max(1e-300) || expected == 0.0 && img.total() == 0.0);
        }
    }

    #[test]
    fn image_additive(a in diagram_strategy(5), b in diagram_strategy(5)) {
        let spec = unit_spec(17, Weight::Persistence);
        let mut union = a.clone();
        union.points.extend(b.points.iter().cloned());
        let (ia, ib, iu) = (
            persistence_image(&a, &spec).unwrap(),
            persistence_image(&b, &spec).unwrap(),
            persistence_image(&union, &spec).unwrap(),
        );
        for i in 0..iu.pixels.len() {
            prop_assert!((iu.pixels[i] - ia.pixels[i] - ib.pixels[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn image_refinement(a in diagram_strategy(5)) {
        let coarse = persistence_image(&a, &unit_spec(40, Weight::Uniform)).unwrap();
        let fine = persistence_image(&a, &unit_spec(80, Weight::Uniform)).unwrap();
        for r in 0..40 {
            for c in 0..40 {
                let s = fine.at(2 * r, 2 * c) + fine.at(2 * r, 2 * c + 1) + fine.at(2 * r + 1, 2 * c) + fine.at(2 * r + 1, 2 * c + 1);
                prop_assert!((s - coarse.at(r, c)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn image_nonnegative(a in diagram_strategy(6)) {
        let img = persistence_image(&a, &unit_spec(10, Weight::Persistence)).unwrap();
        prop_assert!(img.pixels.iter().all(|&v| v >= 0.0));
    }
}
