use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topolens::model::head::{cosine, fit_prototypes, scores};
use topolens::model::{
    grad_check_suite, sample_triplet, triplet_check, triplet_loss, ArchitectureSpec, DistanceMode, GradCheckSuite,
};
use topolens::neural::gradcheck::squared_error;
use topolens::neural::{dropout, grad_check, keyed_rng, simam_scale, Conv2d, ForwardCtx, Mode, Network, Tensor};

fn tensor(dims: &[usize]) -> impl Strategy<Value = Tensor> {
    let dims = dims.to_vec();
    let n: usize = dims.iter().product();
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |v| Tensor::new(dims.clone(), v).unwrap())
}

fn embedding(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

#[test]
fn suite_over_twenty_seeds() {
    let report = grad_check_suite(&GradCheckSuite::default()).unwrap();
    assert!(report.max_rel_error() <= 1e-4, "{}", report.table());
    let seeds: std::collections::BTreeSet<u64> = report.rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 20);
    // kink-straddling probes are excluded, so make sure they stay rare
    assert!(report.skipped() * 50 <= report.checked(), "{}", report.table());
}

#[test]
fn default_architecture_gradients() {
    let arch = ArchitectureSpec::default();
    for mode in [DistanceMode::Cosine, DistanceMode::SquaredEuclidean] {
        let rows = triplet_check(&arch, mode, 1, 1e-5, 3).unwrap();
        let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{mode:?}: {rows:?}");
        assert!(rows.iter().all(|r| r.checked > 0), "{rows:?}");
    }
}

#[test]
fn linear_net_is_exact() {
    let specs = [topolens::neural::LayerSpec::Flatten, topolens::neural::LayerSpec::FullyConnected { n_in: 6, n_out: 3 }];
    let net = Network::init(&specs, 2);
    let x = Tensor::new(vec![1, 2, 3], vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
    let t = Tensor::from_vec(vec![0.5, -0.5, 0.25]);
    let r = grad_check(&net, &squared_error(t), &x, ForwardCtx::eval(), 1e-5, 100, 0).unwrap();
    assert!(r.max_rel_error() <= 1e-8, "{r:?}");
}

#[test]
fn zero_net_zero_gradients() {
    let arch = ArchitectureSpec { channels: vec![2, 2], strides: vec![1, 1], simam_after: vec![], input_size: (4, 4), embedding_dim: 3, ..Default::default() };
    let net = Network::zeros(&arch.layer_specs().unwrap());
    let x = Tensor::zeros(&[1, 4, 4]);
    let trace = net.forward(&x, ForwardCtx::eval()).unwrap();
    assert!(trace.output().data().iter().all(|&v| v == 0.0));
    let back = net.backward(&trace, &Tensor::zeros(&[3]), None).unwrap();
    assert!(back.params.iter().flatten().all(|t| t.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn dropout_preserves_mean() {
    let x = Tensor::from_vec(vec![1.0; 100_000]);
    let y = dropout(&x, 0.5, Mode::Train, &mut keyed_rng(4, 0, 0)).unwrap();
    let mean = y.data().iter().sum::<f64>() / y.len() as f64;
    assert!((mean - 1.0).abs() <= 0.02, "{mean}");
    assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut keyed_rng(4, 0, 0)).unwrap(), x);
    assert_eq!(dropout(&x, 0.0, Mode::Train, &mut keyed_rng(4, 0, 0)).unwrap(), x);
}

#[test]
fn positives_sampled_uniformly() {
    // class 0 has 5 members; with target fixed to member 0 the other four
    // should each appear a quarter of the time
    let labels = vec![0, 0, 0, 0, 0, 1, 1, 1];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [0usize; 8];
    let mut draws = 0;
    while draws < 10_000 {
        let t = sample_triplet(&labels, &mut rng).unwrap();
        assert_eq!(labels[t.positive], labels[t.target]);
        assert_ne!(labels[t.negative], labels[t.target]);
        assert_ne!(t.positive, t.target);
        if t.target == 0 {
            counts[t.positive] += 1;
            draws += 1;
        }
    }
    let (p, n) = (0.25, draws as f64);
    let sd = (n * p * (1.0 - p)).sqrt();
    for &c in &counts[1..5] {
        assert!((c as f64 - n * p).abs() <= 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn loss_examples() {
    let sq = DistanceMode::SquaredEuclidean;
    assert_eq!(triplet_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.1, sq, 0.0).unwrap().total(), 0.0);
    let l = triplet_loss(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 0.1, sq, 0.0).unwrap().total();
    assert!((l - 2.1).abs() < 1e-15);
    let e = [0.3, -0.2];
    for mode in [sq, DistanceMode::Cosine] {
        assert!((triplet_loss(&e, &e, &e, 0.1, mode, 0.0).unwrap().total() - 0.1).abs() < 1e-15);
    }
    assert!(triplet_loss(&[0.0, 0.0], &e, &e, 0.1, DistanceMode::Cosine, 0.0).is_err());
}

#[test]
fn prototype_examples() {
    let p = fit_prototypes(&[vec![3.0, 4.0], vec![0.0, 2.0]], &[0, 1], 2).unwrap();
    assert_eq!(p, vec![vec![0.6, 0.8], vec![0.0, 1.0]]);
    assert!(fit_prototypes(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], &[0, 0, 1], 2).is_err());
    assert!(fit_prototypes(&[vec![1.0, 0.0]], &[0], 2).is_err());
    let s = scores(&[1.0, 1.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.1);
    assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
}

proptest! {
    #[test]
    fn conv_is_linear(x in tensor(&[2, 5, 4]), y in tensor(&[2, 5, 4]), a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>()) {
        let mut conv = Conv2d::zeros(2, 3, 3, 1, 1);
        use rand::Rng;
        let mut rng = keyed_rng(seed, 0, 0);
        for w in conv.weight.data_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        let mix = Tensor::new(vec![2, 5, 4], x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let (cm, _) = conv.forward(&mix).unwrap();
        let (cx, _) = conv.forward(&x).unwrap();
        let (cy, _) = conv.forward(&y).unwrap();
        for i in 0..cm.len() {
            prop_assert!((cm.data()[i] - a * cx.data()[i] - b * cy.data()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn simam_scales_in_unit_interval(x in tensor(&[3, 4, 4]), lambda in 1e-6f64..1.0) {
        let s = simam_scale(&x, lambda).unwrap();
        prop_assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let y = topolens::neural::simam(&x, lambda).unwrap();
        for (a, b) in x.data().iter().zip(y.data()) {
            prop_assert!(b.abs() <= a.abs());
            prop_assert!(a * b >= 0.0);
        }
    }

    #[test]
    fn loss_nonnegative_and_zero_iff_separated(t in embedding(4), p in embedding(4), n in embedding(4)) {
        for mode in [DistanceMode::Cosine, DistanceMode::SquaredEuclidean] {
            let l = triplet_loss(&t, &p, &n, 0.1, mode, 0.0).unwrap();
            prop_assert!(l.hinge >= 0.0);
            let (dp, _, _) = topolens::model::distance(&t, &p, mode).unwrap();
            let (dn, _, _) = topolens::model::distance(&t, &n, mode).unwrap();
            prop_assert_eq!(l.hinge == 0.0, dn - dp >= 0.1);
        }
    }

    #[test]
    fn cosine_loss_scale_invariant(t in embedding(4), p in embedding(4), n in embedding(4), c in 0.1f64..10.0) {
        let l = triplet_loss(&t, &p, &n, 0.1, DistanceMode::Cosine, 0.0).unwrap().hinge;
        let tc: Vec<f64> = t.iter().map(|v| v * c).collect();
        let lc = triplet_loss(&tc, &p, &n, 0.1, DistanceMode::Cosine, 0.0).unwrap().hinge;
        prop_assert!((l - lc).abs() <= 1e-12);
    }

    #[test]
    fn scores_are_a_distribution(e in embedding(3), tau in 0.01f64..2.0) {
        let protos = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.6, 0.0, 0.8]];
        let s = scores(&e, &protos, tau);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let c = 3.7;
        let ec: Vec<f64> = e.iter().map(|v| v * c).collect();
        let sc = scores(&ec, &protos, tau);
        for (a, b) in s.iter().zip(&sc) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn prototypes_in_cluster_cone(v in prop::collection::vec(embedding(3), 1..6)) {
        let labels = vec![0; v.len()];
        if let Ok(p) = fit_prototypes(&v, &labels, 1) {
            let mean: Vec<f64> = (0..3).map(|i| v.iter().map(|x| x[i]).sum::<f64>()).collect();
            prop_assert!((cosine(&p[0], &mean) - 1.0).abs() <= 1e-12);
        }
    }
}
