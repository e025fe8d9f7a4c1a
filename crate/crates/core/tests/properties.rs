//! Invariants checked over generated inputs.

use proptest::prelude::*;

use shapestyle::config::RunConfig;
use shapestyle::geometry::{self, parse_obj, obj_string, PointCloud, TriangleMesh};
use shapestyle::losses::{latent_value, loss_total, LossReport, LossWeights};
use shapestyle::metrics::StsBreakdown;
use shapestyle::model::{perturb_style, ModelConfig, StyleTransferModel};
use shapestyle::nets::{Domain, StyleCode};
use shapestyle::training::{lr_schedule, TrainConfig};

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn points(max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec([coord(), coord(), coord()], 1..max)
}

fn brute_chamfer(p: &[[f64; 3]], q: &[[f64; 3]]) -> f64 {
    let d = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    let one = |x: &[[f64; 3]], y: &[[f64; 3]]| {
        x.iter().map(|a| y.iter().map(|b| d(a, b)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    one(p, q) + one(q, p)
}

fn tiny_model() -> StyleTransferModel<f32> {
    let cfg = ModelConfig {
        content_dim: 8,
        style_dim: 4,
        encoder_widths: vec![8],
        decoder_hidden: vec![8],
        primitives: 2,
        n_points: 8,
        mapping_hidden: 8,
        disc_bottleneck: 8,
        disc_hidden: vec![4],
        ..ModelConfig::default()
    };
    StyleTransferModel::new(cfg, 9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chamfer_matches_brute_force(p in points(40), q in points(40)) {
        let fast = geometry::chamfer(&PointCloud::new(p.clone()).unwrap(), &PointCloud::new(q.clone()).unwrap());
        let slow = brute_chamfer(&p, &q);
        prop_assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
    }

    #[test]
    fn chamfer_symmetric_and_zero_on_self(p in points(30), q in points(30)) {
        let (a, b) = (PointCloud::new(p).unwrap(), PointCloud::new(q).unwrap());
        prop_assert_eq!(geometry::chamfer(&a, &a), 0.0);
        prop_assert!(geometry::chamfer(&a, &b) >= 0.0);
        prop_assert!((geometry::chamfer(&a, &b) - geometry::chamfer(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn chamfer_ignores_point_order(p in points(30), q in points(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (a, b) = (PointCloud::new(p.clone()).unwrap(), PointCloud::new(q).unwrap());
        let mut perm: Vec<usize> = (0..p.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let d = geometry::chamfer(&a, &b);
        prop_assert!((geometry::chamfer(&a.permuted(&perm), &b) - d).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn normalization_lands_in_unit_ball(p in points(50)) {
        let cloud = PointCloud::new(p).unwrap();
        if let Ok((n, t)) = geometry::normalize_unit(&cloud) {
            let max = n.points().iter().map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
            prop_assert!((max - 1.0).abs() < 1e-9);
            let c = n.centroid();
            prop_assert!(c.iter().all(|v| v.abs() < 1e-9));
            let back = t.invert(&n);
            for (a, b) in back.points().iter().zip(cloud.points()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() < 1e-9 * b[k].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn obj_text_round_trips(p in prop::collection::vec([coord(), coord(), coord()], 3..20), f in prop::collection::vec([0usize..3, 0usize..3, 0usize..3], 0..1)) {
        let _ = f;
        let n = p.len();
        let faces: Vec<[usize; 3]> = (0..n - 2).map(|i| [i, i + 1, i + 2]).collect();
        let mesh = TriangleMesh::new(p, faces).unwrap();
        let text = obj_string(&mesh);
        let back = parse_obj(&text, std::path::Path::new("m.obj")).unwrap();
        prop_assert_eq!(back, mesh);
    }

    #[test]
    fn sts_identities(a in 0.0..5.0f64, b in 0.0..5.0f64, c in 0.0..5.0f64, d in 0.0..5.0f64) {
        let s = StsBreakdown::from_distances(a, b, c, d);
        prop_assert!((s.delta_source - (a - b)).abs() <= 1e-9);
        prop_assert!((s.delta_target - (c - d)).abs() <= 1e-9);
        prop_assert!((s.sts - (s.delta_source - s.delta_target)).abs() <= 1e-9);
    }

    #[test]
    fn latent_loss_is_mean_abs(v in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..16)) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        let want = v.iter().map(|(x, y)| (x - y).abs()).sum::<f64>() / v.len() as f64;
        prop_assert!((latent_value(&a, &b).unwrap() - want).abs() < 1e-12);
        prop_assert_eq!(latent_value(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn total_is_weighted_sum(r in prop::array::uniform6(0.0..3.0f64), w in prop::array::uniform3(0.0..2.0f64)) {
        let weights = LossWeights { rec: w[0], adv: w[1], cycle: w[2], ..LossWeights::default() };
        let report = LossReport {
            rec: [Some(r[0]), Some(r[1])],
            adv: [Some(r[2]), Some(r[3])],
            cycle: [Some(r[4]), Some(r[5])],
            disc: [Some(0.25), Some(0.5)],
            ..LossReport::default()
        };
        let (g, d) = loss_total(&report, &weights, false).unwrap();
        let want = w[0] * (r[0] + r[1]) + w[1] * (r[2] + r[3]) + w[2] * (r[4] + r[5]);
        prop_assert!((g - want).abs() < 1e-12);
        prop_assert!((d - 0.75).abs() < 1e-12);
    }

    #[test]
    fn schedule_never_increases(epochs in 2usize..300, lr in 1e-5..1e-1f64) {
        let cfg = TrainConfig { epochs, lr, lr_decay_epochs: vec![epochs / 2], ..TrainConfig::default() };
        let lrs: Vec<f64> = (0..epochs).map(|e| lr_schedule(e, &cfg)).collect();
        prop_assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(lrs[0], lr);
    }

    #[test]
    fn run_config_fixed_point(epochs in 1usize..500, lr in 1e-6..1.0f64, seed in 0..=i64::MAX as u64, multimodal in any::<bool>()) {
        let mut c = RunConfig::default();
        c.train.epochs = epochs;
        c.train.lr = lr;
        c.train.seed = seed;
        c.train.lr_decay_epochs = vec![];
        c.model.multimodal = multimodal;
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text, std::path::Path::new("x")).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn oversized_seeds_rejected(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        prop_assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_noise_leaves_style_unchanged(v in prop::collection::vec(-3.0..3.0f64, 1..10), seed in any::<u64>()) {
        let s = StyleCode::new(v, Domain::One).unwrap();
        prop_assert_eq!(perturb_style(&s, 0.0, seed).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn encoders_ignore_point_order(p in prop::collection::vec([-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64], 4..24), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = tiny_model();
        let x = PointCloud::new(p.clone()).unwrap();
        let mut perm: Vec<usize> = (0..p.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let y = x.permuted(&perm);
        for d in Domain::BOTH {
            prop_assert_eq!(m.encode(&x, d).unwrap(), m.encode(&y, d).unwrap());
        }
    }
}
