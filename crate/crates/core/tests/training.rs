use visrec_autodiff::{numeric_gradient, max_relative_error, Graph, NodeId, Tensor};
use visrec_core::augmentation::{AugmentationConfig, CorruptionConfig};
use visrec_core::interferometry::{image_to_grid, sample_visibility, UvCoverage, VisibilityGrid, VisibilitySet};
use visrec_core::models::{grid_row, row_to_grid, GridMlpConfig, GridMlpModel, Reconstructor, Trainable};
use visrec_core::rng::rng_from_seed;
use visrec_core::synthesis::{build_dataset, ArrayConfig, Dataset, SkyModelConfig};
use visrec_core::training::*;

fn small_dataset(n: usize, n_l: usize, n_u: usize, seed: u64) -> Dataset {
    let sky = SkyModelConfig {
        image_size: n,
        sigma_range: (0.6, 1.5),
        ..SkyModelConfig::default()
    };
    let array = ArrayConfig {
        target_points: 120,
        ..ArrayConfig::eht_like(n)
    };
    build_dataset(&sky, &array, n_l, n_u, 2, 0.0, seed).unwrap()
}

fn small_model(n: usize, seed: u64) -> GridMlpModel {
    GridMlpModel::new(&GridMlpConfig {
        hidden: vec![24],
        input_scale: 0.1,
        init_seed: seed,
        ..GridMlpConfig::new(n)
    })
    .unwrap()
}

fn small_cfg(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        mode,
        batch_size_sup: 4,
        batch_size_unsup: 4,
        epochs: 3,
        learning_rate: 3e-3,
        rng_seed: 11,
        ..TrainConfig::default()
    }
}

/// Dense identity map held as a trainable weight matrix.
struct IdentityNet {
    n: usize,
    params: Vec<Tensor>,
}

impl IdentityNet {
    fn new(n: usize) -> Self {
        let f = 2 * n * n;
        let mut w = vec![0.0; f * f];
        for i in 0..f {
            w[i * f + i] = 1.0;
        }
        let t = Tensor::new(vec![f, f], w).unwrap().with_requires_grad(true);
        Self { n, params: vec![t] }
    }
}

impl Reconstructor for IdentityNet {
    fn grid_shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }
    fn reconstruct(&self, vis: &VisibilitySet) -> visrec_core::Result<VisibilityGrid> {
        row_to_grid(&self.forward_plain(&self.encode(vis)?, 1)?, self.n, self.n)
    }
}

impl Trainable for IdentityNet {
    fn parameters(&self) -> &[Tensor] {
        &self.params
    }
    fn parameters_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }
    fn encode(&self, vis: &VisibilitySet) -> visrec_core::Result<Vec<f64>> {
        Ok(grid_row(&visrec_core::interferometry::grid_visibility(vis, self.n, self.n)?))
    }
    fn feature_len(&self) -> usize {
        2 * self.n * self.n
    }
    fn forward_graph(&self, g: &mut Graph, params: &[NodeId], input: NodeId) -> visrec_core::Result<NodeId> {
        Ok(g.matmul(input, params[0])?)
    }
    fn forward_plain(&self, input: &[f64], _rows: usize) -> visrec_core::Result<Vec<f64>> {
        Ok(input.to_vec())
    }
    fn target_row(&self, grid: &VisibilityGrid) -> visrec_core::Result<Vec<f64>> {
        Ok(grid_row(grid))
    }
}

#[test]
fn oracle_reconstructor_has_zero_supervised_loss() {
    let n = 8;
    let half = (n / 2) as i64;
    // every grid cell; the -n/2 edge is nudged inside the open Nyquist bound
    let edge = |k: i64| if k == -half { k as f64 + 1e-12 } else { k as f64 };
    let pts = (-half..half).flat_map(|kv| (-half..half).map(move |ku| (edge(ku), edge(kv)))).collect();
    let cov = UvCoverage::new(pts).unwrap();
    let ds = small_dataset(n, 3, 0, 1);
    let examples: Vec<LabeledExample> = ds
        .labeled
        .iter()
        .map(|e| LabeledExample {
            vis: sample_visibility(&e.truth, &cov, 0.0, 0).unwrap(),
            truth: e.truth.clone(),
        })
        .collect();
    let batch: Vec<&LabeledExample> = examples.iter().collect();
    let cfg = small_cfg(TrainMode::Supervised);
    let loss = supervised_loss(&IdentityNet::new(n), &batch, false, &cfg, &mut rng_from_seed(0)).unwrap();
    assert!(loss < 1e-18, "{loss}");
    let target = image_to_grid(&examples[0].truth);
    assert_eq!(target.dims(), (n, n));
}

#[test]
fn disabled_augmentation_equals_zero_probabilities() {
    let ds = small_dataset(8, 6, 0, 2);
    let model = small_model(8, 3);
    let batch: Vec<&LabeledExample> = ds.labeled.iter().collect();
    let mut cfg = small_cfg(TrainMode::SupervisedAug);
    let off = supervised_loss(&model, &batch, false, &cfg, &mut rng_from_seed(5)).unwrap();
    cfg.aug = AugmentationConfig::never();
    let zero = supervised_loss(&model, &batch, true, &cfg, &mut rng_from_seed(6)).unwrap();
    assert!(((off - zero) / off).abs() <= 1e-12, "{off} vs {zero}");
    assert!(supervised_loss(&model, &[], false, &cfg, &mut rng_from_seed(0)).is_err());
}

#[test]
fn supervised_training_overfits_a_fixed_batch() {
    let ds = small_dataset(8, 8, 0, 3);
    let mut model = small_model(8, 1);
    let cfg = TrainConfig {
        batch_size_sup: 8,
        epochs: 200,
        ..small_cfg(TrainMode::Supervised)
    };
    let report = train(&mut model, &ds.labeled, &[], &cfg).unwrap();
    assert_eq!(report.steps_per_epoch, 1);
    let first = report.epochs[0].l_total;
    let last = report.epochs.last().unwrap().l_total;
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn consistency_loss_zero_nonnegative_and_monotone_in_noise() {
    let ds = small_dataset(8, 0, 8, 4);
    let batch: Vec<&UnlabeledExample> = ds.unlabeled.iter().collect();
    let model = small_model(8, 2);
    let mut cfg = small_cfg(TrainMode::Visrec);
    cfg.corr = CorruptionConfig::identity();
    assert_eq!(consistency_loss(&model, &batch, &cfg, &mut rng_from_seed(1)).unwrap(), 0.0);
    assert!(consistency_loss(&model, &[], &cfg, &mut rng_from_seed(1)).is_err());

    let sigmas = [0.1, 0.5, 2.0];
    let mut means = Vec::new();
    for &s in &sigmas {
        cfg.corr = CorruptionConfig {
            noise_sigma: s,
            p_noise: 1.0,
            ..CorruptionConfig::default()
        };
        let mut total = 0.0;
        for seed in 0..10 {
            let m = small_model(8, 100 + seed);
            let l = consistency_loss(&m, &batch, &cfg, &mut rng_from_seed(seed)).unwrap();
            assert!(l >= 0.0);
            total += l;
        }
        means.push(total / 10.0);
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn pseudo_label_branch_carries_no_gradient() {
    let ds = small_dataset(4, 0, 3, 5);
    let model = GridMlpModel::new(&GridMlpConfig {
        hidden: vec![6],
        input_scale: 0.2,
        init_seed: 9,
        ..GridMlpConfig::new(4)
    })
    .unwrap();
    let cfg = TrainConfig {
        corr: CorruptionConfig {
            p_noise: 1.0,
            noise_sigma: 0.3,
            ..CorruptionConfig::default()
        },
        ..small_cfg(TrainMode::Visrec)
    };
    let mut rng = rng_from_seed(3);
    let mut clean = Vec::new();
    let mut corrupted = Vec::new();
    for e in &ds.unlabeled {
        clean.extend(model.encode(&e.vis).unwrap());
        let c = visrec_core::augmentation::corrupt(&e.vis, &cfg.corr, (4, 4), &mut rng);
        corrupted.extend(model.encode(&c).unwrap());
    }
    let rows = ds.unlabeled.len();
    let pseudo = model.forward_plain(&clean, rows).unwrap();

    let mut g = Graph::new();
    let ids: Vec<NodeId> = model.parameters().iter().map(|p| g.insert(p.clone()).unwrap()).collect();
    let loss = consistency_graph(&mut g, &model, &ids, pseudo.clone(), corrupted.clone()).unwrap();
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&i| g.grad(i).unwrap().to_vec()).collect();

    let f = model.feature_len();
    let eval = |params: &[Tensor], pseudo_fixed: Option<&[f64]>| -> f64 {
        let mut m = model.clone();
        for (dst, src) in m.parameters_mut().iter_mut().zip(params) {
            *dst = src.clone();
        }
        let target = match pseudo_fixed {
            Some(p) => p.to_vec(),
            None => m.forward_plain(&clean, rows).unwrap(),
        };
        let out = m.forward_plain(&corrupted, rows).unwrap();
        out.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (rows * f) as f64
    };
    let stopped = numeric_gradient(|ps| Ok(eval(ps, Some(&pseudo))), model.parameters(), 1e-6).unwrap();
    let through = numeric_gradient(|ps| Ok(eval(ps, None)), model.parameters(), 1e-6).unwrap();
    let err_stopped = max_relative_error(&analytic, &stopped);
    let err_through = max_relative_error(&analytic, &through);
    assert!(err_stopped < 1e-4, "{err_stopped}");
    assert!(err_through > 1e-2, "{err_through}");
}

#[test]
fn zero_lambda_reproduces_supervised_aug_bitwise() {
    let ds = small_dataset(8, 6, 10, 6);
    let run = |mode, lambda| {
        let mut model = small_model(8, 4);
        let cfg = TrainConfig {
            lambda,
            ..small_cfg(mode)
        };
        train(&mut model, &ds.labeled, &ds.unlabeled, &cfg).unwrap()
    };
    let a = run(TrainMode::Visrec, 0.0);
    let b = run(TrainMode::SupervisedAug, 0.0);
    for (x, y) in a.epochs.iter().zip(&b.epochs) {
        assert_eq!(x.param_digest, y.param_digest);
        assert_eq!(x.l_sup.to_bits(), y.l_sup.to_bits());
    }
    assert!(a.epochs.iter().any(|e| e.l_cons > 0.0));
}

#[test]
fn zero_probability_visrec_matches_no_sup_aug() {
    let ds = small_dataset(8, 6, 10, 7);
    let run = |mode| {
        let mut model = small_model(8, 5);
        let mut cfg = small_cfg(mode);
        cfg.aug = AugmentationConfig::never();
        train(&mut model, &ds.labeled, &ds.unlabeled, &cfg).unwrap()
    };
    let a = run(TrainMode::Visrec);
    let b = run(TrainMode::VisrecNoSupAug);
    assert_eq!(a.final_digest(), b.final_digest());
}

#[test]
fn total_loss_recomposes_every_epoch() {
    let ds = small_dataset(8, 6, 10, 8);
    for lambda in [0.01, 0.1, 0.8] {
        let mut model = small_model(8, 6);
        let cfg = TrainConfig {
            lambda,
            ..small_cfg(TrainMode::Visrec)
        };
        let r = train(&mut model, &ds.labeled, &ds.unlabeled, &cfg).unwrap();
        assert_eq!(r.lambda_effective, lambda);
        for e in &r.epochs {
            let recomposed = e.l_sup + lambda * e.l_cons;
            assert!(((e.l_total - recomposed) / e.l_total).abs() <= 1e-12);
            assert!(e.l_sup >= 0.0 && e.l_cons >= 0.0);
        }
    }
}

#[test]
fn identical_configs_reproduce_losses() {
    let ds = small_dataset(8, 5, 7, 9);
    for mode in TrainMode::ALL {
        let run = || {
            let mut model = small_model(8, 7);
            train(&mut model, &ds.labeled, &ds.unlabeled, &small_cfg(mode)).unwrap()
        };
        let (a, b) = (run(), run());
        for (x, y) in a.epochs.iter().zip(&b.epochs) {
            assert_eq!((x.l_sup, x.l_cons, x.l_total, x.param_digest), (y.l_sup, y.l_cons, y.l_total, y.param_digest));
        }
    }
}

#[test]
fn schedule_covers_the_larger_split() {
    let cfg = small_cfg(TrainMode::Visrec);
    assert_eq!(steps_per_epoch(9, 3, &cfg), 3);
    assert_eq!(steps_per_epoch(4, 17, &cfg), 5);
    assert_eq!(steps_per_epoch(0, 0, &cfg), 1);
}

#[test]
fn missing_splits_are_rejected() {
    let ds = small_dataset(8, 4, 4, 10);
    let mut model = small_model(8, 1);
    let err = train(&mut model, &[], &ds.unlabeled, &small_cfg(TrainMode::Supervised)).unwrap_err();
    assert!(err.to_string().contains("labeled"));
    assert!(train(&mut model, &ds.labeled, &[], &small_cfg(TrainMode::Visrec)).is_err());
    assert!(train(&mut model, &ds.labeled, &[], &small_cfg(TrainMode::SelfSupervised)).is_err());
    assert!(train(&mut model, &[], &ds.unlabeled, &small_cfg(TrainMode::SelfSupervised)).is_ok());
}

#[test]
fn non_finite_loss_aborts_with_location() {
    let ds = small_dataset(8, 4, 0, 11);
    let mut huge = ds.labeled.clone();
    for e in &mut huge {
        e.vis.re.iter_mut().for_each(|x| *x = 1e300);
    }
    let mut model = GridMlpModel::new(&GridMlpConfig {
        hidden: vec![4],
        input_scale: 1.0,
        output_scale: 1e200,
        init_seed: 0,
        ..GridMlpConfig::new(8)
    })
    .unwrap();
    let err = train(&mut model, &huge, &[], &small_cfg(TrainMode::Supervised)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("epoch 1") && msg.contains("step 0"), "{msg}");
}

#[test]
fn log_lines_have_one_record_per_epoch() {
    let ds = small_dataset(8, 4, 4, 12);
    let mut model = small_model(8, 2);
    let mut seen = 0;
    let r = train_with_observer(&mut model, &ds.labeled, &ds.unlabeled, &small_cfg(TrainMode::Visrec), |_| seen += 1)
        .unwrap();
    assert_eq!(seen, 3);
    let log = r.log();
    assert_eq!(log.lines().count(), 3);
    for (i, line) in log.lines().enumerate() {
        assert!(line.starts_with(&format!("epoch={} l_sup=", i + 1)));
        assert!(line.contains(" l_cons=") && line.contains(" l_total=") && line.contains(" seconds="));
    }
}

#[test]
fn desk_scale_run_trends_down() {
    let ds = small_dataset(16, 32, 64, 13);
    let mut model = GridMlpModel::new(&GridMlpConfig {
        hidden: vec![128],
        input_scale: 0.05,
        init_seed: 1,
        ..GridMlpConfig::new(16)
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        ..small_cfg(TrainMode::Visrec)
    };
    let r = train(&mut model, &ds.labeled, &ds.unlabeled, &cfg).unwrap();
    assert!(r.epochs.iter().all(|e| e.l_total.is_finite()));
    let first = r.epochs[0].l_total;
    let last = r.epochs.last().unwrap().l_total;
    assert!(last < first, "{first} -> {last}");
}
