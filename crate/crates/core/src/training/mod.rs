//! Supervised, consistency and combined training loops.
//!
//! Every run draws from separate seeded streams (labeled shuffle, unlabeled
//! shuffle, supervised augmentation, corruption), so switching the
//! consistency term on or off never perturbs the supervised batches.

mod config;

use std::fmt::Write as _;
use std::time::Instant;

use visrec_autodiff::{adam_step, AdamState, Graph, NodeId, Tensor};

pub use config::{TrainConfig, TrainMode};
pub use crate::synthesis::{LabeledExample, UnlabeledExample};

use crate::augmentation::{compose_inv, compose_var, corrupt};
use crate::error::{CoreError, Result};
use crate::interferometry::image_to_grid;
use crate::models::Trainable;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::synthesis::shuffled_indices;

const STREAM_LABELED: u64 = 1;
const STREAM_UNLABELED: u64 = 2;
const STREAM_AUG: u64 = 3;
const STREAM_CORR: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_sup: f64,
    pub l_cons: f64,
    pub l_total: f64,
    pub seconds: f64,
    /// FNV-1a hash of every parameter's bit pattern after the epoch.
    pub param_digest: u64,
}

impl EpochRecord {
    pub fn log_line(&self) -> String {
        format!(
            "epoch={} l_sup={:e} l_cons={:e} l_total={:e} seconds={:.3}",
            self.epoch, self.l_sup, self.l_cons, self.l_total, self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub mode: TrainMode,
    /// Weight actually applied to `L_cons` (zero for modes without it).
    pub lambda_effective: f64,
    pub steps_per_epoch: usize,
    pub epochs: Vec<EpochRecord>,
    pub total_seconds: f64,
}

impl TrainReport {
    pub fn log(&self) -> String {
        let mut s = String::new();
        for e in &self.epochs {
            let _ = writeln!(s, "{}", e.log_line());
        }
        s
    }

    pub fn final_digest(&self) -> Option<u64> {
        self.epochs.last().map(|e| e.param_digest)
    }
}

pub fn parameter_digest(params: &[Tensor]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in params {
        for x in p.values() {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Encoded inputs and dense targets for one supervised batch, after optional
/// augmentation.
fn supervised_batch<M: Trainable>(
    model: &M,
    batch: &[&LabeledExample],
    aug_enabled: bool,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = model.grid_shape();
    let mut inputs = Vec::with_capacity(batch.len() * model.feature_len());
    let mut targets = Vec::with_capacity(batch.len() * model.feature_len());
    for ex in batch {
        let (vis, truth) = if aug_enabled {
            let (v, x) = compose_var(&ex.vis, &ex.truth, &cfg.aug, rng)?;
            (compose_inv(&v, &cfg.aug, grid, rng), x)
        } else {
            (ex.vis.clone(), ex.truth.clone())
        };
        inputs.extend(model.encode(&vis)?);
        targets.extend(model.target_row(&image_to_grid(&truth))?);
    }
    Ok((inputs, targets))
}

fn supervised_node<M: Trainable>(
    g: &mut Graph,
    model: &M,
    ids: &[NodeId],
    inputs: Vec<f64>,
    targets: Vec<f64>,
) -> Result<NodeId> {
    let f = model.feature_len();
    let rows = inputs.len() / f;
    let x = g.constant(vec![rows, f], inputs)?;
    let y = g.constant(vec![rows, f], targets)?;
    let out = model.forward_graph(g, ids, x)?;
    Ok(g.mse(out, y)?)
}

/// Clean and corrupted encodings of an unlabeled batch.
fn consistency_batch<M: Trainable>(
    model: &M,
    batch: &[&UnlabeledExample],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = model.grid_shape();
    let mut clean = Vec::with_capacity(batch.len() * model.feature_len());
    let mut corrupted = Vec::with_capacity(batch.len() * model.feature_len());
    for ex in batch {
        clean.extend(model.encode(&ex.vis)?);
        corrupted.extend(model.encode(&corrupt(&ex.vis, &cfg.corr, grid, rng))?);
    }
    Ok((clean, corrupted))
}

/// `mse(f(corrupted), pseudo)` where `pseudo` is a constant leaf.
fn consistency_node<M: Trainable>(
    g: &mut Graph,
    model: &M,
    ids: &[NodeId],
    pseudo: Vec<f64>,
    corrupted: Vec<f64>,
) -> Result<NodeId> {
    let f = model.feature_len();
    let rows = corrupted.len() / f;
    let target = g.constant(vec![rows, f], pseudo)?;
    let x = g.constant(vec![rows, f], corrupted)?;
    let out = model.forward_graph(g, ids, x)?;
    Ok(g.mse(out, target)?)
}

/// Two independent corruptions pushed through the network as one stacked batch.
fn self_supervised_node<M: Trainable>(
    g: &mut Graph,
    model: &M,
    ids: &[NodeId],
    first: Vec<f64>,
    second: Vec<f64>,
) -> Result<NodeId> {
    let f = model.feature_len();
    let rows = first.len() / f;
    let a = g.constant(vec![rows, f], first)?;
    let b = g.constant(vec![rows, f], second)?;
    let both = g.concat(&[a, b])?;
    let out = model.forward_graph(g, ids, both)?;
    let oa = g.slice(out, 0, rows)?;
    let ob = g.slice(out, rows, 2 * rows)?;
    Ok(g.mse(oa, ob)?)
}

fn with_frozen_params<M: Trainable>(
    model: &M,
    build: impl FnOnce(&mut Graph, &[NodeId]) -> Result<NodeId>,
) -> Result<f64> {
    let mut g = Graph::new();
    let ids = model
        .parameters()
        .iter()
        .map(|p| g.insert(p.clone()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let loss = build(&mut g, &ids)?;
    Ok(g.item(loss)?)
}

/// Mean over the batch of the per-example grid MSE against
/// `image_to_grid(truth)`, after optional augmentation.
pub fn supervised_loss<M: Trainable>(
    model: &M,
    batch: &[&LabeledExample],
    aug_enabled: bool,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(CoreError::Empty("supervised batch"));
    }
    let (x, y) = supervised_batch(model, batch, aug_enabled, cfg, rng)?;
    with_frozen_params(model, |g, ids| supervised_node(g, model, ids, x, y))
}

/// Mean over the batch of `mse(f(corrupt(v)), f(v))` with the clean branch
/// treated as a constant pseudo-label.
pub fn consistency_loss<M: Trainable>(
    model: &M,
    batch: &[&UnlabeledExample],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(CoreError::Empty("unlabeled batch"));
    }
    let (clean, corrupted) = consistency_batch(model, batch, cfg, rng)?;
    let pseudo = model.forward_plain(&clean, batch.len())?;
    with_frozen_params(model, |g, ids| consistency_node(g, model, ids, pseudo, corrupted))
}

/// Builds the consistency loss on `g` for adopted parameters and returns it;
/// exposed for gradient tests.
pub fn consistency_graph<M: Trainable>(
    g: &mut Graph,
    model: &M,
    ids: &[NodeId],
    pseudo: Vec<f64>,
    corrupted: Vec<f64>,
) -> Result<NodeId> {
    consistency_node(g, model, ids, pseudo, corrupted)
}

/// Endless reshuffling index stream over one split.
struct Cycler {
    n: usize,
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl Cycler {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let order = shuffled_indices(n, &mut rng);
        Self { n, order, pos: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size.min(self.n) {
            if self.pos == self.n {
                self.order = shuffled_indices(self.n, &mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Optimizer steps per epoch: one full pass over the larger of the provided
/// splits. The same count applies to every mode so schedules line up.
pub fn steps_per_epoch(n_labeled: usize, n_unlabeled: usize, cfg: &TrainConfig) -> usize {
    let a = n_labeled.div_ceil(cfg.batch_size_sup);
    let b = n_unlabeled.div_ceil(cfg.batch_size_unsup);
    a.max(b).max(1)
}

fn wrap_step(e: CoreError, epoch: usize, step: usize) -> CoreError {
    match e {
        CoreError::NonFinite(what) => CoreError::NonFinite(format!("{what} (epoch {epoch}, step {step})")),
        CoreError::Autodiff(visrec_autodiff::AutodiffError::NonFinite { context }) => {
            CoreError::NonFinite(format!("{context} (epoch {epoch}, step {step})"))
        }
        other => other,
    }
}

pub fn train<M: Trainable>(
    model: &mut M,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with_observer(model, labeled, unlabeled, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_observer<M: Trainable>(
    model: &mut M,
    labeled: &[LabeledExample],
    unlabeled: &[UnlabeledExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    let mode = cfg.mode;
    if mode.uses_labeled() && labeled.is_empty() {
        return Err(CoreError::Empty("labeled split"));
    }
    if mode.uses_unlabeled() && unlabeled.is_empty() {
        return Err(CoreError::Empty("unlabeled split"));
    }
    let lambda = match mode {
        TrainMode::Visrec | TrainMode::VisrecNoSupAug => cfg.lambda,
        _ => 0.0,
    };
    let steps = steps_per_epoch(labeled.len(), unlabeled.len(), cfg);
    let mut lab_stream = Cycler::new(labeled.len(), derive_seed(cfg.rng_seed, STREAM_LABELED));
    let mut unl_stream = Cycler::new(unlabeled.len(), derive_seed(cfg.rng_seed, STREAM_UNLABELED));
    let mut aug_rng = rng_from_seed(derive_seed(cfg.rng_seed ^ cfg.aug.rng_seed, STREAM_AUG));
    let mut corr_rng = rng_from_seed(derive_seed(cfg.rng_seed ^ cfg.corr.rng_seed, STREAM_CORR));
    let mut adam = AdamState::new(model.parameters(), cfg.learning_rate);

    let start = Instant::now();
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let epoch_start = Instant::now();
        let (mut sum_sup, mut sum_cons, mut sum_total) = (0.0, 0.0, 0.0);
        for step in 0..steps {
            let sup = if mode.uses_labeled() {
                let batch: Vec<&LabeledExample> =
                    lab_stream.next_batch(cfg.batch_size_sup).into_iter().map(|i| &labeled[i]).collect();
                Some(supervised_batch(&*model, &batch, mode.augments_supervised(), cfg, &mut aug_rng)?)
            } else {
                None
            };
            let unsup = if mode.uses_unlabeled() {
                let batch: Vec<&UnlabeledExample> =
                    unl_stream.next_batch(cfg.batch_size_unsup).into_iter().map(|i| &unlabeled[i]).collect();
                if mode == TrainMode::SelfSupervised {
                    let (_, a) = consistency_batch(&*model, &batch, cfg, &mut corr_rng)?;
                    let (_, b) = consistency_batch(&*model, &batch, cfg, &mut corr_rng)?;
                    Some((a, b))
                } else {
                    let (clean, corrupted) = consistency_batch(&*model, &batch, cfg, &mut corr_rng)?;
                    let pseudo = model.forward_plain(&clean, batch.len()).map_err(|e| wrap_step(e, epoch, step))?;
                    Some((pseudo, corrupted))
                }
            } else {
                None
            };

            let mut g = Graph::new();
            let ids = g.adopt(model.parameters_mut())?;
            let built = (|| -> Result<(f64, f64, f64, NodeId)> {
                let m = &*model;
                let l_sup = sup.map(|(x, y)| supervised_node(&mut g, m, &ids, x, y)).transpose()?;
                let l_cons = match (mode, unsup) {
                    (TrainMode::SelfSupervised, Some((a, b))) => Some(self_supervised_node(&mut g, m, &ids, a, b)?),
                    (_, Some((pseudo, corrupted))) => Some(consistency_node(&mut g, m, &ids, pseudo, corrupted)?),
                    _ => None,
                };
                let total = match (l_sup, l_cons) {
                    (Some(s), Some(c)) => {
                        let weighted = g.scale(c, lambda)?;
                        let s1 = g.reshape(s, vec![1])?;
                        let c1 = g.reshape(weighted, vec![1])?;
                        let both = g.concat(&[s1, c1])?;
                        g.sum(both)?
                    }
                    (Some(s), None) => s,
                    (None, Some(c)) => c,
                    (None, None) => unreachable!("every mode has a loss term"),
                };
                let v = |id: Option<NodeId>, g: &Graph| id.map(|i| g.item(i)).transpose();
                let sv = v(l_sup, &g)?.unwrap_or(0.0);
                let cv = v(l_cons, &g)?.unwrap_or(0.0);
                let tv = g.item(total)?;
                Ok((sv, cv, tv, total))
            })();
            let (sv, cv, tv, total) = match built {
                Ok(b) => b,
                Err(e) => {
                    g.release(&ids, model.parameters_mut())?;
                    return Err(wrap_step(e, epoch, step));
                }
            };
            if !tv.is_finite() {
                g.release(&ids, model.parameters_mut())?;
                return Err(CoreError::NonFinite(format!("L_total (epoch {epoch}, step {step})")));
            }
            let back = g.backward(total);
            g.release(&ids, model.parameters_mut())?;
            back.map_err(|e| wrap_step(e.into(), epoch, step))?;
            adam_step(model.parameters_mut(), &mut adam).map_err(|e| wrap_step(e.into(), epoch, step))?;
            sum_sup += sv;
            sum_cons += cv;
            sum_total += tv;
        }
        let n = steps as f64;
        let rec = EpochRecord {
            epoch,
            l_sup: sum_sup / n,
            l_cons: sum_cons / n,
            l_total: sum_total / n,
            seconds: epoch_start.elapsed().as_secs_f64(),
            param_digest: parameter_digest(model.parameters()),
        };
        on_epoch(&rec);
        records.push(rec);
    }
    Ok(TrainReport {
        mode,
        lambda_effective: lambda,
        steps_per_epoch: steps,
        epochs: records,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}
