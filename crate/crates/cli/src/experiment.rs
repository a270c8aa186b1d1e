//! Experiment matrix: build data per seed, fit each method, evaluate under the
//! sweep's test-time condition, and aggregate.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use visrec_core::augmentation::{aug_random_crop, aug_visibility_noise};
use visrec_core::interferometry::VisibilitySet;
use visrec_core::metrics::{evaluate, MetricReport};
use visrec_core::models::{
    grid_row, reconstruct_to_image, CleanConfig, CleanReconstructor, DirtyImager, GridMlpConfig, GridMlpModel,
    Reconstructor, Trainable,
};
use visrec_core::rng::{derive_seed, rng_from_seed};
use visrec_core::synthesis::{build_dataset, ArrayConfig, ArrayStyle, Dataset, LabeledExample, SkyModelConfig};
use visrec_core::training::{train_with_observer, EpochRecord, TrainConfig, TrainMode, TrainReport};
use visrec_core::interferometry::image_to_grid;

use crate::config::ConfigFile;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Overall,
    LabelSizeSweep,
    NoiseRobustness,
    SampleLossRobustness,
    Generalization,
    LambdaSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Overall,
        ExperimentKind::LabelSizeSweep,
        ExperimentKind::NoiseRobustness,
        ExperimentKind::SampleLossRobustness,
        ExperimentKind::Generalization,
        ExperimentKind::LambdaSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Overall => "overall",
            ExperimentKind::LabelSizeSweep => "label_size_sweep",
            ExperimentKind::NoiseRobustness => "noise_robustness",
            ExperimentKind::SampleLossRobustness => "sample_loss_robustness",
            ExperimentKind::Generalization => "generalization",
            ExperimentKind::LambdaSweep => "lambda_sweep",
        }
    }

    /// Sweep grid used when the config gives none.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            ExperimentKind::Overall => vec![0.0],
            ExperimentKind::LabelSizeSweep => vec![32.0, 64.0, 128.0],
            ExperimentKind::NoiseRobustness => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            ExperimentKind::SampleLossRobustness => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            ExperimentKind::Generalization => vec![0.0, 1.0],
            ExperimentKind::LambdaSweep => vec![0.01, 0.05, 0.1, 0.3, 0.5, 0.8],
        }
    }

    pub fn axis_label(&self) -> &'static str {
        match self {
            ExperimentKind::Overall => "run",
            ExperimentKind::LabelSizeSweep => "labeled examples",
            ExperimentKind::NoiseRobustness => "noise sigma / RMS visibility amplitude",
            ExperimentKind::SampleLossRobustness => "sample loss fraction",
            ExperimentKind::Generalization => "test array (0 = training array, 1 = second array)",
            ExperimentKind::LambdaSweep => "consistency weight lambda",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Dirty,
    Clean,
    Trained(TrainMode),
}

impl Method {
    pub fn all() -> Vec<Method> {
        let mut v = vec![Method::Dirty, Method::Clean];
        v.extend(TrainMode::ALL.into_iter().map(Method::Trained));
        v
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dirty => "dirty",
            Method::Clean => "clean",
            Method::Trained(m) => m.name(),
        }
    }

    fn uses_lambda(&self) -> bool {
        matches!(self, Method::Trained(TrainMode::Visrec | TrainMode::VisrecNoSupAug))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub sky: SkyModelConfig,
    pub array: ArrayConfig,
    /// Second coverage for the generalization test split.
    pub second_array: Option<ArrayConfig>,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub noise_sigma: f64,
}

impl DataConfig {
    pub fn new(grid_size: usize) -> Self {
        Self {
            sky: SkyModelConfig {
                image_size: grid_size,
                ..SkyModelConfig::default()
            },
            array: ArrayConfig::eht_like(grid_size),
            second_array: None,
            n_labeled: 128,
            n_unlabeled: 1024,
            n_test: 64,
            noise_sigma: 0.0,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.sky.image_size
    }

    pub fn build(&self, n_labeled: usize, seed: u64) -> Result<Dataset> {
        Ok(build_dataset(
            &self.sky,
            &self.array,
            n_labeled,
            self.n_unlabeled,
            self.n_test,
            self.noise_sigma,
            seed,
        )?)
    }

    /// Test skies of `build(.., seed)` observed with the second array.
    pub fn build_second_test(&self, seed: u64) -> Result<Vec<LabeledExample>> {
        let array = self
            .second_array
            .as_ref()
            .ok_or_else(|| HarnessError::Invalid("generalization needs a second array style".into()))?;
        Ok(build_dataset(&self.sky, array, 0, 0, self.n_test, self.noise_sigma, seed)?.test)
    }
}

/// Settings shared by every learned method.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub hidden: Vec<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { hidden: vec![256, 256] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub data: DataConfig,
    pub model: ModelSettings,
    /// Base training settings. The corruption noise and the augmentation
    /// value noise are given as fractions of the mean RMS visibility
    /// amplitude of the training measurements.
    pub train: TrainConfig,
    /// Per-method overrides of `train`.
    pub method_train: BTreeMap<Method, TrainConfig>,
    pub clean: CleanConfig,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub sweep_values: Vec<f64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, grid_size: usize) -> Self {
        let mut train = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        train.corr.noise_sigma = 0.2;
        train.aug.sigma_vis = 0.02;
        train.aug.crop_fraction_max = 0.7;
        train.aug.random_crop.probability = 1.0;
        Self {
            kind,
            data: DataConfig {
                second_array: (kind == ExperimentKind::Generalization).then(|| ArrayConfig::vlba_like(grid_size)),
                ..DataConfig::new(grid_size)
            },
            model: ModelSettings::default(),
            train,
            method_train: BTreeMap::new(),
            clean: CleanConfig::default(),
            methods: Method::all(),
            seeds: vec![0],
            sweep_values: kind.default_values(),
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn train_config(&self, method: Method) -> TrainConfig {
        let mut cfg = self.method_train.get(&method).cloned().unwrap_or_else(|| self.train.clone());
        if let Method::Trained(mode) = method {
            cfg.mode = mode;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.methods.is_empty() {
            return bad("methods list is empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds list is empty".into());
        }
        if self.sweep_values.is_empty() {
            return bad("sweep values list is empty".into());
        }
        if self.kind == ExperimentKind::Generalization && self.data.second_array.is_none() {
            return bad("generalization requires data.second_array".into());
        }
        if self.kind == ExperimentKind::Generalization
            && self.sweep_values.iter().any(|&v| v != 0.0 && v != 1.0)
        {
            return bad("generalization sweep values must be 0 (training array) or 1 (second array)".into());
        }
        if self.kind == ExperimentKind::LabelSizeSweep
            && self.sweep_values.iter().any(|&v| v < 0.0 || v.fract() != 0.0)
        {
            return bad("label sizes must be nonnegative integers".into());
        }
        if self.kind == ExperimentKind::SampleLossRobustness
            && self.sweep_values.iter().any(|v| !(0.0..1.0).contains(v))
        {
            return bad("sample loss fractions must lie in [0, 1)".into());
        }
        if matches!(self.kind, ExperimentKind::NoiseRobustness | ExperimentKind::LambdaSweep)
            && self.sweep_values.iter().any(|&v| !(v >= 0.0 && v.is_finite()))
        {
            return bad(format!("{} values must be finite and >= 0", self.kind));
        }
        if self.model.hidden.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be > 0".into());
        }
        self.data.sky.validate()?;
        self.data.array.validate()?;
        if let Some(a) = &self.data.second_array {
            a.validate()?;
        }
        if self.data.array.grid_size != self.data.grid_size() {
            return bad("array grid size differs from data.grid_size".into());
        }
        self.clean.validate()?;
        for m in &self.methods {
            self.train_config(*m).validate()?;
        }
        Ok(())
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let kind: ExperimentKind = file.get_or("", "kind", ExperimentKind::Overall)?;
        let grid: usize = file.get_or("data", "grid_size", 32)?;
        let mut cfg = Self::new(kind, grid);
        if let Some(m) = file.list::<Method>("", "methods")? {
            cfg.methods = m;
        }
        if let Some(s) = file.list::<u64>("", "seeds")? {
            cfg.seeds = s;
        }
        if let Some(dir) = file.get::<PathBuf>("", "output_dir")? {
            cfg.output_dir = dir;
        }
        if let Some(v) = file.list::<f64>("sweep", "values")? {
            cfg.sweep_values = v;
        }

        let d = &mut cfg.data;
        d.n_labeled = file.get_or("data", "n_labeled", d.n_labeled)?;
        d.n_unlabeled = file.get_or("data", "n_unlabeled", d.n_unlabeled)?;
        d.n_test = file.get_or("data", "n_test", d.n_test)?;
        d.noise_sigma = file.get_or("data", "noise_sigma", d.noise_sigma)?;
        if let Some(style) = file.get::<ArrayStyle>("data", "array")? {
            d.array = ArrayConfig::for_style(style, grid);
        }
        if let Some(n) = file.get("data", "target_points")? {
            d.array.target_points = n;
        }
        d.array.rng_seed = file.get_or("data", "array_seed", d.array.rng_seed)?;
        if let Some(style) = file.get::<ArrayStyle>("data", "second_array")? {
            d.second_array = Some(ArrayConfig::for_style(style, grid));
        }
        let sky = &mut d.sky;
        if let Some(r) = file.list::<usize>("data", "n_sources")? {
            sky.n_sources = pair(&r, "data.n_sources")?;
        }
        if let Some(r) = file.list::<f64>("data", "amplitude_range")? {
            sky.amplitude_range = pair(&r, "data.amplitude_range")?;
        }
        if let Some(r) = file.list::<f64>("data", "sigma_range")? {
            sky.sigma_range = pair(&r, "data.sigma_range")?;
        }
        sky.point_fraction = file.get_or("data", "point_fraction", sky.point_fraction)?;
        sky.center_spread = file.get_or("data", "center_spread", sky.center_spread)?;
        sky.rng_seed = file.get_or("data", "sky_seed", sky.rng_seed)?;

        if let Some(h) = file.list::<usize>("model", "hidden")? {
            cfg.model.hidden = h;
        }

        let c = &mut cfg.clean;
        c.gain = file.get_or("clean", "gain", c.gain)?;
        c.max_iterations = file.get_or("clean", "max_iterations", c.max_iterations)?;
        c.threshold_fraction = file.get_or("clean", "threshold_fraction", c.threshold_fraction)?;
        c.restore_beam_sigma = file.get_or("clean", "restore_beam_sigma", c.restore_beam_sigma)?;

        read_train(file, "train", &mut cfg.train)?;
        for m in Method::all() {
            let section = format!("train.{}", m.name());
            if file.has_section(&section) {
                let mut t = cfg.train.clone();
                read_train(file, &section, &mut t)?;
                cfg.method_train.insert(m, t);
            }
        }
        file.reject_unused()?;
        cfg.validate().map_err(|e| match e {
            HarnessError::Core(c) => HarnessError::Invalid(c.to_string()),
            other => other,
        })?;
        Ok(cfg)
    }
}

fn pair<T: Copy>(v: &[T], key: &str) -> Result<(T, T)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => Err(HarnessError::Invalid(format!("{key} needs exactly two values"))),
    }
}

/// Reads the `[train]`-style keys of one section into `t`.
pub fn read_train(file: &ConfigFile, section: &str, t: &mut TrainConfig) -> Result<()> {
    let s = section;
    t.lambda = file.get_or(s, "lambda", t.lambda)?;
    t.batch_size_sup = file.get_or(s, "batch_size_sup", t.batch_size_sup)?;
    t.batch_size_unsup = file.get_or(s, "batch_size_unsup", t.batch_size_unsup)?;
    t.epochs = file.get_or(s, "epochs", t.epochs)?;
    t.learning_rate = file.get_or(s, "learning_rate", t.learning_rate)?;
    t.rng_seed = file.get_or(s, "rng_seed", t.rng_seed)?;
    if let Some(p) = file.get::<f64>(s, "aug.probability")? {
        t.aug.set_all_probabilities(p);
    }
    let a = &mut t.aug;
    a.sigma_pos = file.get_or(s, "aug.sigma_pos", a.sigma_pos)?;
    a.sigma_vis = file.get_or(s, "aug.sigma_vis", a.sigma_vis)?;
    a.global_offset_max = file.get_or(s, "aug.global_offset_max", a.global_offset_max)?;
    a.crop_fraction_max = file.get_or(s, "aug.crop_fraction_max", a.crop_fraction_max)?;
    a.band_d_min = file.get_or(s, "aug.band_d_min", a.band_d_min)?;
    a.band_d_max = file.get_or(s, "aug.band_d_max", a.band_d_max)?;
    a.rng_seed = file.get_or(s, "aug.rng_seed", a.rng_seed)?;
    let names = [
        "position_offset",
        "visibility_noise",
        "global_offset",
        "random_crop",
        "frequency_band",
        "transpose",
        "reflect_u",
        "reflect_v",
        "central_symmetry",
    ];
    for (name, toggle) in names.into_iter().zip(a.toggles_mut()) {
        toggle.enabled = file.get_or(s, &format!("aug.{name}"), toggle.enabled)?;
        toggle.probability = file.get_or(s, &format!("aug.{name}.probability"), toggle.probability)?;
    }
    let c = &mut t.corr;
    c.noise_sigma = file.get_or(s, "corr.noise_sigma", c.noise_sigma)?;
    c.drop_fraction = file.get_or(s, "corr.drop_fraction", c.drop_fraction)?;
    c.antenna_offset_sigma = file.get_or(s, "corr.antenna_offset_sigma", c.antenna_offset_sigma)?;
    c.p_noise = file.get_or(s, "corr.p_noise", c.p_noise)?;
    c.p_drop = file.get_or(s, "corr.p_drop", c.p_drop)?;
    c.p_offset = file.get_or(s, "corr.p_offset", c.p_offset)?;
    c.rng_seed = file.get_or(s, "corr.rng_seed", c.rng_seed)?;
    Ok(())
}

/// Test-time change applied to every held-out measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    None,
    /// Complex Gaussian noise with sigma = this fraction of the example's RMS
    /// visibility amplitude.
    Noise(f64),
    /// Fraction of samples removed.
    SampleLoss(f64),
}

const PERTURB_STREAM: u64 = 0x7e57;

/// Applies `p` to test example `index`. Zero-magnitude perturbations return
/// the input unchanged.
pub fn perturb(vis: &VisibilitySet, p: Perturbation, seed: u64, index: usize) -> VisibilitySet {
    let mut rng = rng_from_seed(derive_seed(derive_seed(seed, PERTURB_STREAM), index as u64));
    match p {
        Perturbation::None => vis.clone(),
        Perturbation::Noise(frac) => aug_visibility_noise(vis, frac * vis.rms_amplitude(), &mut rng),
        Perturbation::SampleLoss(frac) => aug_random_crop(vis, frac, &mut rng),
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Mean RMS visibility amplitude of the measurements a method trains on.
pub fn training_amplitude(ds: &Dataset, mode: TrainMode) -> f64 {
    let mut amps: Vec<f64> = Vec::new();
    if mode.uses_labeled() {
        amps.extend(ds.labeled.iter().map(|e| e.vis.rms_amplitude()));
    }
    if mode.uses_unlabeled() {
        amps.extend(ds.unlabeled.iter().map(|e| e.vis.rms_amplitude()));
    }
    if amps.is_empty() {
        1.0
    } else {
        amps.iter().sum::<f64>() / amps.len() as f64
    }
}

/// Network with input and output scales fitted to the training split:
/// encoded inputs are scaled to unit RMS and outputs start at the RMS of
/// the training targets (labels when the mode sees them, else inputs).
pub fn build_model(grid_size: usize, hidden: &[usize], ds: &Dataset, mode: TrainMode, seed: u64) -> Result<GridMlpModel> {
    let probe = GridMlpModel::new(&GridMlpConfig {
        hidden: vec![1],
        ..GridMlpConfig::new(grid_size)
    })?;
    let mut inputs: Vec<f64> = Vec::new();
    if mode.uses_labeled() {
        for e in &ds.labeled {
            inputs.extend(probe.encode(&e.vis)?);
        }
    }
    if mode.uses_unlabeled() {
        for e in &ds.unlabeled {
            inputs.extend(probe.encode(&e.vis)?);
        }
    }
    let in_rms = rms(inputs.iter().copied());
    let out_rms = if mode.uses_labeled() {
        rms(ds.labeled.iter().flat_map(|e| grid_row(&image_to_grid(&e.truth))))
    } else {
        in_rms
    };
    let input_scale = if in_rms > 0.0 { 1.0 / in_rms } else { 1.0 };
    let output_scale = if out_rms > 0.0 { out_rms } else { 1.0 };
    Ok(GridMlpModel::new(&GridMlpConfig {
        grid_size,
        hidden: hidden.to_vec(),
        input_scale,
        output_scale,
        init_seed: seed,
    })?)
}

/// A fitted reconstructor plus its training log, if it was trained.
pub struct Fitted {
    pub method: Method,
    pub model: Box<dyn Reconstructor>,
    pub report: Option<TrainReport>,
    pub mlp: Option<GridMlpModel>,
}

/// Trains (or instantiates) `method` on `ds`. `lambda` overrides the
/// configured consistency weight.
pub fn fit_method(cfg: &ExperimentConfig, method: Method, ds: &Dataset, seed: u64, lambda: Option<f64>) -> Result<Fitted> {
    fit_method_with(cfg, method, ds, seed, lambda, |_| {})
}

/// [`fit_method`] with a callback after every training epoch.
pub fn fit_method_with(
    cfg: &ExperimentConfig,
    method: Method,
    ds: &Dataset,
    seed: u64,
    lambda: Option<f64>,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<Fitted> {
    let n = cfg.data.grid_size();
    match method {
        Method::Dirty => Ok(Fitted {
            method,
            model: Box::new(DirtyImager { height: n, width: n }),
            report: None,
            mlp: None,
        }),
        Method::Clean => Ok(Fitted {
            method,
            model: Box::new(CleanReconstructor {
                size: n,
                config: cfg.clean.clone(),
            }),
            report: None,
            mlp: None,
        }),
        Method::Trained(mode) => {
            let mut tc = cfg.train_config(method);
            tc.rng_seed ^= seed;
            if let Some(l) = lambda {
                tc.lambda = l;
            }
            let amp = training_amplitude(ds, mode);
            tc.corr.noise_sigma *= amp;
            tc.aug.sigma_vis *= amp;
            let mut model = build_model(n, &cfg.model.hidden, ds, mode, seed)?;
            let report = train_with_observer(&mut model, &ds.labeled, &ds.unlabeled, &tc, on_epoch)?;
            Ok(Fitted {
                method,
                model: Box::new(model.clone()),
                report: Some(report),
                mlp: Some(model),
            })
        }
    }
}

/// Metrics of `rec` on every test example after perturbation.
pub fn evaluate_examples(
    rec: &dyn Reconstructor,
    test: &[LabeledExample],
    p: Perturbation,
    seed: u64,
) -> Result<Vec<MetricReport>> {
    test.iter()
        .enumerate()
        .map(|(i, e)| {
            let vis = perturb(&e.vis, p, seed, i);
            let img = reconstruct_to_image(rec, &vis)?;
            Ok(evaluate(e.truth.image(), &img.clipped, true)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub lfd: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRow {
    pub method: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub index: usize,
    pub lfd: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub sweep_value: f64,
    pub n: usize,
    pub lfd: Stat,
    pub psnr_db: Stat,
    pub ssim: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
    pub examples: Vec<ExampleRow>,
    pub failures: Vec<Failure>,
    /// Epoch logs of trained models, keyed by `method/seed/sweep_value`.
    pub train_logs: Vec<(String, String)>,
}

/// Groups rows by `(method, sweep_value)` in first-appearance order.
pub fn aggregate(rows: &[SweepRow]) -> Vec<Aggregate> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.sweep_value.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let col = |f: fn(&SweepRow) -> f64| Stat::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            Aggregate {
                method: key.0.clone(),
                sweep_value: f64::from_bits(key.1),
                n: g.len(),
                lfd: col(|r| r.lfd),
                psnr_db: col(|r| r.psnr_db),
                ssim: col(|r| r.ssim),
            }
        })
        .collect()
}

impl SweepResult {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            aggregates: Vec::new(),
            examples: Vec::new(),
            failures: Vec::new(),
            train_logs: Vec::new(),
        }
    }

    fn push(&mut self, method: Method, value: f64, seed: u64, reports: &[MetricReport]) {
        let n = reports.len() as f64;
        let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        self.rows.push(SweepRow {
            method: method.name().to_string(),
            sweep_value: value,
            seed,
            lfd: mean(|r| r.lfd.unwrap_or(f64::NAN)),
            psnr_db: mean(|r| r.psnr_db),
            ssim: mean(|r| r.ssim),
        });
        for (i, r) in reports.iter().enumerate() {
            self.examples.push(ExampleRow {
                method: method.name().to_string(),
                sweep_value: value,
                seed,
                index: i,
                lfd: r.lfd.unwrap_or(f64::NAN),
                psnr_db: r.psnr_db,
                ssim: r.ssim,
            });
        }
    }

    fn fail(&mut self, method: Method, seed: u64, err: &HarnessError) {
        self.failures.push(Failure {
            method: method.name().to_string(),
            seed,
            message: err.to_string(),
        });
    }

    /// Largest absolute difference between the stored aggregates and a
    /// recomputation from the rows (NaN if the groups differ).
    pub fn aggregate_discrepancy(&self) -> f64 {
        let fresh = aggregate(&self.rows);
        if fresh.len() != self.aggregates.len() {
            return f64::NAN;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in fresh.iter().zip(&self.aggregates) {
            if a.method != b.method || a.sweep_value.to_bits() != b.sweep_value.to_bits() || a.n != b.n {
                return f64::NAN;
            }
            for (x, y) in [(a.lfd, b.lfd), (a.psnr_db, b.psnr_db), (a.ssim, b.ssim)] {
                worst = worst.max((x.mean - y.mean).abs()).max((x.std - y.std).abs());
            }
        }
        worst
    }

    pub fn row(&self, method: &str, value: f64, seed: u64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.sweep_value == value && r.seed == seed)
    }
}

fn perturbation_for(kind: ExperimentKind, value: f64) -> Perturbation {
    match kind {
        ExperimentKind::NoiseRobustness => Perturbation::Noise(value),
        ExperimentKind::SampleLossRobustness => Perturbation::SampleLoss(value),
        _ => Perturbation::None,
    }
}

/// Runs the configured matrix. Progress lines go to `log`. A method that
/// fails for a seed is recorded in `failures` and the run continues.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut log: impl FnMut(&str)) -> Result<SweepResult> {
    cfg.validate()?;
    let mut result = SweepResult::new(cfg.kind);
    for &seed in &cfg.seeds {
        match cfg.kind {
            ExperimentKind::LabelSizeSweep => {
                for &value in &cfg.sweep_values {
                    let ds = cfg.data.build(value as usize, seed)?;
                    for &m in &cfg.methods {
                        log(&format!("seed {seed} {} = {value}: {m}", cfg.kind));
                        let out = fit_method(cfg, m, &ds, seed, None)
                            .and_then(|f| {
                                record_log(&mut result, &f, seed, value);
                                evaluate_examples(f.model.as_ref(), &ds.test, Perturbation::None, seed)
                            });
                        match out {
                            Ok(r) => result.push(m, value, seed, &r),
                            Err(e) => result.fail(m, seed, &e),
                        }
                    }
                }
            }
            ExperimentKind::LambdaSweep => {
                let ds = cfg.data.build(cfg.data.n_labeled, seed)?;
                let mut fixed: BTreeMap<Method, std::result::Result<Vec<MetricReport>, String>> = BTreeMap::new();
                for &value in &cfg.sweep_values {
                    for &m in &cfg.methods {
                        log(&format!("seed {seed} {} = {value}: {m}", cfg.kind));
                        if !m.uses_lambda() {
                            let entry = fixed.entry(m).or_insert_with(|| {
                                fit_method(cfg, m, &ds, seed, None)
                                    .and_then(|f| evaluate_examples(f.model.as_ref(), &ds.test, Perturbation::None, seed))
                                    .map_err(|e| e.to_string())
                            });
                            match entry {
                                Ok(r) => {
                                    let r = r.clone();
                                    result.push(m, value, seed, &r);
                                }
                                Err(msg) => result.failures.push(Failure {
                                    method: m.name().to_string(),
                                    seed,
                                    message: msg.clone(),
                                }),
                            }
                            continue;
                        }
                        let out = fit_method(cfg, m, &ds, seed, Some(value)).and_then(|f| {
                            record_log(&mut result, &f, seed, value);
                            evaluate_examples(f.model.as_ref(), &ds.test, Perturbation::None, seed)
                        });
                        match out {
                            Ok(r) => result.push(m, value, seed, &r),
                            Err(e) => result.fail(m, seed, &e),
                        }
                    }
                }
            }
            _ => {
                let ds = cfg.data.build(cfg.data.n_labeled, seed)?;
                let second = if cfg.kind == ExperimentKind::Generalization {
                    Some(cfg.data.build_second_test(seed)?)
                } else {
                    None
                };
                for &m in &cfg.methods {
                    log(&format!("seed {seed}: {m}"));
                    let fitted = match fit_method(cfg, m, &ds, seed, None) {
                        Ok(f) => f,
                        Err(e) => {
                            result.fail(m, seed, &e);
                            continue;
                        }
                    };
                    record_log(&mut result, &fitted, seed, 0.0);
                    for &value in &cfg.sweep_values {
                        let test = match (&second, value) {
                            (Some(s), v) if v == 1.0 => s.as_slice(),
                            _ => ds.test.as_slice(),
                        };
                        let p = perturbation_for(cfg.kind, value);
                        match evaluate_examples(fitted.model.as_ref(), test, p, seed) {
                            Ok(r) => result.push(m, value, seed, &r),
                            Err(e) => result.fail(m, seed, &e),
                        }
                    }
                }
            }
        }
    }
    result.aggregates = aggregate(&result.rows);
    Ok(result)
}

fn record_log(result: &mut SweepResult, f: &Fitted, seed: u64, value: f64) {
    if let Some(r) = &f.report {
        result.train_logs.push((format!("{}/{seed}/{value}", f.method), r.log()));
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_experiment_with(cfg, |_| {})
}
