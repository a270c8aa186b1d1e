use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use visrec_cli::config::ConfigFile;
use visrec_cli::experiment::{
    evaluate_examples, fit_method_with, run_experiment_with, ExperimentConfig, ExperimentKind, Method, Perturbation,
    Stat,
};
use visrec_cli::output::{examples_csv, read_results, write_atomic, write_results};
use visrec_cli::plot::{emit_plot, render_svg, PlotMetric};
use visrec_cli::HarnessError;
use visrec_core::interferometry::io::save_image;
use visrec_core::metrics::{evaluate, MetricReport};
use visrec_core::models::{clean_detailed, GridMlpModel};
use visrec_core::synthesis::{load_dataset, save_dataset, Dataset};
use visrec_core::training::TrainMode;

#[derive(Parser)]
#[command(name = "visrec", version, about = "Sparse visibility reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect VRDS dataset files
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train one method and write a checkpoint
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Use this dataset instead of building one from the config
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "visrec")]
        mode: TrainMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint path; the epoch log is written next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split of a dataset
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Per-example metrics CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment matrix
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Run the CLEAN baseline on one test example
    Clean {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Optional config whose [clean] section overrides the defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restored image (VRIM)
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot a results.csv file as SVG
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "psnr")]
        metric: PlotMetric,
        /// Experiment kind, used for the x-axis label
        #[arg(long)]
        kind: Option<ExperimentKind>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Synthesize skies and coverage from the [data] section of a config
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print split sizes and provenance
    Inspect { path: PathBuf },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Train and evaluate every method and seed; write CSVs and SVG plots
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's list
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides output_dir in the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let file = ConfigFile::load(path)?;
    Ok(ExperimentConfig::from_file(&file).with_context(|| format!("in config {}", path.display()))?)
}

fn print_metrics(label: &str, reports: &[MetricReport]) {
    let col = |f: fn(&MetricReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
    let (l, p, s) = (col(|r| r.lfd.unwrap_or(f64::NAN)), col(|r| r.psnr_db), col(|r| r.ssim));
    println!(
        "{label}: n={} lfd={:.4} ({:.4}) psnr_db={:.3} ({:.3}) ssim={:.4} ({:.4})",
        reports.len(),
        l.mean,
        l.std,
        p.mean,
        p.std,
        s.mean,
        s.std
    );
}

fn inspect(ds: &Dataset) {
    let (l, u, t) = ds.counts();
    println!("grid_size = {}", ds.grid_size);
    println!("labeled = {l}");
    println!("unlabeled = {u}");
    println!("test = {t}");
    if let Some(cov) = ds.coverage() {
        println!("points_per_example = {}", cov.len());
    }
    for line in ds.provenance.lines() {
        println!("# {line}");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Dataset(DatasetCommand::Build { config, seed, out }) => {
            let cfg = load_config(&config)?;
            let ds = cfg.data.build(cfg.data.n_labeled, seed)?;
            save_dataset(&ds, &out)?;
            let (l, u, t) = ds.counts();
            println!("wrote {} (labeled {l}, unlabeled {u}, test {t})", out.display());
        }
        Command::Dataset(DatasetCommand::Inspect { path }) => inspect(&load_dataset(&path)?),
        Command::Train {
            config,
            dataset,
            mode,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let ds = match dataset {
                Some(p) => load_dataset(&p)?,
                None => cfg.data.build(cfg.data.n_labeled, seed)?,
            };
            if ds.grid_size != cfg.data.grid_size() {
                bail!("dataset grid {} differs from config grid {}", ds.grid_size, cfg.data.grid_size());
            }
            let fitted = fit_method_with(&cfg, Method::Trained(mode), &ds, seed, None, |e| println!("{}", e.log_line()))?;
            let model = fitted.mlp.expect("trained methods produce a network");
            model.save(&out)?;
            let mut log_path = out.clone().into_os_string();
            log_path.push(".log");
            write_atomic(Path::new(&log_path), fitted.report.map(|r| r.log()).unwrap_or_default().as_bytes())?;
            let reports = evaluate_examples(&model, &ds.test, Perturbation::None, seed)?;
            if !reports.is_empty() {
                print_metrics("test", &reports);
            }
            println!("wrote {}", out.display());
        }
        Command::Eval { checkpoint, dataset, out } => {
            let model = GridMlpModel::load(&checkpoint)?;
            let ds = load_dataset(&dataset)?;
            if ds.test.is_empty() {
                bail!("dataset {} has no test examples", dataset.display());
            }
            let reports = evaluate_examples(&model, &ds.test, Perturbation::None, 0)?;
            print_metrics("test", &reports);
            if let Some(out) = out {
                let rows: Vec<_> = reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| visrec_cli::experiment::ExampleRow {
                        method: "checkpoint".into(),
                        sweep_value: 0.0,
                        seed: 0,
                        index: i,
                        lfd: r.lfd.unwrap_or(f64::NAN),
                        psnr_db: r.psnr_db,
                        ssim: r.ssim,
                    })
                    .collect();
                write_atomic(&out, &examples_csv(&rows)?)?;
            }
        }
        Command::Experiment(ExperimentCommand::Run { config, seed, out }) => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let result = run_experiment_with(&cfg, |line| eprintln!("{line}"))?;
            let mut written = write_results(&result, &cfg.output_dir)?;
            if !result.aggregates.is_empty() {
                for m in PlotMetric::ALL {
                    let p = cfg.output_dir.join(format!("{m}.svg"));
                    emit_plot(&result, m, &p)?;
                    written.push(p);
                }
            }
            for a in &result.aggregates {
                println!(
                    "{} {} = {}: psnr_db {:.3} ({:.3}) ssim {:.4} ({:.4}) lfd {:.4} ({:.4})",
                    a.method, cfg.kind, a.sweep_value, a.psnr_db.mean, a.psnr_db.std, a.ssim.mean, a.ssim.std, a.lfd.mean, a.lfd.std
                );
            }
            for f in &result.failures {
                eprintln!("failed: {} seed {}: {}", f.method, f.seed, f.message);
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            if result.rows.is_empty() {
                bail!("every method failed");
            }
        }
        Command::Clean {
            dataset,
            index,
            config,
            out,
        } => {
            let clean_cfg = match config {
                Some(p) => load_config(&p)?.clean,
                None => Default::default(),
            };
            let ds = load_dataset(&dataset)?;
            let ex = ds
                .test
                .get(index)
                .with_context(|| format!("test split has {} examples, index {index} requested", ds.test.len()))?;
            let n = ds.grid_size;
            let res = clean_detailed(&ex.vis, n, n, &clean_cfg)?;
            let restored = res.restored.clipped_nonnegative();
            let dirty = res.dirty.clipped_nonnegative();
            save_image(&out, &restored)?;
            let rc = evaluate(ex.truth.image(), &restored, true)?;
            let rd = evaluate(ex.truth.image(), &dirty, true)?;
            println!("iterations = {}", res.iterations);
            println!("clean: psnr_db={:.3} ssim={:.4} lfd={:.4}", rc.psnr_db, rc.ssim, rc.lfd.unwrap_or(f64::NAN));
            println!("dirty: psnr_db={:.3} ssim={:.4} lfd={:.4}", rd.psnr_db, rd.ssim, rd.lfd.unwrap_or(f64::NAN));
            println!("wrote {}", out.display());
        }
        Command::Plot {
            results,
            metric,
            kind,
            out,
        } => {
            let result = read_results(&results)?;
            let label = kind.map_or("sweep value", |k| k.axis_label());
            write_atomic(&out, render_svg(&result, metric, label)?.as_bytes())?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(e) if e.is_usage() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
