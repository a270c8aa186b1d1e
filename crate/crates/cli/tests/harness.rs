use std::path::Path;
use std::process::Command;

use visrec_cli::config::ConfigFile;
use visrec_cli::experiment::*;
use visrec_cli::output::{parse_rows, read_results, write_results, RESULTS_FILE, SUMMARY_FILE};
use visrec_cli::plot::{render_svg, PlotMetric};
use visrec_core::training::TrainMode;

const TINY: &str = "
kind = overall
methods = dirty, clean
seeds = 0, 1

[data]
grid_size = 8
n_labeled = 4
n_unlabeled = 4
n_test = 3
target_points = 60

[model]
hidden = 8

[train]
epochs = 2
batch_size_sup = 2
batch_size_unsup = 2
";

fn tiny(kind: ExperimentKind, methods: &[Method]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_file(&ConfigFile::parse(TINY).unwrap()).unwrap();
    cfg.kind = kind;
    cfg.methods = methods.to_vec();
    cfg.sweep_values = kind.default_values();
    if kind == ExperimentKind::LabelSizeSweep {
        cfg.sweep_values = vec![2.0, 4.0];
    }
    if kind == ExperimentKind::Generalization {
        let mut second = visrec_core::synthesis::ArrayConfig::vlba_like(8);
        second.target_points = 80;
        cfg.data.second_array = Some(second);
    }
    cfg
}

#[test]
fn dirty_only_run_reports_dirty_metrics() {
    let cfg = tiny(ExperimentKind::Overall, &[Method::Dirty]);
    let r = run_experiment(&cfg).unwrap();
    assert!(r.failures.is_empty());
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows.iter().all(|row| row.method == "dirty"));
    assert_eq!(r.aggregates.len(), 1);
    assert_eq!(r.examples.len(), 6);
}

#[test]
fn sweep_endpoints_match_the_overall_comparison() {
    let methods = [Method::Dirty, Method::Trained(TrainMode::Supervised), Method::Trained(TrainMode::Visrec)];
    let overall = run_experiment(&tiny(ExperimentKind::Overall, &methods)).unwrap();
    for kind in [ExperimentKind::NoiseRobustness, ExperimentKind::SampleLossRobustness] {
        let sweep = run_experiment(&tiny(kind, &methods)).unwrap();
        for row in overall.rows.iter() {
            let end = sweep.row(&row.method, 0.0, row.seed).unwrap();
            assert_eq!(
                (end.lfd.to_bits(), end.psnr_db.to_bits(), end.ssim.to_bits()),
                (row.lfd.to_bits(), row.psnr_db.to_bits(), row.ssim.to_bits()),
                "{kind} {}",
                row.method
            );
        }
    }
}

#[test]
fn every_kind_runs_and_aggregates_recompute() {
    let methods = [Method::Dirty, Method::Trained(TrainMode::Visrec)];
    for kind in ExperimentKind::ALL {
        let cfg = tiny(kind, &methods);
        let r = run_experiment(&cfg).unwrap();
        assert!(r.failures.is_empty(), "{kind}: {:?}", r.failures);
        assert_eq!(r.rows.len(), methods.len() * cfg.sweep_values.len() * cfg.seeds.len(), "{kind}");
        assert!(r.aggregate_discrepancy() <= 1e-12);
    }
}

#[test]
fn lambda_sweep_trains_lambda_methods_per_value() {
    let methods = [Method::Trained(TrainMode::Supervised), Method::Trained(TrainMode::Visrec)];
    let r = run_experiment(&tiny(ExperimentKind::LambdaSweep, &methods)).unwrap();
    let sup: Vec<f64> = r.rows.iter().filter(|x| x.method == "supervised" && x.seed == 0).map(|x| x.psnr_db).collect();
    assert!(sup.windows(2).all(|w| w[0] == w[1]));
    let vis: Vec<f64> = r.rows.iter().filter(|x| x.method == "visrec" && x.seed == 0).map(|x| x.psnr_db).collect();
    assert!(vis.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn failures_are_recorded_and_other_methods_continue() {
    let mut cfg = tiny(ExperimentKind::Overall, &[Method::Trained(TrainMode::Visrec), Method::Dirty]);
    cfg.data.n_unlabeled = 0;
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.failures.len(), 2);
    assert!(r.failures.iter().all(|f| f.method == "visrec" && f.message.contains("unlabeled")));
    assert_eq!(r.rows.len(), 2);
}

#[test]
fn runs_are_reproducible_and_csv_round_trips() {
    let cfg = tiny(ExperimentKind::Overall, &[Method::Dirty, Method::Trained(TrainMode::SupervisedAug)]);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&a, &dir.path().join("a")).unwrap();
    write_results(&b, &dir.path().join("b")).unwrap();
    for f in [RESULTS_FILE, SUMMARY_FILE, "examples.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let back = read_results(&dir.path().join("a").join(RESULTS_FILE)).unwrap();
    assert_eq!(back.rows, a.rows);
    assert!(back.aggregate_discrepancy() <= 1e-12);
    let parsed = parse_rows(&std::fs::read(dir.path().join("a").join(RESULTS_FILE)).unwrap()).unwrap();
    assert_eq!(parsed, a.rows);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = |text: &str| ExperimentConfig::from_file(&ConfigFile::parse(text).unwrap()).unwrap_err();
    assert!(bad("kind = overall\nmethods =\n").is_usage());
    assert!(bad("kind = overall\nseeds =\n").is_usage());
    assert!(bad("kind = overall\ntypo_key = 3\n").to_string().contains("typo_key"));
    assert!(bad("kind = fig9\n").to_string().contains("fig9"));
    assert!(bad("kind = overall\nmethods = neural_field\n").is_usage());
    assert!(bad("kind = generalization\n[data]\nsecond_array = \n").is_usage());
    let ok = ExperimentConfig::from_file(&ConfigFile::parse("kind = generalization\n").unwrap()).unwrap();
    assert!(ok.data.second_array.is_some());
}

#[test]
fn per_method_sections_override_training() {
    let text = format!("{TINY}\n[train.visrec]\nlambda = 0.5\nepochs = 3\n");
    let cfg = ExperimentConfig::from_file(&ConfigFile::parse(&text).unwrap()).unwrap();
    let v = cfg.train_config(Method::Trained(TrainMode::Visrec));
    let s = cfg.train_config(Method::Trained(TrainMode::Supervised));
    assert_eq!((v.lambda, v.epochs, v.mode), (0.5, 3, TrainMode::Visrec));
    assert_eq!((s.lambda, s.epochs, s.mode), (0.1, 2, TrainMode::Supervised));
}

fn parse_svg(svg: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(svg).expect("well-formed SVG")
}

#[test]
fn single_point_plot_has_one_marker() {
    let mut r = SweepResult::new(ExperimentKind::Overall);
    r.rows.push(SweepRow {
        method: "dirty".into(),
        sweep_value: 0.0,
        seed: 0,
        lfd: 1.0,
        psnr_db: 12.0,
        ssim: 0.3,
    });
    r.aggregates = aggregate(&r.rows);
    let svg = render_svg(&r, PlotMetric::Psnr, "x").unwrap();
    let doc = parse_svg(&svg);
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("version"), Some("1.1"));
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 1);
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 1);
    assert!(render_svg(&SweepResult::new(ExperimentKind::Overall), PlotMetric::Psnr, "x").is_err());
}

#[test]
fn sweep_plots_are_deterministic_and_well_formed() {
    let cfg = tiny(ExperimentKind::SampleLossRobustness, &[Method::Dirty, Method::Clean]);
    let r = run_experiment(&cfg).unwrap();
    for m in PlotMetric::ALL {
        let a = render_svg(&r, m, "loss <fraction> & more").unwrap();
        let b = render_svg(&r, m, "loss <fraction> & more").unwrap();
        assert_eq!(a, b);
        let doc = parse_svg(&a);
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("circle")).count(), 12);
        assert!(doc.descendants().any(|n| n.text() == Some("clean")));
    }
}

fn visrec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_visrec")).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn cli_exit_codes() {
    let out = visrec(&["experiment", "run", "--config", "/nonexistent/overall.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/overall.cfg"));

    let out = visrec(&["train", "--confg", "x.cfg", "--out", "m.vrck"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));

    assert_eq!(visrec(&["--help"]).status.code(), Some(0));
    for sub in [
        vec!["dataset", "build"],
        vec!["dataset", "inspect"],
        vec!["train"],
        vec!["eval"],
        vec!["experiment", "run"],
        vec!["clean"],
        vec!["plot"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let out = visrec(&args);
        assert_eq!(out.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.vrds");
    write(&broken, "VRDS");
    let out = visrec(&["dataset", "inspect", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let cfg = TINY.replace("methods = dirty, clean", "methods = dirty, clean, visrec");
    write(Path::new(&p("overall.cfg")), &cfg);

    let out = visrec(&["dataset", "build", "--config", &p("overall.cfg"), "--seed", "3", "--out", &p("d.vrds")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = visrec(&["dataset", "inspect", &p("d.vrds")]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("labeled = 4") && text.contains("unlabeled = 4") && text.contains("test = 3"), "{text}");
    assert!(text.contains("points_per_example = 60"));

    let out = visrec(&["train", "--config", &p("overall.cfg"), "--dataset", &p("d.vrds"), "--mode", "visrec", "--out", &p("m.vrck")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("epoch=2 l_sup="));
    assert_eq!(std::fs::read_to_string(p("m.vrck.log")).unwrap().lines().count(), 2);

    let out = visrec(&["eval", "--checkpoint", &p("m.vrck"), "--dataset", &p("d.vrds"), "--out", &p("eval.csv")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("psnr_db="));

    let out = visrec(&["clean", "--dataset", &p("d.vrds"), "--index", "1", "--out", &p("clean.vrim")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(visrec_core::interferometry::io::load_image(p("clean.vrim")).is_ok());

    let out = visrec(&["experiment", "run", "--config", &p("overall.cfg"), "--seed", "7", "--out", &p("results")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "summary.csv", "examples.csv", "psnr.svg", "ssim.svg", "lfd.svg", "train.log"] {
        assert!(dir.path().join("results").join(f).exists(), "{f}");
    }
    let rows = read_results(&dir.path().join("results/results.csv")).unwrap();
    assert_eq!(rows.rows.len(), 3);
    assert!(rows.rows.iter().all(|r| r.seed == 7));

    let out = visrec(&["plot", "--results", &p("results/results.csv"), "--metric", "ssim", "--out", &p("s.svg")]);
    assert_eq!(out.status.code(), Some(0));
    roxmltree::Document::parse(&std::fs::read_to_string(p("s.svg")).unwrap()).unwrap();
}
