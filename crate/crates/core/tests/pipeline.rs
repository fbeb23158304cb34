use std::io::Write;

use confsel::{emit_csv, emit_plot, read_report, run_experiment, ExperimentConfig, Method, Scenario};

fn quick(scenario: Scenario) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        n_train: 60,
        n_test: 30,
        dims: vec![2, 4],
        reps: 3,
        lambda_count: 10,
        k_grid: vec![3, 6],
        beta_count: 3,
        search_budget: 60,
        ..ExperimentConfig::default()
    }
}

#[test]
fn csv_and_plot_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&quick(Scenario::RidgePoisson)).unwrap();
    let csv = dir.path().join("nested/report.csv");
    emit_csv(&report, &csv).unwrap();
    let back = read_report(&csv).unwrap();
    assert_eq!(back.rows.len(), 3 * 4 * 2);
    assert_eq!(back.aggregates.len(), report.aggregates.len());
    for (a, b) in report.rows.iter().zip(&back.rows) {
        assert_eq!((a.rep, a.method, a.d), (b.rep, b.method, b.d));
        assert_eq!(a.coverage.to_bits(), b.coverage.to_bits());
        assert_eq!(a.width.to_bits(), b.width.to_bits());
    }

    let svg = dir.path().join("fig.svg");
    emit_plot(&back, &svg, 0.1).unwrap();
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(text.contains("data-value=\"0.9\""));
}

#[test]
fn csv_source_runs_on_subsamples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "a,b,y").unwrap();
    for i in 0..120 {
        let (a, b) = ((i % 7) as f64, (i % 11) as f64 / 3.0);
        writeln!(f, "{a},{b},{}", 2.0 * a - b + ((i * 37) % 13) as f64 / 10.0).unwrap();
    }
    drop(f);
    let cfg = ExperimentConfig {
        csv_path: Some(path),
        n_train: 80,
        n_test: 40,
        methods: vec![Method::Efcp, Method::Vfcp, Method::Naive],
        ..quick(Scenario::RidgeLinearT)
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3 * 3);
    assert!(report.rows.iter().all(|r| r.d == 2 && !r.is_error()));
}

#[test]
fn same_seed_gives_same_report() {
    let cfg = quick(Scenario::LinearAggregation);
    assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    let other = ExperimentConfig { seed: 2, ..cfg.clone() };
    assert_ne!(run_experiment(&cfg).unwrap(), run_experiment(&other).unwrap());
}
