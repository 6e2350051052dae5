use momvc::vc_calculus::risk_radius;
use momvc_bench::output::csv_string;
use momvc_bench::{demo, emit_outputs, run_experiment, BenchError, ExperimentConfig, OutputFormat, CSV_HEADER};

fn pinned() -> ExperimentConfig {
    demo::scenario("pinned").unwrap()
}

#[test]
fn pinned_run_matches_golden_csv() {
    let csv = csv_string(&run_experiment(&pinned()).unwrap());
    assert_eq!(csv, include_str!("fixtures/pinned.csv"));
}

#[test]
fn reruns_are_identical() {
    let cfg = pinned();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(csv_string(&a), csv_string(&b));
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.records, y.records);
    }
}

#[test]
fn records_carry_counter_seeds() {
    let cfg = pinned();
    let result = run_experiment(&cfg).unwrap();
    let mut expected = cfg.seed_base;
    for cell in &result.cells {
        for rec in &cell.records {
            assert_eq!(rec.seed, expected);
            expected += 1;
        }
    }
}

#[test]
fn quantiles_are_monotone_in_delta() {
    let mut cfg = pinned();
    cfg.deltas = vec![0.9, 0.5, 0.25, 0.1, 0.05, 0.01];
    for cell in run_experiment(&cfg).unwrap().cells {
        for w in cell.quantiles.windows(2) {
            assert!(w[0].delta > w[1].delta);
            assert!(w[0].value <= w[1].value);
        }
    }
}

#[test]
fn radius_column_reproduces_bound_calculator() {
    let result = run_experiment(&pinned()).unwrap();
    let csv = csv_string(&result);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), result.cells.len() * 3);
    for (i, row) in rows.iter().enumerate() {
        let cell = &result.cells[i / 3];
        let want = risk_radius(cell.bound.context, &cell.bound_params).unwrap().risk_radius;
        let got: f64 = row.split(',').nth(11).unwrap().parse().unwrap();
        assert_eq!(got.to_bits(), want.to_bits());
        let k: usize = row.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(k, cell.cell.k);
    }
}

#[test]
fn empty_delta_list_gives_header_only() {
    let mut cfg = pinned();
    cfg.deltas.clear();
    let csv = csv_string(&run_experiment(&cfg).unwrap());
    assert_eq!(csv, format!("{CSV_HEADER}\n"));
}

#[test]
fn two_deltas_give_two_rows_per_cell() {
    let mut cfg = pinned();
    cfg.deltas = vec![0.1, 0.01];
    let result = run_experiment(&cfg).unwrap();
    let csv = csv_string(&result);
    assert_eq!(csv.lines().count(), 1 + 2 * result.cells.len());
}

#[test]
fn outputs_are_written_and_unwritable_paths_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&pinned()).unwrap();
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    emit_outputs(&result, OutputFormat::Csv, &csv).unwrap();
    emit_outputs(&result, OutputFormat::Svg, &svg).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), csv_string(&result));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("stroke-dasharray").count(), result.cells.len());

    let bad = dir.path().join("missing").join("out.csv");
    let err = emit_outputs(&result, OutputFormat::Csv, &bad).unwrap_err();
    assert!(matches!(err, BenchError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains(&bad.display().to_string()));
}

#[test]
fn estimator_errors_are_recorded_per_replicate() {
    // Regression needs at least four blocks; every replicate fails but the sweep finishes.
    let cfg = ExperimentConfig::from_toml(
        r#"
        version = 1
        replicates = 3
        seed_base = 0
        deltas = [0.5]
        [estimator]
        kind = "regression"
        model = { beta = { kind = "leading", value = 1.0 } }
        [grid]
        n = [40]
        d = [2]
        k = [2, 8]
        "#,
    )
    .unwrap();
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.cells[0].failures(), 3);
    assert!(result.cells[0].records.iter().all(|r| r.error.is_some()));
    assert!(result.cells[0].quantiles[0].value.is_nan());
    assert_eq!(result.cells[1].failures(), 0);
}

#[test]
fn coverage_meets_nominal_across_k() {
    let mut cfg = demo::scenario("coverage").unwrap();
    cfg.replicates = 30;
    cfg.grid.n = vec![2048];
    cfg.grid.k = vec![16, 64, 256];
    for cell in run_experiment(&cfg).unwrap().cells {
        assert!(cell.coverage >= cell.nominal_coverage, "{:?}: {} < {}", cell.cell, cell.coverage, cell.nominal_coverage);
    }
}
