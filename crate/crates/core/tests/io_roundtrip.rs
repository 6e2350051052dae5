use momvc::data_lab::{generate, regression_generate, CovarianceFactory, GeneratorSpec};
use momvc::io::{read_dataset_csv, read_matrix_csv, write_dataset_csv, write_matrix_csv};
use momvc::mean_est::EstimatorReport;
use momvc::MomError;
use nalgebra::{DMatrix, DVector};

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("momvc-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn dataset_roundtrip_is_exact() {
    let spec = GeneratorSpec::gaussian(vec![1.0, -2.0, 0.5], CovarianceFactory::Identity);
    let data = generate(&spec, 50, 4).unwrap();
    let path = tmp("points.csv");
    write_dataset_csv(&data, &path).unwrap();
    let back = read_dataset_csv(&path).unwrap();
    assert_eq!(back.points, data.points);
    assert!(back.responses.is_none());

    let noise = GeneratorSpec::gaussian(vec![0.0], CovarianceFactory::Identity);
    let beta = DVector::from_vec(vec![1.0, 0.0, 3.0]);
    let reg = regression_generate(&spec, &beta, &noise, 30, 2).unwrap();
    let path = tmp("regression.csv");
    write_dataset_csv(&reg, &path).unwrap();
    let back = read_dataset_csv(&path).unwrap();
    assert_eq!(back.points, reg.points);
    assert_eq!(back.responses, reg.responses);
}

#[test]
fn matrix_roundtrip_is_row_major() {
    let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.5, -3.0, 0.1, 1e-300, 7.0]);
    let path = tmp("m.csv");
    write_matrix_csv(&m, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().next(), Some("1,2.5,-3"));
    assert_eq!(read_matrix_csv(&path).unwrap(), m);
}

#[test]
fn missing_file_reports_path() {
    let err = read_matrix_csv(std::path::Path::new("/nonexistent/m.csv")).unwrap_err();
    assert!(matches!(err, MomError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/m.csv"));
}

#[test]
fn report_serializes_to_json() {
    let r = EstimatorReport {
        estimate: DVector::from_vec(vec![1.0, 2.0]),
        objective_final: 0.5,
        iterations: 3,
        converged: true,
        trace: Some(vec![2.0, 1.0, 0.5]),
        diagnostics: Default::default(),
    };
    let s = serde_json::to_string(&r).unwrap();
    let back: EstimatorReport<DVector<f64>> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
}
