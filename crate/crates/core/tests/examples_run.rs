#[allow(dead_code)]
#[path = "../examples/compare_schemes.rs"]
mod compare_schemes;
#[allow(dead_code)]
#[path = "../examples/convergence_fit.rs"]
mod convergence_fit;
#[allow(dead_code)]
#[path = "../examples/custom_model.rs"]
mod custom_model;
#[allow(dead_code)]
#[path = "../examples/reproduce_cli.rs"]
mod reproduce_cli;
#[allow(dead_code)]
#[path = "../examples/residuals.rs"]
mod residuals;
#[allow(dead_code)]
#[path = "../examples/single_path.rs"]
mod single_path;
#[allow(dead_code)]
#[path = "../examples/stability_region.rs"]
mod stability_region;
#[allow(dead_code)]
#[path = "../examples/transition_matrix.rs"]
mod transition_matrix;

#[test]
fn transition_matrix_example_runs() {
    let rows = transition_matrix::run_example().unwrap();
    assert_eq!(rows.len(), 3);
    let dt = 1e-5;
    for (row, q) in rows.iter().zip([2.0f64, 1.5, 0.5]) {
        let leave = (1.0 - (-(1.0 + q) * dt).exp()) / (1.0 + q);
        assert!((row[1] - leave).abs() < 1e-15);
        assert!((row[2] - q * leave).abs() < 1e-15);
        assert!((row[0] + row[1] - 1.0).abs() < 1e-15);
    }
}

#[test]
fn single_path_example_runs() {
    let err = single_path::run_example().unwrap();
    assert!(err > 0.0 && err < 1e-3);
}

#[test]
fn compare_schemes_example_runs() {
    let table = compare_schemes::run_example().unwrap();
    assert_eq!(table.len(), 3);
    for row in &table {
        assert!(row[1] < row[0], "symmetric beats EM: {row:?}");
    }
}

#[test]
fn convergence_fit_example_runs() {
    let slope = convergence_fit::run_example().unwrap();
    assert!(slope > 0.7 && slope < 1.5, "{slope}");
}

#[test]
fn stability_region_example_runs() {
    let (em, sym) = stability_region::run_example().unwrap();
    assert!(em > 0 && sym > 0);
}

#[test]
fn custom_model_example_runs() {
    let last = custom_model::run_example().unwrap();
    assert!(last.iter().all(|v| v.is_finite() && v.abs() < 10.0));
}

#[test]
fn residuals_example_runs() {
    assert!(residuals::run_example().unwrap() < 1e-12);
}

#[test]
fn reproduce_cli_example_runs() {
    let text = reproduce_cli::run_example().unwrap();
    assert!(text.contains("symmetric-PCEM"), "{text}");
}
