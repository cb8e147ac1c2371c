use std::sync::Arc;

use gnse_core::boundary::{BoundaryData, BoundaryTrace};
use gnse_core::field::{DiscreteField, Space};
use gnse_core::mesh::{build_mesh, Domain};
use gnse_core::report::{emit_report, run_csv, sweep_csv, sweep_svg, ReportFormat, RUN_COLUMNS, SWEEP_COLUMNS};
use gnse_core::scenario::{run_with_inputs, sweep_eta, EtaPolicy, Inputs, Scenario, Stage};
use gnse_core::solver::Force;

fn cell<'a>(csv: &'a str, column: &str) -> &'a str {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    row[header.iter().position(|h| *h == column).unwrap()]
}

fn quick(name: &str) -> Scenario {
    Scenario { resolution: 8, structure_pairs: 2000, sweep: vec![], ..Scenario::preset(name).unwrap() }
}

#[test]
fn sweep_shows_interior_minimum() {
    let etas: Vec<f64> = (-3..=7).map(|k| 10f64.powi(k)).collect();
    let table = sweep_eta(&quick("cavity"), &etas, false).unwrap();
    let l: Vec<f64> = table.rows.iter().map(|r| r.l).collect();
    let imin = (0..l.len()).min_by(|a, b| l[*a].total_cmp(&l[*b])).unwrap();
    assert!(imin > 0 && imin < l.len() - 1, "{l:?}");
}

#[test]
fn normal_data_gives_flat_sweep() {
    let etas = [1e-3, 1e-2, 1e-1, 1.0];
    let table = sweep_eta(&quick("normal-only"), &etas, false).unwrap();
    let first = table.rows[0].l;
    assert!(first > 0.0);
    for r in &table.rows {
        assert!((r.l - first).abs() <= 1e-14 * first);
    }
    let csv = sweep_csv(&table);
    assert_eq!(csv.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 5);
    // no extension columns were requested
    assert!(csv.lines().nth(1).unwrap().ends_with(",,,,,,"));
}

#[test]
fn sweep_rejects_unordered_etas() {
    assert!(sweep_eta(&quick("cavity"), &[0.1, 0.01], false).is_err());
    assert!(sweep_eta(&quick("cavity"), &[0.0, 0.01], false).is_err());
}

#[test]
fn svg_has_one_polyline_per_quantity() {
    let table = sweep_eta(&quick("cavity"), &[0.05, 0.1, 0.2], true).unwrap();
    let svg = sweep_svg(&table, "cavity <test>").unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 7);
    assert!(svg.contains("cavity &lt;test&gt;"));
    let plain = sweep_eta(&quick("cavity"), &[0.05, 0.1], false).unwrap();
    assert_eq!(sweep_svg(&plain, "x").unwrap().matches("<polyline").count(), 5);
}

#[test]
fn stages_that_did_not_run_leave_empty_cells() {
    let s = Scenario { solve: None, ..quick("tangential-cavity") };
    let r = gnse_core::scenario::run_scenario(&s);
    assert!(!r.failed(), "{:?}", r.errors);
    let csv = run_csv(&r);
    assert_eq!(csv.lines().next().unwrap(), RUN_COLUMNS.join(","));
    for col in ["converged", "iterations", "weak_residual", "apriori"] {
        assert_eq!(cell(&csv, col), "", "{col}");
    }
    assert_ne!(cell(&csv, "eta"), "");
    assert_eq!(cell(&csv, "minimum"), "infimum at lower boundary");
}

#[test]
fn incompatible_data_keeps_earlier_stages() {
    let s = Scenario { eta: EtaPolicy::Fixed(0.25), ..quick("cavity") };
    let mesh = Arc::new(build_mesh(Domain::UnitSquare, 8).unwrap());
    let g2 = BoundaryTrace::from_fn(&mesh, |e, _| e.normal);
    let data = BoundaryData::new(DiscreteField::zeros(mesh.clone(), Space::ScalarP1), g2).unwrap();
    let r = run_with_inputs(&s, Some(Inputs { mesh, data, force: Force::zero() }));
    assert!(r.smallness.is_some());
    assert!(r.extension.is_none() && r.solve.is_none());
    assert_eq!(r.errors.len(), 1);
    assert_eq!(r.errors[0].stage, Stage::Extension);
    assert!(r.errors[0].message.contains("incompatible"), "{}", r.errors[0].message);
    assert!(cell(&run_csv(&r), "errors").contains("extension"));
}

#[test]
fn reports_are_written() {
    let s = Scenario { sweep: vec![0.1, 0.2], solve: None, ..quick("cavity") };
    let r = gnse_core::scenario::run_scenario(&s);
    let dir = std::env::temp_dir().join(format!("gnse-report-{}", std::process::id()));
    let csv = emit_report(&r, ReportFormat::Csv, &dir).unwrap();
    assert_eq!(csv.len(), 2);
    let svg = emit_report(&r, ReportFormat::SvgPlot, &dir).unwrap();
    assert!(svg[0].to_string_lossy().ends_with("cavity_sweep.svg"));
    assert_eq!(std::fs::read_to_string(&csv[0]).unwrap(), run_csv(&r));
    std::fs::remove_dir_all(&dir).unwrap();

    let no_sweep = gnse_core::scenario::run_scenario(&quick("zero-data"));
    assert!(emit_report(&no_sweep, ReportFormat::SvgPlot, &dir).is_err());
}

#[test]
fn scenario_json_is_strict() {
    let s = quick("perturbation");
    assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    let extra = s.to_json().replacen('{', "{\"bogus\": 1,", 1);
    assert!(Scenario::from_json(&extra).is_err());
    let bad_q = s.to_json().replace("\"q\": 10.0", "\"q\": 2.0");
    assert!(Scenario::from_json(&bad_q).is_err());
}
