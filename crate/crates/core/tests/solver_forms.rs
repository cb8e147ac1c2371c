use std::sync::Arc;

use gnse_core::boundary::{BoundaryData, BoundaryTrace};
use gnse_core::field::{DiscreteField, Space};
use gnse_core::manufactured::gradient;
use gnse_core::mesh::{build_mesh, Domain, Mesh, Point};
use gnse_core::norms::norm_w1p;
use gnse_core::solver::{
    convective_form, convective_reformulation_check, penalty_form, residual_weak_form, solve_with_lift,
    stress_pairing, viscous_form, Force, SolveConfig,
};
use gnse_core::tensor::{StressLaw, StressModel, SymMatrix};

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(build_mesh(Domain::UnitSquare, n).unwrap())
}

fn bubble(x: Point) -> f64 {
    x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
}

fn wavy(mesh: &Arc<Mesh>, space: Space, k: f64) -> DiscreteField {
    DiscreteField::interpolate_vector(mesh.clone(), space, |x| {
        [(k * x[0] + 0.3).sin() * x[1], (k * x[1]).cos() - x[0] * x[0]]
    })
    .unwrap()
}

#[test]
fn viscous_form_matches_elementwise_oracle() {
    // P1 fields have constant gradients, so the form is a finite sum
    let mesh = square(6);
    let law = StressModel::new(1.6, 0.05, 1.0, 1.0).unwrap();
    let (u, g, phi) = (wavy(&mesh, Space::VectorP1, 2.0), wavy(&mesh, Space::VectorP1, -1.0), wavy(&mesh, Space::VectorP1, 3.0));
    let mut want = 0.0;
    for (t, geom) in mesh.geom.iter().enumerate() {
        let c = [1.0 / 3.0; 3];
        let d = u.sample(t, c).sym_grad();
        let e = g.sample(t, c).sym_grad();
        let a = SymMatrix::new2(d[0][0] + e[0][0], d[0][1] + e[0][1], d[1][1] + e[1][1]);
        let dp = phi.sample(t, c).sym_grad();
        let b = SymMatrix::new2(dp[0][0], dp[0][1], dp[1][1]);
        want += geom.area * law.stress(&a).dot(&b);
    }
    let got = viscous_form(&u, &g, &phi, &law).unwrap();
    assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn penalty_pairing_is_the_sigma_norm() {
    let mesh = square(5);
    for (k, sigma) in [(1.0, 2.5), (3.0, 3.0), (-2.0, 4.0)] {
        let u = wavy(&mesh, Space::VectorP2, k);
        let pairing = penalty_form(&u, &u, sigma).unwrap();
        let norm = norm_w1p(&u, sigma).unwrap().powf(sigma);
        assert!(pairing >= 0.0);
        assert!((pairing - norm).abs() < 1e-10 * norm, "{pairing} vs {norm}");
    }
    assert!(penalty_form(&wavy(&mesh, Space::VectorP2, 1.0), &wavy(&mesh, Space::VectorP2, 1.0), 1.5).is_err());
}

#[test]
fn constant_transport_of_zero_trace_field_vanishes() {
    let mesh = square(6);
    let c = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, |_| [0.7, -1.3]).unwrap();
    let zero = DiscreteField::zeros(mesh.clone(), Space::VectorP2);
    let phi = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, |x| [bubble(x), -2.0 * bubble(x)]).unwrap();
    assert!(convective_form(&c, &zero, &phi).unwrap().abs() < 1e-14);
}

/// Curl of an asymmetric stream function vanishing to second order on the boundary.
fn solenoidal(x: Point) -> Point {
    let psi = |y: Point| [bubble(y).powi(2) * (1.0 + y[0] + 2.0 * y[1] * y[1]), 0.0];
    let g = gradient(&psi, x);
    [g[0][1], -g[0][0]]
}

#[test]
fn convective_term_is_antisymmetric_in_the_limit() {
    let values: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let mesh = square(n);
            let u = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, solenoidal).unwrap();
            let zero = DiscreteField::zeros(mesh.clone(), Space::VectorP2);
            convective_form(&u, &zero, &u).unwrap().abs()
        })
        .collect();
    assert!(values[1] < values[0] && values[2] < values[1], "{values:?}");
    assert!(values[2] < 1e-6, "{values:?}");
}

#[test]
fn reformulation_gap_closes_under_refinement() {
    let gaps: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let mesh = square(n);
            let u = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, solenoidal).unwrap();
            let g = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, |x| [x[1], -x[0]]).unwrap();
            let g1 = DiscreteField::zeros(mesh.clone(), Space::ScalarP1);
            convective_reformulation_check(&u, &g, &g1).unwrap().2
        })
        .collect();
    assert!(gaps[2] < gaps[0] && gaps[2] < 1e-5, "{gaps:?}");
}

#[test]
fn unsolved_state_has_large_residual() {
    let mesh = square(8);
    let law = StressModel::new(1.75, 0.01, 1.0, 1.0).unwrap();
    let data = BoundaryData::zero(mesh.clone());
    let zero_v = DiscreteField::zeros(mesh.clone(), Space::VectorP2);
    let zero_p = DiscreteField::zeros(mesh.clone(), Space::ScalarP1);
    let force = Force::constant([1.0, 0.5]);
    let r = residual_weak_form(&zero_v, &zero_p, &data, &force, &law).unwrap();
    assert!(r > 1e-2, "{r}");
    assert_eq!(residual_weak_form(&zero_v, &zero_p, &data, &Force::zero(), &law).unwrap(), 0.0);
}

#[test]
fn forced_solve_reduces_residual_monotonically() {
    let mesh = square(8);
    let law = StressModel::new(1.6, 0.1, 1.0, 1.0).unwrap();
    let data = BoundaryData::zero(mesh.clone());
    let lift = DiscreteField::zeros(mesh.clone(), Space::VectorP2);
    let force = Force::new(|x| [(3.0 * x[1]).sin(), x[0]]);
    let cfg = SolveConfig { penalty: true, n_reg: 10, ..SolveConfig::default() };
    let r = solve_with_lift(&lift, &data.g1, &force, &law, &cfg).unwrap();
    assert!(r.converged, "{}", r.status);
    assert!(r.residual_history.windows(2).all(|w| w[1] < w[0]));
    let weak = residual_weak_form(&r.v, &r.pressure, &data, &force, &law).unwrap();
    // the weak form omits the penalty, which is of size ‖Du‖_σ^{σ-1}/n
    let penalty_size = r.du_norm_sigma.powf(cfg.sigma - 1.0) / cfg.n_reg as f64;
    assert!(weak <= 10.0 * penalty_size + 1e-7, "{weak} vs {penalty_size}");
    assert_eq!(BoundaryTrace::of_field(&r.v).unwrap().max_abs(), 0.0);
    assert!(stress_pairing(&r.u, &law).unwrap() > 0.0);
}

#[test]
fn incompatible_inputs_are_rejected() {
    let mesh = square(4);
    let other = square(5);
    let u = wavy(&mesh, Space::VectorP2, 1.0);
    let v = wavy(&other, Space::VectorP2, 1.0);
    let s = DiscreteField::zeros(mesh.clone(), Space::ScalarP1);
    assert!(penalty_form(&s, &u, 3.0).is_err());
    let law = StressModel::new(1.75, 0.0, 1.0, 1.0).unwrap();
    let cfg = SolveConfig::default();
    assert!(solve_with_lift(&v, &s, &Force::zero(), &law, &cfg).is_err());
    assert!(solve_with_lift(&s, &s, &Force::zero(), &law, &cfg).is_err());
}
