#![allow(dead_code)]

use gnse_core::field::DiscreteField;
use gnse_core::mesh::Point;
use gnse_core::quadrature::tri_deg8;

/// `‖∇f - G‖_2` against an exact gradient `G` (`G[c][k] = ∂_k f_c`).
pub fn grad_error(f: &DiscreteField, exact: impl Fn(Point) -> [[f64; 2]; 2]) -> f64 {
    let rule = tri_deg8();
    let mut total = 0.0;
    for (t, geom) in f.mesh.geom.iter().enumerate() {
        let mut acc = 0.0;
        for (l, w) in rule.bary.iter().zip(&rule.weights) {
            let s = f.sample(t, *l);
            let g = exact(f.mesh.map_point(t, *l));
            let mut e = 0.0;
            for c in 0..2 {
                for k in 0..2 {
                    e += (s.grad[c][k] - g[c][k]).powi(2);
                }
            }
            acc += w * e;
        }
        total += geom.area * acc;
    }
    total.sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}
