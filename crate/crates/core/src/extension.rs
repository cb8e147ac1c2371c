//! Discrete extensions of boundary and divergence data: the harmonic lift,
//! the boundary-layer cutoff, the zero-trace divergence correction, the
//! solenoidal tangential extension and the Stokes lift of the remainder.

use std::sync::Arc;

use serde::Serialize;

use crate::boundary::{check_compatibility, distance_field, BoundaryData, BoundaryTrace, NodalSplit};
use crate::error::{Error, Result};
use crate::exponents::ExponentTable;
use crate::fem::{p1_dual_norm, p1_harmonic, solve_saddle, GradientForm, SaddleSpec};
use crate::field::{DiscreteField, Space};
use crate::mesh::{Mesh, Point};
use crate::norms::{norm_grad_p, norm_lp};
use crate::quadrature::{tri_deg4, TriRule};

/// Tolerance of the compatibility precondition of the Stokes lift.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Piecewise-linear cutoff: 1 up to `eta`, 0 beyond `2 eta`.
pub fn cutoff_eval(eta: f64, dist: f64) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Parameter(format!("eta = {eta} must be positive")));
    }
    if !(dist >= 0.0) {
        return Err(Error::Parameter(format!("distance {dist} must be non-negative")));
    }
    Ok(if dist <= eta {
        1.0
    } else if dist >= 2.0 * eta {
        0.0
    } else {
        2.0 - dist / eta
    })
}

#[derive(Clone, Debug)]
pub struct CutoffField {
    pub eta: f64,
    pub values: DiscreteField,
}

impl CutoffField {
    pub fn new(mesh: &Arc<Mesh>, eta: f64) -> Result<Self> {
        let d = distance_field(mesh);
        let dofs = d.dofs.iter().map(|&x| cutoff_eval(eta, x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { eta, values: DiscreteField::new(mesh.clone(), Space::ScalarP1, dofs)? })
    }

    /// Area of the triangles on which the cutoff is not identically zero.
    pub fn support_area(&self) -> f64 {
        let m = &*self.values.mesh;
        m.triangles
            .iter()
            .zip(&m.geom)
            .filter(|(t, _)| t.iter().any(|&i| self.values.dofs[i] > 0.0))
            .map(|(_, g)| g.area)
            .sum()
    }

    /// `max_T |∇ψ|` (the gradient is constant per triangle).
    pub fn grad_sup(&self) -> f64 {
        let m = &*self.values.mesh;
        (0..m.triangles.len())
            .map(|t| {
                let g = self.values.sample(t, [1.0 / 3.0; 3]).grad[0];
                g[0].hypot(g[1])
            })
            .fold(0.0, f64::max)
    }
}

/// Componentwise P1 harmonic extension of vertex values given on the boundary
/// (entries at interior nodes are ignored).
pub fn harmonic_lift(mesh: &Arc<Mesh>, boundary_values: &[Point]) -> Result<DiscreteField> {
    if boundary_values.len() != mesh.n_nodes() {
        return Err(Error::Structure("boundary values must be indexed by node".into()));
    }
    let nn = mesh.n_nodes();
    let mut dofs = vec![0.0; 2 * nn];
    for c in 0..2 {
        let bv: Vec<f64> = boundary_values.iter().map(|v| v[c]).collect();
        let u = p1_harmonic(mesh, &bv)?;
        for i in 0..nn {
            dofs[2 * i + c] = u[i];
        }
    }
    DiscreteField::new(mesh.clone(), Space::VectorP1, dofs)
}

/// Harmonic lift of a trace (vertex values are averaged between incident edges).
pub fn harmonic_lift_trace(mesh: &Arc<Mesh>, g: &BoundaryTrace) -> Result<DiscreteField> {
    harmonic_lift(mesh, &NodalSplit::vertex_values(mesh, g))
}

/// P2 vector field with the given boundary values (zero inside).
fn p2_boundary_field(mesh: &Arc<Mesh>, g: &BoundaryTrace) -> DiscreteField {
    let nn = mesh.n_nodes();
    let vertex = NodalSplit::vertex_values(mesh, g);
    let mut dofs = vec![0.0; 2 * mesh.n_p2()];
    for i in mesh.boundary_nodes() {
        dofs[2 * i] = vertex[i][0];
        dofs[2 * i + 1] = vertex[i][1];
    }
    for (k, e) in mesh.boundary.iter().enumerate() {
        let j = nn + e.edge;
        dofs[2 * j] = g.values[k][1][0];
        dofs[2 * j + 1] = g.values[k][1][1];
    }
    DiscreteField::new(mesh.clone(), Space::VectorP2, dofs).expect("P2 dofs")
}

fn scalar_at_qp(f: &DiscreteField, rule: &TriRule) -> Vec<f64> {
    let nt = f.mesh.triangles.len();
    let mut out = Vec::with_capacity(nt * rule.len());
    for t in 0..nt {
        for l in &rule.bary {
            out.push(f.sample(t, *l).value[0]);
        }
    }
    out
}

fn div_at_qp(f: &DiscreteField, rule: &TriRule) -> Vec<f64> {
    let nt = f.mesh.triangles.len();
    let mut out = Vec::with_capacity(nt * rule.len());
    for t in 0..nt {
        for l in &rule.bary {
            out.push(f.sample(t, *l).div());
        }
    }
    out
}

/// `sup_q ∫ q (div v - r) / ‖q‖_2` over scalar P1 `q`, with `r` a scalar field
/// (or zero when `None`).
pub fn divergence_residual(v: &DiscreteField, r: Option<&DiscreteField>) -> Result<f64> {
    let rule = crate::quadrature::tri_deg8();
    let mut d = div_at_qp(v, rule);
    if let Some(r) = r {
        if !r.same_mesh(v) {
            return Err(Error::Structure("fields on different meshes".into()));
        }
        for (x, y) in d.iter_mut().zip(scalar_at_qp(r, rule)) {
            *x -= y;
        }
    }
    p1_dual_norm(&v.mesh, rule, &d)
}

/// Discrete Stokes lift: Taylor-Hood solution of `-Δk + ∇π = 0`, `div k = g1`,
/// `k = g_n` on the boundary, mean-free pressure.
pub fn stokes_lift(
    mesh: &Arc<Mesh>,
    g_n: &BoundaryTrace,
    g1: &DiscreteField,
) -> Result<(DiscreteField, DiscreteField)> {
    let data = BoundaryData::new(g1.clone(), g_n.clone())?;
    let residual = check_compatibility(&data, mesh);
    if residual > COMPATIBILITY_TOL {
        return Err(Error::Incompatible { residual, tolerance: COMPATIBILITY_TOL });
    }
    stokes_solve(mesh, g_n, Some(g1), None)
}

fn stokes_solve(
    mesh: &Arc<Mesh>,
    trace: &BoundaryTrace,
    g1: Option<&DiscreteField>,
    div_field: Option<&DiscreteField>,
) -> Result<(DiscreteField, DiscreteField)> {
    let rule = tri_deg4();
    let bc = p2_boundary_field(mesh, trace);
    let r = match (g1, div_field) {
        (Some(g), _) => Some(scalar_at_qp(g, rule)),
        (None, Some(f)) => Some(div_at_qp(f, rule)),
        (None, None) => None,
    };
    let spec = SaddleSpec {
        rule,
        form: GradientForm::Full,
        nu: None,
        mu: None,
        mu_shift: None,
        advect: None,
        force: None,
        div_rhs: r.as_deref(),
        dirichlet: &bc.dofs,
    };
    let sol = solve_saddle(mesh, &spec)?;
    if sol.linear_residual > 1e-8 {
        return Err(Error::Numerical(format!("Stokes solve residual {:e}", sol.linear_residual)));
    }
    Ok((
        DiscreteField::new(mesh.clone(), Space::VectorP2, sol.velocity)?,
        DiscreteField::new(mesh.clone(), Space::ScalarP1, sol.pressure)?,
    ))
}

/// Zero-trace field with the same discrete divergence as `f`, which must have
/// vanishing normal trace.
pub fn divergence_correct(f: &DiscreteField) -> Result<DiscreteField> {
    let f = f.to_p2()?;
    let mesh = f.mesh.clone();
    let split_normals = NodalSplit::new(&mesh, &BoundaryTrace::zeros(&mesh));
    let scale = f.max_abs().max(1.0);
    let nn = mesh.n_nodes();
    let mut worst: f64 = 0.0;
    for i in mesh.boundary_nodes() {
        let v = f.p2_value(i);
        let (inc, out) = mesh.boundary_neighbours(i).expect("boundary node");
        let normals = if split_normals.corner[i] {
            vec![mesh.boundary[inc].normal, mesh.boundary[out].normal]
        } else {
            vec![split_normals.normal[i]]
        };
        for n in normals {
            worst = worst.max((v[0] * n[0] + v[1] * n[1]).abs());
        }
    }
    for e in &mesh.boundary {
        let v = f.p2_value(nn + e.edge);
        worst = worst.max((v[0] * e.normal[0] + v[1] * e.normal[1]).abs());
    }
    if worst > 1e-10 * scale {
        return Err(Error::Precondition(format!(
            "field has normal boundary component {worst:e}; divergence correction needs zero normal trace"
        )));
    }
    let (w, _) = stokes_solve(&mesh, &BoundaryTrace::zeros(&mesh), None, Some(&f))?;
    Ok(w)
}

#[derive(Clone, Debug)]
pub struct TangentialExtension {
    pub eta: f64,
    /// Pre-cutoff harmonic lift `h` (vector P1).
    pub lift: DiscreteField,
    pub cutoff: CutoffField,
    /// `ψ h` (vector P2, exact product).
    pub localized: DiscreteField,
    /// Divergence correction `E(ψ h)`.
    pub correction: DiscreteField,
    /// `ψ h - E(ψ h)`.
    pub field: DiscreteField,
    pub warnings: Vec<String>,
}

fn check_eta(mesh: &Mesh, eta: f64, warnings: &mut Vec<String>) -> Result<()> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.nodes {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    if !(eta > 0.0 && eta < 0.5 * diam) {
        return Err(Error::Parameter(format!("eta = {eta} must lie in (0, diam/2 = {})", 0.5 * diam)));
    }
    if eta < 2.0 * mesh.h_max {
        warnings.push(format!(
            "eta = {eta} is below twice the mesh size {}; the boundary layer is unresolved",
            mesh.h_max
        ));
    }
    Ok(())
}

/// Solenoidal extension of vertex tangential values (zero off the boundary):
/// harmonic lift, cutoff at length `eta`, divergence correction.
pub fn build_tangential_extension(
    mesh: &Arc<Mesh>,
    g_t: &[Point],
    eta: f64,
) -> Result<TangentialExtension> {
    let mut warnings = Vec::new();
    check_eta(mesh, eta, &mut warnings)?;
    let lift = harmonic_lift(mesh, g_t)?;
    let cutoff = CutoffField::new(mesh, eta)?;
    let mut dofs = vec![0.0; 2 * mesh.n_p2()];
    for k in 0..mesh.n_p2() {
        let h = lift.p2_value(k);
        let psi = cutoff.values.p2_value(k)[0];
        dofs[2 * k] = psi * h[0];
        dofs[2 * k + 1] = psi * h[1];
    }
    let localized = DiscreteField::new(mesh.clone(), Space::VectorP2, dofs)?;
    let correction = if localized.max_abs() == 0.0 {
        DiscreteField::zeros(mesh.clone(), Space::VectorP2)
    } else {
        divergence_correct(&localized)?
    };
    let field = localized.sub(&correction)?;
    Ok(TangentialExtension { eta, lift, cutoff, localized, correction, field, warnings })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ExtensionNorms {
    /// `‖h_η‖_r`
    pub h_lr: f64,
    /// `‖∇h_η‖_p`
    pub h_w1p: f64,
    /// `‖∇k‖_p`
    pub k_w1p: f64,
    /// `‖k‖_r`
    pub k_lr: f64,
    /// `‖h‖_q` of the pre-cutoff lift.
    pub lift_lq: f64,
    /// Discrete divergence residuals of `h_η` (against 0) and `k` (against `g1`).
    pub h_div_residual: f64,
    pub k_div_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ExtensionPair {
    pub tangential: TangentialExtension,
    pub h_eta: DiscreteField,
    pub k: DiscreteField,
    /// Pressure of the Stokes lift producing `k`.
    pub k_pressure: DiscreteField,
    pub g: DiscreteField,
    pub norms: ExtensionNorms,
    pub warnings: Vec<String>,
}

/// `g = h_η + k` with `h_η` the solenoidal tangential extension and `k` the
/// Stokes lift of the remaining boundary values and `g1`.
pub fn build_extension_pair(
    mesh: &Arc<Mesh>,
    data: &BoundaryData,
    eta: f64,
    ex: &ExponentTable,
) -> Result<ExtensionPair> {
    let residual = check_compatibility(data, mesh);
    if residual > COMPATIBILITY_TOL {
        return Err(Error::Incompatible { residual, tolerance: COMPATIBILITY_TOL });
    }
    let split = NodalSplit::new(mesh, &data.g2);
    let tangential = build_tangential_extension(mesh, &split.tangential, eta)?;
    let h_trace = BoundaryTrace::of_field(&tangential.field)?;
    let k_trace = data.g2.sub(&h_trace)?;
    let (k, k_pressure) = stokes_lift(mesh, &k_trace, &data.g1)?;
    let h_eta = tangential.field.clone();
    let g = h_eta.add(&k)?;
    let norms = ExtensionNorms {
        h_lr: norm_lp(&h_eta, ex.r)?,
        h_w1p: norm_grad_p(&h_eta, ex.p)?,
        k_w1p: norm_grad_p(&k, ex.p)?,
        k_lr: norm_lp(&k, ex.r)?,
        lift_lq: norm_lp(&tangential.lift, ex.q)?,
        h_div_residual: divergence_residual(&h_eta, None)?,
        k_div_residual: divergence_residual(&k, Some(&data.g1))?,
    };
    let warnings = tangential.warnings.clone();
    Ok(ExtensionPair { tangential, h_eta, k, k_pressure, g, norms, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_eval(0.1, 0.05).unwrap(), 1.0);
        assert!((cutoff_eval(0.1, 0.15).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(cutoff_eval(0.1, 0.25).unwrap(), 0.0);
        assert!(cutoff_eval(0.0, 0.1).is_err());
    }

    #[test]
    fn zero_stokes_data_gives_zero() {
        let m = Arc::new(build_mesh(Domain::UnitSquare, 4).unwrap());
        let g1 = DiscreteField::zeros(m.clone(), Space::ScalarP1);
        let (k, pi) = stokes_lift(&m, &BoundaryTrace::zeros(&m), &g1).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        assert_eq!(pi.max_abs(), 0.0);
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let m = Arc::new(build_mesh(Domain::UnitSquare, 4).unwrap());
        let g1 = DiscreteField::interpolate_scalar(m.clone(), Space::ScalarP1, |_| 1.0).unwrap();
        match stokes_lift(&m, &BoundaryTrace::zeros(&m), &g1) {
            Err(Error::Incompatible { residual, .. }) => assert!((residual - 1.0).abs() < 1e-14),
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }
}
