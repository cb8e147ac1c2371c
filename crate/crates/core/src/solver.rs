//! Weak forms of the steady generalized Navier-Stokes system and the damped
//! Picard solver for the regularized problem in the decomposition `v = u + g`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryData, BoundaryTrace};
use crate::error::{Error, Result};
use crate::exponents::{ExponentTable, SmallnessReport};
use crate::extension::ExtensionPair;
use crate::fem::{p1_dual_norm, p2_h1_matrix, solve_saddle, DofMap, GradientForm, SaddleSpec, SparseLu};
use crate::field::{p2_shape, DiscreteField, Sample, Space};
use crate::mesh::{Mesh, Point};
use crate::norms::{integrate_sample, norm_w1p};
use crate::quadrature::{tri_deg8, TriRule};
use crate::tensor::{StressLaw, StressModel};

/// Floor of `δ + |Dv|` in the lagged viscosity.
pub const VISCOSITY_FLOOR: f64 = 1e-10;
/// Consecutive rejected damped steps before giving up.
pub const MAX_REJECTIONS: usize = 5;

/// Body force density.
#[derive(Clone)]
pub struct Force(Arc<dyn Fn(Point) -> Point + Send + Sync>);

impl Force {
    pub fn zero() -> Self {
        Self::new(|_| [0.0, 0.0])
    }

    pub fn constant(f: Point) -> Self {
        Self::new(move |_| f)
    }

    pub fn new(f: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: Point) -> Point {
        (self.0)(x)
    }

    fn at_qp(&self, mesh: &Mesh, rule: &TriRule) -> Vec<Point> {
        let mut out = Vec::with_capacity(mesh.triangles.len() * rule.len());
        for t in 0..mesh.triangles.len() {
            for l in &rule.bary {
                out.push(self.eval(mesh.map_point(t, *l)));
            }
        }
        out
    }
}

impl fmt::Debug for Force {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Force(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Regularization index `n`; the penalty weight is `1/n`.
    pub n_reg: u32,
    pub sigma: f64,
    pub max_picard: usize,
    pub tol_rel: f64,
    /// Initial (and maximal) relaxation factor in `(0, 1]`.
    pub damping: f64,
    /// When false the penalty is dropped (`1/n = 0`).
    pub penalty: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { n_reg: 100, sigma: 3.0, max_picard: 60, tol_rel: 1e-8, damping: 1.0, penalty: true }
    }
}

impl SolveConfig {
    pub fn validate(&self, ex: &ExponentTable) -> Result<()> {
        if self.n_reg < 1 {
            return Err(Error::Parameter("n_reg must be at least 1".into()));
        }
        let lower = ex.s.max(2.0);
        if !(self.sigma > lower) {
            return Err(Error::Consistency(format!(
                "sigma = {} must exceed max(s, 2) = {lower}",
                self.sigma
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Parameter(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if !(self.tol_rel > 0.0) || self.max_picard == 0 {
            return Err(Error::Parameter("tol_rel must be positive and max_picard at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    /// Penalty weight `1/n`, or 0 when the penalty is off.
    pub fn penalty_weight(&self) -> f64 {
        if self.penalty {
            1.0 / self.n_reg as f64
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Zero-trace part (vector P2).
    pub u: DiscreteField,
    /// Mean-free pressure (scalar P1).
    pub pressure: DiscreteField,
    /// `u + g`.
    pub v: DiscreteField,
    /// Relative residual after each accepted step.
    pub residual_history: Vec<f64>,
    /// Residual of the zero initial state, the reference for relative values.
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub du_norm_p: f64,
    pub du_norm_sigma: f64,
    pub status: String,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

fn samples(f: &DiscreteField, rule: &TriRule) -> Vec<Sample> {
    let nt = f.mesh.triangles.len();
    let mut out = Vec::with_capacity(nt * rule.len());
    for t in 0..nt {
        for l in &rule.bary {
            out.push(f.sample(t, *l));
        }
    }
    out
}

fn ddot(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn fnorm(a: &[[f64; 2]; 2]) -> f64 {
    ddot(a, a).sqrt()
}

fn sum_sym(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn scaled(s: f64, a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]]
}

fn law_stress<L: StressLaw>(law: &L, d: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let n = fnorm(d);
    if n == 0.0 {
        return [[0.0; 2]; 2];
    }
    scaled(law.viscosity(n), d)
}

fn vector_field(f: &DiscreteField) -> Result<()> {
    if f.space.is_vector() {
        Ok(())
    } else {
        Err(Error::Structure("expected a vector field".into()))
    }
}

/// `∫ S(Du + Dg) : Dφ`.
pub fn viscous_form<L: StressLaw>(u: &DiscreteField, g: &DiscreteField, phi: &DiscreteField, law: &L) -> Result<f64> {
    for f in [u, g, phi] {
        vector_field(f)?;
    }
    let rule = tri_deg8();
    let (su, sg, sp) = (samples(u, rule), samples(g, rule), samples(phi, rule));
    Ok(quad_sum(&u.mesh, rule, |i| {
        let d = sum_sym(&su[i].sym_grad(), &sg[i].sym_grad());
        ddot(&law_stress(law, &d), &sp[i].sym_grad())
    }))
}

/// `-∫ (u+g) ⊗ (u+g) : Dφ`.
pub fn convective_form(u: &DiscreteField, g: &DiscreteField, phi: &DiscreteField) -> Result<f64> {
    for f in [u, g, phi] {
        vector_field(f)?;
    }
    let rule = tri_deg8();
    let (su, sg, sp) = (samples(u, rule), samples(g, rule), samples(phi, rule));
    Ok(quad_sum(&u.mesh, rule, |i| {
        let v = [su[i].value[0] + sg[i].value[0], su[i].value[1] + sg[i].value[1]];
        let dp = sp[i].sym_grad();
        -(v[0] * v[0] * dp[0][0] + 2.0 * v[0] * v[1] * dp[0][1] + v[1] * v[1] * dp[1][1])
    }))
}

/// `∫ |Du|^{σ-2} Du : Dφ`.
pub fn penalty_form(u: &DiscreteField, phi: &DiscreteField, sigma: f64) -> Result<f64> {
    vector_field(u)?;
    vector_field(phi)?;
    if !(sigma >= 2.0) {
        return Err(Error::Parameter(format!("sigma = {sigma} must be at least 2")));
    }
    let rule = tri_deg8();
    let (su, sp) = (samples(u, rule), samples(phi, rule));
    Ok(quad_sum(&u.mesh, rule, |i| {
        let d = su[i].sym_grad();
        let n = fnorm(&d);
        if n == 0.0 {
            0.0
        } else {
            n.powf(sigma - 2.0) * ddot(&d, &sp[i].sym_grad())
        }
    }))
}

fn quad_sum(mesh: &Mesh, rule: &TriRule, f: impl Fn(usize) -> f64) -> f64 {
    let nq = rule.len();
    let mut total = 0.0;
    for (t, g) in mesh.geom.iter().enumerate() {
        let mut acc = 0.0;
        for q in 0..nq {
            acc += rule.weights[q] * f(t * nq + q);
        }
        total += g.area * acc;
    }
    total
}

/// Both sides of `⟨T(u), u⟩ = -⟨u·∇u, g⟩ + ½⟨g1 u, u⟩ - ⟨g·∇u, g⟩`; returns
/// `(left, right, |left - right|)`.
pub fn convective_reformulation_check(
    u: &DiscreteField,
    g: &DiscreteField,
    g1: &DiscreteField,
) -> Result<(f64, f64, f64)> {
    vector_field(u)?;
    vector_field(g)?;
    let left = convective_form(u, g, u)?;
    let rule = tri_deg8();
    let (su, sg, s1) = (samples(u, rule), samples(g, rule), samples(g1, rule));
    let right = quad_sum(&u.mesh, rule, |i| {
        let (uv, gv, gu) = (su[i].value, sg[i].value, su[i].grad);
        // (a·∇u)·b = Σ_ij b_i a_j ∂_j u_i
        let adv = |a: Point, b: Point| {
            (0..2).map(|i| (0..2).map(|j| b[i] * a[j] * gu[i][j]).sum::<f64>()).sum::<f64>()
        };
        -adv(uv, gv) + 0.5 * s1[i].value[0] * (uv[0] * uv[0] + uv[1] * uv[1]) - adv(gv, gv)
    });
    Ok((left, right, (left - right).abs()))
}

/// Everything the residual evaluation needs.
struct ResidualCtx<'a, L: StressLaw> {
    mesh: &'a Arc<Mesh>,
    rule: &'static TriRule,
    lift_s: Vec<Sample>,
    g1_qp: Vec<f64>,
    force_qp: Vec<Point>,
    law: &'a L,
    penalty: f64,
    sigma: f64,
    map: DofMap,
    h1: SparseLu,
}

impl<'a, L: StressLaw> ResidualCtx<'a, L> {
    fn new(
        lift: &'a DiscreteField,
        g1: &DiscreteField,
        force: &Force,
        law: &'a L,
        penalty: f64,
        sigma: f64,
    ) -> Result<Self> {
        let mesh = &lift.mesh;
        let rule = tri_deg8();
        let map = DofMap::velocity(mesh);
        let h1 = SparseLu::new(map.free.len(), &p2_h1_matrix(mesh, &map))?;
        Ok(Self {
            mesh,
            rule,
            lift_s: samples(lift, rule),
            g1_qp: samples(g1, rule).iter().map(|s| s.value[0]).collect(),
            force_qp: force.at_qp(mesh, rule),
            law,
            penalty,
            sigma,
            map,
            h1,
        })
    }

    /// Momentum residual on free velocity dofs and the divergence defect at
    /// quadrature points, for the state `v = u + g` and pressure `pressure`.
    fn residual(&self, u: &DiscreteField, pressure: &DiscreteField) -> (Vec<f64>, Vec<f64>) {
        let mesh = &**self.mesh;
        let rule = self.rule;
        let nq = rule.len();
        let mut r = vec![0.0; self.map.free.len()];
        let mut div = Vec::with_capacity(mesh.triangles.len() * nq);
        for t in 0..mesh.triangles.len() {
            let geom = &mesh.geom[t];
            let dofs = mesh.p2_dofs(t);
            let mut local = [0.0; 12];
            for q in 0..nq {
                let i = t * nq + q;
                let l = rule.bary[q];
                let w = geom.area * rule.weights[q];
                let su = u.sample(t, l);
                let sg = &self.lift_s[i];
                let du = su.sym_grad();
                let dv = sum_sym(&du, &sg.sym_grad());
                let mut s = law_stress(self.law, &dv);
                if self.penalty > 0.0 {
                    let n = fnorm(&du);
                    if n > 0.0 {
                        s = sum_sym(&s, &scaled(self.penalty * n.powf(self.sigma - 2.0), &du));
                    }
                }
                let v = [su.value[0] + sg.value[0], su.value[1] + sg.value[1]];
                let pi = pressure.sample(t, l).value[0];
                let f = self.force_qp[i];
                div.push(su.div() + sg.div() - self.g1_qp[i]);
                let (n, gr) = p2_shape(l, &geom.grad_bary);
                for a in 0..6 {
                    let vg = v[0] * gr[a][0] + v[1] * gr[a][1];
                    for c in 0..2 {
                        let sd = s[c][0] * gr[a][0] + s[c][1] * gr[a][1];
                        local[2 * a + c] += w * (sd - v[c] * vg - pi * gr[a][c] - f[c] * n[a]);
                    }
                }
            }
            for (k, val) in local.iter().enumerate() {
                let fi = self.map.index[2 * dofs[k / 2] + k % 2];
                if fi != usize::MAX {
                    r[fi] += val;
                }
            }
        }
        (r, div)
    }

    /// `sqrt(Rᵀ K⁻¹ R)` for the momentum part plus the P1 dual norm of the
    /// divergence defect.
    fn dual_norm(&self, u: &DiscreteField, pressure: &DiscreteField) -> Result<f64> {
        let (r, div) = self.residual(u, pressure);
        let z = self.h1.solve(&r)?;
        let mom: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        let d = p1_dual_norm(self.mesh, self.rule, &div)?;
        Ok((mom + d * d).sqrt())
    }
}

/// Solves the regularized problem for `v = u + g` with `g` the extension of the data.
pub fn solve_regularized(
    ext: &ExtensionPair,
    data: &BoundaryData,
    force: &Force,
    m: &StressModel,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    solve_with_lift(&ext.g, &data.g1, force, m, cfg)
}

/// As [`solve_regularized`] with an arbitrary vector P2 lift `g` of the boundary data.
pub fn solve_with_lift<L: StressLaw>(
    lift: &DiscreteField,
    g1: &DiscreteField,
    force: &Force,
    law: &L,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    if lift.space != Space::VectorP2 || g1.space != Space::ScalarP1 || !lift.same_mesh(g1) {
        return Err(Error::Structure("lift must be vector P2 and g1 scalar P1 on the same mesh".into()));
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) || cfg.max_picard == 0 || cfg.n_reg == 0 {
        return Err(Error::Parameter("invalid solver configuration".into()));
    }
    let mesh = lift.mesh.clone();
    let rule = tri_deg8();
    let nq = rule.len();
    let penalty = cfg.penalty_weight();
    let ctx = ResidualCtx::new(lift, g1, force, law, penalty, cfg.sigma)?;
    let dirichlet = crate::fem::dirichlet_from_field(lift)?;
    let g1_qp = ctx.g1_qp.clone();
    let f_qp = ctx.force_qp.clone();

    let mut u = DiscreteField::zeros(mesh.clone(), Space::VectorP2);
    let mut pressure = DiscreteField::zeros(mesh.clone(), Space::ScalarP1);
    let r0 = ctx.dual_norm(&u, &pressure)?;
    let rel = |r: f64| if r0 > 0.0 { r / r0 } else { r };
    let mut current = rel(r0);
    let mut history = Vec::new();
    let mut omega = cfg.damping;
    let mut rejections = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut status = String::from("max iterations reached");

    while iterations < cfg.max_picard {
        iterations += 1;
        // lagged coefficients at the current iterate
        let su = samples(&u, rule);
        let mut nu = Vec::with_capacity(su.len());
        let mut mu = Vec::with_capacity(su.len());
        let mut adv = Vec::with_capacity(su.len());
        for (i, s) in su.iter().enumerate() {
            let g = &ctx.lift_s[i];
            let du = s.sym_grad();
            let dv = sum_sym(&du, &g.sym_grad());
            let n = law.delta() + fnorm(&dv);
            nu.push(law.viscosity((n.max(VISCOSITY_FLOOR) - law.delta()).max(0.0)));
            mu.push(if penalty > 0.0 { penalty * fnorm(&du).powf(cfg.sigma - 2.0) } else { 0.0 });
            adv.push([s.value[0] + g.value[0], s.value[1] + g.value[1]]);
        }
        debug_assert_eq!(nu.len(), mesh.triangles.len() * nq);
        let spec = SaddleSpec {
            rule,
            form: GradientForm::Symmetric,
            nu: Some(&nu),
            mu: if penalty > 0.0 { Some(&mu) } else { None },
            mu_shift: if penalty > 0.0 { Some(lift) } else { None },
            advect: Some(&adv),
            force: Some(&f_qp),
            div_rhs: Some(&g1_qp),
            dirichlet: &dirichlet,
        };
        let sol = solve_saddle(&mesh, &spec)?;
        let v_new = DiscreteField::new(mesh.clone(), Space::VectorP2, sol.velocity)?;
        let u_lin = v_new.sub(lift)?;
        let p_lin = DiscreteField::new(mesh.clone(), Space::ScalarP1, sol.pressure)?;

        loop {
            let cand_u = u.add(&u_lin.sub(&u)?.scale(omega))?;
            let cand_p = pressure.add(&p_lin.sub(&pressure)?.scale(omega))?;
            let r = rel(ctx.dual_norm(&cand_u, &cand_p)?);
            if r < current || r == 0.0 {
                u = cand_u;
                pressure = cand_p;
                current = r;
                history.push(r);
                rejections = 0;
                omega = cfg.damping;
                break;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                break;
            }
            omega *= 0.5;
        }
        if rejections >= MAX_REJECTIONS {
            status = format!("non-convergent: {MAX_REJECTIONS} consecutive damped steps without residual decrease");
            break;
        }
        if current <= cfg.tol_rel {
            converged = true;
            status = "converged".into();
            break;
        }
    }

    let v = u.add(lift)?;
    let du_norm_p = norm_w1p(&u, law.exponent())?;
    let du_norm_sigma = norm_w1p(&u, cfg.sigma)?;
    Ok(SolveResult {
        u,
        pressure,
        v,
        residual_history: history,
        initial_residual: r0,
        iterations,
        converged,
        du_norm_p,
        du_norm_sigma,
        status,
    })
}

/// Absolute residual of the weak formulation for `(v, π)`: momentum dual
/// norm (no penalty) plus the divergence defect and the boundary mismatch.
pub fn residual_weak_form<L: StressLaw>(
    v: &DiscreteField,
    pressure: &DiscreteField,
    data: &BoundaryData,
    force: &Force,
    law: &L,
) -> Result<f64> {
    let v = v.to_p2()?;
    if !v.same_mesh(pressure) || !v.same_mesh(&data.g1) {
        return Err(Error::Structure("fields on different meshes".into()));
    }
    let zero = DiscreteField::zeros(v.mesh.clone(), Space::VectorP2);
    let ctx = ResidualCtx::new(&v, &data.g1, force, law, 0.0, 2.0)?;
    let interior = ctx.dual_norm(&zero, pressure)?;
    let mismatch = BoundaryTrace::of_field(&v)?.max_diff(&data.g2);
    Ok(interior + mismatch)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AprioriCheck {
    pub applicable: bool,
    pub bound_holds: Option<bool>,
    /// `R - max{n^{-2/(2σ-1)} ‖Du‖_σ, ‖Du‖_p}`.
    pub margin: Option<f64>,
    pub measured: f64,
    pub status: String,
}

/// Compares the computed solution with the radius `R` of the smallness report.
/// Reports "not applicable" when the smallness condition fails.
pub fn verify_apriori(result: &SolveResult, report: &SmallnessReport, cfg: &SolveConfig) -> Result<AprioriCheck> {
    if !result.converged {
        return Err(Error::Precondition(format!("solve did not converge ({})", result.status)));
    }
    let scale = if cfg.penalty { (cfg.n_reg as f64).powf(-2.0 / (2.0 * cfg.sigma - 1.0)) } else { 0.0 };
    let measured = (scale * result.du_norm_sigma).max(result.du_norm_p);
    if !report.satisfied {
        return Ok(AprioriCheck {
            applicable: false,
            bound_holds: None,
            margin: None,
            measured,
            status: "not applicable".into(),
        });
    }
    let margin = report.r - measured;
    let holds = margin >= 0.0;
    Ok(AprioriCheck {
        applicable: true,
        bound_holds: Some(holds),
        margin: Some(margin),
        measured,
        status: if holds { "holds".into() } else { "violated".into() },
    })
}

/// `∫ S(Du) : Du` and `‖Du‖_p` for a zero-trace field, used by the energy bounds.
pub fn stress_pairing<L: StressLaw>(u: &DiscreteField, law: &L) -> Result<f64> {
    vector_field(u)?;
    Ok(integrate_sample(u, tri_deg8(), |s| {
        let d = s.sym_grad();
        ddot(&law_stress(law, &d), &d)
    }))
}
