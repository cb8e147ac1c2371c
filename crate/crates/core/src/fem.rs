//! Sparse assembly and direct solves: P1 Laplace problems and the
//! Taylor-Hood (P2 velocity / P1 pressure) saddle-point system.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::field::{p2_shape, DiscreteField, Space};
use crate::mesh::{Mesh, Point};
use crate::quadrature::TriRule;

/// LU factorization of a sparse matrix assembled from (possibly repeated) triplets.
pub struct SparseLu {
    n: usize,
    matrix: SparseColMat<usize, f64>,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<Self> {
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, triplets)
            .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))?;
        let lu = matrix
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { n, matrix, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Structure("right-hand side has the wrong length".into()));
        }
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("linear solve produced non-finite values".into()));
        }
        Ok(out)
    }

    /// `‖A x - b‖_2 / ‖b‖_2` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let xc = Col::<f64>::from_fn(self.n, |i| x[i]);
        let ax = &self.matrix * &xc;
        let num: f64 = (0..self.n).map(|i| (ax[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
        let den: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let xc = Col::<f64>::from_fn(self.n, |i| x[i]);
        let ax = &self.matrix * &xc;
        (0..self.n).map(|i| ax[i]).collect()
    }
}

/// Mass and stiffness triplets of scalar P1 on all vertices.
pub fn p1_mass_stiffness(mesh: &Mesh) -> (Vec<Triplet<usize, usize, f64>>, Vec<Triplet<usize, usize, f64>>) {
    let mut mass = Vec::with_capacity(9 * mesh.triangles.len());
    let mut stiff = Vec::with_capacity(9 * mesh.triangles.len());
    for (tri, g) in mesh.triangles.iter().zip(&mesh.geom) {
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { g.area / 6.0 } else { g.area / 12.0 };
                mass.push(Triplet::new(tri[i], tri[j], m));
                let k = g.area * (g.grad_bary[i][0] * g.grad_bary[j][0] + g.grad_bary[i][1] * g.grad_bary[j][1]);
                stiff.push(Triplet::new(tri[i], tri[j], k));
            }
        }
    }
    (mass, stiff)
}

/// `∫ φ_i r` for the P1 basis, with `r` given at the quadrature points of `rule`.
pub fn p1_load(mesh: &Mesh, rule: &TriRule, r: &[f64]) -> Vec<f64> {
    let nq = rule.len();
    let mut b = vec![0.0; mesh.n_nodes()];
    for (t, (tri, g)) in mesh.triangles.iter().zip(&mesh.geom).enumerate() {
        for (q, (l, w)) in rule.bary.iter().zip(&rule.weights).enumerate() {
            let v = g.area * w * r[t * nq + q];
            for i in 0..3 {
                b[tri[i]] += v * l[i];
            }
        }
    }
    b
}

/// `sup_q ∫ q r / ‖q‖_2` over scalar P1 `q`, i.e. `sqrt(bᵀ M⁻¹ b)`.
pub fn p1_dual_norm(mesh: &Mesh, rule: &TriRule, r: &[f64]) -> Result<f64> {
    let b = p1_load(mesh, rule, r);
    let (mass, _) = p1_mass_stiffness(mesh);
    let lu = SparseLu::new(mesh.n_nodes(), &mass)?;
    let x = lu.solve(&b)?;
    Ok(b.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
}

/// Scalar P1 Galerkin solution of `-Δu = 0` with vertex Dirichlet values on
/// the boundary (values at interior vertices are ignored).
pub fn p1_harmonic(mesh: &Mesh, boundary_values: &[f64]) -> Result<Vec<f64>> {
    let nn = mesh.n_nodes();
    let mut index = vec![usize::MAX; nn];
    let mut n_free = 0;
    for i in 0..nn {
        if !mesh.is_boundary_node(i) {
            index[i] = n_free;
            n_free += 1;
        }
    }
    let mut u: Vec<f64> = (0..nn).map(|i| if mesh.is_boundary_node(i) { boundary_values[i] } else { 0.0 }).collect();
    if n_free == 0 {
        return Ok(u);
    }
    let (_, stiff) = p1_mass_stiffness(mesh);
    let mut trips = Vec::with_capacity(stiff.len());
    let mut rhs = vec![0.0; n_free];
    for t in &stiff {
        let (i, j) = (t.row, t.col);
        if index[i] == usize::MAX {
            continue;
        }
        if index[j] == usize::MAX {
            rhs[index[i]] -= t.val * u[j];
        } else {
            trips.push(Triplet::new(index[i], index[j], t.val));
        }
    }
    let lu = SparseLu::new(n_free, &trips)?;
    let x = lu.solve(&rhs)?;
    let rel = lu.relative_residual(&x, &rhs);
    if rel > 1e-10 && rhs.iter().any(|v| *v != 0.0) {
        return Err(Error::Numerical(format!("harmonic lift residual {rel:e}")));
    }
    for i in 0..nn {
        if index[i] != usize::MAX {
            u[i] = x[index[i]];
        }
    }
    Ok(u)
}

/// Which gradient the viscous bilinear form pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientForm {
    /// `∫ ν ∇u : ∇φ`
    Full,
    /// `∫ ν Du : Dφ`
    Symmetric,
}

/// Data of one Taylor-Hood solve for `v` (all per-quadrature-point arrays are
/// indexed `t * rule.len() + q`):
///
/// `∫ (ν + μ) Dv:Dφ - ∫ (w ⊗ v):Dφ - ∫ π div φ = ∫ f·φ + ∫ μ Dg:Dφ`,
/// `∫ q div v = ∫ q r` for all P1 `q`, with `v = dirichlet` on the boundary and
/// pressure mean fixed to zero.
pub struct SaddleSpec<'a> {
    pub rule: &'static TriRule,
    pub form: GradientForm,
    pub nu: Option<&'a [f64]>,
    pub mu: Option<&'a [f64]>,
    /// Field `g` entering the `μ` right-hand side.
    pub mu_shift: Option<&'a DiscreteField>,
    pub advect: Option<&'a [Point]>,
    pub force: Option<&'a [Point]>,
    pub div_rhs: Option<&'a [f64]>,
    /// Full-length velocity dof vector; only boundary entries are used.
    pub dirichlet: &'a [f64],
}

pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Lagrange multiplier of the pressure-mean constraint; it absorbs any
    /// mismatch between `∮ v·n` and `∫ r`.
    pub multiplier: f64,
    pub linear_residual: f64,
}

/// Velocity dof numbering: boundary dofs are eliminated.
pub struct DofMap {
    pub free: Vec<usize>,
    pub index: Vec<usize>,
}

impl DofMap {
    pub fn velocity(mesh: &Mesh) -> Self {
        let n = 2 * mesh.n_p2();
        let mut index = vec![usize::MAX; n];
        let mut free = Vec::new();
        for k in 0..mesh.n_p2() {
            if !mesh.is_boundary_p2(k) {
                for c in 0..2 {
                    index[2 * k + c] = free.len();
                    free.push(2 * k + c);
                }
            }
        }
        Self { free, index }
    }
}

fn local_velocity(
    spec: &SaddleSpec,
    t: usize,
    q: usize,
    n: &[f64; 6],
    g: &[Point; 6],
    kmat: &mut [[f64; 12]; 12],
    weight: f64,
) {
    let nq = spec.rule.len();
    let idx = t * nq + q;
    let nu = spec.nu.map_or(1.0, |v| v[idx]) + spec.mu.map_or(0.0, |v| v[idx]);
    let w = weight;
    for a in 0..6 {
        for b in 0..6 {
            let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
            for c in 0..2 {
                for d in 0..2 {
                    let mut v = 0.0;
                    match spec.form {
                        GradientForm::Full => {
                            if c == d {
                                v += nu * gg;
                            }
                        }
                        GradientForm::Symmetric => {
                            v += 0.5 * nu * (if c == d { gg } else { 0.0 } + g[a][d] * g[b][c]);
                        }
                    }
                    if let Some(adv) = spec.advect {
                        let wv = adv[idx];
                        let wg = wv[0] * g[a][0] + wv[1] * g[a][1];
                        v -= 0.5 * n[b] * (wv[c] * g[a][d] + if c == d { wg } else { 0.0 });
                    }
                    kmat[2 * a + c][2 * b + d] += w * v;
                }
            }
        }
    }
}

/// Assembles and solves the Taylor-Hood system described by `spec`.
pub fn solve_saddle(mesh: &Mesh, spec: &SaddleSpec) -> Result<SaddleSolution> {
    let nv = 2 * mesh.n_p2();
    if spec.dirichlet.len() != nv {
        return Err(Error::Structure("dirichlet vector must cover all velocity dofs".into()));
    }
    let nn = mesh.n_nodes();
    let map = DofMap::velocity(mesh);
    let nf = map.free.len();
    let n_total = nf + nn + 1;
    let rule = spec.rule;
    let nq = rule.len();

    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(mesh.triangles.len() * (144 + 72 + 3));
    let mut rhs = vec![0.0; n_total];

    for t in 0..mesh.triangles.len() {
        let geom = &mesh.geom[t];
        let dofs = mesh.p2_dofs(t);
        let tri = mesh.triangles[t];
        let mut kmat = [[0.0; 12]; 12];
        let mut bmat = [[0.0; 12]; 3];
        let mut fvec = [0.0; 12];
        let mut mvec = [0.0; 3];
        let mut rvec = [0.0; 3];
        for q in 0..nq {
            let l = rule.bary[q];
            let wq = geom.area * rule.weights[q];
            let (n, g) = p2_shape(l, &geom.grad_bary);
            local_velocity(spec, t, q, &n, &g, &mut kmat, wq);
            let idx = t * nq + q;
            if let Some(f) = spec.force {
                for a in 0..6 {
                    fvec[2 * a] += wq * f[idx][0] * n[a];
                    fvec[2 * a + 1] += wq * f[idx][1] * n[a];
                }
            }
            if let (Some(mu), Some(shift)) = (spec.mu, spec.mu_shift) {
                let dg = shift.sample(t, l).sym_grad();
                for a in 0..6 {
                    for c in 0..2 {
                        // Dφ : Dg for φ = N_a e_c
                        let s = g[a][0] * dg[c][0] + g[a][1] * dg[c][1];
                        fvec[2 * a + c] += wq * mu[idx] * s;
                    }
                }
            }
            for i in 0..3 {
                mvec[i] += wq * l[i];
                if let Some(r) = spec.div_rhs {
                    rvec[i] -= wq * l[i] * r[idx];
                }
                for a in 0..6 {
                    for d in 0..2 {
                        bmat[i][2 * a + d] -= wq * l[i] * g[a][d];
                    }
                }
            }
        }
        let gdof = |k: usize| 2 * dofs[k / 2] + k % 2;
        for r in 0..12 {
            let gi = gdof(r);
            let fi = map.index[gi];
            if fi == usize::MAX {
                continue;
            }
            rhs[fi] += fvec[r];
            for c in 0..12 {
                let gj = gdof(c);
                let fj = map.index[gj];
                if fj == usize::MAX {
                    rhs[fi] -= kmat[r][c] * spec.dirichlet[gj];
                } else if kmat[r][c] != 0.0 {
                    trips.push(Triplet::new(fi, fj, kmat[r][c]));
                }
            }
        }
        for i in 0..3 {
            let pi = nf + tri[i];
            rhs[pi] += rvec[i];
            for c in 0..12 {
                let gj = gdof(c);
                let fj = map.index[gj];
                if fj == usize::MAX {
                    rhs[pi] -= bmat[i][c] * spec.dirichlet[gj];
                } else {
                    trips.push(Triplet::new(pi, fj, bmat[i][c]));
                    trips.push(Triplet::new(fj, pi, bmat[i][c]));
                }
            }
            trips.push(Triplet::new(pi, n_total - 1, mvec[i]));
            trips.push(Triplet::new(n_total - 1, pi, mvec[i]));
        }
    }

    let lu = SparseLu::new(n_total, &trips)?;
    let x = lu.solve(&rhs)?;
    let linear_residual = lu.relative_residual(&x, &rhs);
    let mut velocity = vec![0.0; nv];
    for k in 0..nv {
        velocity[k] = if map.index[k] == usize::MAX { spec.dirichlet[k] } else { x[map.index[k]] };
    }
    // boundary dofs not on the boundary keep zero in `dirichlet` semantics
    let pressure = x[nf..nf + nn].to_vec();
    Ok(SaddleSolution { velocity, pressure, multiplier: x[n_total - 1], linear_residual })
}

/// Boundary values of a P2 vector field as a full dof vector (zero inside).
pub fn dirichlet_from_field(f: &DiscreteField) -> Result<Vec<f64>> {
    if f.space != Space::VectorP2 {
        return Err(Error::Structure("dirichlet data must be a vector P2 field".into()));
    }
    let m = &*f.mesh;
    let mut d = vec![0.0; f.dofs.len()];
    for k in 0..m.n_p2() {
        if m.is_boundary_p2(k) {
            d[2 * k] = f.dofs[2 * k];
            d[2 * k + 1] = f.dofs[2 * k + 1];
        }
    }
    Ok(d)
}

/// Vector P2 mass plus (full-gradient) stiffness triplets restricted to free dofs.
pub fn p2_h1_matrix(mesh: &Mesh, map: &DofMap) -> Vec<Triplet<usize, usize, f64>> {
    let rule = crate::quadrature::tri_deg4();
    let mut trips = Vec::with_capacity(mesh.triangles.len() * 72);
    for t in 0..mesh.triangles.len() {
        let geom = &mesh.geom[t];
        let dofs = mesh.p2_dofs(t);
        let mut k = [[0.0; 6]; 6];
        for (l, w) in rule.bary.iter().zip(&rule.weights) {
            let (n, g) = p2_shape(*l, &geom.grad_bary);
            let wq = geom.area * w;
            for a in 0..6 {
                for b in 0..6 {
                    k[a][b] += wq * (n[a] * n[b] + g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..2 {
                    let (i, j) = (map.index[2 * dofs[a] + c], map.index[2 * dofs[b] + c]);
                    if i != usize::MAX && j != usize::MAX {
                        trips.push(Triplet::new(i, j, k[a][b]));
                    }
                }
            }
        }
    }
    trips
}
