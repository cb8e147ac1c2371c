//! Lebesgue, Sobolev and fractional boundary norms of discrete fields.

use crate::boundary::BoundaryTrace;
use crate::error::{Error, Result};
use crate::field::{DiscreteField, Sample};
use crate::mesh::Mesh;
use crate::quadrature::{gl, tri_deg8, TriRule};

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("norm exponent p = {p} must be >= 1")))
    }
}

/// `Σ_T ∫_T g(sample)` with the given rule, summed in element order.
pub fn integrate_sample(f: &DiscreteField, rule: &TriRule, g: impl Fn(&Sample) -> f64) -> f64 {
    let mut total = 0.0;
    for (t, geom) in f.mesh.geom.iter().enumerate() {
        let mut acc = 0.0;
        for (l, w) in rule.bary.iter().zip(&rule.weights) {
            acc += w * g(&f.sample(t, *l));
        }
        total += geom.area * acc;
    }
    total
}

fn frob(m: &[[f64; 2]; 2]) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

fn pth_root(i: f64, p: f64) -> f64 {
    i.max(0.0).powf(1.0 / p)
}

/// `‖f‖_p`; vectors use the Euclidean norm pointwise.
pub fn norm_lp(f: &DiscreteField, p: f64) -> Result<f64> {
    check_p(p)?;
    let vector = f.space.is_vector();
    let i = integrate_sample(f, tri_deg8(), |s| {
        let v = if vector { s.value[0].hypot(s.value[1]) } else { s.value[0].abs() };
        v.powf(p)
    });
    Ok(pth_root(i, p))
}

/// `‖Df‖_p` with the symmetric gradient for vector fields, `‖∇f‖_p` for scalars.
pub fn norm_w1p(f: &DiscreteField, p: f64) -> Result<f64> {
    check_p(p)?;
    let vector = f.space.is_vector();
    let i = integrate_sample(f, tri_deg8(), |s| {
        let v = if vector { frob(&s.sym_grad()) } else { s.grad[0][0].hypot(s.grad[0][1]) };
        v.powf(p)
    });
    Ok(pth_root(i, p))
}

/// `‖∇f‖_p` with the full (Frobenius) gradient.
pub fn norm_grad_p(f: &DiscreteField, p: f64) -> Result<f64> {
    check_p(p)?;
    let i = integrate_sample(f, tri_deg8(), |s| frob(&s.grad).powf(p));
    Ok(pth_root(i, p))
}

/// `‖div f‖_p` for vector fields.
pub fn norm_div_p(f: &DiscreteField, p: f64) -> Result<f64> {
    check_p(p)?;
    if !f.space.is_vector() {
        return Err(Error::Structure("divergence needs a vector field".into()));
    }
    let i = integrate_sample(f, tri_deg8(), |s| s.div().abs().powf(p));
    Ok(pth_root(i, p))
}

/// `‖g‖_{L^p(∂Ω)}` with Gauss-Legendre on each edge.
pub fn boundary_lp(mesh: &Mesh, g: &BoundaryTrace, p: f64) -> Result<f64> {
    check_p(p)?;
    let (x, w) = gl(8);
    let mut total = 0.0;
    for (k, e) in mesh.boundary.iter().enumerate() {
        let mut acc = 0.0;
        for (t, wt) in x.iter().zip(w) {
            let v = g.eval(k, *t);
            acc += wt * v[0].hypot(v[1]).powf(p);
        }
        total += e.length * acc;
    }
    Ok(pth_root(total, p))
}

fn diff_pow(a: [f64; 2], b: [f64; 2], p: f64) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1]).powf(p)
}

const SINGULAR_POINTS: usize = 16;

/// Gagliardo seminorm to the power `p`:
/// `∬_{∂Ω×∂Ω} |g(x) - g(y)|^p / |x - y|^{1+θp}`. Returns `+∞` when the trace
/// jumps at a vertex and `θp ≥ 1`.
pub fn gagliardo_seminorm_pow(mesh: &Mesh, g: &BoundaryTrace, theta: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Parameter(format!("theta = {theta} must lie in (0, 1)")));
    }
    let nb = mesh.boundary.len();
    let expo = 1.0 + theta * p;
    let pts: Vec<([f64; 2], [f64; 2])> =
        mesh.boundary.iter().map(|e| (mesh.nodes[e.a], mesh.nodes[e.b])).collect();
    let pos = |k: usize, t: f64| {
        let (a, b) = pts[k];
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };
    let scale = g.max_abs().max(f64::MIN_POSITIVE);

    let mut total = 0.0;
    let (xs, ws) = gl(SINGULAR_POINTS);

    // Same edge: symmetric in (s, t); u = s - t with u = w^{1/(β+1)}.
    let beta = p - 1.0 - theta * p;
    for (k, e) in mesh.boundary.iter().enumerate() {
        let l = e.length;
        let mut acc = 0.0;
        for (wq, ww) in xs.iter().zip(ws) {
            let u = wq.powf(1.0 / (beta + 1.0));
            let du = u / ((beta + 1.0) * wq);
            let span = 1.0 - u;
            let mut inner = 0.0;
            for (tq, tw) in xs.iter().zip(ws) {
                let t = span * tq;
                inner += tw * diff_pow(g.eval(k, t + u), g.eval(k, t), p);
            }
            acc += ww * du * span * inner / (l * u).powf(expo);
        }
        total += 2.0 * acc * l * l;
    }

    for k in 0..nb {
        for m in k + 1..nb {
            let (ek, em) = (&mesh.boundary[k], &mesh.boundary[m]);
            // shared vertex, expressed as parameters on both edges
            let shared = if ek.b == em.a {
                Some((1.0, 0.0))
            } else if ek.a == em.b {
                Some((0.0, 1.0))
            } else if ek.a == em.a {
                Some((0.0, 0.0))
            } else if ek.b == em.b {
                Some((1.0, 1.0))
            } else {
                None
            };
            let val = if let Some((pk, pm)) = shared {
                let jump = (g.eval(k, pk)[0] - g.eval(m, pm)[0]).hypot(g.eval(k, pk)[1] - g.eval(m, pm)[1]);
                let gamma = if jump > 1e-12 * scale {
                    if theta * p >= 1.0 {
                        return Ok(f64::INFINITY);
                    }
                    -1.0 - theta * p
                } else {
                    p - 1.0 - theta * p
                };
                // s, t measured from the shared vertex along each edge
                let on_k = |s: f64| if pk == 0.0 { s } else { 1.0 - s };
                let on_m = |t: f64| if pm == 0.0 { t } else { 1.0 - t };
                let f = |s: f64, t: f64| {
                    let (x, y) = (pos(k, on_k(s)), pos(m, on_m(t)));
                    let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                    diff_pow(g.eval(k, on_k(s)), g.eval(m, on_m(t)), p) / r.powf(expo)
                };
                let mut acc = 0.0;
                for (yq, yw) in xs.iter().zip(ws) {
                    let z = yq.powf(1.0 / (gamma + 2.0));
                    let jac = z * z / ((gamma + 2.0) * yq);
                    for (vq, vw) in xs.iter().zip(ws) {
                        let v = z * vq;
                        acc += yw * vw * jac * (f(z, v) + f(v, z));
                    }
                }
                acc * ek.length * em.length
            } else {
                let ck = pos(k, 0.5);
                let cm = pos(m, 0.5);
                let d = (ck[0] - cm[0]).hypot(ck[1] - cm[1]);
                let n = if d < 3.0 * ek.length.max(em.length) { 16 } else { 6 };
                let (xq, wq) = gl(n);
                let mut acc = 0.0;
                for (s, ws_) in xq.iter().zip(wq) {
                    let (x, gx) = (pos(k, *s), g.eval(k, *s));
                    for (t, wt) in xq.iter().zip(wq) {
                        let y = pos(m, *t);
                        let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                        acc += ws_ * wt * diff_pow(gx, g.eval(m, *t), p) / r.powf(expo);
                    }
                }
                acc * ek.length * em.length
            };
            total += 2.0 * val;
        }
    }
    Ok(total)
}

/// `[‖g‖_{L^p(∂Ω)}^p + |g|_{θ,p}^p]^{1/p}`.
pub fn norm_fractional_boundary(mesh: &Mesh, g: &BoundaryTrace, theta: f64, p: f64) -> Result<f64> {
    let lp = boundary_lp(mesh, g, p)?;
    let semi = gagliardo_seminorm_pow(mesh, g, theta, p)?;
    Ok((lp.powf(p) + semi).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Space;
    use crate::mesh::{build_mesh, Domain};
    use std::sync::Arc;

    #[test]
    fn lebesgue_examples() {
        let m = Arc::new(build_mesh(Domain::UnitSquare, 4).unwrap());
        let c = DiscreteField::interpolate_scalar(m.clone(), Space::ScalarP1, |_| -2.5).unwrap();
        for p in [1.0, 1.5, 3.0] {
            assert!((norm_lp(&c, p).unwrap() - 2.5).abs() < 1e-13);
        }
        let x = DiscreteField::interpolate_scalar(m.clone(), Space::ScalarP1, |x| x[0]).unwrap();
        assert!((norm_lp(&x, 2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let v = DiscreteField::interpolate_vector(m, Space::VectorP1, |x| [x[0], -x[1]]).unwrap();
        assert!((norm_w1p(&v, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(norm_lp(&v, 0.5).is_err());
    }

    #[test]
    fn constant_trace_has_no_seminorm() {
        let m = build_mesh(Domain::UnitSquare, 4).unwrap();
        let g = BoundaryTrace::from_point_fn(&m, |_| [0.6, -0.8]);
        assert!(gagliardo_seminorm_pow(&m, &g, 0.5, 2.0).unwrap() < 1e-24);
        let n = norm_fractional_boundary(&m, &g, 0.3, 1.7).unwrap();
        assert!((n - 4f64.powf(1.0 / 1.7)).abs() < 1e-13);
    }
}
