//! Forcing terms for manufactured solutions, by nested central differences.

use crate::mesh::Point;
use crate::tensor::StressLaw;

const STEP: f64 = 1e-3;

/// Fourth-order central difference of `f` at `x` along axis `axis`.
fn diff<F: Fn(Point) -> [f64; N], const N: usize>(f: &F, x: Point, axis: usize) -> [f64; N] {
    let at = |s: f64| {
        let mut y = x;
        y[axis] += s * STEP;
        f(y)
    };
    let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * STEP);
    }
    out
}

/// `∇v` with `grad[i][j] = ∂_j v_i`.
pub fn gradient(v: &impl Fn(Point) -> Point, x: Point) -> [[f64; 2]; 2] {
    let dx = diff(v, x, 0);
    let dy = diff(v, x, 1);
    [[dx[0], dy[0]], [dx[1], dy[1]]]
}

fn stress_of<L: StressLaw>(law: &L, g: [[f64; 2]; 2]) -> [f64; 4] {
    let d = [g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1]];
    let n = (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]).sqrt();
    let nu = if n == 0.0 { 0.0 } else { law.viscosity(n) };
    [nu * d[0], nu * d[1], nu * d[1], nu * d[2]]
}

/// Force making `(v, π)` a solution of the momentum equation
/// `-div S(Dv) + div(v ⊗ v) + ∇π = f`.
pub fn momentum_force<L: StressLaw>(
    law: L,
    v: impl Fn(Point) -> Point,
    pressure: impl Fn(Point) -> f64,
) -> impl Fn(Point) -> Point {
    move |x| {
        // rows of S - v ⊗ v, flattened
        let flux = |y: Point| {
            let s = stress_of(&law, gradient(&v, y));
            let w = v(y);
            [s[0] - w[0] * w[0], s[1] - w[0] * w[1], s[2] - w[1] * w[0], s[3] - w[1] * w[1]]
        };
        let fx = diff(&flux, x, 0);
        let fy = diff(&flux, x, 1);
        let p = |y: Point| [pressure(y)];
        let (px, py) = (diff(&p, x, 0)[0], diff(&p, x, 1)[0]);
        [-(fx[0] + fy[1]) + px, -(fx[2] + fy[3]) + py]
    }
}
