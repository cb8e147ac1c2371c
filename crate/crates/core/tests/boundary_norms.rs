use gnse_core::boundary::BoundaryTrace;
use gnse_core::mesh::{build_mesh, Domain, Mesh};
use gnse_core::norms::{boundary_lp, gagliardo_seminorm_pow, norm_fractional_boundary};

fn square(n: usize) -> Mesh {
    build_mesh(Domain::UnitSquare, n).unwrap()
}

/// Arc-length parametrization of the unit square boundary.
fn perimeter_point(s: f64) -> [f64; 2] {
    let s = s.rem_euclid(4.0);
    match s as u32 {
        0 => [s, 0.0],
        1 => [1.0, s - 1.0],
        2 => [3.0 - s, 1.0],
        _ => [0.0, 4.0 - s],
    }
}

/// Midpoint-rule brute force of the double integral for a smooth `g`.
fn brute_force(g: impl Fn([f64; 2]) -> [f64; 2], theta: f64, p: f64, n: usize) -> f64 {
    let h = 4.0 / n as f64;
    let pts: Vec<([f64; 2], [f64; 2])> = (0..n)
        .map(|i| {
            let x = perimeter_point((i as f64 + 0.5) * h);
            (x, g(x))
        })
        .collect();
    let mut total = 0.0;
    for (i, (x, gx)) in pts.iter().enumerate() {
        for (j, (y, gy)) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let r = (x[0] - y[0]).hypot(x[1] - y[1]);
            total += (gx[0] - gy[0]).hypot(gx[1] - gy[1]).powf(p) / r.powf(1.0 + theta * p);
        }
    }
    total * h * h
}

#[test]
fn identity_trace_has_closed_form() {
    // |g(x) - g(y)| = |x - y| and θ = 1 - 1/p make the integrand 1.
    let mesh = square(4);
    let g = BoundaryTrace::from_point_fn(&mesh, |x| x);
    for p in [1.5, 2.0, 3.0] {
        let v = gagliardo_seminorm_pow(&mesh, &g, 1.0 - 1.0 / p, p).unwrap();
        assert!((v - 16.0).abs() < 1e-6 * 16.0, "p = {p}: {v}");
    }
}

#[test]
fn matches_brute_force() {
    let mesh = square(8);
    let f = |x: [f64; 2]| [(3.0 * x[0]).sin() * x[1], x[0] * x[0] - x[1]];
    let g = BoundaryTrace::from_point_fn(&mesh, f);
    let (theta, p) = (0.2, 2.0);
    let got = gagliardo_seminorm_pow(&mesh, &g, theta, p).unwrap();
    let want = brute_force(f, theta, p, 3200);
    // the trace is a piecewise quadratic interpolant of f
    assert!((got - want).abs() < 2e-3 * want, "{got} vs {want}");
}

#[test]
fn constants_and_jumps() {
    let mesh = square(4);
    let c = BoundaryTrace::from_point_fn(&mesh, |_| [2.0, -1.0]);
    assert!(gagliardo_seminorm_pow(&mesh, &c, 0.5, 2.0).unwrap() < 1e-24);
    let lp = boundary_lp(&mesh, &c, 2.0).unwrap();
    assert!((lp - (4.0f64 * 5.0).sqrt()).abs() < 1e-12);
    let frac = norm_fractional_boundary(&mesh, &c, 0.5, 2.0).unwrap();
    assert!((frac - lp).abs() < 1e-10);

    // tangential unit field jumps at every corner
    let t = BoundaryTrace::from_fn(&mesh, |e, _| e.tangent());
    assert_eq!(gagliardo_seminorm_pow(&mesh, &t, 0.5, 3.0).unwrap(), f64::INFINITY);
    let finite = gagliardo_seminorm_pow(&mesh, &t, 0.3, 2.0).unwrap();
    assert!(finite.is_finite() && finite > 0.0);
    assert!(gagliardo_seminorm_pow(&mesh, &t, 1.0, 2.0).is_err());
}
