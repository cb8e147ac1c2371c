//! Symmetric triangle rules (weights normalized to sum 1) and Gauss-Legendre
//! rules on `[0, 1]`.

use std::sync::OnceLock;

#[derive(Clone, Debug)]
pub struct TriRule {
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriRule {
    fn push_orbit(&mut self, pts: &[f64; 3], w: f64) {
        let [a, b, c] = *pts;
        let mut perms = vec![[a, b, c], [b, c, a], [c, a, b], [b, a, c], [a, c, b], [c, b, a]];
        perms.sort_by(|x, y| x.partial_cmp(y).unwrap());
        perms.dedup();
        for p in perms {
            self.bary.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Six-point rule, exact for polynomials of degree 4.
pub fn tri_deg4() -> &'static TriRule {
    static RULE: OnceLock<TriRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut r = TriRule { bary: vec![], weights: vec![] };
        let a = 0.445_948_490_915_965;
        let b = 0.091_576_213_509_771;
        r.push_orbit(&[a, a, 1.0 - 2.0 * a], 0.223_381_589_678_011);
        r.push_orbit(&[b, b, 1.0 - 2.0 * b], 0.109_951_743_655_322);
        r
    })
}

/// Sixteen-point rule, exact for polynomials of degree 8.
pub fn tri_deg8() -> &'static TriRule {
    static RULE: OnceLock<TriRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut r = TriRule { bary: vec![], weights: vec![] };
        r.push_orbit(&[1.0 / 3.0; 3], 0.144_315_607_677_787);
        for (a, w) in [
            (0.459_292_588_292_723, 0.095_091_634_267_285),
            (0.170_569_307_751_760, 0.103_217_370_534_718),
            (0.050_547_228_317_031, 0.032_458_497_623_198),
        ] {
            r.push_orbit(&[a, a, 1.0 - 2.0 * a], w);
        }
        r.push_orbit(
            &[0.008_394_777_409_958, 0.263_112_829_634_638, 0.728_492_392_955_404],
            0.027_230_314_174_435,
        );
        r
    })
}

/// `n`-point Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Cached Gauss-Legendre rule on `[0, 1]`.
pub fn gl(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (1..=40).map(gauss_legendre).collect());
    &cache[n.clamp(1, 40) - 1]
}
