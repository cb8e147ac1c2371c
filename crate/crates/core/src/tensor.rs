//! Symmetric matrices and extra-stress laws with (p,δ)-structure.
//!
//! The representative law is `S(A) = (δ + |A|)^{p-2} A` with the Frobenius
//! norm. Any other law can be plugged in through [`StressLaw`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairs closer than this (in Frobenius norm) are excluded from ratio checks.
pub const DEGENERATE_PAIR_TOL: f64 = 1e-14;

/// Symmetric `d x d` matrix, `d` in {2, 3}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    e: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Structure(format!("dimension {dim} not in {{2, 3}}")));
        }
        Ok(Self { dim, e: [[0.0; 3]; 3] })
    }

    /// Builds a matrix from row slices, rejecting non-symmetric input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Structure(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            m.e[i][..dim].copy_from_slice(row);
        }
        let scale = m.norm().max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (m.e[i][j] - m.e[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::Structure(format!(
                        "matrix not symmetric: a[{i}][{j}] = {} but a[{j}][{i}] = {}",
                        m.e[i][j], m.e[j][i]
                    )));
                }
            }
        }
        Ok(m)
    }

    /// 2x2 symmetric matrix `[[a11, a12], [a12, a22]]`.
    pub fn new2(a11: f64, a12: f64, a22: f64) -> Self {
        let mut e = [[0.0; 3]; 3];
        e[0][0] = a11;
        e[0][1] = a12;
        e[1][0] = a12;
        e[1][1] = a22;
        Self { dim: 2, e }
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(values.len())?;
        for (i, v) in values.iter().enumerate() {
            m.e[i][i] = *v;
        }
        Ok(m)
    }

    /// Symmetric part `(G + G^T)/2` of a 2x2 matrix.
    pub fn sym_part2(g: [[f64; 2]; 2]) -> Self {
        Self::new2(g[0][0], 0.5 * (g[0][1] + g[1][0]), g[1][1])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    /// Frobenius norm `|A|`.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Double contraction `A : B`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j] * other.e[i][j];
            }
        }
        s
    }

    pub fn scale(&self, t: f64) -> SymMatrix {
        let mut out = *self;
        for row in out.e.iter_mut() {
            for v in row.iter_mut() {
                *v *= t;
            }
        }
        out
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.e[i][j] -= other.e[i][j];
            }
        }
        out
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.e[i][j] += other.e[i][j];
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max((self.e[i][j] - self.e[j][i]).abs());
            }
        }
        m
    }

    /// Uniform random symmetric matrix with independent upper-triangle entries
    /// in `[-bound, bound]`.
    pub fn random<R: Rng>(rng: &mut R, dim: usize, bound: f64) -> SymMatrix {
        let mut e = [[0.0; 3]; 3];
        for i in 0..dim {
            for j in i..dim {
                let v = rng.gen_range(-bound..=bound);
                e[i][j] = v;
                e[j][i] = v;
            }
        }
        SymMatrix { dim, e }
    }
}

/// Evaluation contract for an extra stress tensor of the form `S(A) = ν(|A|) A`.
pub trait StressLaw {
    fn exponent(&self) -> f64;
    fn delta(&self) -> f64;
    /// Generalized viscosity `ν` as a function of `|A|`.
    fn viscosity(&self, norm: f64) -> f64;

    fn stress(&self, a: &SymMatrix) -> SymMatrix {
        let n = a.norm();
        if n == 0.0 {
            return *a;
        }
        a.scale(self.viscosity(n))
    }
}

/// The power law `S(A) = (δ + |A|)^{p-2} A` together with its characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressModel {
    pub p: f64,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl StressModel {
    pub fn new(p: f64, delta: f64, c1: f64, c2: f64) -> Result<Self> {
        let m = Self { p, delta, c1, c2 };
        m.validate()?;
        Ok(m)
    }

    /// Model whose characteristics are calibrated on `pairs` seeded random
    /// samples (see [`calibrate_structure_constants`]).
    pub fn calibrated(p: f64, delta: f64, pairs: usize, seed: u64) -> Result<Self> {
        let probe = Self { p, delta, c1: 1.0, c2: 1.0 };
        probe.validate_exponent()?;
        let (c1, c2) = calibrate_structure_constants(&probe, 2, pairs, 2.0, seed)?;
        Self::new(p, delta, c1, c2)
    }

    fn validate_exponent(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::Parameter(format!("stress exponent p = {} must exceed 1", self.p)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Parameter(format!("delta = {} must be non-negative", self.delta)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_exponent()?;
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::Parameter("C1 and C2 must be positive".into()));
        }
        if self.c1 > self.c2 {
            return Err(Error::Parameter(format!(
                "C1 = {} exceeds C2 = {}",
                self.c1, self.c2
            )));
        }
        Ok(())
    }
}

impl StressLaw for StressModel {
    fn exponent(&self) -> f64 {
        self.p
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn viscosity(&self, norm: f64) -> f64 {
        (self.delta + norm).powf(self.p - 2.0)
    }
}

/// Evaluates `S(A)` for the representative law.
pub fn stress_eval(a: &SymMatrix, m: &StressModel) -> Result<SymMatrix> {
    m.validate_exponent()?;
    if a.max_asymmetry() > 1e-12 * a.norm().max(1.0) {
        return Err(Error::Structure("stress argument is not symmetric".into()));
    }
    Ok(m.stress(a))
}

/// Extreme ratios of the two (p,δ)-structure inequalities over a sample set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    /// min over pairs of `(S(A)-S(B)):(A-B) / [(δ+|B|+|A-B|)^{p-2} |A-B|^2]`
    pub min_ratio_lower: f64,
    /// max over pairs of `|S(A)-S(B)| / [(δ+|B|+|A-B|)^{p-2} |A-B|]`
    pub max_ratio_upper: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    pub passes: bool,
}

/// Streaming accumulator for the structure ratios.
#[derive(Clone, Debug)]
pub struct StructureStats<'a, L: StressLaw> {
    law: &'a L,
    min_lower: f64,
    max_upper: f64,
    used: usize,
    skipped: usize,
}

impl<'a, L: StressLaw> StructureStats<'a, L> {
    pub fn new(law: &'a L) -> Self {
        Self {
            law,
            min_lower: f64::INFINITY,
            max_upper: 0.0,
            used: 0,
            skipped: 0,
        }
    }

    pub fn push(&mut self, a: &SymMatrix, b: &SymMatrix) {
        let diff = a.sub(b);
        let nd = diff.norm();
        if nd < DEGENERATE_PAIR_TOL {
            self.skipped += 1;
            return;
        }
        let sa = self.law.stress(a);
        let sb = self.law.stress(b);
        let ds = sa.sub(&sb);
        let weight = (self.law.delta() + b.norm() + nd).powf(self.law.exponent() - 2.0);
        let lower = ds.dot(&diff) / (weight * nd * nd);
        let upper = ds.norm() / (weight * nd);
        self.min_lower = self.min_lower.min(lower);
        self.max_upper = self.max_upper.max(upper);
        self.used += 1;
    }

    pub fn finish(&self, c1: f64, c2: f64) -> StructureReport {
        StructureReport {
            min_ratio_lower: self.min_lower,
            max_ratio_upper: self.max_upper,
            pairs_used: self.used,
            pairs_skipped: self.skipped,
            passes: self.min_lower >= c1 && self.max_upper <= c2,
        }
    }
}

/// Checks both structure inequalities on the given pairs against `m.c1`, `m.c2`.
pub fn check_structure_inequalities(
    m: &StressModel,
    samples: &[(SymMatrix, SymMatrix)],
) -> Result<StructureReport> {
    m.validate_exponent()?;
    if samples.is_empty() {
        return Err(Error::Usage("structure check needs at least one matrix pair".into()));
    }
    let mut stats = StructureStats::new(m);
    for (a, b) in samples {
        stats.push(a, b);
    }
    Ok(stats.finish(m.c1, m.c2))
}

/// Streams `n` seeded random pairs with entries in `[-bound, bound]` through
/// the structure ratios without materializing them.
pub fn sample_structure_ratios<L: StressLaw>(
    law: &L,
    dim: usize,
    n: usize,
    bound: f64,
    seed: u64,
) -> StructureStats<'_, L> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = StructureStats::new(law);
    for _ in 0..n {
        let a = SymMatrix::random(&mut rng, dim, bound);
        let b = SymMatrix::random(&mut rng, dim, bound);
        stats.push(&a, &b);
    }
    stats
}

/// Empirical characteristics: `C1 = 0.99 * min ratio`, `C2 = 1.01 * max ratio`.
pub fn calibrate_structure_constants<L: StressLaw>(
    law: &L,
    dim: usize,
    pairs: usize,
    bound: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if pairs == 0 {
        return Err(Error::Usage("calibration needs at least one pair".into()));
    }
    let stats = sample_structure_ratios(law, dim, pairs, bound, seed);
    if stats.used == 0 {
        return Err(Error::Numerical("all calibration pairs were degenerate".into()));
    }
    Ok((0.99 * stats.min_lower, 1.01 * stats.max_upper))
}

/// Truth of `(Σ x_i)^α <= Σ x_i^α`, up to a relative rounding allowance.
pub fn reverse_jensen_check(alpha: f64, xs: &[f64]) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Parameter(format!("entry {x} must be finite and non-negative")));
    }
    let lhs = xs.iter().sum::<f64>().powf(alpha);
    let rhs: f64 = xs.iter().map(|x| x.powf(alpha)).sum();
    let slack = 4.0 * f64::EPSILON * (xs.len().max(1) as f64);
    Ok(lhs <= rhs * (1.0 + slack))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(p: f64, delta: f64) -> StressModel {
        StressModel::new(p, delta, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        for &(p, d) in &[(1.5, 0.0), (1.9, 0.1), (3.0, 1.0)] {
            let z = SymMatrix::zeros(2).unwrap();
            assert_eq!(stress_eval(&z, &model(p, d)).unwrap(), z);
        }
    }

    #[test]
    fn identity_law_at_p_two() {
        let a = SymMatrix::diag(&[1.0, -1.0]).unwrap();
        let s = stress_eval(&a, &model(2.0, 0.7)).unwrap();
        assert_eq!(s, a);
    }

    #[test]
    fn power_law_value() {
        let a = SymMatrix::diag(&[1.0, -1.0]).unwrap();
        let s = stress_eval(&a, &model(1.5, 0.0)).unwrap();
        let f = 2f64.powf(-0.25);
        assert!((s.get(0, 0) - f).abs() < 1e-15);
        assert!((s.get(1, 1) + f).abs() < 1e-15);
        assert_eq!(s.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            SymMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]),
            Err(Error::Structure(_))
        ));
        assert!(StressModel::new(1.0, 0.0, 1.0, 1.0).is_err());
        let bad = StressModel { p: 0.9, delta: 0.0, c1: 1.0, c2: 1.0 };
        let a = SymMatrix::diag(&[1.0, 0.0]).unwrap();
        assert!(matches!(stress_eval(&a, &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn structure_ratios_are_one_for_identity_law() {
        let m = model(2.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<_> = (0..200)
            .map(|_| (SymMatrix::random(&mut rng, 2, 2.0), SymMatrix::random(&mut rng, 2, 2.0)))
            .collect();
        let r = check_structure_inequalities(&m, &samples).unwrap();
        assert!((r.min_ratio_lower - 1.0).abs() < 1e-12);
        assert!((r.max_ratio_upper - 1.0).abs() < 1e-12);
        assert!(r.passes || r.min_ratio_lower < 1.0);
    }

    #[test]
    fn degenerate_pair_is_skipped() {
        let m = model(1.6, 0.1);
        let a = SymMatrix::new2(1.0, 0.5, -0.3);
        let b = SymMatrix::new2(0.2, -0.1, 0.4);
        let r = check_structure_inequalities(&m, &[(a, a), (a, b)]).unwrap();
        assert_eq!(r.pairs_used, 1);
        assert_eq!(r.pairs_skipped, 1);
        assert!(check_structure_inequalities(&m, &[]).is_err());
    }

    #[test]
    fn reverse_jensen_examples() {
        assert!(reverse_jensen_check(0.5, &[1.0, 1.0]).unwrap());
        assert!(reverse_jensen_check(0.5, &[4.0]).unwrap());
        assert!(reverse_jensen_check(0.5, &[]).unwrap());
        assert!(reverse_jensen_check(1.0, &[1.0]).is_err());
        assert!(reverse_jensen_check(0.5, &[-1.0]).is_err());
    }

    #[test]
    fn reverse_jensen_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..10.0)).collect();
        let lhs = xs.iter().sum::<f64>().powf(0.9);
        let rhs: f64 = xs.iter().map(|x| x.powf(0.9)).sum();
        assert!(lhs < rhs);
        assert!(reverse_jensen_check(0.9, &xs).unwrap());
    }
}
