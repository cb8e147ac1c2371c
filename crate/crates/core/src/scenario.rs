//! Scenario presets and the staged pipeline: exponents, stress model, mesh,
//! data, smallness, extension, solve and verification.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boundary::{decompose_trace, BoundaryData, BoundaryTrace, DataFile, ForceSpec, NodalSplit, ScalarSpec};
use crate::error::{Error, Result};
use crate::exponents::{
    check_smallness, derive_exponents, Calibration, DataNorms, ExponentTable, SmallnessReport,
};
use crate::extension::{build_extension_pair, ExtensionNorms, ExtensionPair};
use crate::field::{DiscreteField, Space};
use crate::mesh::{build_mesh, Domain, Mesh, Point};
use crate::norms::{boundary_lp, norm_fractional_boundary, norm_lp};
use crate::solver::{
    convective_reformulation_check, residual_weak_form, solve_regularized, verify_apriori, AprioriCheck,
    Force, SolveConfig, SolveResult,
};
use crate::tensor::StressModel;

pub const PRESETS: [&str; 6] =
    ["zero-data", "tangential-cavity", "normal-only", "cavity", "perturbation", "mixed-annulus"];

/// Smooth bump on `[0, 1]` vanishing to second order at both ends.
pub fn bump(s: f64) -> f64 {
    16.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Boundary and divergence data families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataPreset {
    Zero,
    /// Tangential bump profile on the top edge of the unit square.
    Lid { speed: f64 },
    /// Normal bump profile entering on the left edge and leaving on the right.
    ThroughFlow { flux: f64 },
    LidThroughFlow { speed: f64, flux: f64 },
    /// Rigid rotation plus a radial source on the outer circle, balanced by a
    /// constant divergence.
    Swirl { omega: f64, source: f64 },
}

fn on(x: f64, v: f64) -> bool {
    (x - v).abs() < 1e-12
}

impl DataPreset {
    pub fn build(&self, mesh: &Arc<Mesh>, domain: Domain) -> Result<BoundaryData> {
        let square_only = |name: &str| {
            if domain == Domain::UnitSquare {
                Ok(())
            } else {
                Err(Error::Usage(format!("data preset '{name}' needs the unit square")))
            }
        };
        let lid = |speed: f64, x: Point| if on(x[1], 1.0) { [speed * bump(x[0]), 0.0] } else { [0.0, 0.0] };
        let through = |flux: f64, x: Point| {
            if on(x[0], 0.0) || on(x[0], 1.0) {
                [flux * bump(x[1]), 0.0]
            } else {
                [0.0, 0.0]
            }
        };
        let zero_g1 = || DiscreteField::zeros(mesh.clone(), Space::ScalarP1);
        match *self {
            DataPreset::Zero => Ok(BoundaryData::zero(mesh.clone())),
            DataPreset::Lid { speed } => {
                square_only("lid")?;
                BoundaryData::new(zero_g1(), BoundaryTrace::from_point_fn(mesh, |x| lid(speed, x)))
            }
            DataPreset::ThroughFlow { flux } => {
                square_only("through-flow")?;
                BoundaryData::new(zero_g1(), BoundaryTrace::from_point_fn(mesh, |x| through(flux, x)))
            }
            DataPreset::LidThroughFlow { speed, flux } => {
                square_only("lid-through-flow")?;
                let g2 = BoundaryTrace::from_point_fn(mesh, |x| {
                    let (a, b) = (lid(speed, x), through(flux, x));
                    [a[0] + b[0], a[1] + b[1]]
                });
                BoundaryData::new(zero_g1(), g2)
            }
            DataPreset::Swirl { omega, source } => {
                if domain == Domain::UnitSquare {
                    return Err(Error::Usage("data preset 'swirl' needs a curved domain".into()));
                }
                let g2 = BoundaryTrace::from_fn(mesh, |e, x| {
                    if e.marker == 0 {
                        [-omega * x[1] + source * x[0], omega * x[0] + source * x[1]]
                    } else {
                        [0.0, 0.0]
                    }
                });
                let c = g2.flux(mesh) / mesh.area();
                let g1 = DiscreteField::interpolate_scalar(mesh.clone(), Space::ScalarP1, |_| c)?;
                BoundaryData::new(g1, g2)
            }
        }
    }
}

impl DataPreset {
    /// Vertex samples of the preset in the data-file format; `g1` is
    /// rebalanced against the flux of the piecewise-linear trace.
    pub fn data_file(&self, mesh: &Arc<Mesh>, domain: Domain, scale: f64) -> Result<DataFile> {
        let data = self.build(mesh, domain)?.scaled(scale);
        let values = NodalSplit::vertex_values(mesh, &data.g2);
        let nodal: Vec<(usize, Point)> = mesh.boundary_nodes().into_iter().map(|i| (i, values[i])).collect();
        let g1 = if data.g1.max_abs() == 0.0 {
            ScalarSpec::Zero
        } else {
            let linear = BoundaryTrace::from_nodal(mesh, &values, None)?;
            ScalarSpec::Const { c: linear.flux(mesh) / mesh.area() }
        };
        Ok(DataFile { nodal, g1, force: ForceSpec::Zero })
    }
}

/// Fixed cutoff length or the minimizer of `L`, clamped to what the mesh resolves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaPolicy {
    Fixed(f64),
    Optimize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub resolution: usize,
    pub data: DataPreset,
    #[serde(default = "zero_force")]
    pub force: ForceSpec,
    /// Common factor applied to all data (g1, g2 and f).
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "two")]
    pub d: u32,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub delta: f64,
    #[serde(default)]
    pub calibration: Calibration,
    pub eta: EtaPolicy,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Random matrix pairs used to calibrate C1, C2 of the stress law.
    #[serde(default = "default_pairs")]
    pub structure_pairs: usize,
    /// Cutoff lengths for the `L(η)` table; empty skips the sweep.
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub sweep_extension: bool,
}

fn zero_force() -> ForceSpec {
    ForceSpec::Zero
}
fn one() -> f64 {
    1.0
}
fn two() -> u32 {
    2
}
fn default_pairs() -> usize {
    20_000
}

fn default_sweep() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect()
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario> {
        let base = Scenario {
            name: name.to_string(),
            domain: Domain::UnitSquare,
            resolution: 16,
            data: DataPreset::Zero,
            force: ForceSpec::Zero,
            scale: 1.0,
            d: 2,
            p: 1.75,
            q: 5.0,
            sigma: 3.0,
            delta: 0.01,
            calibration: Calibration::default(),
            eta: EtaPolicy::Optimize,
            solve: Some(SolveConfig { penalty: false, ..SolveConfig::default() }),
            seed: 0,
            structure_pairs: default_pairs(),
            sweep: default_sweep(),
            sweep_extension: false,
        };
        let s = match name {
            "zero-data" => Scenario {
                resolution: 8,
                delta: 0.0,
                eta: EtaPolicy::Fixed(0.25),
                solve: Some(SolveConfig::default()),
                ..base
            },
            "tangential-cavity" => {
                Scenario { data: DataPreset::Lid { speed: 1.0 }, p: 1.9, q: 30.0, ..base }
            }
            "normal-only" => Scenario { data: DataPreset::ThroughFlow { flux: 1.0 }, ..base },
            "cavity" => Scenario { data: DataPreset::Lid { speed: 1.0 }, ..base },
            "perturbation" => Scenario {
                data: DataPreset::LidThroughFlow { speed: 1.0, flux: 0.05 },
                q: 10.0,
                ..base
            },
            "mixed-annulus" => Scenario {
                domain: Domain::Annulus,
                resolution: 8,
                data: DataPreset::Swirl { omega: 1.0, source: 0.1 },
                ..base
            },
            other => {
                return Err(Error::Usage(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<ExponentTable> {
        if self.d != 2 {
            return Err(Error::Parameter(format!("only d = 2 is discretized (got d = {})", self.d)));
        }
        if self.resolution < 2 {
            return Err(Error::Parameter("resolution must be at least 2".into()));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::Parameter(format!("data scale {} must be non-negative", self.scale)));
        }
        if let EtaPolicy::Fixed(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::Parameter(format!("eta = {eta} must be positive")));
            }
        }
        self.calibration.validate()?;
        let ex = derive_exponents(self.d, self.p, self.q, self.sigma)?;
        if let Some(cfg) = &self.solve {
            cfg.validate(&ex)?;
        }
        Ok(ex)
    }

    pub fn force(&self) -> Force {
        let (spec, s) = (self.force, self.scale);
        Force::new(move |x| {
            let f = spec.eval(x);
            [s * f[0], s * f[1]]
        })
    }
}

/// Discrete data norms on a polygonal boundary: `K_d = ‖g1‖_s`,
/// `K_n = ‖g_n‖_{1-1/s,s}`, `K_t = ‖g_t‖_{1-1/p,p} + ‖g_t‖_{L^q(∂Ω)}` and the
/// `L^{p'}` norm of the force density standing in for `K_f`.
pub fn measure_data_norms(
    mesh: &Arc<Mesh>,
    data: &BoundaryData,
    force: &Force,
    ex: &ExponentTable,
    delta: f64,
) -> Result<DataNorms> {
    let (gn, gt) = decompose_trace(mesh, &data.g2);
    let f = DiscreteField::interpolate_vector(mesh.clone(), Space::VectorP2, |x| force.eval(x))?;
    let norms = DataNorms {
        k_d: norm_lp(&data.g1, ex.s)?,
        k_f: norm_lp(&f, ex.p_prime)?,
        k_n: norm_fractional_boundary(mesh, &gn, 1.0 - 1.0 / ex.s, ex.s)?,
        k_t: norm_fractional_boundary(mesh, &gt, 1.0 - 1.0 / ex.p, ex.p)? + boundary_lp(mesh, &gt, ex.q)?,
        delta,
    };
    norms.validate()?;
    Ok(norms)
}

/// Range of cutoff lengths the mesh can resolve: `[2 h_max, max dist / 2]`.
pub fn resolvable_eta(mesh: &Arc<Mesh>) -> (f64, f64) {
    let far = crate::boundary::distance_field(mesh).dofs.iter().fold(0.0f64, |a, &b| a.max(b));
    let hi = 0.5 * far;
    ((2.0 * mesh.h_max).min(hi), hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Exponents,
    Model,
    Mesh,
    Data,
    Smallness,
    Extension,
    Solve,
    Verify,
    Sweep,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Exponents => "exponents",
            Stage::Model => "model",
            Stage::Mesh => "mesh",
            Stage::Data => "data",
            Stage::Smallness => "smallness",
            Stage::Extension => "extension",
            Stage::Solve => "solve",
            Stage::Verify => "verify",
            Stage::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionSummary {
    pub eta: f64,
    pub norms: ExtensionNorms,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub du_norm_p: f64,
    pub du_norm_sigma: f64,
    pub status: String,
}

impl SolveSummary {
    fn of(r: &SolveResult) -> Self {
        Self {
            converged: r.converged,
            iterations: r.iterations,
            final_residual: r.final_residual(),
            du_norm_p: r.du_norm_p,
            du_norm_sigma: r.du_norm_sigma,
            status: r.status.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationSummary {
    pub weak_residual: f64,
    pub reformulation_gap: f64,
    pub apriori: Option<AprioriCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub l: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub r: f64,
    pub extension: Option<ExtensionNorms>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub exponents: Option<ExponentTable>,
    pub model: Option<StressModel>,
    pub norms: Option<DataNorms>,
    pub smallness: Option<SmallnessReport>,
    pub extension: Option<ExtensionSummary>,
    pub solve: Option<SolveSummary>,
    pub verification: Option<VerificationSummary>,
    pub sweep: Option<SweepTable>,
    pub errors: Vec<StageError>,
    /// Wall-clock seconds per stage that ran.
    pub timing: Vec<(Stage, f64)>,
    #[serde(skip)]
    pub solution: Option<SolveResult>,
    #[serde(skip)]
    pub mesh: Option<Arc<Mesh>>,
}

impl RunReport {
    fn new(s: &Scenario) -> Self {
        Self {
            scenario: s.name.clone(),
            seed: s.seed,
            exponents: None,
            model: None,
            norms: None,
            smallness: None,
            extension: None,
            solve: None,
            verification: None,
            sweep: None,
            errors: Vec::new(),
            timing: Vec::new(),
            solution: None,
            mesh: None,
        }
    }

    fn stage<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Option<T> {
        let start = Instant::now();
        let out = f();
        self.timing.push((stage, start.elapsed().as_secs_f64()));
        match out {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(StageError { stage, message: e.to_string() });
                None
            }
        }
    }

    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Inputs shared by the pipeline stages after the data stage.
struct Prepared {
    ex: ExponentTable,
    model: StressModel,
    mesh: Arc<Mesh>,
    data: BoundaryData,
    force: Force,
    norms: DataNorms,
}

/// Mesh, data and force supplied from outside instead of the scenario presets.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub mesh: Arc<Mesh>,
    pub data: BoundaryData,
    pub force: Force,
}

fn prepare(s: &Scenario, rep: &mut RunReport, inputs: Option<Inputs>) -> Option<Prepared> {
    let ex = rep.stage(Stage::Exponents, || s.validate())?;
    rep.exponents = Some(ex);
    let model = rep.stage(Stage::Model, || StressModel::calibrated(s.p, s.delta, s.structure_pairs, s.seed))?;
    rep.model = Some(model);
    let (mesh, given) = match inputs {
        Some(inp) => (inp.mesh.clone(), Some(inp)),
        None => (rep.stage(Stage::Mesh, || build_mesh(s.domain, s.resolution).map(Arc::new))?, None),
    };
    rep.mesh = Some(mesh.clone());
    let (data, force, norms) = rep.stage(Stage::Data, || {
        let (data, force) = match given {
            Some(inp) => (inp.data, inp.force),
            None => (s.data.build(&mesh, s.domain)?.scaled(s.scale), s.force()),
        };
        let norms = measure_data_norms(&mesh, &data, &force, &ex, s.delta)?;
        Ok((data, force, norms))
    })?;
    rep.norms = Some(norms);
    Some(Prepared { ex, model, mesh, data, force, norms })
}

fn chosen_eta(s: &Scenario, mesh: &Arc<Mesh>, report: Option<&SmallnessReport>) -> Result<(f64, Option<String>)> {
    match s.eta {
        EtaPolicy::Fixed(eta) => Ok((eta, None)),
        EtaPolicy::Optimize => {
            let star = report
                .ok_or_else(|| Error::Precondition("eta optimization needs the smallness stage".into()))?
                .eta_star;
            let (lo, hi) = resolvable_eta(mesh);
            let eta = star.clamp(lo, hi);
            let note = (eta != star)
                .then(|| format!("optimal eta {star:e} clamped to the resolvable range [{lo:e}, {hi:e}]"));
            Ok((eta, note))
        }
    }
}

/// Runs every stage in order; a failing stage records its error and skips
/// the stages depending on it, earlier results are kept.
pub fn run_scenario(s: &Scenario) -> RunReport {
    run_with_inputs(s, None)
}

/// As [`run_scenario`], with the mesh and data optionally taken from `inputs`.
pub fn run_with_inputs(s: &Scenario, inputs: Option<Inputs>) -> RunReport {
    let mut rep = RunReport::new(s);
    let Some(pre) = prepare(s, &mut rep, inputs) else { return rep };
    let smallness = rep.stage(Stage::Smallness, || check_smallness(&pre.norms, &pre.ex, &s.calibration, &pre.model));
    rep.smallness = smallness;

    let ext: Option<ExtensionPair> = rep.stage(Stage::Extension, || {
        let (eta, note) = chosen_eta(s, &pre.mesh, smallness.as_ref())?;
        let mut pair = build_extension_pair(&pre.mesh, &pre.data, eta, &pre.ex)?;
        pair.warnings.extend(note);
        Ok(pair)
    });
    if let Some(pair) = &ext {
        rep.extension = Some(ExtensionSummary {
            eta: pair.tangential.eta,
            norms: pair.norms,
            warnings: pair.warnings.clone(),
        });
    }

    if let (Some(cfg), Some(pair)) = (&s.solve, &ext) {
        let result = rep.stage(Stage::Solve, || {
            let r = solve_regularized(pair, &pre.data, &pre.force, &pre.model, cfg)?;
            if r.converged {
                Ok(r)
            } else {
                Err(Error::Numerical(r.status.clone()))
            }
        });
        if let Some(r) = result {
            rep.solve = Some(SolveSummary::of(&r));
            let verification = rep.stage(Stage::Verify, || {
                let weak_residual = residual_weak_form(&r.v, &r.pressure, &pre.data, &pre.force, &pre.model)?;
                let (_, _, reformulation_gap) = convective_reformulation_check(&r.u, &pair.g, &pre.data.g1)?;
                let apriori = match &smallness {
                    Some(rep) => Some(verify_apriori(&r, rep, cfg)?),
                    None => None,
                };
                Ok(VerificationSummary { weak_residual, reformulation_gap, apriori })
            });
            rep.verification = verification;
            rep.solution = Some(r);
        }
    }

    if !s.sweep.is_empty() {
        let table = rep.stage(Stage::Sweep, || sweep_prepared(s, &pre, &s.sweep, s.sweep_extension));
        rep.sweep = table;
    }
    rep
}

fn sweep_prepared(s: &Scenario, pre: &Prepared, etas: &[f64], with_extension: bool) -> Result<SweepTable> {
    if etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) || etas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("sweep etas must be positive and strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let rep = crate::exponents::check_smallness_at(eta, &pre.norms, &pre.ex, &s.calibration, &pre.model)?;
        let extension = if with_extension {
            Some(build_extension_pair(&pre.mesh, &pre.data, eta, &pre.ex)?.norms)
        } else {
            None
        };
        rows.push(SweepRow { eta, l: rep.l_min, g1: rep.g1, g2: rep.g2, g3: rep.g3, r: rep.r, extension });
    }
    Ok(SweepTable { rows })
}

/// `L(η)`, the `G` constants and `R` (and optionally the extension norms) on
/// the given cutoff lengths.
pub fn sweep_eta(s: &Scenario, etas: &[f64], with_extension: bool) -> Result<SweepTable> {
    let mut rep = RunReport::new(s);
    let Some(pre) = prepare(s, &mut rep, None) else {
        let e = &rep.errors[0];
        return Err(Error::Precondition(format!("{} stage failed: {}", e.stage, e.message)));
    };
    sweep_prepared(s, &pre, etas, with_extension)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            s.validate().unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn swirl_data_is_compatible() {
        let m = Arc::new(build_mesh(Domain::Annulus, 6).unwrap());
        let d = DataPreset::Swirl { omega: 1.0, source: 0.3 }.build(&m, Domain::Annulus).unwrap();
        assert!(crate::boundary::check_compatibility(&d, &m) < 1e-12);
        assert!(DataPreset::Lid { speed: 1.0 }.build(&m, Domain::Annulus).is_err());
    }

    #[test]
    fn lid_has_no_normal_part() {
        let m = Arc::new(build_mesh(Domain::UnitSquare, 8).unwrap());
        let d = DataPreset::Lid { speed: 2.0 }.build(&m, Domain::UnitSquare).unwrap();
        let ex = derive_exponents(2, 1.75, 5.0, 3.0).unwrap();
        let n = measure_data_norms(&m, &d, &Force::zero(), &ex, 0.0).unwrap();
        assert_eq!((n.k_d, n.k_n, n.k_f), (0.0, 0.0, 0.0));
        assert!(n.k_t > 0.0);
    }
}
