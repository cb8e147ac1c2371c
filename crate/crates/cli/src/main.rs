use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gnse_core::boundary::DataFile;
use gnse_core::exponents::{check_smallness, derive_exponents, Calibration, DataNorms};
use gnse_core::extension::build_extension_pair;
use gnse_core::mesh::{build_mesh, Domain, Mesh};
use gnse_core::report::{emit_report, field_dump, run_csv, sci, sweep_csv, sweep_svg, ReportFormat};
use gnse_core::scenario::{run_scenario, run_with_inputs, sweep_eta, EtaPolicy, Inputs, RunReport, Scenario, PRESETS};
use gnse_core::solver::{Force, SolveConfig};
use gnse_core::tensor::StressModel;
use gnse_core::{Error, Result};

#[derive(Parser)]
#[command(name = "gnse", version, about = "Boundary-data extensions, smallness checks and regularized solves for shear-thinning Navier-Stokes flow")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON file: a scenario for run/sweep-eta/verify/check-smallness, solver settings for solve
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the stress-law calibration sample
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Scenarios run concurrently by `run`
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Run scenarios one after another
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the smallness condition for given data norms or a scenario
    CheckSmallness(SmallnessArgs),
    /// Build the extension pair for a mesh and boundary data file
    BuildExtension(ExtensionArgs),
    /// Solve the regularized problem on a mesh with boundary data
    Solve(SolveArgs),
    /// Tabulate L, G1, G2, G3 and R over cutoff lengths
    SweepEta(SweepArgs),
    /// Run a scenario and report the solution checks
    Verify(PresetArgs),
    /// Run the full pipeline for one or more scenarios
    Run(PresetArgs),
    /// Write a mesh file
    GenMesh(MeshArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 1.75)]
    p: f64,
    #[arg(long, default_value_t = 5.0)]
    q: f64,
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Value of all calibration constants
    #[arg(long, default_value_t = 1.0)]
    calibration: f64,
}

#[derive(Args)]
struct SmallnessArgs {
    #[arg(long, conflicts_with_all = ["kd", "kf", "kn", "kt"])]
    preset: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    kd: f64,
    #[arg(long, default_value_t = 0.0)]
    kf: f64,
    #[arg(long, default_value_t = 0.0)]
    kn: f64,
    #[arg(long, default_value_t = 0.0)]
    kt: f64,
}

#[derive(Args)]
struct MeshSource {
    /// Mesh file (as written by gen-mesh)
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, default_value = "unit-square")]
    domain: String,
    #[arg(long, default_value_t = 16)]
    resolution: usize,
}

impl MeshSource {
    fn load(&self) -> Result<Arc<Mesh>> {
        let m = match &self.mesh {
            Some(path) => Mesh::read(path)?,
            None => build_mesh(self.domain.parse()?, self.resolution)?,
        };
        Ok(Arc::new(m))
    }
}

#[derive(Args)]
struct ExtensionArgs {
    #[command(flatten)]
    mesh: MeshSource,
    /// Boundary data file
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eta: f64,
    #[command(flatten)]
    model: ModelArgs,
    /// Norms CSV; defaults to <out>/extension.csv
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write vertex values of h_eta + k next to the mesh
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    mesh: MeshSource,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eta: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n_reg: Option<u32>,
    /// Drop the penalty term (1/n = 0)
    #[arg(long)]
    no_penalty: bool,
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "cavity")]
    preset: String,
    /// Explicit cutoff lengths (comma separated)
    #[arg(long, value_delimiter = ',')]
    etas: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    from: f64,
    #[arg(long, default_value_t = 0.25)]
    to: f64,
    #[arg(long, default_value_t = 25)]
    count: usize,
    /// Also build the extension at each cutoff length
    #[arg(long)]
    extension: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name(s); ignored when --config is given
    #[arg(long, value_delimiter = ',', default_value = "cavity")]
    preset: Vec<String>,
    #[arg(long, value_enum, default_value_t = Plot::Csv)]
    format: Plot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Plot {
    Csv,
    Svg,
    Both,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, default_value = "unit-square")]
    domain: String,
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    /// Output file; defaults to <out>/<domain>-<resolution>.mesh
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the boundary data of this scenario preset to <output>.data
    #[arg(long)]
    data_preset: Option<String>,
}

fn scenarios(g: &Global, names: &[String]) -> Result<Vec<Scenario>> {
    let mut list = match &g.config {
        Some(path) => vec![Scenario::from_json(&fs::read_to_string(path)?)?],
        None => names.iter().map(|n| Scenario::preset(n)).collect::<Result<Vec<_>>>()?,
    };
    if let Some(seed) = g.seed {
        for s in &mut list {
            s.seed = seed;
        }
    }
    Ok(list)
}

fn scenario_from_model(name: &str, m: &ModelArgs, seed: Option<u64>, eta: f64) -> Scenario {
    let mut s = Scenario::preset("cavity").expect("preset exists");
    s.name = name.into();
    s.p = m.p;
    s.q = m.q;
    s.sigma = m.sigma;
    s.delta = m.delta;
    s.calibration = Calibration::uniform(m.calibration);
    s.eta = EtaPolicy::Fixed(eta);
    s.sweep.clear();
    s.seed = seed.unwrap_or(0);
    s
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, body)?;
    Ok(())
}

fn emit(g: &Global, r: &RunReport, plot: Plot) -> Result<()> {
    let mut formats = vec![];
    if matches!(plot, Plot::Csv | Plot::Both) {
        formats.push(ReportFormat::Csv);
    }
    if matches!(plot, Plot::Svg | Plot::Both) {
        formats.push(ReportFormat::SvgPlot);
    }
    for f in formats {
        for p in emit_report(r, f, &g.out)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn print_timing(r: &RunReport) {
    let parts: Vec<String> = r.timing.iter().map(|(s, t)| format!("{s} {t:.2}s")).collect();
    eprintln!("{}: {}", r.scenario, parts.join(", "));
    for e in &r.errors {
        eprintln!("{}: {} stage failed: {}", r.scenario, e.stage, e.message);
    }
}

fn run_all(g: &Global, list: &[Scenario]) -> Vec<RunReport> {
    let threads = if g.deterministic { 1 } else { g.threads.max(1) };
    let mut reports = Vec::with_capacity(list.len());
    for chunk in list.chunks(threads) {
        let done: Vec<RunReport> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|s| scope.spawn(move || run_scenario(s))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
        });
        reports.extend(done);
    }
    reports
}

fn check_smallness_cmd(g: &Global, a: &SmallnessArgs) -> Result<()> {
    let (norms, ex, cal, model) = if a.preset.is_some() || g.config.is_some() {
        let names: Vec<String> = a.preset.iter().cloned().collect();
        let mut s = scenarios(g, &names)?.remove(0);
        s.solve = None;
        s.sweep.clear();
        s.eta = EtaPolicy::Fixed(0.1);
        let r = run_scenario(&s);
        print_timing(&r);
        let norms = r.norms.ok_or_else(|| Error::Precondition("data norms unavailable".into()))?;
        (norms, r.exponents.expect("exponents"), s.calibration, r.model.expect("model"))
    } else {
        let m = &a.model;
        let ex = derive_exponents(2, m.p, m.q, m.sigma)?;
        let norms = DataNorms { k_d: a.kd, k_f: a.kf, k_n: a.kn, k_t: a.kt, delta: m.delta };
        norms.validate()?;
        let model = StressModel::calibrated(m.p, m.delta, 20_000, g.seed.unwrap_or(0))?;
        (norms, ex, Calibration::uniform(m.calibration), model)
    };
    let rep = check_smallness(&norms, &ex, &cal, &model)?;
    let rows = [
        ("k_d", sci(norms.k_d)),
        ("k_f", sci(norms.k_f)),
        ("k_n", sci(norms.k_n)),
        ("k_t", sci(norms.k_t)),
        ("c1", sci(model.c1)),
        ("eta_star", sci(rep.eta_star)),
        ("l_min", sci(rep.l_min)),
        ("minimum", rep.kind.label().to_string()),
        ("g1", sci(rep.g1)),
        ("g2", sci(rep.g2)),
        ("g3", sci(rep.g3)),
        ("radius", sci(rep.r)),
        ("satisfied", rep.satisfied.to_string()),
    ];
    let header: Vec<&str> = rows.iter().map(|r| r.0).collect();
    let values: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    let csv = format!("{}\n{}\n", header.join(","), values.join(","));
    print!("{csv}");
    write(&g.out.join("smallness.csv"), &csv)
}

fn file_inputs(mesh: &MeshSource, data: &Path) -> Result<Inputs> {
    let mesh = mesh.load()?;
    let file = DataFile::read(data)?;
    let force = file.force;
    Ok(Inputs { data: file.to_data(&mesh)?, force: Force::new(move |x| force.eval(x)), mesh })
}

fn build_extension_cmd(g: &Global, a: &ExtensionArgs) -> Result<()> {
    let inputs = file_inputs(&a.mesh, &a.data)?;
    let ex = derive_exponents(2, a.model.p, a.model.q, a.model.sigma)?;
    let pair = build_extension_pair(&inputs.mesh, &inputs.data, a.eta, &ex)?;
    for w in &pair.warnings {
        eprintln!("warning: {w}");
    }
    let n = pair.norms;
    let csv = format!(
        "eta,h_lr,h_w1p,k_w1p,k_lr,lift_lq,h_div_residual,k_div_residual\n{}\n",
        [a.eta, n.h_lr, n.h_w1p, n.k_w1p, n.k_lr, n.lift_lq, n.h_div_residual, n.k_div_residual]
            .iter()
            .map(|x| sci(*x))
            .collect::<Vec<_>>()
            .join(",")
    );
    print!("{csv}");
    write(&a.report.clone().unwrap_or_else(|| g.out.join("extension.csv")), &csv)?;
    if let Some(path) = &a.dump {
        write(path, &field_dump(&pair.g, &pair.k_pressure)?)?;
    }
    Ok(())
}

fn solve_cmd(g: &Global, a: &SolveArgs) -> Result<bool> {
    let inputs = file_inputs(&a.mesh, &a.data)?;
    let mut s = scenario_from_model("solve", &a.model, g.seed, a.eta);
    let mut cfg = match &g.config {
        Some(path) => SolveConfig::from_json(&fs::read_to_string(path)?)?,
        None => SolveConfig::default(),
    };
    if let Some(n) = a.n_reg {
        cfg.n_reg = n;
    }
    if a.no_penalty {
        cfg.penalty = false;
    }
    s.solve = Some(cfg);
    let r = run_with_inputs(&s, Some(inputs));
    print_timing(&r);
    let csv = run_csv(&r);
    print!("{csv}");
    write(&g.out.join("solve.csv"), &csv)?;
    if let (Some(path), Some(sol)) = (&a.dump, &r.solution) {
        write(path, &field_dump(&sol.v, &sol.pressure)?)?;
    }
    Ok(!r.failed())
}

fn sweep_cmd(g: &Global, a: &SweepArgs) -> Result<()> {
    let s = scenarios(g, std::slice::from_ref(&a.preset))?.remove(0);
    let etas = if a.etas.is_empty() {
        if !(a.from > 0.0 && a.to > a.from && a.count >= 2) {
            return Err(Error::Usage("need 0 < --from < --to and --count >= 2".into()));
        }
        let (l0, l1) = (a.from.ln(), a.to.ln());
        (0..a.count).map(|k| (l0 + (l1 - l0) * k as f64 / (a.count - 1) as f64).exp()).collect()
    } else {
        a.etas.clone()
    };
    let table = sweep_eta(&s, &etas, a.extension)?;
    let csv = sweep_csv(&table);
    print!("{csv}");
    write(&g.out.join(format!("{}_sweep.csv", s.name)), &csv)?;
    write(&g.out.join(format!("{}_sweep.svg", s.name)), &sweep_svg(&table, &s.name)?)?;
    Ok(())
}

fn verify_cmd(g: &Global, a: &PresetArgs) -> Result<bool> {
    let mut ok = true;
    for r in run_all(g, &scenarios(g, &a.preset)?) {
        print_timing(&r);
        let tol = Scenario::preset(&r.scenario).ok().and_then(|s| s.solve).map_or(1e-8, |c| c.tol_rel);
        match (&r.solve, &r.verification) {
            (Some(sol), Some(v)) => {
                let weak_ok = v.weak_residual <= 10.0 * tol;
                println!("{}: solve converged in {} iterations, residual {}", r.scenario, sol.iterations, sci(sol.final_residual));
                println!("{}: weak-form residual {} ({})", r.scenario, sci(v.weak_residual), if weak_ok { "ok" } else { "too large" });
                println!("{}: convective identity gap {}", r.scenario, sci(v.reformulation_gap));
                match &v.apriori {
                    Some(ap) => println!(
                        "{}: a-priori bound {} (measured {}, margin {})",
                        r.scenario,
                        ap.status,
                        sci(ap.measured),
                        ap.margin.map(sci).unwrap_or_else(|| "-".into())
                    ),
                    None => println!("{}: a-priori bound not evaluated", r.scenario),
                }
                ok &= weak_ok && v.apriori.as_ref().is_none_or(|ap| ap.bound_holds != Some(false));
            }
            _ => {
                println!("{}: no converged solution to verify", r.scenario);
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn run_cmd(g: &Global, a: &PresetArgs) -> Result<bool> {
    let reports = run_all(g, &scenarios(g, &a.preset)?);
    let mut ok = true;
    for r in &reports {
        print_timing(r);
        emit(g, r, a.format)?;
        ok &= !r.failed();
    }
    Ok(ok)
}

fn gen_mesh_cmd(g: &Global, a: &MeshArgs) -> Result<()> {
    let domain: Domain = a.domain.parse()?;
    let mesh = build_mesh(domain, a.resolution)?;
    let path = a.output.clone().unwrap_or_else(|| g.out.join(format!("{}-{}.mesh", domain.name(), a.resolution)));
    write(&path, &mesh.to_text())?;
    if let Some(name) = &a.data_preset {
        let s = Scenario::preset(name)?;
        let file = s.data.data_file(&Arc::new(mesh.clone()), domain, s.scale)?;
        let data_path = path.with_extension("data");
        write(&data_path, &file.to_text())?;
        eprintln!("wrote {}", data_path.display());
    }
    eprintln!(
        "wrote {} ({} nodes, {} triangles, h_max {:.4})",
        path.display(),
        mesh.n_nodes(),
        mesh.triangles.len(),
        mesh.h_max
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::CheckSmallness(a) => check_smallness_cmd(g, a).map(|_| true),
        Command::BuildExtension(a) => build_extension_cmd(g, a).map(|_| true),
        Command::Solve(a) => solve_cmd(g, a),
        Command::SweepEta(a) => sweep_cmd(g, a).map(|_| true),
        Command::Verify(a) => verify_cmd(g, a),
        Command::Run(a) => run_cmd(g, a),
        Command::GenMesh(a) => gen_mesh_cmd(g, a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Usage(_)) {
                eprintln!("known presets: {}", PRESETS.join(", "));
            }
            ExitCode::from(2)
        }
    }
}
