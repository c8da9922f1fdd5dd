//! `shrinker`: build, solve, inspect and export bent Scherk towers.

mod config;
mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shrinker_core::discretize::{build_closed_sphere, build_mesh, Mesh, ScalarField, SymmetryClass};
use shrinker_core::graphgeom::{period_surface, EmbeddednessReport, GraphProblem};
use shrinker_core::io::{save_mesh, write_json, write_obj, write_ply};
use shrinker_core::scherk::phi0_from_c0;
use shrinker_core::solver::{
    assemble_core, config_mesh, newton_solve, random_symmetric_trace, solve_core, CoreConfig, CoreSurface, JacobianMode,
    SolveConfig,
};
use shrinker_core::spectral::{closed_sphere_spectrum, kernel_check_on, punctured_spectrum, EigenReport, KernelReport};

use config::{pick, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "shrinker", version, about = "Bent Scherk towers and the self-shrinker equation")]
struct Cli {
    /// Flat TOML file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; SHRINKER_THREADS is used when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble the N-handle core surface, optionally solving for the graph first.
    BuildCore(BuildCoreArgs),
    /// Solve the Dirichlet problem on one period.
    Solve(SolveArgs),
    /// Dirichlet eigenvalues of the sphere Laplacian per symmetry class.
    Spectrum(SpectrumArgs),
    /// Check the analytic identities the construction relies on.
    Verify(VerifyArgs),
    /// Write a mesh of the sphere chart or of the bent period.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Data {
    Zero,
    Random,
}

fn parse_class(s: &str) -> Result<SymmetryClass, String> {
    s.parse().map_err(|e: shrinker_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<JacobianMode, String> {
    s.parse().map_err(|e: shrinker_core::Error| e.to_string())
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Boundary data: zero or a seeded random trace in the symmetry class.
    #[arg(long = "f", value_enum)]
    data: Option<Data>,
    #[arg(long)]
    seed: Option<u64>,
    /// max |f| of random data.
    #[arg(long)]
    amplitude: Option<f64>,
}

#[derive(Args, Debug)]
struct BuildCoreArgs {
    /// Number of handles.
    #[arg(long)]
    n: Option<u32>,
    /// Truncation height C.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    refinement: Option<u32>,
    /// Solve for the graph before assembling; otherwise h = 0.
    #[arg(long)]
    solve: bool,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_mode)]
    jacobian_mode: Option<JacobianMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    refinement: Option<u32>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_mode)]
    jacobian_mode: Option<JacobianMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Puncture radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    phi0: Vec<f64>,
    #[arg(long, value_parser = parse_class)]
    class: Option<SymmetryClass>,
    /// Number of eigenvalues.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    refinement: Option<u32>,
    /// Use the closed sphere instead of the punctured one.
    #[arg(long)]
    closed: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    refinement: Option<u32>,
    /// Deliberately perturb one check.
    #[arg(long = "break", value_parser = clap::builder::PossibleValuesParser::new(verify::CHECKS))]
    broken: Option<String>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Surface {
    Sphere,
    Bent,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    surface: Surface,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    refinement: Option<u32>,
    /// Write the closed sphere mesh.
    #[arg(long)]
    closed: bool,
    /// Output stem; `.obj` (and `.ply` for the bent surface) is appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_threads = std::env::var("SHRINKER_THREADS").ok().and_then(|s| s.parse().ok());
    if let Some(t) = cli.threads.or(file.threads).or(env_threads) {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }
    match cli.command {
        Command::BuildCore(a) => build_core(a, &file),
        Command::Solve(a) => solve(a, &file),
        Command::Spectrum(a) => spectrum(a, &file),
        Command::Verify(a) => run_verify(a, &file),
        Command::Export(a) => export(a, &file),
    }
}

fn out_dir(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    let dir = flag.or_else(|| file.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn file_class(file: &FileConfig) -> Result<Option<SymmetryClass>> {
    Ok(file.class.as_deref().map(str::parse).transpose()?)
}

fn solve_config(file: &FileConfig, tau: Option<f64>, c: Option<f64>, refinement: Option<u32>, mode: Option<JacobianMode>) -> Result<SolveConfig> {
    let d = SolveConfig::default();
    let file_mode = file.jacobian_mode.as_deref().map(str::parse).transpose()?;
    Ok(SolveConfig {
        tau: pick(tau, file.tau, d.tau),
        c0: pick(c, file.c, d.c0),
        newton_tol: pick(None, file.newton_tol, d.newton_tol),
        max_iters: pick(None, file.max_iters, d.max_iters),
        jacobian_mode: pick(mode, file_mode, d.jacobian_mode),
        refinement: pick(refinement, file.refinement, d.refinement),
        eta: pick(None, file.eta, d.eta),
        delta0: pick(None, file.delta0, d.delta0),
        delta: pick(None, file.delta, d.delta),
        class: pick(None, file_class(file)?, d.class),
    })
}

fn boundary_data(mesh: &Mesh, class: SymmetryClass, args: &DataArgs, file: &FileConfig, amplitude: f64) -> Result<ScalarField> {
    let file_data = match file.data.as_deref() {
        None => None,
        Some(s) => Some(Data::from_str(s, true).map_err(|e| anyhow::anyhow!("config key data: {e}"))?),
    };
    Ok(match pick(args.data, file_data, Data::Zero) {
        Data::Zero => ScalarField::zeros(mesh.nodes.len()),
        Data::Random => {
            let seed = pick(args.seed, file.seed, 0);
            random_symmetric_trace(mesh, class, seed, pick(args.amplitude, file.amplitude, amplitude))
        }
    })
}

#[derive(Serialize)]
struct SolveSummary {
    iterations: usize,
    jacobian_mode: JacobianMode,
    residual_history: Vec<f64>,
    embedded: bool,
    symmetric: bool,
    symmetry_defect: f64,
    boundary_error: f64,
    norm_ratio: f64,
    embeddedness: EmbeddednessReport,
}

#[derive(Serialize)]
struct CoreReport {
    n: u32,
    c: f64,
    tau: f64,
    refinement: u32,
    solved: bool,
    vertices: usize,
    triangles: usize,
    euler_characteristic: i64,
    boundary_components: usize,
    genus: i64,
    mirror_defect: f64,
    rotation_defect: f64,
    rescaled_residual_max: f64,
    rescaled_residual_norm: f64,
    plane_distance: f64,
    cylinder_distance: f64,
    asymptote_bound: f64,
    max_abs_h_tilde: f64,
    solve: Option<SolveSummary>,
}

fn core_report(core: &CoreSurface, refinement: u32) -> CoreReport {
    CoreReport {
        n: core.n,
        c: core.c,
        tau: core.tau,
        refinement,
        solved: core.solve.is_some(),
        vertices: core.vertices.len(),
        triangles: core.triangles.len(),
        euler_characteristic: core.euler_characteristic,
        boundary_components: core.boundary_components,
        genus: core.genus,
        mirror_defect: core.mirror_defect,
        rotation_defect: core.rotation_defect,
        rescaled_residual_max: core.rescaled_residual_max,
        rescaled_residual_norm: core.rescaled_residual_norm,
        plane_distance: core.plane_distance,
        cylinder_distance: core.cylinder_distance,
        asymptote_bound: core.asymptote_bound,
        max_abs_h_tilde: core.h_tilde.iter().fold(0.0, |m, v| m.max(v.abs())),
        solve: core.solve.as_ref().map(|s| SolveSummary {
            iterations: s.iterations,
            jacobian_mode: s.jacobian_mode,
            residual_history: s.residual_history.clone(),
            embedded: s.embedded,
            symmetric: s.symmetric,
            symmetry_defect: s.symmetry_defect,
            boundary_error: s.boundary_error,
            norm_ratio: s.norm_ratio,
            embeddedness: s.embeddedness.clone(),
        }),
    }
}

fn build_core(a: BuildCoreArgs, file: &FileConfig) -> Result<ExitCode> {
    let Some(n) = a.n.or(file.n) else {
        Cli::command()
            .error(ErrorKind::MissingRequiredArgument, "the following required argument was not provided: --n <N>")
            .exit();
    };
    let d = CoreConfig::default();
    let solve_cfg = solve_config(file, Some(1.0 / n.max(1) as f64), a.c, a.refinement, a.jacobian_mode)?;
    let core_cfg = CoreConfig { solve: solve_cfg, gate_exponent: pick(None, file.gate_exponent, d.gate_exponent), ..d };
    let mesh = config_mesh(&solve_cfg)?;
    let core = if a.solve {
        // half the admissible size unless an amplitude is given
        let gate = solve_cfg.delta0 / (2.0 * (n as f64).powi(core_cfg.gate_exponent));
        let f = boundary_data(&mesh, solve_cfg.class, &a.data, file, 0.5 * gate)?;
        solve_core(n, solve_cfg.c0, &f, &mesh, &core_cfg)?
    } else {
        assemble_core(n, solve_cfg.c0, &mesh, &ScalarField::zeros(mesh.nodes.len()))?
    };
    let dir = out_dir(a.out, file)?;
    write_obj(dir.join("core.obj"), &core.vertices, &core.triangles)?;
    write_ply(dir.join("core.ply"), &core.vertices, &core.triangles, Some(&core.h_tilde))?;
    let report = core_report(&core, solve_cfg.refinement);
    write_json(dir.join("core.json"), &report)?;
    println!(
        "core N = {n}, C = {}: {} vertices, {} triangles, chi = {}, {} boundary loops, genus {}",
        core.c,
        report.vertices,
        report.triangles,
        core.euler_characteristic,
        core.boundary_components,
        core.genus
    );
    println!("mirror defect {:.3e}, rotation defect {:.3e}", core.mirror_defect, core.rotation_defect);
    if let Some(s) = &core.solve {
        println!("newton: {} iterations, residual {:.3e}", s.iterations, s.final_residual());
    }
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn solve(a: SolveArgs, file: &FileConfig) -> Result<ExitCode> {
    let cfg = solve_config(file, a.tau, a.c, a.refinement, a.jacobian_mode)?;
    cfg.validate()?;
    let mesh = config_mesh(&cfg)?;
    let f = boundary_data(&mesh, cfg.class, &a.data, file, 1e-3)?;
    let result = newton_solve(&mesh, &f, &cfg)?;
    let dir = out_dir(a.out, file)?;
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a SolveConfig,
        result: &'a shrinker_core::solver::SolveResult,
    }
    write_json(dir.join("solve.json"), &Report { config: &cfg, result: &result })?;
    let problem = GraphProblem::new(&mesh, cfg.tau)?;
    let period = period_surface(&problem, &result.h);
    let scalar: Vec<f64> = period.origin.iter().map(|&(i, _)| result.h.values[i]).collect();
    write_obj(dir.join("graph.obj"), &period.vertices, &period.triangles)?;
    write_ply(dir.join("graph.ply"), &period.vertices, &period.triangles, Some(&scalar))?;
    for (k, r) in result.residual_history.iter().enumerate() {
        println!("step {k:2}: residual {r:.3e}");
    }
    println!(
        "tau = {}, {} iterations, max|h| = {:.4e}, embedded: {}, intersections: {}",
        cfg.tau,
        result.iterations,
        result.h.max_abs(),
        result.embedded,
        result.embeddedness.intersections
    );
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SpectrumFile {
    spectrum: EigenReport,
    kernel: Option<KernelReport>,
}

fn spectrum(a: SpectrumArgs, file: &FileConfig) -> Result<ExitCode> {
    let class = pick(a.class, file_class(file)?, SymmetryClass::XzInvYzAnti);
    let count = pick(a.k, file.k, 6);
    let refinement = pick(a.refinement, file.refinement, 3);
    let phi0s = if !a.phi0.is_empty() {
        a.phi0
    } else {
        file.phi0.clone().unwrap_or_else(|| vec![phi0_from_c0(3.0)])
    };
    if count == 0 {
        bail!("--k must be positive");
    }
    let dir = out_dir(a.out, file)?;
    let mut rows = Vec::new();
    if a.closed {
        let report = closed_sphere_spectrum(refinement, class, count)?;
        write_json(dir.join("spectrum_closed.json"), &SpectrumFile { spectrum: report.clone(), kernel: None })?;
        rows.push((report, None));
    } else {
        for (i, &phi0) in phi0s.iter().enumerate() {
            let report = punctured_spectrum(phi0, class, count, refinement)?;
            let kernel = if class == SymmetryClass::All { None } else { Some(kernel_check_on(&build_mesh(phi0, refinement)?, class)?) };
            write_json(dir.join(format!("spectrum_{i}.json")), &SpectrumFile { spectrum: report.clone(), kernel: kernel.clone() })?;
            rows.push((report, kernel));
        }
    }
    let csv = dir.join("spectrum.csv");
    let mut w = BufWriter::new(File::create(&csv).with_context(|| format!("creating {}", csv.display()))?);
    write!(w, "phi0,class,refinement")?;
    for j in 1..=count {
        write!(w, ",lambda_{j}")?;
    }
    writeln!(w, ",kernel_gap")?;
    for (r, k) in &rows {
        write!(w, "{},{},{}", r.phi0, r.class.name(), r.refinement)?;
        for v in &r.eigenvalues {
            write!(w, ",{v}")?;
        }
        match k {
            Some(k) => writeln!(w, ",{}", k.gap)?,
            None => writeln!(w, ",")?,
        }
        let vals: Vec<String> = r.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
        let gap = k.as_ref().map_or(String::from("n/a"), |k| format!("{:.4e}", k.gap));
        println!("phi0 = {:.6} class {}: [{}], gap to 2: {gap}", r.phi0, r.class.name(), vals.join(", "));
    }
    w.flush()?;
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: VerifyArgs, file: &FileConfig) -> Result<ExitCode> {
    let refinement = pick(a.refinement, file.refinement, 3);
    let report = verify::run(refinement, a.broken.as_deref())?;
    for c in &report.checks {
        println!("{} {}: value {:.4e}, threshold {:.1e}; {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold, c.detail);
    }
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    if report.pass {
        println!("all {} checks passed", report.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        eprintln!("failed invariant: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn export(a: ExportArgs, file: &FileConfig) -> Result<ExitCode> {
    let refinement = pick(a.refinement, file.refinement, 3);
    let c = pick(a.c, file.c, 3.0);
    let stem = a.out.or_else(|| file.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(match a.surface {
        Surface::Sphere => "sphere",
        Surface::Bent => "bent",
    }));
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let with_ext = |ext: &str| -> PathBuf {
        let mut s = stem.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    match a.surface {
        Surface::Sphere => {
            let mesh = if a.closed { build_closed_sphere(refinement)? } else { build_mesh(phi0_from_c0(c), refinement)? };
            save_mesh(&mesh, with_ext(".obj"))?;
            report_written(&with_ext(".obj"), mesh.nodes.len(), mesh.triangles.len());
        }
        Surface::Bent => {
            let tau = pick(a.tau, file.tau, 1.0 / 16.0);
            let mesh = build_mesh(phi0_from_c0(c), refinement)?;
            let problem = GraphProblem::new(&mesh, tau)?;
            let period = period_surface(&problem, &ScalarField::zeros(mesh.nodes.len()));
            write_obj(with_ext(".obj"), &period.vertices, &period.triangles)?;
            write_ply(with_ext(".ply"), &period.vertices, &period.triangles, None)?;
            report_written(&with_ext(".obj"), period.vertices.len(), period.triangles.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report_written(path: &Path, vertices: usize, triangles: usize) {
    println!("wrote {} ({vertices} vertices, {triangles} triangles)", path.display());
}
