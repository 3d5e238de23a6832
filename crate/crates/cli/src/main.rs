use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use homsym::error::{Error, Result};
use homsym::microgen::{
    generate_detailed, read_microstructure, voxelize, write_microstructure, FiberSpec, MicroMeta, Microstructure,
};
use homsym::solver::{apparent_conductivity, dense_oracle, solve_corrector, LoadDiagnostics, SolverConfig};
use homsym::study::{prepare_output_dir, run_study, StudyConfig, ReferenceSpec, DEFAULT_CONDUCTIVITIES};
use homsym::tensor::{closed_form_proj2, proj4, SymmetryClass, TensorJson};
use homsym::{GENERATOR_VERSION, SOLVER_VERSION};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_GENERATION: u8 = 4;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\n",
    "generator: ",
    "homsym-microgen/",
    env!("CARGO_PKG_VERSION"),
    "+rsa-migration",
    "\nsolver: ",
    "homsym-solver/",
    env!("CARGO_PKG_VERSION"),
    "+rotated-staggered-cg"
);

#[derive(Parser)]
#[command(name = "homsym", version, long_version = LONG_VERSION, about = "Periodic homogenization of short-fiber composites")]
struct Cli {
    /// Emit log lines as JSON objects on stderr.
    #[arg(long, global = true)]
    log_json: bool,
    /// Repeat for more detail (info, debug, trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and voxelize one fiber microstructure.
    Generate(GenerateArgs),
    /// Compute the apparent conductivity of a stored microstructure.
    Solve(SolveArgs),
    /// Run a Monte-Carlo RVE-size study.
    Study(StudyArgs),
    /// Post-process study results into rates, residuals, histograms and bounds.
    Analyze(AnalyzeArgs),
    /// Project a tensor JSON onto a symmetry class.
    Project(ProjectArgs),
    /// Dense direct solve of one load case (tiny grids only).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generation config: fiber spec plus cell and voxel sizes.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config cell edge in μm.
    #[arg(long)]
    cell: Option<f64>,
    /// Output path without extension; writes `<out>.meta.json` and `<out>.phase`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Microstructure path without extension.
    #[arg(long)]
    micro: PathBuf,
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
    /// Tensor JSON output; diagnostics go next to it as `<stem>.diagnostics.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing result directory.
    #[arg(long)]
    force: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "HOMSYM_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    /// isotropic, cubic, transversely_isotropic or orthotropic.
    #[arg(long)]
    class: String,
    /// Symmetry axis for transversely_isotropic, e.g. `0,0,1`.
    #[arg(long, value_parser = parse_vec3)]
    axis: Option<[f64; 3]>,
    /// Orthotropic frame as nine row-major numbers.
    #[arg(long, value_parser = parse_axes)]
    axes: Option<[[f64; 3]; 3]>,
    #[arg(long = "in")]
    input: PathBuf,
    /// Writes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    micro: PathBuf,
    /// Macroscopic gradient, e.g. `1,0,0`.
    #[arg(long, value_parser = parse_vec3)]
    xi: [f64; 3],
    /// Also run the FFT solver at this tolerance and report the difference.
    #[arg(long)]
    compare_tol: Option<f64>,
}

fn parse_numbers(s: &str, count: usize) -> std::result::Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.len() != count {
        return Err(format!("expected {count} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let v = parse_numbers(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_axes(s: &str) -> std::result::Result<[[f64; 3]; 3], String> {
    let v = parse_numbers(s, 9)?;
    Ok([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
}

/// `generate --config` file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    fiber: FiberSpec,
    cell_um: f64,
    #[serde(default = "default_voxel")]
    voxel_um: f64,
    #[serde(default = "default_conductivities")]
    conductivities: [f64; 2],
    #[serde(default)]
    seed: u64,
}

fn default_voxel() -> f64 {
    2.0
}

fn default_conductivities() -> [f64; 2] {
    DEFAULT_CONDUCTIVITIES
}

#[derive(Serialize)]
struct SolveDiagnostics<'a> {
    micro: String,
    tol: f64,
    max_iter: usize,
    raw: [[f64; 3]; 3],
    asymmetry: f64,
    energies: [f64; 3],
    loads: &'a [LoadDiagnostics; 3],
    runtime_s: f64,
    generator_version: &'static str,
    solver_version: &'static str,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Validation(_) | Error::Json(_) | Error::Io { .. } | Error::UnsupportedTransform(_) => EXIT_CONFIG,
        Error::Numerical(_) | Error::Solver { .. } => EXIT_NUMERICAL,
        Error::Generation { .. } | Error::Calibration(_) => EXIT_GENERATION,
        Error::Study { .. } => unreachable!("root() strips study wrappers"),
    }
}

fn init_logging(json: bool, verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let mut b = env_logger::Builder::new();
    b.filter_level(level).parse_env("HOMSYM_LOG");
    if json {
        b.format(|buf, rec| {
            let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
            let line = serde_json::json!({
                "ts": ts,
                "level": rec.level().as_str(),
                "target": rec.target(),
                "message": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    b.init();
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable value") + "\n"
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let text = read_text(&a.config)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: GenerateConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Validation(format!("generate config at `{}`: {}", e.path(), e.inner())))?;
    let cell = a.cell.unwrap_or(cfg.cell_um);
    let seed = a.seed.unwrap_or(cfg.seed);
    let n = (cell / cfg.voxel_um).round();
    if !(n >= 1.0 && (n * cfg.voxel_um - cell).abs() <= 1e-9 * cell) {
        return Err(Error::validation(format!(
            "cell_um {cell} is not a multiple of voxel_um {}",
            cfg.voxel_um
        )));
    }
    let meta_path = PathBuf::from(format!("{}.meta.json", a.out.display()));
    if meta_path.exists() && !a.force {
        return Err(Error::validation(format!("{} exists; pass --force to overwrite", meta_path.display())));
    }
    let report = generate_detailed(&cfg.fiber, cell, seed)?;
    let field = voxelize(&report.fibers, n as usize, cfg.conductivities)?;
    let mut meta = MicroMeta::for_field(&field);
    meta.fiber_spec = Some(cfg.fiber.clone());
    meta.fibers = report.fibers.fibers.clone();
    meta.seed = Some(seed);
    meta.analytic_volume_fraction = Some(report.fibers.volume_fraction());
    log::info!(
        "generated {} fibers (target {}), {} RSA fallbacks, {} migration sweeps, voxel fraction {:.5}",
        report.fibers.fibers.len(),
        report.target_count,
        report.rsa_fallbacks,
        report.migration_sweeps,
        meta.voxel_volume_fraction
    );
    write_microstructure(&a.out, &Microstructure { meta, field })
}

fn solve_cmd(a: &SolveArgs) -> Result<()> {
    let micro = read_microstructure(&a.micro)?;
    let cfg = SolverConfig { tol: a.tol, max_iter: a.max_iter, reference: None };
    let start = Instant::now();
    let app = apparent_conductivity(&micro.field, &cfg)?;
    let runtime_s = start.elapsed().as_secs_f64();
    write_text(&a.out, &(TensorJson::Order2(app.tensor).to_json_string() + "\n"))?;
    let diag = SolveDiagnostics {
        micro: a.micro.display().to_string(),
        tol: a.tol,
        max_iter: a.max_iter,
        raw: app.raw,
        asymmetry: app.asymmetry,
        energies: app.energies,
        loads: &app.loads,
        runtime_s,
        generator_version: GENERATOR_VERSION,
        solver_version: SOLVER_VERSION,
    };
    write_text(&diagnostics_path(&a.out), &to_json(&diag))
}

fn diagnostics_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.diagnostics.json"))
}

fn study_cmd(a: &StudyArgs) -> Result<()> {
    let mut cfg = StudyConfig::from_json_str(&read_text(&a.config)?)?;
    // reference files are relative to the config, not the working directory
    if let ReferenceSpec::File { path } = &mut cfg.reference {
        if path.is_relative() {
            if let Some(dir) = a.config.parent() {
                *path = dir.join(&*path);
            }
        }
    }
    prepare_output_dir(&a.out, a.force)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(Error::validation("--jobs must be positive"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    log::info!("study on {} threads", pool.current_num_threads());
    pool.install(|| run_study(&cfg, Some(&a.out))).map(|_| ())
}

fn analyze_cmd(a: &AnalyzeArgs) -> Result<()> {
    let report = homsym::analysis::analyze(&a.results, &a.out)?;
    for b in report.bounds.iter().filter(|b| !b.within) {
        log::warn!("L = {} μm: mean diagonal outside the Voigt-Reuss bounds", b.cell_um);
    }
    Ok(())
}

fn project_cmd(a: &ProjectArgs) -> Result<()> {
    let class = match (a.class.as_str(), a.axis, a.axes) {
        ("isotropic", None, None) => SymmetryClass::Isotropic,
        ("cubic", None, None) => SymmetryClass::Cubic,
        ("transversely_isotropic", axis, None) => SymmetryClass::TransverselyIsotropic { axis: axis.unwrap_or([0.0, 0.0, 1.0]) },
        ("orthotropic", None, axes) => match axes {
            Some(axes) => SymmetryClass::Orthotropic { axes },
            None => SymmetryClass::orthotropic_aligned(),
        },
        (c @ ("isotropic" | "cubic" | "transversely_isotropic" | "orthotropic"), _, _) => {
            return Err(Error::validation(format!("--axis/--axes do not apply to class {c}")))
        }
        (other, _, _) => {
            return Err(Error::validation(format!(
                "unknown class `{other}` (expected isotropic, cubic, transversely_isotropic or orthotropic)"
            )))
        }
    };
    class.validate()?;
    let projected = match TensorJson::parse(&read_text(&a.input)?)? {
        TensorJson::Order2(t) => TensorJson::Order2(closed_form_proj2(&class, &t)?),
        TensorJson::Order4(t) => TensorJson::Order4(proj4(&class, &t)?),
    };
    let text = projected.to_json_string() + "\n";
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct OracleOutput {
    xi: [f64; 3],
    flux: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    fft_flux: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_diff: Option<f64>,
}

fn oracle_cmd(a: &OracleArgs) -> Result<()> {
    let micro = read_microstructure(&a.micro)?;
    let flux = dense_oracle(&micro.field, a.xi)?;
    let mut out = OracleOutput { xi: a.xi, flux, fft_flux: None, max_abs_diff: None };
    if let Some(tol) = a.compare_tol {
        let cfg = SolverConfig { tol, ..SolverConfig::default() };
        let fft = solve_corrector(&micro.field, a.xi, &cfg)?.flux;
        out.max_abs_diff = Some((0..3).map(|i| (fft[i] - flux[i]).abs()).fold(0.0, f64::max));
        out.fft_flux = Some(fft);
    }
    print!("{}", to_json(&out));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.log_json, cli.verbose);
    let result = match &cli.command {
        Command::Generate(a) => generate_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Study(a) => study_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Project(a) => project_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
