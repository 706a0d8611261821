//! Command-line driver. Every command writes CSV whose leading `#` lines
//! record the full configuration; the rows that follow are documented per
//! command in the README.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::coefficient::CoefficientField;
use crate::corrector::CorrectorSet;
use crate::error::{LodError, Result};
use crate::fem::LoadSpec;
use crate::linalg::DEFAULT_TOL;
use crate::lod::{errors_vs_reference, relative_errors, LayerRule};
use crate::study::{decay_study, ladder_point, loglog_fit, Experiment, LadderRow};

/// Where the diffusion coefficient comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Constant(f64),
    Random {
        raster_m: usize,
        lo: f64,
        hi: f64,
        seed: u64,
    },
    File(PathBuf),
}

impl FromStr for CoefficientSpec {
    type Err = LodError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| LodError::Config(format!("coefficient '{s}': {what}"));
        let (kind, rest) = s.split_once(':').ok_or_else(|| {
            bad("expected const:V, random:RASTER_M:LO:HI:SEED or file:PATH")
        })?;
        match kind {
            "const" | "constant" => rest
                .parse()
                .map(Self::Constant)
                .map_err(|_| bad("constant is not a number")),
            "random" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [m, lo, hi, seed] = parts[..] else {
                    return Err(bad("random needs RASTER_M:LO:HI:SEED"));
                };
                Ok(Self::Random {
                    raster_m: m.parse().map_err(|_| bad("bad raster width"))?,
                    lo: lo.parse().map_err(|_| bad("bad lower bound"))?,
                    hi: hi.parse().map_err(|_| bad("bad upper bound"))?,
                    seed: seed.parse().map_err(|_| bad("bad seed"))?,
                })
            }
            "file" if !rest.is_empty() => Ok(Self::File(PathBuf::from(rest))),
            _ => Err(bad("unknown kind")),
        }
    }
}

impl std::fmt::Display for CoefficientSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "const:{v}"),
            Self::Random {
                raster_m,
                lo,
                hi,
                seed,
            } => write!(f, "random:{raster_m}:{lo}:{hi}:{seed}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            Self::Constant(v) => CoefficientField::constant(*v),
            Self::Random {
                raster_m,
                lo,
                hi,
                seed,
            } => CoefficientField::random_cellwise(*raster_m, *lo, *hi, *seed),
            Self::File(p) => CoefficientField::load_raster(p),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lod", version, about = "Localized orthogonal decomposition solver and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single solve at one coarse width.
    Solve(SolveArgs),
    /// Error ladder over several coarse widths on one fine mesh.
    Convergence(ConvergenceArgs),
    /// Truncation error of localized correctors against the layer count.
    Decay(DecayArgs),
    /// Write a random cell-wise constant coefficient raster.
    GenCoefficient(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Subdivisions per side of the fine (reference) mesh.
    #[arg(long, default_value_t = 128)]
    pub fine_m: usize,
    /// const:V | random:RASTER_M:LO:HI:SEED | file:PATH
    #[arg(long, default_value = "const:1")]
    pub coefficient: String,
    /// Right-hand side, const:G.
    #[arg(long, default_value = "const:1")]
    pub load: String,
    /// Relative residual tolerance of the CG solves.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Worker threads for corrector solves (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output CSV path (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LayerArgs {
    /// Fixed layer count; overrides the rule.
    #[arg(long)]
    pub k: Option<usize>,
    /// k = ceil(FACTOR * log_BASE(1/H)).
    #[arg(long, default_value_t = 2.0)]
    pub k_factor: f64,
    /// Logarithm base of the layer rule (default e).
    #[arg(long, default_value_t = std::f64::consts::E)]
    pub k_base: f64,
    /// Use saturated patches (the non-localized method).
    #[arg(long, conflicts_with = "k")]
    pub saturated: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub layers: LayerArgs,
    /// Subdivisions per side of the coarse mesh (H = 1/coarse_m).
    #[arg(long, default_value_t = 8)]
    pub coarse_m: usize,
    /// Write the fine LOD solution as x,y,u rows.
    #[arg(long)]
    pub dump_fine: Option<PathBuf>,
    /// Corrector cache file, read when it matches and written otherwise.
    #[arg(long)]
    pub corrector_cache: Option<PathBuf>,
    /// Append wall-clock columns (breaks byte-identical output).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub layers: LayerArgs,
    /// Coarse widths of the ladder, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub coarse_m: Vec<usize>,
    /// Append wall-clock columns (breaks byte-identical output).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 16)]
    pub coarse_m: usize,
    /// Interior coarse vertex ids, comma separated (default: central vertex).
    #[arg(long, value_delimiter = ',')]
    pub vertex: Vec<usize>,
    /// Largest layer count (default: saturation of each vertex).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Largest layer count used in the contraction fit.
    #[arg(long)]
    pub fit_max: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 32)]
    pub raster_m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lo: f64,
    #[arg(long, default_value_t = 2.0)]
    pub hi: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Run a parsed command; CSV goes to the configured output, short
/// human-readable messages to `log`.
pub fn run(cli: &Cli, log: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => with_threads(a.problem.threads, || cmd_solve(a, log)),
        Command::Convergence(a) => with_threads(a.problem.threads, || cmd_convergence(a)),
        Command::Decay(a) => with_threads(a.problem.threads, || cmd_decay(a)),
        Command::GenCoefficient(a) => cmd_gen_coefficient(a, log),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LodError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

struct Resolved {
    field: CoefficientField,
    load: LoadSpec,
}

fn resolve(p: &ProblemArgs) -> Result<Resolved> {
    if !(p.tol > 0.0 && p.tol < 1.0) {
        return Err(LodError::Config(format!("tol must lie in (0, 1), got {}", p.tol)));
    }
    if !p.fine_m.is_power_of_two() || p.fine_m < 4 {
        return Err(LodError::Config(format!(
            "fine_m must be a power of two >= 4, got {}",
            p.fine_m
        )));
    }
    let spec: CoefficientSpec = p.coefficient.parse()?;
    Ok(Resolved {
        field: spec.build()?,
        load: p.load.parse()?,
    })
}

fn check_coarse(coarse_m: usize, fine_m: usize) -> Result<()> {
    if coarse_m < 2 || !coarse_m.is_power_of_two() || coarse_m >= fine_m {
        return Err(LodError::Config(format!(
            "coarse_m = {coarse_m} must be a power of two in [2, fine_m = {fine_m})"
        )));
    }
    Ok(())
}

fn layer_count(l: &LayerArgs, exp_or_m: std::result::Result<&Experiment, usize>) -> Result<usize> {
    if let Some(k) = l.k {
        if k == 0 {
            return Err(LodError::Config("k must be >= 1".into()));
        }
        return Ok(k);
    }
    match exp_or_m {
        Ok(exp) if l.saturated => exp.saturated_layers(),
        Ok(exp) => rule(l).map(|r| r.layers(exp.coarse_m())),
        Err(m) => rule(l).map(|r| r.layers(m)),
    }
}

fn rule(l: &LayerArgs) -> Result<LayerRule> {
    if !(l.k_factor > 0.0) || !(l.k_base > 1.0) {
        return Err(LodError::Config(format!(
            "layer rule needs k_factor > 0 and k_base > 1, got {} and {}",
            l.k_factor, l.k_base
        )));
    }
    Ok(LayerRule {
        factor: l.k_factor,
        base: l.k_base,
    })
}

fn header(out: &mut String, command: &str, entries: &[(&str, String)]) {
    let _ = writeln!(out, "# lod {command}");
    for (k, v) in entries {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

fn problem_entries(p: &ProblemArgs) -> Vec<(&'static str, String)> {
    vec![
        ("fine_m", p.fine_m.to_string()),
        ("coefficient", p.coefficient.clone()),
        ("load", p.load.clone()),
        ("tol", format!("{:e}", p.tol)),
    ]
}

fn layer_entries(l: &LayerArgs) -> Vec<(&'static str, String)> {
    let rule = if let Some(k) = l.k {
        format!("fixed {k}")
    } else if l.saturated {
        "saturated".into()
    } else {
        format!("ceil({} * log_{}(1/H))", l.k_factor, l.k_base)
    };
    vec![("k_rule", rule)]
}

const LADDER_COLUMNS: &str = "H,k,N_dof,rel_energy_lod,rel_L2_lod,rel_L2_interp,rel_energy_p1fem,rel_L2_p1fem,degenerate";
const TIMING_COLUMNS: &str = ",t_reference_s,t_correctors_s,t_solve_s";

fn ladder_line(out: &mut String, row: &LadderRow, timings: bool) {
    let _ = write!(
        out,
        "{:e},{},{},{:e},{:e},{:e},{:e},{:e},{}",
        row.h,
        row.k,
        row.n_dof,
        row.lod.rel_energy,
        row.lod.rel_l2,
        row.lod.rel_l2_interp,
        row.p1_energy,
        row.p1_l2,
        u8::from(row.lod.degenerate)
    );
    if timings {
        let t = row.timings;
        let _ = write!(out, ",{:.3},{:.3},{:.3}", t.reference, t.correctors, t.solve);
    }
    out.push('\n');
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn load_or_compute_correctors(exp: &Experiment, k: usize, cache: Option<&Path>) -> Result<CorrectorSet> {
    if let Some(path) = cache {
        if path.exists() {
            let set = CorrectorSet::read_from(BufReader::new(File::open(path)?))?;
            if set.matches(&exp.mesh, k) {
                return Ok(set);
            }
        }
        let set = exp.correctors(k)?;
        let mut w = BufWriter::new(File::create(path)?);
        set.write_to(&mut w)?;
        w.flush()?;
        return Ok(set);
    }
    exp.correctors(k)
}

pub fn cmd_solve(a: &SolveArgs, log: &mut (dyn Write + Send)) -> Result<()> {
    let r = resolve(&a.problem)?;
    check_coarse(a.coarse_m, a.problem.fine_m)?;
    let exp = Experiment::new(a.coarse_m, a.problem.fine_m, &r.field, r.load, a.problem.tol)?;
    let k = layer_count(&a.layers, Ok(&exp))?;

    let start = std::time::Instant::now();
    let correctors = load_or_compute_correctors(&exp, k, a.corrector_cache.as_deref())?;
    let t_correctors = start.elapsed().as_secs_f64();
    let start = std::time::Instant::now();
    let sol = exp.multiscale(&correctors, a.problem.tol)?;
    let lod = errors_vs_reference(&exp.problem, &exp.reference, &sol)?;
    let (p1, p1_report) = exp.classical(a.problem.tol)?;
    let (p1_energy, p1_l2, _) = relative_errors(&exp.problem, &exp.reference, &p1)?;
    let t_solve = start.elapsed().as_secs_f64();

    let row = LadderRow {
        h: 1.0 / a.coarse_m as f64,
        k,
        n_dof: exp.clement.coarse_count(),
        lod,
        p1_energy,
        p1_l2,
        lod_iterations: sol.report.iterations,
        reference_iterations: exp.reference_report.iterations,
        timings: crate::study::Timings {
            reference: exp.reference_seconds,
            correctors: t_correctors,
            solve: t_solve,
        },
    };

    let mut entries = problem_entries(&a.problem);
    entries.push(("coarse_m", a.coarse_m.to_string()));
    entries.extend(layer_entries(&a.layers));
    let mut out = String::new();
    header(&mut out, "solve", &entries);
    out.push_str(LADDER_COLUMNS);
    if a.timings {
        out.push_str(TIMING_COLUMNS);
    }
    out.push('\n');
    ladder_line(&mut out, &row, a.timings);
    let _ = writeln!(
        out,
        "# stats reference_cg_iterations = {}, lod_cg_iterations = {}, p1_cg_iterations = {}, correctors = {}",
        row.reference_iterations,
        row.lod_iterations,
        p1_report.iterations,
        correctors.correctors.len()
    );
    if lod.degenerate {
        let _ = writeln!(out, "# degenerate reference (zero norm): errors are absolute");
    }
    emit(&a.problem.output, &out)?;

    if let Some(path) = &a.dump_fine {
        let fine = exp.mesh.fine();
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "x,y,u")?;
        for (p, u) in fine.coords().iter().zip(&sol.fine.values) {
            writeln!(w, "{},{},{:e}", p[0], p[1], u)?;
        }
        w.flush()?;
        writeln!(log, "fine solution written to {}", path.display())?;
    }
    Ok(())
}

pub fn cmd_convergence(a: &ConvergenceArgs) -> Result<()> {
    let r = resolve(&a.problem)?;
    if a.coarse_m.len() < 2 {
        return Err(LodError::Config("the ladder needs at least two coarse widths".into()));
    }
    for &m in &a.coarse_m {
        check_coarse(m, a.problem.fine_m)?;
    }
    let mut rows = Vec::with_capacity(a.coarse_m.len());
    for &m in &a.coarse_m {
        let k = if a.layers.saturated {
            let exp = Experiment::new(m, a.problem.fine_m, &r.field, r.load, a.problem.tol)?;
            exp.saturated_layers()?
        } else {
            layer_count(&a.layers, Err(m))?
        };
        let (row, _, _) = ladder_point(m, a.problem.fine_m, &r.field, r.load, k, a.problem.tol)
            .map_err(|e| LodError::Config(format!("ladder point H = 1/{m}: {e}")))?;
        rows.push(row);
    }

    let mut entries = problem_entries(&a.problem);
    let ladder: Vec<String> = a.coarse_m.iter().map(|m| m.to_string()).collect();
    entries.push(("coarse_m", ladder.join(",")));
    entries.extend(layer_entries(&a.layers));
    let mut out = String::new();
    header(&mut out, "convergence", &entries);
    out.push_str(LADDER_COLUMNS);
    if a.timings {
        out.push_str(TIMING_COLUMNS);
    }
    out.push('\n');
    for row in &rows {
        ladder_line(&mut out, row, a.timings);
    }

    let ndof: Vec<f64> = rows.iter().map(|r| r.n_dof as f64).collect();
    let series: [(&str, fn(&LadderRow) -> f64); 5] = [
        ("rel_energy_lod", |r| r.lod.rel_energy),
        ("rel_L2_lod", |r| r.lod.rel_l2),
        ("rel_L2_interp", |r| r.lod.rel_l2_interp),
        ("rel_energy_p1fem", |r| r.p1_energy),
        ("rel_L2_p1fem", |r| r.p1_l2),
    ];
    let _ = writeln!(out, "# loglog slopes against N_dof");
    for (name, get) in series {
        let ys: Vec<f64> = rows.iter().map(get).collect();
        match loglog_fit(&ndof, &ys) {
            Ok(fit) => {
                let _ = writeln!(out, "# slope {name} = {:.4} (r2 = {:.4})", fit.slope, fit.r2);
            }
            Err(_) => {
                let _ = writeln!(out, "# slope {name} = undefined");
            }
        }
    }
    emit(&a.problem.output, &out)
}

pub fn cmd_decay(a: &DecayArgs) -> Result<()> {
    let r = resolve(&a.problem)?;
    check_coarse(a.coarse_m, a.problem.fine_m)?;
    let exp = Experiment::new(a.coarse_m, a.problem.fine_m, &r.field, r.load, a.problem.tol)?;
    let vertices = if a.vertex.is_empty() {
        vec![exp.mesh.central_vertex()]
    } else {
        a.vertex.clone()
    };

    let mut entries = problem_entries(&a.problem);
    entries.push(("coarse_m", a.coarse_m.to_string()));
    entries.push((
        "vertices",
        vertices.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    ));
    entries.push(("k_max", a.k_max.map_or("saturation".into(), |k| k.to_string())));
    entries.push(("fit_max", a.fit_max.map_or("all".into(), |k| k.to_string())));
    let mut out = String::new();
    header(&mut out, "decay", &entries);
    out.push_str("vertex,k,error,global_energy\n");
    let mut summary = String::new();
    for &x in &vertices {
        let study = decay_study(&exp, x, a.k_max, a.fit_max)?;
        for p in &study.points {
            let _ = writeln!(out, "{x},{},{:e},{:e}", p.k, p.error, p.global_energy);
        }
        match (study.contraction(), study.fit) {
            (Some(q), Some(fit)) => {
                let _ = writeln!(
                    summary,
                    "# vertex {x}: saturation = {}, contraction per layer = {q:.4} (r2 = {:.4})",
                    study.saturation, fit.r2
                );
            }
            _ => {
                let _ = writeln!(
                    summary,
                    "# vertex {x}: saturation = {}, contraction undefined",
                    study.saturation
                );
            }
        }
    }
    out.push_str(&summary);
    emit(&a.problem.output, &out)
}

pub fn cmd_gen_coefficient(a: &GenArgs, log: &mut (dyn Write + Send)) -> Result<()> {
    if !(a.lo < a.hi) {
        return Err(LodError::Config(format!(
            "lo must be below hi, got lo = {} and hi = {}",
            a.lo, a.hi
        )));
    }
    let field = CoefficientField::random_cellwise(a.raster_m, a.lo, a.hi, a.seed)?;
    field.save_raster(&a.output)?;
    writeln!(
        log,
        "alpha = {:e}\nbeta = {:e}\ncontrast = {:.4}",
        field.alpha(),
        field.beta(),
        field.contrast()
    )?;
    Ok(())
}
