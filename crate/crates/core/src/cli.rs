//! Command-line front end. [`run`] never panics on bad input: it maps every
//! error to an exit code and a message on the error stream.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::code::{
    constant_composition_code, default_wring_parameters, dependence_check, dominant_type,
    error_probabilities, independence_bound, independence_gap, rate_bound_diagnostics,
    sphere_packing_verify, strong_converse_check, wring, CodeStats, DependenceReport, DominantType,
    MultiUserCode, RateBoundConstants, RateBoundDiagnostics, SpherePackingCheck,
    StrongConverseReport, WringingResult,
};
use crate::error::Error;
use crate::exponent::{haroutunian_exponent, sphere_packing_exponent, ExponentResult, Method};
use crate::mac::{Mac, RatePair, SlackModel};
use crate::oracle::exponent_grid_oracle;
use crate::prob::EmpiricalType;
use crate::region::capacity_membership_with;
use crate::report::to_json_string;
use crate::search::SearchOptions;
use crate::surface::{exponent_surface, linspace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUTSIDE: i32 = 3;

/// Grid resolution of the oracle when `--resolution` is absent.
pub const DEFAULT_ORACLE_RESOLUTION: usize = 32;

#[derive(Debug, Parser)]
#[command(
    name = "macx",
    version,
    about = "Capacity regions and sphere-packing exponents of two-user multiple-access channels",
    after_help = "Exit codes: 0 success, 2 input or size-guard error, 3 rates outside / hypothesis unmet."
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "MACX_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a rate pair lies in the capacity region (exit 3 when outside).
    Capacity(CapacityArgs),
    /// Evaluate an error exponent at one rate pair.
    Exponent(ExponentArgs),
    /// Evaluate an exponent over a rate grid and write CSV.
    Surface(SurfaceArgs),
    /// Decode a code exactly and check it against the converse and the sphere-packing bound.
    Simulate(SimulateArgs),
    /// Wring the dominant pair set of a code.
    Wring(WringArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Channel file: JSON with `x_size`, `y_size`, `z_size` and `w[x][y][z] = W(z|x,y)`.
    #[arg(long, value_name = "PATH")]
    pub channel: PathBuf,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Random starts of the region search.
    #[arg(long, default_value_t = SearchOptions::default().multistart_count)]
    pub multistart: usize,
    /// Solver tolerance.
    #[arg(long, default_value_t = SearchOptions::default().tolerance)]
    pub tolerance: f64,
}

impl Common {
    fn options(&self, resolution: Option<usize>) -> SearchOptions {
        let d = SearchOptions::default();
        SearchOptions {
            grid_resolution: resolution.unwrap_or(d.grid_resolution),
            multistart_count: self.multistart,
            seed: self.seed,
            tolerance: self.tolerance,
            max_iterations: d.max_iterations,
        }
    }
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rate pair in bits per channel use.
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], allow_negative_numbers = true)]
    pub rates: Vec<f64>,
    /// Seed-grid resolution of the search.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], allow_negative_numbers = true)]
    pub rates: Vec<f64>,
    /// haroutunian, sphere_packing or grid_oracle.
    #[arg(long, default_value = "sphere_packing")]
    pub method: String,
    /// Outer seed-grid resolution, or the lattice resolution of grid_oracle (default 32 there).
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub common: Common,
    /// First-rate grid as start:stop:steps.
    #[arg(long, value_name = "START:STOP:STEPS", allow_hyphen_values = true)]
    pub r1: String,
    /// Second-rate grid as start:stop:steps.
    #[arg(long, value_name = "START:STOP:STEPS", allow_hyphen_values = true)]
    pub r2: String,
    /// haroutunian, sphere_packing or grid_oracle.
    #[arg(long, default_value = "sphere_packing")]
    pub method: String,
    /// Outer seed-grid resolution, or the lattice resolution of grid_oracle.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Code file: JSON `{"n": n, "u": [[..], ..], "v": [[..], ..]}`.
    #[arg(long, value_name = "PATH", conflicts_with = "generate")]
    pub code: Option<PathBuf>,
    /// Build a constant-composition code instead, given as n:M:N.
    #[arg(long, value_name = "N:M:N")]
    pub generate: Option<String>,
    /// Joint type counts for --generate, row-major over X x Y (near uniform when absent).
    #[arg(long, value_name = "C,C,..", requires = "generate")]
    pub counts: Option<String>,
    /// Error level of the dominant pair set (defaults to the code's maximal error).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Rate margin of the sphere-packing check.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Rates of the sphere-packing check (defaults to the code rates minus delta).
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], allow_negative_numbers = true)]
    pub rates: Option<Vec<f64>>,
    /// Seed-grid resolution of the exponent search.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WringArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "PATH")]
    pub code: PathBuf,
    /// Error level of the dominant pair set (defaults to the code's maximal error).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Per-letter information level in bits (default n^-1/2).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Dependence budget in bits (default the logarithmic bound on the dominant set).
    #[arg(long)]
    pub sigma: Option<f64>,
}

/// Outcome of a command: exit code, text for the output stream, and an optional note for the error stream.
struct Outcome {
    code: i32,
    text: String,
    note: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            code: EXIT_OK,
            text,
            note: None,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::RatePrecondition(_) => EXIT_OUTSIDE,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(err, "error: MACX_THREADS must be positive");
            return EXIT_INPUT;
        }
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let result = pool.install(|| dispatch(&cli.command));
    match result {
        Ok(o) => {
            let target = match &cli.command {
                Command::Capacity(a) => a.common.out.as_deref(),
                Command::Exponent(a) => a.common.out.as_deref(),
                Command::Surface(a) => a.common.out.as_deref(),
                Command::Simulate(a) => a.common.out.as_deref(),
                Command::Wring(a) => a.common.out.as_deref(),
            };
            if let Err(e) = emit(target, &o.text, out) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
            if let Some(note) = o.note {
                let _ = writeln!(err, "{note}");
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(target: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Error> {
    match target {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn dispatch(cmd: &Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Capacity(a) => cmd_capacity(a),
        Command::Exponent(a) => cmd_exponent(a),
        Command::Surface(a) => cmd_surface(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Wring(a) => cmd_wring(a),
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { path: p, message } => Error::Parse {
            path: format!("{}:{p}", path.display()),
            message,
        },
        other => other,
    }
}

fn load_channel(path: &Path) -> Result<Mac, Error> {
    Mac::from_json_str(&read_file(path)?).map_err(|e| in_file(path, e))
}

fn load_code(path: &Path, w: &Mac) -> Result<MultiUserCode, Error> {
    MultiUserCode::from_json_str(&read_file(path)?, w.x_size(), w.y_size())
        .map_err(|e| in_file(path, e))
}

fn rate_pair(v: &[f64]) -> Result<RatePair, Error> {
    match v {
        [r1, r2] => RatePair::new(*r1, *r2),
        _ => Err(Error::InvalidParameter("--rates takes two values".into())),
    }
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn cmd_capacity(a: &CapacityArgs) -> Result<Outcome, Error> {
    let w = load_channel(&a.common.channel)?;
    let r = rate_pair(&a.rates)?;
    let verdict = capacity_membership_with(&w, &r, &a.common.options(a.resolution))?;
    Ok(Outcome {
        code: if verdict.inside {
            EXIT_OK
        } else {
            EXIT_OUTSIDE
        },
        text: with_newline(to_json_string(&verdict)),
        note: None,
    })
}

fn exponent_at(
    w: &Mac,
    r: &RatePair,
    method: Method,
    opts: &SearchOptions,
    resolution: Option<usize>,
) -> Result<ExponentResult, Error> {
    match method {
        Method::Haroutunian => haroutunian_exponent(w, r, opts),
        Method::SpherePacking => sphere_packing_exponent(w, r, opts),
        Method::GridOracle => exponent_grid_oracle(
            w,
            r,
            Method::SpherePacking,
            resolution.unwrap_or(DEFAULT_ORACLE_RESOLUTION),
        ),
    }
}

fn cmd_exponent(a: &ExponentArgs) -> Result<Outcome, Error> {
    let w = load_channel(&a.common.channel)?;
    let r = rate_pair(&a.rates)?;
    let method: Method = a.method.parse()?;
    let opts = a.common.options(if method == Method::GridOracle {
        None
    } else {
        a.resolution
    });
    let res = exponent_at(&w, &r, method, &opts, a.resolution)?;
    Ok(Outcome::ok(with_newline(to_json_string(&res))))
}

/// Parses `start:stop:steps` into an increasing grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let bad = |m: &str| Error::InvalidParameter(format!("grid `{text}`: {m}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, steps] = parts.as_slice() else {
        return Err(bad("expected start:stop:steps"));
    };
    let start: f64 = start
        .trim()
        .parse()
        .map_err(|_| bad("start is not a number"))?;
    let stop: f64 = stop
        .trim()
        .parse()
        .map_err(|_| bad("stop is not a number"))?;
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| bad("steps is not a positive integer"))?;
    if steps == 0 {
        return Err(bad("steps must be positive"));
    }
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 {
        return Err(bad("bounds must be finite and nonnegative"));
    }
    if stop < start || (steps == 1 && stop != start) {
        return Err(bad("inverted range"));
    }
    linspace(start, stop, steps)
}

fn cmd_surface(a: &SurfaceArgs) -> Result<Outcome, Error> {
    let w = load_channel(&a.common.channel)?;
    let g1 = parse_grid(&a.r1)?;
    let g2 = parse_grid(&a.r2)?;
    let method: Method = a.method.parse()?;
    let resolution = if method == Method::GridOracle {
        Some(a.resolution.unwrap_or(DEFAULT_ORACLE_RESOLUTION))
    } else {
        a.resolution
    };
    let surface = exponent_surface(&w, &g1, &g2, method, &a.common.options(resolution))?;
    Ok(Outcome::ok(surface.to_csv()))
}

/// `n:M:N`.
fn parse_generator(text: &str) -> Result<(usize, usize, usize), Error> {
    let v: Vec<usize> = text
        .split(':')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidParameter(format!("--generate `{text}`: expected n:M:N")))?;
    match v.as_slice() {
        [n, m, nn] if *n > 0 => Ok((*n, *m, *nn)),
        _ => Err(Error::InvalidParameter(format!(
            "--generate `{text}`: expected n:M:N with n > 0"
        ))),
    }
}

/// The joint type closest to uniform: `n` spread over the cells, remainder to the first ones.
pub fn near_uniform_type(n: usize, x_size: usize, y_size: usize) -> Result<EmpiricalType, Error> {
    let cells = x_size * y_size;
    let counts = (0..cells)
        .map(|k| n / cells + usize::from(k < n % cells))
        .collect();
    EmpiricalType::from_counts(vec![x_size, y_size], counts)
}

fn generated_code(a: &SimulateArgs, w: &Mac, text: &str) -> Result<MultiUserCode, Error> {
    let (n, m, nn) = parse_generator(text)?;
    let p = match &a.counts {
        Some(c) => {
            let counts: Vec<usize> = c
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    Error::InvalidParameter(format!(
                        "--counts `{c}`: expected comma-separated integers"
                    ))
                })?;
            if counts.iter().sum::<usize>() != n {
                return Err(Error::InvalidParameter(format!(
                    "--counts `{c}` does not sum to n = {n}"
                )));
            }
            EmpiricalType::from_counts(vec![w.x_size(), w.y_size()], counts)?
        }
        None => near_uniform_type(n, w.x_size(), w.y_size())?,
    };
    constant_composition_code(&p, m, nn, a.common.seed)
}

/// The explicit `--lambda`, else the code's maximal error. `None` when the code
/// has a pair that is never decoded and no lambda was given: it is no lambda-code.
fn code_lambda(given: Option<f64>, stats: &CodeStats) -> Result<Option<f64>, Error> {
    match given {
        Some(l) if (0.0..1.0).contains(&l) => Ok(Some(l)),
        Some(l) => Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, 1), got {l}"
        ))),
        None => Ok((stats.max_error < 1.0).then_some(stats.max_error)),
    }
}

const MAX_ERROR_ONE: &str = "maximal error is 1, so the code is no lambda-code for lambda < 1; pass --lambda to analyse its well-decoded pairs";

#[derive(Debug, Serialize)]
struct CodeSummary {
    n: usize,
    m: usize,
    n_codewords: usize,
    rates: (f64, f64),
    u: Vec<Vec<usize>>,
    v: Vec<Vec<usize>>,
}

impl CodeSummary {
    fn of(c: &MultiUserCode) -> Self {
        Self {
            n: c.n,
            m: c.m(),
            n_codewords: c.n_codewords(),
            rates: c.rates(),
            u: c.u.clone(),
            v: c.v.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SpherePackingSection {
    rates: Option<RatePair>,
    delta: f64,
    exponent: Option<ExponentResult>,
    check: Option<SpherePackingCheck>,
    /// Why the check did not run.
    unmet: Option<String>,
}

#[derive(Debug, Serialize)]
struct SimulationReport {
    code: CodeSummary,
    stats: CodeStats,
    lambda: Option<f64>,
    dominant: Option<DominantType>,
    strong_converse: Option<StrongConverseReport>,
    sphere_packing: SpherePackingSection,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, Error> {
    let w = load_channel(&a.common.channel)?;
    let code = match (&a.code, &a.generate) {
        (Some(path), _) => load_code(path, &w)?,
        (None, Some(text)) => generated_code(a, &w, text)?,
        (None, None) => return Err(Error::InvalidParameter("give --code or --generate".into())),
    };
    if !(a.delta > 0.0 && a.delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {}",
            a.delta
        )));
    }
    let stats = error_probabilities(&w, &code)?;
    let lambda = code_lambda(a.lambda, &stats)?;
    let opts = a.common.options(a.resolution);
    let converse = match lambda {
        Some(l) => {
            let model = SlackModel::Converse {
                lambda: l,
                k_cap: None,
            };
            Some(strong_converse_check(&w, &code, &stats, l, &model, &opts)?)
        }
        None => None,
    };
    let (c1, c2) = code.rates();
    let target = match &a.rates {
        Some(v) => Some(rate_pair(v)?),
        None => RatePair::new(c1 - a.delta, c2 - a.delta).ok(),
    };
    let mut section = SpherePackingSection {
        rates: target,
        delta: a.delta,
        exponent: None,
        check: None,
        unmet: None,
    };
    match target {
        None => {
            section.unmet = Some(format!(
                "code rates ({c1:.6}, {c2:.6}) are below delta = {}, no nonnegative target rates",
                a.delta
            ));
        }
        Some(r) => {
            let e_sp = sphere_packing_exponent(&w, &r, &opts)?;
            match sphere_packing_verify(&w, &code, &stats, &r, a.delta, &e_sp) {
                Ok(check) => section.check = Some(check),
                Err(Error::RatePrecondition(m)) => section.unmet = Some(m),
                Err(e) => return Err(e),
            }
            section.exponent = Some(e_sp);
        }
    }
    let mut notes = Vec::new();
    if lambda.is_none() {
        notes.push(MAX_ERROR_ONE.to_string());
    }
    if let Some(m) = &section.unmet {
        notes.push(format!("sphere-packing precondition unmet: {m}"));
    }
    let note = (!notes.is_empty()).then(|| notes.join("\n"));
    let report = SimulationReport {
        code: CodeSummary::of(&code),
        stats,
        lambda,
        dominant: converse.as_ref().and_then(|c| c.dominant.clone()),
        strong_converse: converse,
        sphere_packing: section,
    };
    Ok(Outcome {
        code: if note.is_some() {
            EXIT_OUTSIDE
        } else {
            EXIT_OK
        },
        text: with_newline(to_json_string(&report)),
        note,
    })
}

#[derive(Debug, Serialize)]
struct WringChecks {
    /// Retained fraction at least the floor.
    retained_above_floor: bool,
    /// Every letter has information at most delta, or the loop hit its cap.
    letters_below_delta: bool,
    independence_gap: f64,
    independence_bound: f64,
    gap_within_bound: bool,
}

#[derive(Debug, Serialize)]
struct WringReport {
    lambda: f64,
    dominant: DominantType,
    dependence: DependenceReport,
    wringing: WringingResult,
    checks: WringChecks,
    rate_bounds: RateBoundDiagnostics,
}

fn cmd_wring(a: &WringArgs) -> Result<Outcome, Error> {
    let w = load_channel(&a.common.channel)?;
    let code = load_code(&a.code, &w)?;
    let stats = error_probabilities(&w, &code)?;
    let Some(lambda) = code_lambda(a.lambda, &stats)? else {
        return Ok(Outcome {
            code: EXIT_OUTSIDE,
            text: String::new(),
            note: Some(MAX_ERROR_ONE.into()),
        });
    };
    let Some(dom) = dominant_type(&code, &stats, lambda)? else {
        return Ok(Outcome {
            code: EXIT_OUTSIDE,
            text: String::new(),
            note: Some("no dominant joint type: no type carries enough well-decoded pairs".into()),
        });
    };
    let (d0, s0) = default_wring_parameters(code.n, lambda, code.x_size, code.y_size);
    let delta = a.delta.unwrap_or(d0);
    let sigma = a.sigma.unwrap_or(s0);
    let dependence = dependence_check(&code, &dom.pairs, lambda)?;
    let wrung = wring(&code, &dom.pairs, delta, sigma)?;
    let gap = independence_gap(&code, &wrung.subcode)?;
    let bound = independence_bound(delta);
    let rate_bounds =
        rate_bound_diagnostics(&w, &code, &wrung, lambda, &RateBoundConstants::default())?;
    let checks = WringChecks {
        retained_above_floor: wrung.floor_met,
        letters_below_delta: wrung.capped || wrung.max_letter_information <= delta,
        independence_gap: gap,
        independence_bound: bound,
        gap_within_bound: gap <= bound + 1e-9,
    };
    let report = WringReport {
        lambda,
        dominant: dom,
        dependence,
        wringing: wrung,
        checks,
        rate_bounds,
    };
    Ok(Outcome::ok(with_newline(to_json_string(&report))))
}
