//! `canonical-tf`: generate signals, run linear canonical and short-time
//! transforms, compute moments and check uncertainty bounds.
//!
//! Exit codes: 0 success, 1 a bound was violated on a resolved grid,
//! 2 bad invocation or input, 3 numerical failure (including violations
//! on grids that do not resolve the signals).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canonical_tf::battery::{run_battery, BatteryConfig, BatteryReport, SignalSpec, TheoremSel};
use canonical_tf::lct::{induced_grid, lct_b_zero, lct_direct, lct_fast};
use canonical_tf::moments::{
    conditional_freq_moments, freq_moments, additivity_from_map, stlct_moments, time_moments,
};
use canonical_tf::stlct::{default_grids, local_energies, sftt, stlct, stlct_spectral, TimeFreqMap};
use canonical_tf::uncertainty::{stern_check, theorem1_check, theorem2_check, theorem3_check};
use canonical_tf::{Error, Grid, ParamMatrix, SampledSignal};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "canonical-tf", version, about = "Linear canonical transforms and their uncertainty bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a preset signal onto a grid.
    Gen(GenArgs),
    /// Transform a sampled signal.
    Lct(LctArgs),
    /// Short-time transform as complex samples `t,u,re,im`.
    Stlct(MapArgs),
    /// Short-time transform as `t,u,magnitude_squared`.
    Spectrogram(MapArgs),
    /// Means and spreads of a signal, or of its short-time transform.
    Moments(MomentsArgs),
    /// Check one bound, or a battery of bounds.
    Verify(VerifyArgs),
    /// Run a battery config (the default battery without `--config`).
    Battery(BatteryArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fast,
    Direct,
    Bzero,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    Time,
    Spectral,
    Sftt,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum TheoremArg {
    Stern,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Args)]
struct Output {
    /// Output format; defaults to the output file extension, else csv.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// `gaussian:center=..,width=..,chirp=..,carrier=..` or `rect:center=..,half_width=..`.
    #[arg(long)]
    signal: String,
    /// `n,t0,dt`.
    #[arg(long, default_value = "1024,-8,0.015625")]
    grid: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LctArgs {
    /// `fourier`, `identity`, `frft:<alpha>` or `a,b,c,d`.
    #[arg(long)]
    matrix: String,
    #[arg(long, value_enum, default_value = "fast")]
    method: Method,
    /// Input signal (CSV `t,re,im` or JSON).
    input: PathBuf,
    /// Output file; overrides `--out`.
    output_path: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SignalSource {
    /// Signal preset or file.
    #[arg(long)]
    signal: Option<String>,
    /// Signal file; alternative to `--signal`.
    input: Option<PathBuf>,
    /// `n,t0,dt` for presets.
    #[arg(long, default_value = "1024,-8,0.015625")]
    grid: String,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    source: SignalSource,
    /// Window preset or file.
    #[arg(long)]
    window: String,
    #[arg(long, default_value = "fourier")]
    matrix: String,
    #[arg(long, value_enum, default_value = "time")]
    route: Route,
    /// `d'` of the window matrix `(0, b, -1/b, d')` (spectral route).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dprime: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    source: SignalSource,
    /// With a window, report the short-time transform moments.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value = "fourier")]
    matrix: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dprime: f64,
    /// Write `t,mean_u,var_u,Q` instead (needs a window).
    #[arg(long)]
    conditional: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    theorem: Option<TheoremArg>,
    /// Battery config (JSON). Without it and without `--signal`, the
    /// default battery runs.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    signal: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value = "fourier")]
    matrix: String,
    #[arg(long)]
    matrix2: Option<String>,
    #[arg(long, default_value = "1024,-8,0.015625")]
    grid: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dprime: f64,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    u: Option<f64>,
    /// Report file (JSON); the summary table then goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatteryArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code.
struct Fail {
    code: u8,
    message: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = if e.is_usage() { 2 } else { 3 };
        let message = match e {
            Error::Io(m) if m.contains("Broken pipe") => return Fail { code: 0, message: String::new() },
            Error::BZero => "b=0: chirp-multiplication branch; use --method bzero".to_owned(),
            other => other.to_string(),
        };
        Fail { code, message }
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            // reader went away (`| head`); not an error
            return Fail { code: 0, message: String::new() };
        }
        Fail { code: 2, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Fail {
    Fail { code: 2, message: message.into() }
}

type CmdResult = Result<u8, Fail>;

fn parse_grid(s: &str) -> Result<Grid, Fail> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(usage(format!("--grid needs n,t0,dt, got '{s}'")));
    }
    let n: usize = parts[0].parse().map_err(|_| usage(format!("bad sample count '{}'", parts[0])))?;
    let t0: f64 = parts[1].parse().map_err(|_| usage(format!("bad t0 '{}'", parts[1])))?;
    let dt: f64 = parts[2].parse().map_err(|_| usage(format!("bad dt '{}'", parts[2])))?;
    Ok(Grid::new(n, t0, dt)?)
}

fn parse_matrix(s: &str) -> Result<ParamMatrix, Fail> {
    Ok(s.parse::<ParamMatrix>()?)
}

fn read_signal(path: &Path) -> Result<SampledSignal, Fail> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let s = if is_json {
        SampledSignal::from_json(&std::fs::read_to_string(path)?)?
    } else {
        SampledSignal::from_csv(File::open(path)?)?
    };
    Ok(s)
}

/// A preset, or a file when the text names an existing path.
fn load_signal(spec: &str, grid: Grid) -> Result<SampledSignal, Fail> {
    let path = Path::new(spec);
    if !spec.contains(':') && path.is_file() {
        return read_signal(path);
    }
    Ok(spec.parse::<SignalSpec>()?.build(grid)?)
}

fn source_signal(src: &SignalSource) -> Result<SampledSignal, Fail> {
    let grid = parse_grid(&src.grid)?;
    match (&src.signal, &src.input) {
        (Some(s), None) => load_signal(s, grid),
        (None, Some(p)) => read_signal(p),
        (Some(_), Some(_)) => Err(usage("give either --signal or an input file, not both")),
        (None, None) => Err(usage("missing signal: pass --signal or an input file")),
    }
}

fn warn_truncation(s: &SampledSignal, what: &str) {
    if let Some(w) = s.truncation_warning() {
        eprintln!("warning: {what}: {w}");
    }
}

fn format_of(out: &Output) -> Format {
    out.format.unwrap_or_else(|| match &out.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        _ => Format::Csv,
    })
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Fail> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Fail> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_signal(s: &SampledSignal, header_axis: &str, out: &Output) -> Result<(), Fail> {
    match format_of(out) {
        Format::Json => write_text(out.out.as_deref(), &s.to_json()?),
        Format::Csv => {
            let mut buf = Vec::new();
            s.to_csv(&mut buf)?;
            if header_axis != "t" {
                // same columns, renamed axis
                let rest = buf.iter().position(|&c| c == b'\n').map_or(buf.len(), |i| i + 1);
                let mut renamed = format!("{header_axis},re,im\n").into_bytes();
                renamed.extend_from_slice(&buf[rest..]);
                buf = renamed;
            }
            let mut w = sink(out.out.as_deref())?;
            w.write_all(&buf)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let grid = parse_grid(&args.grid)?;
    let s = args.signal.parse::<SignalSpec>()?.build(grid)?;
    warn_truncation(&s, "signal");
    write_signal(&s, "t", &args.output)?;
    Ok(0)
}

fn cmd_lct(args: &LctArgs) -> CmdResult {
    let a = parse_matrix(&args.matrix)?;
    let f = read_signal(&args.input)?;
    let out = match args.method {
        Method::Fast => lct_fast(&a, &f)?,
        Method::Direct => lct_direct(&a, &f, &induced_grid(&a, f.grid())?)?,
        Method::Bzero => lct_b_zero(&a, &f)?,
    };
    let output = Output {
        format: args.output.format,
        out: args.output_path.clone().or_else(|| args.output.out.clone()),
    };
    write_signal(&out, "u", &output)?;
    Ok(0)
}

fn compute_map(args: &MapArgs) -> Result<TimeFreqMap, Fail> {
    let f = source_signal(&args.source)?;
    let g = load_signal(&args.window, *f.grid())?;
    warn_truncation(&f, "signal");
    let a = parse_matrix(&args.matrix)?;
    let (t_grid, u_grid) = default_grids(&a, &f)?;
    Ok(match args.route {
        Route::Time => stlct(&f, &g, &a, &t_grid, &u_grid)?,
        Route::Spectral => stlct_spectral(&f, &g, &a, args.dprime, &t_grid, &u_grid)?,
        Route::Sftt => sftt(&f, &g, &a, &t_grid, &u_grid, &u_grid)?,
    })
}

fn cmd_map(args: &MapArgs, magnitude: bool) -> CmdResult {
    let map = compute_map(args)?;
    match format_of(&args.output) {
        Format::Json => write_text(args.output.out.as_deref(), &map.to_json()?)?,
        Format::Csv => {
            let mut w = sink(args.output.out.as_deref())?;
            if magnitude {
                map.spectrogram_csv(&mut w)?;
            } else {
                map.to_csv(&mut w)?;
            }
            w.flush()?;
        }
    }
    Ok(0)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string_pretty(v).map_err(|e| Fail { code: 3, message: e.to_string() })
}

fn cmd_moments(args: &MomentsArgs) -> CmdResult {
    let f = source_signal(&args.source)?;
    warn_truncation(&f, "signal");
    let a = parse_matrix(&args.matrix)?;
    let Some(window) = &args.window else {
        if args.conditional {
            return Err(usage("--conditional needs --window"));
        }
        #[derive(serde::Serialize)]
        struct Doc {
            time: canonical_tf::moments::MomentReport,
            frequency: canonical_tf::moments::MomentReport,
            matrix: ParamMatrix,
        }
        let doc = Doc { time: time_moments(&f)?, frequency: freq_moments(&a, &f)?, matrix: a };
        write_text(args.output.out.as_deref(), &to_json(&doc)?)?;
        return Ok(0);
    };
    let g = load_signal(window, *f.grid())?;
    let (t_grid, u_grid) = default_grids(&a, &f)?;
    let map = stlct(&f, &g, &a, &t_grid, &u_grid)?;
    if args.conditional {
        let q = local_energies(&f, &g, &t_grid)?;
        let c = conditional_freq_moments(&map, &q)?;
        match format_of(&args.output) {
            Format::Json => write_text(args.output.out.as_deref(), &c.to_json()?)?,
            Format::Csv => {
                let mut w = sink(args.output.out.as_deref())?;
                c.to_csv(&mut w, "t,mean_u,var_u,Q")?;
                w.flush()?;
            }
        }
        return Ok(0);
    }
    let m = stlct_moments(&map)?;
    let additivity = additivity_from_map(&map, &f, &g, args.dprime)?;
    #[derive(serde::Serialize)]
    struct Doc {
        #[serde(flatten)]
        moments: canonical_tf::moments::StlctMomentReport,
        additivity: canonical_tf::moments::AdditivityReport,
    }
    write_text(args.output.out.as_deref(), &to_json(&Doc { moments: m, additivity })?)?;
    Ok(0)
}

fn selector(t: TheoremArg) -> TheoremSel {
    match t {
        TheoremArg::Stern => TheoremSel::Stern,
        TheoremArg::One => TheoremSel::Theorem1,
        TheoremArg::Two => TheoremSel::Theorem2,
        TheoremArg::Three => TheoremSel::Theorem3,
    }
}

/// Exit code for a finished battery.
fn battery_code(report: &BatteryReport) -> u8 {
    if report.any_errored() {
        3
    } else if report.any_failed() {
        // a violation only counts on a grid that resolves the inputs
        if report.resolution_issues.is_empty() { 1 } else { 3 }
    } else {
        0
    }
}

fn emit_battery(report: &BatteryReport, out: Option<&Path>) -> CmdResult {
    let json = report.to_json()?;
    match out {
        Some(p) => {
            write_text(Some(p), &json)?;
            print!("{}", report.table());
        }
        None => {
            write_text(None, &json)?;
            eprint!("{}", report.table());
        }
    }
    Ok(battery_code(report))
}

fn load_config(path: Option<&Path>) -> Result<BatteryConfig, Fail> {
    match path {
        Some(p) => Ok(BatteryConfig::from_json(&std::fs::read_to_string(p)?)?),
        None => Ok(BatteryConfig::default_battery()),
    }
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    if args.signal.is_none() {
        if args.t.is_some() || args.u.is_some() {
            return Err(usage("--t/--u need --signal and --window"));
        }
        let mut config = load_config(args.config.as_deref())?;
        if let Some(t) = args.theorem {
            config.theorems = vec![selector(t)];
        }
        let report = run_battery(&config)?;
        return emit_battery(&report, args.out.as_deref());
    }
    if args.config.is_some() {
        return Err(usage("give either --config or --signal, not both"));
    }
    let grid = parse_grid(&args.grid)?;
    let spec = args.signal.as_deref().unwrap_or_default();
    let f = load_signal(spec, grid)?;
    let a = parse_matrix(&args.matrix)?;
    let theorem = args.theorem.unwrap_or(TheoremArg::One);
    let window = || -> Result<SampledSignal, Fail> {
        let w = args.window.as_deref().ok_or_else(|| usage("this bound needs --window"))?;
        load_signal(w, *f.grid())
    };
    let unresolved = {
        let mut specs = vec![spec];
        specs.extend(args.window.as_deref());
        specs
            .iter()
            .filter_map(|s| s.parse::<SignalSpec>().ok())
            .any(|s| s.resolution_issue(f.grid()).is_some())
    };
    let violation = if unresolved { 3 } else { 1 };
    let (json, ok) = match theorem {
        TheoremArg::Three => {
            let (t, u) = match (args.t, args.u) {
                (Some(t), Some(u)) => (t, u),
                _ => return Err(usage("--theorem 3 needs --t and --u")),
            };
            let r = theorem3_check(&f, &window()?, &a, t, u)?;
            (to_json(&r)?, r.holds_commutator_consistent)
        }
        TheoremArg::Stern => {
            let r = stern_check(&f, &a)?;
            (to_json(&r)?, r.passed)
        }
        TheoremArg::One => {
            let r = theorem1_check(&f, &window()?, &a, args.dprime)?;
            (to_json(&r)?, r.passed)
        }
        TheoremArg::Two => {
            let m2 = args.matrix2.as_deref().ok_or_else(|| usage("--theorem 2 needs --matrix2"))?;
            let r = theorem2_check(&f, &window()?, &a, &parse_matrix(m2)?, args.dprime)?;
            (to_json(&r)?, r.passed)
        }
    };
    write_text(args.out.as_deref(), &json)?;
    Ok(if ok { 0 } else { violation })
}

fn cmd_battery(args: &BatteryArgs) -> CmdResult {
    let config = load_config(args.config.as_deref())?;
    let report = run_battery(&config)?;
    emit_battery(&report, args.out.as_deref())
}

fn configure_threads() -> Result<(), Fail> {
    let Ok(v) = std::env::var("CANONICAL_TF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("CANONICAL_TF_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Fail { code: 3, message: e.to_string() })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Lct(a) => cmd_lct(a),
        Command::Stlct(a) => cmd_map(a, false),
        Command::Spectrogram(a) => cmd_map(a, true),
        Command::Moments(a) => cmd_moments(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Battery(a) => cmd_battery(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
