//! `varlex`: command-line front end for the step-function toolkit.
//!
//! Exit codes: 0 success, 2 input error, 3 invariant failure, 4 condition
//! not witnessed. `VARLEX_THREADS` caps the worker pool.

// `!(a < b)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod io;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use varlex_core::construction::{construct, ConstructionConfig, ConstructionTrace};
use varlex_core::diagnostics::{
    classify_partial_integrals, closedness_scan, exp_integral_test, limsup_ratio_profile, mln_defect,
    IntegralVerdict, RatioProfile, DEFAULT_DELTA,
};
use varlex_core::interleave::GridExponentND;
use varlex_core::measure::{indicator, ExponentProfile, StepFn};
use varlex_core::norms::{
    luxemburg_norm, marcinkiewicz_ln_norm, orlicz_exp_norm, sup_log_ratio_norm, NormResult, DEFAULT_TOL,
};
use varlex_core::profiles::{GeometricGrid, ProfileKind};
use varlex_core::rearrangement::{decreasing_rearrangement, equimeasurable};

/// Failure carrying a specific exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit {
        code,
        message: message.into(),
    }
    .into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code;
    }
    match err.downcast_ref::<varlex_core::Error>() {
        Some(varlex_core::Error::NotWitnessed(_)) => 4,
        Some(varlex_core::Error::Invariant(_)) => 3,
        _ => 2,
    }
}

#[derive(Parser)]
#[command(name = "varlex", version, about = "Rearrangements, variable-exponent norms and the dyadic closedness construction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in exponent profile as step-function JSON.
    Gen {
        #[command(flatten)]
        input: ProfileInput,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Decreasing rearrangement of a step function.
    Rearrange {
        #[command(flatten)]
        input: ProfileInput,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Norm of a step function.
    Norm(NormArgs),
    /// Finite-depth diagnostics of the ratio p*(t) / ln(e/t).
    Diagnose(DiagnoseArgs),
    /// Build the scrambled exponent and its lift, with a full audit.
    Construct(ConstructArgs),
    /// Minimum dyadic cube norms of p_hat composed with the interleaving map.
    Scan(ScanArgs),
}

/// A step function read from JSON or produced by a generator.
#[derive(Args, Clone)]
struct ProfileInput {
    /// Step-function JSON file.
    path: Option<PathBuf>,
    /// Built-in generator: log, log:<scale>, sqrtlog, const:<p0>.
    #[arg(long, conflicts_with = "path")]
    gen: Option<ProfileKind>,
    /// Octaves of the geometric grid.
    #[arg(long, default_value_t = 40)]
    depth: u32,
    /// Cells per octave.
    #[arg(long, default_value_t = 4096)]
    per_octave: u32,
}

impl ProfileInput {
    fn grid(&self) -> Result<GeometricGrid> {
        Ok(GeometricGrid::new(self.depth, self.per_octave)?)
    }

    fn load_fn(&self) -> Result<StepFn> {
        match (&self.path, &self.gen) {
            (Some(p), None) => io::read_json(p),
            (None, Some(kind)) => Ok(kind.generate(self.grid()?)?.into_inner()),
            _ => Err(exit(2, "give a JSON path or --gen")),
        }
    }

    fn load_exponent(&self) -> Result<ExponentProfile> {
        Ok(ExponentProfile::new(self.load_fn()?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    Luxemburg,
    Orlicz,
    Marcinkiewicz,
    SupLog,
}

#[derive(Args)]
struct NormArgs {
    /// Step-function JSON file.
    function: Option<PathBuf>,
    /// Use the indicator of [A, B) instead of a file.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "function")]
    indicator: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "luxemburg")]
    kind: NormKind,
    /// Exponent JSON file (Luxemburg norm only).
    #[arg(long)]
    exponent: Option<PathBuf>,
    /// Built-in exponent generator (Luxemburg norm only).
    #[arg(long, conflicts_with = "exponent")]
    gen: Option<ProfileKind>,
    #[arg(long, default_value_t = 40)]
    depth: u32,
    #[arg(long, default_value_t = 4096)]
    per_octave: u32,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: ProfileInput,
    /// Deepest dyadic level sampled; defaults to the grid depth.
    #[arg(long)]
    max_depth: Option<u32>,
    /// Threshold on the deepest running tail maximum.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Extra bases for the exponential integral test.
    #[arg(long = "base")]
    bases: Vec<f64>,
    /// JSON report.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// CSV of the per-depth series.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    input: ProfileInput,
    /// Dimension n of the cube [0,1)^n.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Ratio lower bound; defaults to half the deepest tail maximum.
    #[arg(long)]
    d: Option<f64>,
    /// Base; defaults to e^(2/d).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 64)]
    stages: usize,
    #[arg(long, default_value_t = 64)]
    anchors: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Depth at which the tail-maximum gate is evaluated.
    #[arg(long, default_value_t = 60)]
    witness_depth: u32,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Skip the tail-maximum gate.
    #[arg(long)]
    force: bool,
    /// Keep every stage function in the trace.
    #[arg(long)]
    audit: bool,
    /// Trace JSON.
    #[arg(short, long)]
    out: PathBuf,
    /// p_hat JSON; defaults to <out>.p_hat.json.
    #[arg(long)]
    p_hat: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Construction trace JSON; supplies p_hat, n and the floor 1/c.
    #[arg(long, conflicts_with_all = ["path", "gen"])]
    trace: Option<PathBuf>,
    #[command(flatten)]
    input: ProfileInput,
    /// Dimension n; defaults to the trace's, else 2.
    #[arg(long)]
    dim: Option<usize>,
    /// Digits per coordinate; defaults to floor(52 / n).
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 8)]
    max_level: u32,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// JSON report.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => io::write_json(p, value),
        None => {
            println!("{}", serde_json::to_string(value)?);
            Ok(())
        }
    }
}

fn cmd_gen(input: &ProfileInput, out: Option<&Path>) -> Result<()> {
    if input.gen.is_none() {
        bail!(exit(2, "gen needs --gen"));
    }
    emit_json(out, &input.load_exponent()?)
}

fn cmd_rearrange(input: &ProfileInput, out: Option<&Path>) -> Result<()> {
    let f = input.load_fn()?;
    let fs = decreasing_rearrangement(&f);
    let ok = equimeasurable(&f, &fs, 0.0) && fs.is_non_increasing();
    emit_json(out, &fs)?;
    eprintln!("equimeasurable with input: {}", if ok { "yes" } else { "no" });
    if !ok {
        bail!(exit(3, "rearrangement self-check failed"));
    }
    Ok(())
}

#[derive(Serialize)]
struct NormReport {
    kind: &'static str,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bisection: Option<NormResult>,
}

fn cmd_norm(a: &NormArgs) -> Result<()> {
    let f = match (&a.function, &a.indicator) {
        (Some(p), None) => io::read_json::<StepFn>(p)?,
        (None, Some(ab)) => indicator(ab[0], ab[1])?,
        _ => bail!(exit(2, "give a function JSON path or --indicator A B")),
    };
    let report = match a.kind {
        NormKind::Luxemburg => {
            let p = match (&a.exponent, &a.gen) {
                (Some(path), None) => io::read_json::<ExponentProfile>(path)?,
                (None, Some(kind)) => kind.generate(GeometricGrid::new(a.depth, a.per_octave)?)?,
                _ => bail!(exit(2, "the Luxemburg norm needs --exponent or --gen")),
            };
            let r = luxemburg_norm(&f, &p, a.tol)?;
            NormReport {
                kind: "luxemburg",
                value: r.value,
                bisection: Some(r),
            }
        }
        NormKind::Orlicz => {
            let r = orlicz_exp_norm(&f, a.tol)?;
            NormReport {
                kind: "orlicz_exp",
                value: r.value,
                bisection: Some(r),
            }
        }
        NormKind::Marcinkiewicz => NormReport {
            kind: "marcinkiewicz_ln",
            value: marcinkiewicz_ln_norm(&f),
            bisection: None,
        },
        NormKind::SupLog => NormReport {
            kind: "sup_log_ratio",
            value: sup_log_ratio_norm(&f),
            bisection: None,
        },
    };
    emit_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct ExpIntegralReport {
    c: f64,
    verdict: IntegralVerdict,
    log_values: Vec<f64>,
}

#[derive(Serialize)]
struct DiagnoseReport {
    max_depth: u32,
    delta: f64,
    tail_max: f64,
    /// Finite-depth verdict on the ratio condition.
    witnessed: bool,
    ratio_profile: RatioProfile,
    exp_integrals: Vec<ExpIntegralReport>,
    mln_defect: Vec<f64>,
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    if !(a.delta > 0.0) {
        bail!(exit(2, format!("delta must be positive, got {}", a.delta)));
    }
    let p = a.input.load_exponent()?;
    let p_star = ExponentProfile::new(decreasing_rearrangement(&p))?;
    let max_depth = a.max_depth.unwrap_or(a.input.depth);
    let ratio = limsup_ratio_profile(&p_star, max_depth)?;
    let tail = ratio.tail_max();
    let witnessed = tail >= a.delta;
    println!(
        "finite-depth verdict at depth {max_depth} (delta = {}): condition {} (tail max {tail:.6})",
        a.delta,
        if witnessed { "witnessed" } else { "not witnessed" }
    );
    let mut bases = vec![(1.0 / a.delta).exp(), (2.0 / a.delta).exp()];
    bases.extend(&a.bases);
    let mut exp_integrals = Vec::new();
    for c in bases {
        let pi = exp_integral_test(&p_star, c, &ratio.depths)?;
        let verdict = classify_partial_integrals(&pi);
        println!(
            "exp integral c = {c:.6e}: {verdict} (ln of partial integral at depth {max_depth}: {:.6})",
            pi.log_values.last().copied().unwrap_or(f64::NAN)
        );
        exp_integrals.push(ExpIntegralReport {
            c,
            verdict,
            log_values: pi.log_values,
        });
    }
    let defect = mln_defect(&p_star, &ratio.depths);
    println!(
        "M_ln defect at depth {max_depth}: {:.6}",
        defect.last().copied().unwrap_or(f64::NAN)
    );
    println!("depth,ratio,running_max_tail,mln_defect");
    let rows: Vec<Vec<String>> = (0..ratio.depths.len())
        .map(|k| {
            vec![
                ratio.depths[k].to_string(),
                ratio.ratios[k].to_string(),
                ratio.running_max_tail[k].to_string(),
                defect[k].to_string(),
            ]
        })
        .collect();
    for r in &rows {
        println!("{}", r.join(","));
    }
    if let Some(path) = &a.csv {
        io::write_csv(path, &["depth", "ratio", "running_max_tail", "mln_defect"], &rows)?;
    }
    let report = DiagnoseReport {
        max_depth,
        delta: a.delta,
        tail_max: tail,
        witnessed,
        ratio_profile: ratio,
        exp_integrals,
        mln_defect: defect,
    };
    if let Some(path) = &a.out {
        io::write_json(path, &report)?;
    }
    Ok(())
}

fn default_p_hat_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.p_hat.json"))
}

fn cmd_construct(a: &ConstructArgs) -> Result<()> {
    let p = a.input.load_exponent()?;
    let p_star = ExponentProfile::new(decreasing_rearrangement(&p))?;
    if !a.force {
        let tail = limsup_ratio_profile(&p_star, a.witness_depth)?.tail_max();
        if tail < a.delta {
            bail!(exit(
                4,
                format!(
                    "condition not witnessed: tail max {tail:.6} < delta {} at depth {} (use --force to override)",
                    a.delta, a.witness_depth
                )
            ));
        }
    }
    let grid = a.input.grid()?;
    let config = ConstructionConfig {
        dim: a.dim,
        grid,
        ratio_depth: grid.depth,
        d: a.d,
        c: a.c,
        max_anchors: a.anchors,
        max_stages: a.stages,
        retain_stages: a.audit,
        samples: a.samples,
        seed: a.seed,
    };
    let trace = construct(&p_star, &config)?;
    io::write_json(&a.out, &trace)?;
    let p_hat_path = a.p_hat.clone().unwrap_or_else(|| default_p_hat_path(&a.out));
    io::write_json(&p_hat_path, &trace.p_hat)?;

    println!(
        "d = {:.6}, c = {:.6}, floor 1/c = {:.6e}",
        trace.d,
        trace.c,
        1.0 / trace.c
    );
    println!(
        "anchors {}, stages {}, coverage level {}, witness cube level {}",
        trace.anchors.len(),
        trace.stage_count,
        trace.coverage_level.map_or("none".into(), |l| l.to_string()),
        trace.witness_level().map_or("none".into(), |l| l.to_string()),
    );
    for c in &trace.audit {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if !trace.audit_passed() {
        bail!(exit(3, "construction audit failed"));
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs) -> Result<()> {
    let (p_hat, dim, floor, witness) = match &a.trace {
        Some(path) => {
            let trace: ConstructionTrace = io::read_json(path)?;
            let dim = a.dim.unwrap_or(trace.config.dim);
            let witness = trace.coverage_level.map(|l| l / dim as u32);
            (trace.p_hat, dim, Some(1.0 / trace.c), witness)
        }
        None => (a.input.load_exponent()?, a.dim.unwrap_or(2), None, None),
    };
    let pbar = GridExponentND::new(dim, p_hat, a.bits)?;
    let mut report = closedness_scan(&pbar, a.max_level, a.tol)?;
    report.witness_level = witness;
    if let Some(from) = report.clamped_from {
        eprintln!(
            "warning: max level {from} clamped to {} (bit budget {} digits per axis)",
            report.levels.last().copied().unwrap_or(0),
            pbar.bits()
        );
    }
    if let Some(f) = floor {
        println!("floor 1/c = {f:.6e}");
    }
    let mut rows = Vec::new();
    for (k, &m) in report.levels.iter().enumerate() {
        let v = report.min_norms[k];
        let cube = &report.argmin_cubes[k];
        let beyond = report.beyond_construction_depth(m);
        let mark = match floor {
            _ if beyond => "beyond construction depth",
            Some(f) if v >= f => "above floor",
            Some(_) => "BELOW FLOOR",
            None => "",
        };
        let idx: Vec<String> = cube.indices().iter().map(|i| i.to_string()).collect();
        println!("level {m}: min norm {v:.12e} at cube [{}] {mark}", idx.join(" "));
        rows.push(vec![
            m.to_string(),
            v.to_string(),
            idx.join(";"),
            floor.map_or(String::new(), |f| f.to_string()),
            beyond.to_string(),
        ]);
    }
    if let Some(path) = &a.csv {
        io::write_csv(
            path,
            &["level", "min_norm", "argmin_indices", "floor", "beyond_construction_depth"],
            &rows,
        )?;
    }
    emit_json(a.out.as_deref(), &report)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("VARLEX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| exit(2, format!("VARLEX_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        bail!(exit(2, "VARLEX_THREADS must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!(e))
        .context("configuring worker threads")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Gen { input, out } => cmd_gen(input, out.as_deref()),
        Command::Rearrange { input, out } => cmd_rearrange(input, out.as_deref()),
        Command::Norm(a) => cmd_norm(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Scan(a) => cmd_scan(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
