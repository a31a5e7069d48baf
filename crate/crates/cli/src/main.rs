//! `oscint`: evaluate, sweep and check oscillatory integrals from the command line.
//!
//! Exit status: 0 when every check passes, 1 on a failed check, 2 on a usage or config error,
//! 3 when a quadrature or eigen iteration ran out of budget.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use oscint_core::anisocover::{
    default_delta, default_probe_n, grad_separation, greedy_cover, overlap_stats, separation_check, validate_cover,
    CoverDomain, CoverOptions,
};
use oscint_core::harness::{
    aniso_family, evaluate, fit_envelope, format_float, read_csv, run_sweep, to_json_string, verify_lse,
    verify_matrix_suite, verify_optimal, verify_ps0, write_csv, write_json, Method, Summary, SweepConfig, SweepRow,
    VerifyConfig,
};
use oscint_core::phasekit::{
    constants_with, p_norm, parse_spec, ConstantsConfig, AMPLITUDE_NAMES, DEFAULT_EPSILON, PHASE_NAMES,
};
use oscint_core::{Error, QuadratureConfig};

use config::FileConfig;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NONCONV: u8 = 3;

#[derive(Parser)]
#[command(name = "oscint", version, about = "Oscillatory integrals I(λ) = ∫ exp(iλΦ(x)) ψ(x) dx on the unit ball")]
#[command(after_help = builtin_help())]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

fn builtin_help() -> String {
    format!("Phases: {}\nAmplitudes: {}", PHASE_NAMES.join(", "), AMPLITUDE_NAMES.join(", "))
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate I(λ) once.
    Eval(EvalArgs),
    /// Evaluate I(λ) on a geometric λ grid and write CSV + JSON.
    Sweep(Common),
    /// Build the anisotropic cover at one λ and report its statistics.
    Cover(CoverArgs),
    /// Randomized matrix inequality suite.
    Matcheck(MatcheckArgs),
    /// Track a decay bound over a λ grid.
    Verify(VerifyArgs),
    /// Refit a CSV written by `sweep` and emit the JSON summary.
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Phase as NAME or NAME,p1,p2.
    #[arg(long)]
    phase: Option<String>,
    /// Amplitude as NAME or NAME,p1.
    #[arg(long)]
    amp: Option<String>,
    /// Dimension; inferred from the phase when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Overrides the β of a λ-dependent amplitude.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// oracle, wavepacket, aniso or all.
    #[arg(long)]
    method: Option<String>,
    /// Fixed wave-packet truncation (adaptive when omitted).
    #[arg(long)]
    k: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Quadrature budget in units of 12^d integrand evaluations.
    #[arg(long)]
    max_panels: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (CSV for sweep, JSON otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe grid points per axis for anisotropic covers.
    #[arg(long)]
    probe_n: Option<usize>,
    /// Exponent δ defining the nearly stationary packets.
    #[arg(long)]
    delta: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Print JSON to stdout instead of text.
    #[arg(long)]
    json: bool,
    /// Record wall-clock times in the CSV (breaks byte-stability).
    #[arg(long)]
    timing: bool,
    /// Config file with `key = value` lines and `[command]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MatcheckArgs {
    /// Instances per inequality.
    #[arg(long)]
    count: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    Ps0,
    Lse,
    Optimal,
}

impl Theorem {
    fn name(self) -> &'static str {
        match self {
            Theorem::Ps0 => "ps0",
            Theorem::Lse => "lse",
            Theorem::Optimal => "optimal",
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    theorem: Theorem,
    /// Anisotropy parameters of the two-dimensional aniso-quadratic family (optimal only).
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Regime parameter ε of the constants.
    #[arg(long)]
    eps: Option<f64>,
    /// Largest accepted drift ratio.
    #[arg(long)]
    drift_max: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV written by `sweep`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Envelope window (odd).
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    common: Common,
}

const KNOWN_KEYS: &[&str] = &[
    "phase",
    "amp",
    "dim",
    "beta",
    "lambda-min",
    "lambda-max",
    "points",
    "method",
    "k",
    "tol",
    "max-panels",
    "seed",
    "out",
    "probe-n",
    "delta",
    "threads",
    "json",
    "timing",
    "lambda",
    "count",
    "eps-list",
    "eps",
    "drift-max",
    "input",
    "window",
];

/// Error with the exit status it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PanelBudgetExceeded { .. } | Error::NonConvergence { .. } => EXIT_NONCONV,
            Error::UnknownName(_)
            | Error::BadParams(_)
            | Error::InvalidConfig(_)
            | Error::DimensionUnsupported(_)
            | Error::InvalidDimension(_)
            | Error::GridTooCoarse { .. }
            | Error::ProbeTooCoarse { .. }
            | Error::Io(_) => EXIT_USAGE,
            _ => EXIT_FAIL,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Self::usage(msg)
    }
}

type Outcome = Result<u8, Failure>;

/// Common flags merged with the config file.
struct Resolved {
    c: Common,
    file: FileConfig,
}

impl Resolved {
    fn new(mut c: Common, section: &str) -> Result<Self, Failure> {
        let file = match &c.config {
            Some(p) => FileConfig::load(p, section)?,
            None => FileConfig::empty(),
        };
        let unknown = file.unknown_keys(KNOWN_KEYS);
        if !unknown.is_empty() {
            return Err(Failure::usage(format!("unknown config keys: {}", unknown.join(", "))));
        }
        file.fill(&mut c.phase, "phase")?;
        file.fill(&mut c.amp, "amp")?;
        file.fill(&mut c.dim, "dim")?;
        file.fill(&mut c.beta, "beta")?;
        file.fill(&mut c.lambda_min, "lambda-min")?;
        file.fill(&mut c.lambda_max, "lambda-max")?;
        file.fill(&mut c.points, "points")?;
        file.fill(&mut c.method, "method")?;
        file.fill(&mut c.k, "k")?;
        file.fill(&mut c.tol, "tol")?;
        file.fill(&mut c.max_panels, "max-panels")?;
        file.fill(&mut c.seed, "seed")?;
        file.fill(&mut c.out, "out")?;
        file.fill(&mut c.probe_n, "probe-n")?;
        file.fill(&mut c.delta, "delta")?;
        file.fill(&mut c.threads, "threads")?;
        c.json |= file.flag("json")?;
        c.timing |= file.flag("timing")?;
        Ok(Self { c, file })
    }

    fn phase(&self) -> String {
        self.c.phase.clone().unwrap_or_else(|| "quadratic".into())
    }

    fn amp(&self) -> String {
        self.c.amp.clone().unwrap_or_else(|| "bump".into())
    }

    /// Explicit `--dim`, else the phase's natural dimension, else 1.
    fn dim(&self) -> Result<usize, Failure> {
        if let Some(d) = self.c.dim {
            return Ok(d);
        }
        let (name, params) = parse_spec(&self.phase())?;
        Ok(match name.as_str() {
            "linear" => params.len().max(1),
            "degenerate-fold" => 2,
            _ if self.amp().starts_with("hessian-cutoff") => 2,
            _ => 1,
        })
    }

    fn sweep_config(&self) -> Result<SweepConfig, Failure> {
        let mut s = SweepConfig::new(&self.phase(), &self.amp(), self.dim()?);
        let c = &self.c;
        s.beta = c.beta;
        if let Some(v) = c.lambda_min {
            s.lambda_min = v;
        }
        if let Some(v) = c.lambda_max {
            s.lambda_max = v;
        }
        if let Some(v) = c.points {
            s.points = v;
        }
        if let Some(m) = &c.method {
            s.method = m.parse()?;
        }
        s.k = c.k;
        if let Some(v) = c.tol {
            s.tol = v;
        }
        s.max_panels = c.max_panels;
        s.probe_n = c.probe_n;
        if let Some(v) = c.delta {
            s.delta = v;
        }
        if let Some(v) = c.seed {
            s.seed = v;
        }
        s.out = c.out.clone();
        s.record_timing = c.timing;
        if let Some(t) = c.threads {
            s.threads = t.max(1);
        }
        s.validate()?;
        Ok(s)
    }

    fn quad(&self) -> Result<QuadratureConfig, Failure> {
        let mut q = QuadratureConfig::default().with_tol(self.c.tol.unwrap_or(1e-8));
        if let Some(p) = self.c.max_panels {
            q.max_panels = p;
        }
        q.validate()?;
        Ok(q)
    }
}

fn emit(r: &Resolved, summary: &Summary, text: &str) -> Result<(), Failure> {
    if let Some(p) = &r.c.out {
        write_json(summary, p)?;
    }
    if r.c.json {
        print!("{}", to_json_string(summary)?);
    } else {
        print!("{text}");
    }
    Ok(())
}

fn status(pass: bool, non_converged: bool) -> u8 {
    if non_converged {
        EXIT_NONCONV
    } else if pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn fmt_pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let r = Resolved::new(a.common, "eval")?;
    let mut lambda = a.lambda;
    r.file.fill(&mut lambda, "lambda")?;
    let lambda = lambda.or(r.c.lambda_min).ok_or_else(|| Failure::usage("eval needs --lambda"))?;
    let mut cfg = r.sweep_config_for_eval(lambda)?;
    if cfg.method == Method::All {
        cfg.method = Method::Oracle;
    }
    let (m, f) = cfg.models()?;
    let (v, err, converged) = evaluate(cfg.method, &m, &f, lambda, &cfg)?;
    let row = json!({
        "lambda": lambda, "re": v.re, "im": v.im, "abs": v.norm(),
        "method": cfg.method.to_string(), "err_est": err, "converged": converged,
    });
    let mut s = Summary { config: serde_json::to_value(&cfg).map_err(Error::from)?, ..Summary::default() };
    s.checks.insert("converged".into(), converged);
    s.details = row;
    let text = format!(
        "I({lambda}) = {:.16e} {:+.16e}i  |I| = {:.6e}  err_est = {:.2e}  method = {}{}\n",
        v.re,
        v.im,
        v.norm(),
        err,
        cfg.method,
        if converged { "" } else { "  (not converged)" }
    );
    emit(&r, &s, &text)?;
    Ok(status(true, !converged))
}

impl Resolved {
    /// Sweep settings on a grid starting at `lambda`; the grid itself is unused.
    fn sweep_config_for_eval(&self, lambda: f64) -> Result<SweepConfig, Failure> {
        if lambda.is_nan() || lambda < 1.0 {
            return Err(Failure::usage(format!("lambda must be >= 1, got {lambda}")));
        }
        let mut probe = Resolved { c: self.c.clone(), file: FileConfig::empty() };
        probe.c.lambda_min = Some(lambda);
        probe.c.lambda_max = Some(lambda * 2.0);
        probe.c.points = Some(3);
        probe.sweep_config()
    }
}

fn sweep_constants(cfg: &SweepConfig) -> Option<oscint_core::PhaseConstants> {
    let (m, f) = cfg.models().ok()?;
    let mut cc = ConstantsConfig::new(cfg.dim);
    cc.grid_n = cc.grid_n.min(32);
    constants_with(&m, &f, cfg.lambda_max, &cc).ok()
}

fn fits_by_method(
    rows: &[SweepRow],
    window: usize,
) -> std::collections::BTreeMap<String, oscint_core::harness::FitResult> {
    let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    methods.dedup();
    methods.sort_unstable();
    methods.dedup();
    let mut fits = std::collections::BTreeMap::new();
    for m in methods {
        let series: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.method == m && r.is_ok()).map(|r| (r.lambda, r.abs)).collect();
        if let Ok(fit) = fit_envelope(&series, window) {
            fits.insert(m.to_string(), fit);
        }
    }
    fits
}

fn failure_details(rows: &[SweepRow]) -> Value {
    Value::Array(
        rows.iter()
            .filter(|r| !r.is_ok())
            .map(|r| json!({ "lambda": r.lambda, "method": r.method, "error": r.error.clone().unwrap_or_default() }))
            .collect(),
    )
}

fn cmd_sweep(c: Common) -> Outcome {
    let r = Resolved::new(c, "sweep")?;
    let cfg = r.sweep_config()?;
    let res = run_sweep(&cfg)?;
    let mut s = Summary {
        config: serde_json::to_value(&cfg).map_err(Error::from)?,
        constants: sweep_constants(&cfg),
        fits: fits_by_method(&res.rows, 3),
        ..Summary::default()
    };
    let failures = res.failures().count();
    s.checks.insert("converged".into(), !res.non_converged);
    s.checks.insert("no_failures".into(), failures == 0);
    s.details = json!({ "rows": res.rows.len(), "failures": failure_details(&res.rows) });
    let json_path = match &cfg.out {
        Some(p) => {
            write_csv(&res.rows, p)?;
            let jp = p.with_extension("json");
            write_json(&s, &jp)?;
            Some(jp)
        }
        None => None,
    };
    if r.c.json {
        print!("{}", to_json_string(&s)?);
    } else {
        let mut text = format!("{} rows, {} failures\n", res.rows.len(), failures);
        for (m, f) in &s.fits {
            text.push_str(&format!("{m}: envelope slope {:.4} (r² {:.4})\n", f.slope, f.r_squared));
        }
        if let (Some(p), Some(j)) = (&cfg.out, &json_path) {
            text.push_str(&format!("wrote {} and {}\n", p.display(), j.display()));
        } else {
            text.push_str("lambda,re,im,abs,method,err_est,wall_ms\n");
            for row in &res.rows {
                let cells = [row.lambda, row.re, row.im, row.abs].map(format_float);
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    cells.join(","),
                    row.method,
                    format_float(row.err_est),
                    format_float(row.wall_ms)
                ));
            }
        }
        print!("{text}");
    }
    Ok(status(failures == 0, res.non_converged))
}

fn cmd_cover(a: CoverArgs) -> Outcome {
    let r = Resolved::new(a.common, "cover")?;
    let mut lambda = a.lambda;
    r.file.fill(&mut lambda, "lambda")?;
    let lambda = lambda.or(r.c.lambda_min).ok_or_else(|| Failure::usage("cover needs --lambda"))?;
    if lambda.is_nan() || lambda < 1.0 {
        return Err(Failure::usage(format!("lambda must be >= 1, got {lambda}")));
    }
    let dim = r.dim()?;
    let m = oscint_core::phasekit::phase_from_spec(&r.phase(), dim)?;
    let grid = oscint_core::phasekit::default_grid(dim).min(32);
    let p2 = p_norm(&m, 2.0, grid)?;
    let mut opts = CoverOptions::new(dim, p2);
    opts.domain = CoverDomain::unit(dim);
    opts.delta = r.c.delta.unwrap_or_else(|| default_delta(DEFAULT_EPSILON));
    let probe_n = r.c.probe_n.unwrap_or_else(|| default_probe_n(lambda, p2, &opts.domain));
    let cover = greedy_cover(&m, lambda, probe_n, &opts)?;
    let v = validate_cover(&cover, p2);
    let sep = separation_check(&cover, probe_n);
    let gsep = grad_separation(&m, &cover);
    let ov = overlap_stats(&cover, probe_n);
    let pass = v.holds() && sep.holds;
    let config =
        json!({ "phase": r.phase(), "dim": dim, "lambda": lambda, "probe_n": probe_n, "delta": opts.delta, "p2": p2 });
    let mut s = Summary { config, ..Summary::default() };
    s.checks.insert("covered".into(), v.uncovered == 0);
    s.checks.insert("separated".into(), v.pair_violations == 0 && sep.holds);
    s.checks.insert("gradient_separated".into(), gsep.holds);
    s.details = json!({
        "packets": cover.len(),
        "i_delta": cover.i_delta.len(),
        "validity": v,
        "separation": sep,
        "gradient_separation": gsep,
        "overlap": ov,
        "warnings": cover.warnings,
    });
    let text = format!(
        "packets {}  nearly stationary {}\nprobes {} uncovered {} pair violations {}\nmin gap {:.4}  max overlap {}\n{}cover {}\n",
        cover.len(),
        cover.i_delta.len(),
        v.probes,
        v.uncovered,
        v.pair_violations,
        sep.min_gap,
        ov.max_overlap,
        cover.warnings.iter().map(|w| format!("warning: {w}\n")).collect::<String>(),
        fmt_pass(pass)
    );
    emit(&r, &s, &text)?;
    Ok(status(pass, false))
}

fn cmd_matcheck(a: MatcheckArgs) -> Outcome {
    let r = Resolved::new(a.common, "matcheck")?;
    let mut count = a.count;
    r.file.fill(&mut count, "count")?;
    let count = count.unwrap_or(10_000);
    let seed = r.c.seed.unwrap_or(0);
    let rep = verify_matrix_suite(seed, count)?;
    let mut s = Summary { config: json!({ "seed": seed, "count": count }), ..Summary::default() };
    for c in rep.checks.iter() {
        s.checks.insert(c.name.clone(), c.violations == 0);
    }
    s.checks.insert("stress".into(), rep.stress.iter().all(|c| c.violations == 0));
    s.details = serde_json::to_value(&rep).map_err(Error::from)?;
    let mut text = String::new();
    for c in rep.checks.iter().chain(&rep.stress) {
        text.push_str(&format!(
            "{:<22} {:>6} instances {:>4} violations  worst excess {:+.3e}\n",
            c.name, c.instances, c.violations, c.worst_rel_excess
        ));
    }
    text.push_str(&format!("matcheck {}\n", fmt_pass(rep.pass)));
    emit(&r, &s, &text)?;
    Ok(status(rep.pass, false))
}

fn cmd_verify(a: VerifyArgs) -> Outcome {
    let r = Resolved::new(a.common, "verify")?;
    let (mut eps_list, mut eps, mut drift_max) = (a.eps_list, a.eps, a.drift_max);
    if eps_list.is_none() {
        if let Some(v) = r.file.get::<String>("eps-list")? {
            let parsed = v.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>();
            eps_list = Some(parsed.map_err(|_| Failure::usage(format!("bad eps-list '{v}'")))?);
        }
    }
    r.file.fill(&mut eps, "eps")?;
    r.file.fill(&mut drift_max, "drift-max")?;
    let theorem = a.theorem;
    let dim = if matches!(theorem, Theorem::Optimal) { 2 } else { r.dim()? };
    let mut cfg = VerifyConfig::new(dim);
    if let Some(v) = r.c.lambda_min {
        cfg.lambda_min = v;
    }
    if let Some(v) = r.c.lambda_max {
        cfg.lambda_max = v;
    }
    if let Some(v) = r.c.points {
        cfg.points = v;
    }
    cfg.quad = r.quad()?;
    if let Some(v) = drift_max {
        cfg.drift_max = v;
    }
    if let Some(v) = eps {
        cfg.constants.eps = v;
    }
    if let Some(t) = r.c.threads {
        cfg.threads = t.max(1);
    }
    let mut echo = json!({
        "theorem": theorem.name(), "dim": dim, "lambda_min": cfg.lambda_min, "lambda_max": cfg.lambda_max,
        "points": cfg.points, "tol": cfg.quad.target_rel_tol, "max_panels": cfg.quad.max_panels, "drift_max": cfg.drift_max, "eps": cfg.constants.eps,
        "amp": r.amp(),
    });
    let mut s = Summary::default();
    let (pass, non_converged, text) = match theorem {
        Theorem::Ps0 | Theorem::Lse => {
            let mut sc = SweepConfig::new(&r.phase(), &r.amp(), dim);
            sc.beta = r.c.beta;
            let (m, f) = sc.models()?;
            echo["phase"] = json!(r.phase());
            let rep = if matches!(theorem, Theorem::Ps0) {
                verify_ps0(&m, &f, &cfg)?
            } else {
                let beta =
                    r.c.beta.or(f.beta).ok_or_else(|| Failure::usage("lse needs --beta or a β-family amplitude"))?;
                echo["beta"] = json!(beta);
                verify_lse(&m, &f, beta, &cfg)?
            };
            s.constants = Some(rep.constants.clone());
            if let Some(fit) = rep.fit {
                s.fits.insert("envelope".into(), fit);
            }
            s.checks.insert(theorem.name().into(), rep.pass);
            s.details = serde_json::to_value(&rep).map_err(Error::from)?;
            let slope = rep.fit.map(|f| f.slope).unwrap_or(f64::NAN);
            let text = format!(
                "{}: slope {:.4} (expected {:.4})  drift {:.4}{}  {}\n",
                theorem.name(),
                slope,
                rep.expected_slope.unwrap_or(f64::NAN),
                rep.drift,
                if rep.bound_applicable { "" } else { " (bound vacuous, L* = 0)" },
                fmt_pass(rep.pass)
            );
            (rep.pass, rep.non_converged, text)
        }
        Theorem::Optimal => {
            let list = eps_list.unwrap_or_else(|| vec![1.0, 0.25, 0.0625]);
            let phases = aniso_family(&list)?;
            let f = oscint_core::phasekit::amplitude_from_spec(&r.amp(), 2)?;
            echo["eps_list"] = json!(list);
            let rep = verify_optimal(&phases, &f, &cfg)?;
            s.checks.insert("optimal".into(), rep.pass);
            s.details = serde_json::to_value(&rep).map_err(Error::from)?;
            let mut text = String::new();
            for e in &rep.entries {
                text.push_str(&format!(
                    "{:<26} lambda {:>12.0}  |I|λ {:.4e}  normalized {:.4e}  contrast {:.4e}\n",
                    e.phase,
                    e.lambda,
                    e.value.norm() * e.lambda,
                    e.normalized,
                    e.contrast
                ));
            }
            text.push_str(&format!(
                "drift {:.4}  contrast drift {:.4}  {}\n",
                rep.drift,
                rep.contrast_drift,
                fmt_pass(rep.pass)
            ));
            (rep.pass, rep.non_converged, text)
        }
    };
    s.config = echo;
    emit(&r, &s, &text)?;
    Ok(status(pass, non_converged))
}

fn cmd_report(a: ReportArgs) -> Outcome {
    let r = Resolved::new(a.common, "report")?;
    let (mut input, mut window) = (a.input, a.window);
    r.file.fill(&mut input, "input")?;
    r.file.fill(&mut window, "window")?;
    let input: PathBuf = input.ok_or_else(|| Failure::usage("report needs --input"))?;
    let window = window.unwrap_or(3);
    if window % 2 == 0 {
        return Err(Failure::usage(format!("window must be odd, got {window}")));
    }
    let rows = read_csv(&input)?;
    let failures = rows.iter().filter(|r| !r.is_ok()).count();
    let mut s = Summary {
        config: json!({ "input": display_name(&input), "window": window }),
        fits: fits_by_method(&rows, window),
        ..Summary::default()
    };
    s.checks.insert("no_failures".into(), failures == 0);
    s.details = json!({ "rows": rows.len(), "failures": failure_details(&rows) });
    let mut text = format!("{} rows, {} failures\n", rows.len(), failures);
    for (m, f) in &s.fits {
        text.push_str(&format!(
            "{m}: envelope slope {:.4} (r² {:.4}, {} points)\n",
            f.slope, f.r_squared, f.values_used
        ));
    }
    emit(&r, &s, &text)?;
    Ok(status(failures == 0, false))
}

fn display_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Sweep(c) => cmd_sweep(c),
        Cmd::Cover(a) => cmd_cover(a),
        Cmd::Matcheck(a) => cmd_matcheck(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
