//! Experiment driver: λ-sweeps, envelope fits, bound tracking and report files.

mod report;
mod verify;

pub use report::{format_float, read_csv, to_json_string, write_csv, write_json, write_report, Summary};
pub use verify::{
    aniso_family, scaling_check, verify_lse, verify_matrix_suite, verify_optimal, verify_ps0, BoundReport,
    MatrixCheckStats, MatrixSuiteReport, OptimalReport, ScalingCheck, VerifyConfig,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::anisocover::{aniso_decompose, greedy_cover, CoverDomain, CoverOptions};
use crate::error::{Error, Result};
use crate::oracle::{integrate, QuadratureConfig};
use crate::phasekit::{amplitude_from_spec, p_norm, phase_from_spec, AmplitudeFamily, PhaseModel};
use crate::wavepacket::{reconstruct, reconstruct_adaptive};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Wavepacket,
    Aniso,
    All,
}

impl Method {
    fn expand(self) -> Vec<Method> {
        match self {
            Method::All => vec![Method::Oracle, Method::Wavepacket, Method::Aniso],
            m => vec![m],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Oracle => "oracle",
            Method::Wavepacket => "wavepacket",
            Method::Aniso => "aniso",
            Method::All => "all",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oracle" => Ok(Method::Oracle),
            "wavepacket" => Ok(Method::Wavepacket),
            "aniso" => Ok(Method::Aniso),
            "all" => Ok(Method::All),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    /// `name` or `name,p1,p2`.
    pub phase: String,
    pub amp: String,
    pub dim: usize,
    /// Overrides the family parameter of β-families.
    pub beta: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub method: Method,
    /// Fixed wave-packet truncation; adaptive when absent.
    pub k: Option<usize>,
    pub tol: f64,
    /// Oracle evaluation budget; the quadrature default when absent.
    pub max_panels: Option<u64>,
    /// Tail tolerance for the adaptive wave-packet truncation.
    pub tail_tol: f64,
    pub probe_n: Option<usize>,
    pub delta: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Fill the `wall_ms` column; off by default so files stay byte-stable.
    pub record_timing: bool,
    #[serde(skip)]
    pub threads: usize,
}

impl SweepConfig {
    pub fn new(phase: &str, amp: &str, dim: usize) -> Self {
        Self {
            phase: phase.into(),
            amp: amp.into(),
            dim,
            beta: None,
            lambda_min: 1e2,
            lambda_max: 1e4,
            points: 41,
            method: Method::Oracle,
            k: None,
            tol: 1e-8,
            max_panels: None,
            tail_tol: 1e-6,
            probe_n: None,
            delta: crate::anisocover::default_delta(crate::phasekit::DEFAULT_EPSILON),
            seed: 0,
            out: None,
            record_timing: false,
            threads: default_threads(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min >= 1.0) {
            return Err(Error::InvalidConfig(format!("lambda_min must be >= 1, got {}", self.lambda_min)));
        }
        if !(self.lambda_max > self.lambda_min) || !self.lambda_max.is_finite() {
            return Err(Error::InvalidConfig("lambda_max must exceed lambda_min".into()));
        }
        if self.points < 3 {
            return Err(Error::InvalidConfig(format!("points must be >= 3, got {}", self.points)));
        }
        if !(self.tol > 0.0) || !(self.tail_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        if let Some(b) = self.beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {b}")));
            }
        }
        self.quadrature().validate()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        geometric_grid(self.lambda_min, self.lambda_max, self.points)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default().with_tol(self.tol);
        if let Some(p) = self.max_panels {
            q.max_panels = p;
        }
        q
    }

    /// Resolves the phase and amplitude, applying the `beta` override.
    pub fn models(&self) -> Result<(PhaseModel, AmplitudeFamily)> {
        let m = phase_from_spec(&self.phase, self.dim)?;
        let mut f = amplitude_from_spec(&self.amp, self.dim)?;
        if let Some(b) = self.beta {
            f = match f.kind {
                crate::phasekit::AmpKind::ShrinkingBump { .. } => AmplitudeFamily::shrinking_bump(self.dim, b)?,
                _ if f.beta.is_some() && f.beta != Some(b) => {
                    return Err(Error::InvalidConfig(format!("amplitude '{}' has fixed beta", f.name)))
                }
                _ => f,
            };
        }
        Ok((m, f))
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16)
}

/// `points` values from `lo` to `hi`, uniform in `log λ`, endpoints exact.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
        })
        .collect()
}

/// Maps `f` over `items` on up to `threads` workers; output keeps input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;
    let n = items.len();
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().map(|r| r.expect("worker finished")).collect()
}

/// One `(λ, method)` evaluation. Failed evaluations carry NaN values and the error text.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub method: String,
    pub err_est: f64,
    pub wall_ms: f64,
    #[serde(skip)]
    pub error: Option<String>,
}

impl SweepRow {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Set when some evaluation failed to converge within budget.
    pub non_converged: bool,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.is_ok())
    }

    /// `(λ, |I|)` for one method.
    pub fn series(&self, method: Method) -> Vec<(f64, f64)> {
        let name = method.to_string();
        self.rows.iter().filter(|r| r.method == name && r.is_ok()).map(|r| (r.lambda, r.abs)).collect()
    }
}

/// `(value, err_est, converged)` by one method.
pub fn evaluate(
    method: Method,
    m: &PhaseModel,
    f: &AmplitudeFamily,
    lambda: f64,
    cfg: &SweepConfig,
) -> Result<(Complex64, f64, bool)> {
    let q = cfg.quadrature();
    match method {
        Method::Oracle | Method::All => {
            let r = integrate(m, f, lambda, &q)?;
            Ok((r.value, r.abs_err_est, r.converged))
        }
        Method::Wavepacket => {
            let r = match cfg.k {
                Some(k) => reconstruct(m, f, lambda, k)?,
                None => reconstruct_adaptive(m, f, lambda, cfg.tail_tol)?,
            };
            Ok((r.value, r.tail_bound, true))
        }
        Method::Aniso => {
            let grid = crate::phasekit::default_grid(m.dim).min(32);
            let p2 = p_norm(m, 2.0, grid)?;
            let sup = f.support(lambda);
            // covering the amplitude support is enough
            let c_norm = sup.center.iter().map(|c| c * c).sum::<f64>().sqrt();
            let domain = if c_norm + sup.radius <= 1.0 {
                CoverDomain { center: sup.center.clone(), radius: sup.radius }
            } else {
                CoverDomain::unit(m.dim)
            };
            let mut opts = CoverOptions::new(m.dim, p2);
            opts.domain = domain;
            opts.delta = cfg.delta;
            let probe_n = cfg.probe_n.unwrap_or_else(|| crate::anisocover::default_probe_n(lambda, p2, &opts.domain));
            let cover = greedy_cover(m, lambda, probe_n, &opts)?;
            let r = aniso_decompose(m, f, &cover, &q)?;
            Ok((r.value, r.abs_err_est, r.converged))
        }
    }
}

/// One row per `(λ, method)`, ascending in λ then in method order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let (m, f) = cfg.models()?;
    let methods = cfg.method.expand();
    let jobs: Vec<(f64, Method)> =
        cfg.lambdas().into_iter().flat_map(|l| methods.iter().map(move |&k| (l, k))).collect();
    let out = par_map(&jobs, cfg.threads, |&(lambda, method)| {
        let t0 = Instant::now();
        let r = evaluate(method, &m, &f, lambda, cfg);
        let wall = if cfg.record_timing { t0.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        (lambda, method, r, wall)
    });
    let mut non_converged = false;
    let rows = out
        .into_iter()
        .map(|(lambda, method, r, wall_ms)| match r {
            Ok((v, err, conv)) => {
                non_converged |= !conv;
                let error = (!conv).then(|| "not converged".to_string());
                SweepRow {
                    lambda,
                    re: v.re,
                    im: v.im,
                    abs: v.norm(),
                    method: method.to_string(),
                    err_est: err,
                    wall_ms,
                    error,
                }
            }
            Err(e) => {
                non_converged |= matches!(e, Error::PanelBudgetExceeded { .. });
                SweepRow {
                    lambda,
                    re: f64::NAN,
                    im: f64::NAN,
                    abs: f64::NAN,
                    method: method.to_string(),
                    err_est: f64::NAN,
                    wall_ms,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    Ok(SweepResult { rows, non_converged })
}

/// `env_i = max |I|` over the window of width `window` centered at `i`, truncated at the ends.
pub fn envelope(values: &[(f64, f64)], window: usize) -> Result<Vec<(f64, f64)>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::BadParams(format!("window must be odd and positive, got {window}")));
    }
    let h = window / 2;
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n.saturating_sub(1));
            let m = values[lo..=hi].iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            (values[i].0, m)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: usize,
    pub values_used: usize,
}

/// Least squares of `log y` on `log x`.
pub fn fit_loglog(series: &[(f64, f64)]) -> Result<FitResult> {
    if series.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: series.len() });
    }
    if let Some(i) = series.iter().position(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::NonPositiveValue(i));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::BadParams("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy <= 1e-30 * (1.0 + my * my) { 1.0 } else { ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(FitResult { slope, intercept, r_squared, window: 1, values_used: series.len() })
}

/// [`envelope`] followed by [`fit_loglog`].
pub fn fit_envelope(series: &[(f64, f64)], window: usize) -> Result<FitResult> {
    let env = envelope(series, window)?;
    let mut fit = fit_loglog(&env)?;
    fit.window = window;
    Ok(fit)
}

/// `max/min` of a positive series; 1 when identically zero, `∞` when it touches zero.
pub fn drift(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        1.0
    } else if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_shape() {
        let g = geometric_grid(1e2, 1e4, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 1e2);
        assert_eq!(g[20], 1e4);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(g[10], 1e3, max_relative = 1e-14);
    }

    #[test]
    fn envelope_examples() {
        let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 + 1.0, 10.0 - i as f64)).collect();
        assert_eq!(envelope(&s, 1).unwrap(), s);
        let e = envelope(&s, 3).unwrap();
        assert_eq!(e[0].1, 10.0);
        assert_eq!(e[5].1, s[4].1);
        assert!(envelope(&s, 2).is_err());
        let lam = geometric_grid(1e2, 1e5, 121);
        let osc: Vec<(f64, f64)> = lam.iter().map(|&l| (l, (2.0 + l.ln().sin()) / l)).collect();
        let fit = fit_envelope(&osc, 3).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn fit_examples() {
        let s: Vec<(f64, f64)> = geometric_grid(1.0, 1e3, 7).into_iter().map(|l| (l, 3.0 / l)).collect();
        let f = fit_loglog(&s).unwrap();
        assert_relative_eq!(f.slope, -1.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let c: Vec<(f64, f64)> = geometric_grid(1.0, 1e3, 5).into_iter().map(|l| (l, 2.5)).collect();
        assert_eq!(fit_loglog(&c).unwrap().slope, 0.0);
        assert_eq!(fit_loglog(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::NonPositiveValue(1)));
        assert!(matches!(fit_loglog(&s[..2]), Err(Error::TooFewPoints { .. })));
    }

    proptest! {
        #[test]
        fn fit_recovers_power(s in -3.0f64..0.0, c in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = geometric_grid(1e2, 1e4, 9).into_iter().map(|l| (l, c * l.powf(s))).collect();
            let f = fit_loglog(&pts).unwrap();
            prop_assert!((f.slope - s).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&f.r_squared));
        }

        #[test]
        fn envelope_dominates(vals in proptest::collection::vec(0.0f64..10.0, 1..40), h in 0usize..4) {
            let s: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
            let e = envelope(&s, 2 * h + 1).unwrap();
            for (a, b) in s.iter().zip(&e) {
                prop_assert!(b.1 >= a.1);
                prop_assert_eq!(a.0, b.0);
            }
        }
    }

    #[test]
    fn sweep_rows_and_methods() {
        let mut cfg = SweepConfig::new("quadratic", "bump", 1);
        cfg.lambda_min = 64.0;
        cfg.lambda_max = 1024.0;
        cfg.points = 3;
        cfg.method = Method::All;
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.rows.len(), 9);
        assert!(r.rows.iter().all(|r| r.is_ok()), "{:?}", r.failures().collect::<Vec<_>>());
        for chunk in r.rows.chunks(3) {
            assert_eq!(chunk[0].method, "oracle");
            let o = chunk[0].value();
            for other in &chunk[1..] {
                assert!((other.value() - o).norm() <= 1e-3 * o.norm(), "{} {:?}", other.method, other);
            }
        }
        cfg.points = 2;
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn drift_cases() {
        assert_eq!(drift(&[0.0, 0.0]), 1.0);
        assert_eq!(drift(&[1.0, 0.0]), f64::INFINITY);
        assert_eq!(drift(&[2.0, 1.0, 4.0]), 4.0);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(par_map(&v, 7, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
