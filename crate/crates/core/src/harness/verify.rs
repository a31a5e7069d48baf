//! Bound-tracking runs and the randomized matrix suite.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{drift, fit_envelope, geometric_grid, par_map, FitResult};
use crate::error::{Error, Result};
use crate::oracle::{integrate, QuadratureConfig};
use crate::phasekit::{
    a_tilde, constants_with, l_star, p_tilde, AmplitudeFamily, ConstantsConfig, PhaseConstants, PhaseModel,
};
use crate::symmat::{
    check_abs_contraction, check_dg_bound, check_sqrt_lipschitz, check_trace_inequality, eig_sym, InequalityCheck,
    SymMatrix,
};

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub quad: QuadratureConfig,
    pub window: usize,
    pub drift_max: f64,
    pub slope_tol: f64,
    pub constants: ConstantsConfig,
    pub threads: usize,
}

impl VerifyConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            lambda_min: 1e2,
            lambda_max: 1e4,
            points: 41,
            quad: QuadratureConfig::default(),
            window: 3,
            drift_max: 4.0,
            slope_tol: 0.1,
            constants: ConstantsConfig::new(dim),
            threads: super::default_threads(),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        geometric_grid(self.lambda_min, self.lambda_max, self.points)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_min >= 1.0 && self.lambda_max > self.lambda_min) || self.points < 3 {
            return Err(Error::InvalidConfig("need 1 <= lambda_min < lambda_max and points >= 3".into()));
        }
        self.quad.validate()
    }
}

/// A λ-series of `|I|` together with a normalized bound series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub abs: Vec<f64>,
    /// `|I|` divided by the theorem's λ-dependence and constants; empty when the bound is vacuous.
    pub bound: Vec<f64>,
    pub bound_applicable: bool,
    pub bound_max: f64,
    pub drift: f64,
    pub fit: Option<FitResult>,
    pub expected_slope: Option<f64>,
    pub non_converged: bool,
    pub pass: bool,
    pub constants: PhaseConstants,
}

struct Series {
    values: Vec<Complex64>,
    abs: Vec<f64>,
    non_converged: bool,
}

fn oracle_series(m: &PhaseModel, f: &AmplitudeFamily, lambdas: &[f64], cfg: &VerifyConfig) -> Result<Series> {
    let out = par_map(lambdas, cfg.threads, |&l| integrate(m, f, l, &cfg.quad));
    let mut values = Vec::with_capacity(lambdas.len());
    let mut non_converged = false;
    for r in out {
        let r = r?;
        non_converged |= !r.converged;
        values.push(r.value);
    }
    let abs = values.iter().map(|v| v.norm()).collect();
    Ok(Series { values, abs, non_converged })
}

fn envelope_fit(lambdas: &[f64], abs: &[f64], window: usize) -> Option<FitResult> {
    let s: Vec<(f64, f64)> = lambdas.iter().cloned().zip(abs.iter().cloned()).collect();
    fit_envelope(&s, window).ok()
}

/// `B(λ) = |I(λ)| λ^{d/2} L* / ((1 + 𝒫_{n₀}^{2d+2}) 𝒜_{[d/2]+1})`; passes when the drift is at most
/// `drift_max`.
pub fn verify_ps0(m: &PhaseModel, f: &AmplitudeFamily, cfg: &VerifyConfig) -> Result<BoundReport> {
    cfg.validate()?;
    if f.depends_on_lambda() {
        return Err(Error::BadParams(format!("amplitude '{}' depends on lambda", f.name)));
    }
    let d = m.dim;
    let c = constants_with(m, f, 1.0, &cfg.constants)?;
    let p = c.p(c.n0).ok_or_else(|| Error::BadParams("missing P_n0".into()))?;
    let a = c.a(d / 2 + 1).ok_or_else(|| Error::BadParams("missing A_[d/2]+1".into()))?;
    let lambdas = cfg.lambdas();
    let s = oracle_series(m, f, &lambdas, cfg)?;
    let denom = (1.0 + p.powi(2 * d as i32 + 2)) * a;
    let applicable = c.lstar > 0.0;
    let bound: Vec<f64> = if applicable {
        lambdas
            .iter()
            .zip(&s.abs)
            .map(|(&l, &v)| if denom > 0.0 { v * l.powf(d as f64 / 2.0) * c.lstar / denom } else { 0.0 })
            .collect()
    } else {
        Vec::new()
    };
    let bound_max = bound.iter().cloned().fold(0.0, f64::max);
    let dr = drift(&bound);
    let pass = applicable && bound_max.is_finite() && dr <= cfg.drift_max;
    Ok(BoundReport {
        name: "ps0".into(),
        fit: envelope_fit(&lambdas, &s.abs, cfg.window),
        lambdas,
        values: s.values,
        abs: s.abs,
        bound,
        bound_applicable: applicable,
        bound_max,
        drift: dr,
        expected_slope: Some(-(d as f64) / 2.0),
        non_converged: s.non_converged,
        pass,
        constants: c,
    })
}

/// Fitted envelope slope against `−d(1−β)` and the series
/// `|Ĩ| λ^{d(1−β)} L* / ((1 + 𝒫̃^{2d+1}) 𝒜̃)` with `𝒜̃, 𝒫̃` taken at the largest λ.
pub fn verify_lse(m: &PhaseModel, f: &AmplitudeFamily, beta: f64, cfg: &VerifyConfig) -> Result<BoundReport> {
    cfg.validate()?;
    if !(0.5..=1.0).contains(&beta) {
        return Err(Error::BadParams(format!("beta must lie in [1/2, 1], got {beta}")));
    }
    let d = m.dim;
    let grid = cfg.constants.grid_n;
    let lmax = cfg.lambda_max;
    let at = a_tilde(f, lmax, grid)?;
    let pt = p_tilde(m, f, lmax, grid)?;
    let lstar = l_star(m, grid)?;
    let mut c = constants_with(m, f, lmax, &ConstantsConfig { extra_n: Vec::new(), ..cfg.constants.clone() })?;
    c.lstar = lstar;
    let lambdas = cfg.lambdas();
    let s = oracle_series(m, f, &lambdas, cfg)?;
    let rate = d as f64 * (1.0 - beta);
    let applicable = lstar > 0.0;
    let denom = (1.0 + pt.powi(2 * d as i32 + 1)) * at;
    let bound: Vec<f64> = if applicable {
        lambdas.iter().zip(&s.abs).map(|(&l, &v)| v * l.powf(rate) * lstar / denom).collect()
    } else {
        Vec::new()
    };
    let fit = envelope_fit(&lambdas, &s.abs, cfg.window);
    let slope_ok = fit.map(|f| (f.slope + rate).abs() <= cfg.slope_tol).unwrap_or(false);
    let bound_max = bound.iter().cloned().fold(0.0, f64::max);
    let dr = drift(&bound);
    let pass = slope_ok && (!applicable || dr <= cfg.drift_max);
    Ok(BoundReport {
        name: "lse".into(),
        lambdas,
        values: s.values,
        abs: s.abs,
        bound,
        bound_applicable: applicable,
        bound_max,
        drift: dr,
        fit,
        expected_slope: Some(-rate),
        non_converged: s.non_converged,
        pass,
        constants: c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalEntry {
    pub phase: String,
    pub det_hess_xc: f64,
    pub lstar: f64,
    pub lambda0: f64,
    pub lambda: f64,
    pub n_eps: usize,
    pub frak_c: f64,
    pub value: Complex64,
    /// `|I| λ^{d/2} / ((1 + |det HΦ(x_c)|^{-1/2}) 𝔉C_{N_ε})`.
    pub normalized: f64,
    /// The same with `(1 + L*^{-1})` in place of `(1 + |det HΦ(x_c)|^{-1/2})`.
    pub contrast: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalReport {
    pub entries: Vec<OptimalEntry>,
    pub drift: f64,
    pub contrast_drift: f64,
    pub non_converged: bool,
    pub pass: bool,
}

/// `aniso-quadratic(ε)` in two dimensions for each ε.
pub fn aniso_family(eps: &[f64]) -> Result<Vec<PhaseModel>> {
    eps.iter().map(|&e| PhaseModel::aniso_quadratic(2, e)).collect()
}

/// Each phase is evaluated at `λ = ⌈λ₀^{1+ε}⌉` with `ε` from the constants config.
pub fn verify_optimal(phases: &[PhaseModel], f: &AmplitudeFamily, cfg: &VerifyConfig) -> Result<OptimalReport> {
    cfg.quad.validate()?;
    if phases.is_empty() {
        return Err(Error::BadParams("no phases given".into()));
    }
    let eps = cfg.constants.eps;
    let entries = par_map(phases, cfg.threads, |m| -> Result<OptimalEntry> {
        let d = m.dim;
        let c = constants_with(m, f, 1.0, &cfg.constants)?;
        let n = c.n_eps;
        let frak =
            c.frak_c(n).ok_or(Error::InsufficientDerivatives { requested: n, available: crate::phasekit::R_MAX })?;
        let xc = m.meta.critical_point.clone().unwrap_or_else(|| vec![0.0; d]);
        let det = m.det_hess(&xc).abs();
        let lambda = c.lambda0.powf(1.0 + eps).ceil().max(1.0);
        let r = integrate(m, f, lambda, &cfg.quad)?;
        let scaled = r.value.norm() * lambda.powf(d as f64 / 2.0);
        let normalized = scaled / ((1.0 + det.powf(-0.5)) * frak);
        let contrast = scaled / ((1.0 + 1.0 / c.lstar) * frak);
        Ok(OptimalEntry {
            phase: m.name.clone(),
            det_hess_xc: det,
            lstar: c.lstar,
            lambda0: c.lambda0,
            lambda,
            n_eps: n,
            frak_c: frak,
            value: r.value,
            normalized,
            contrast,
            converged: r.converged,
        })
    });
    let entries: Vec<OptimalEntry> = entries.into_iter().collect::<Result<_>>()?;
    let dr = drift(&entries.iter().map(|e| e.normalized).collect::<Vec<_>>());
    let cdr = drift(&entries.iter().map(|e| e.contrast).collect::<Vec<_>>());
    let non_converged = entries.iter().any(|e| !e.converged);
    let pass = dr <= cfg.drift_max && (entries.len() < 2 || cdr > dr);
    Ok(OptimalReport { entries, drift: dr, contrast_drift: cdr, non_converged, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingCheck {
    pub lambda: f64,
    pub t: f64,
    pub direct: Complex64,
    pub rescaled: Complex64,
    pub diff: f64,
    pub err_est: f64,
    pub holds: bool,
}

/// `I(λ, Φ, ψ)` against `I(tλ, t^{-1}Φ, ψ)`, accepted within twice the summed error estimates
/// (with a rounding floor).
pub fn scaling_check(
    m: &PhaseModel,
    f: &AmplitudeFamily,
    lambda: f64,
    t: f64,
    q: &QuadratureConfig,
) -> Result<ScalingCheck> {
    if f.depends_on_lambda() {
        return Err(Error::BadParams(format!("amplitude '{}' depends on lambda", f.name)));
    }
    let a = integrate(m, f, lambda, q)?;
    let b = integrate(&m.scaled(1.0 / t), f, t * lambda, q)?;
    let diff = (a.value - b.value).norm();
    let err = a.abs_err_est + b.abs_err_est;
    let allowed = 2.0 * err.max(1e-13 * a.value.norm());
    Ok(ScalingCheck { lambda, t, direct: a.value, rescaled: b.value, diff, err_est: err, holds: diff <= allowed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixCheckStats {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest `(lhs − rhs)/|rhs|`; negative means every instance had room to spare.
    pub worst_rel_excess: f64,
}

impl MatrixCheckStats {
    fn new(name: &str) -> Self {
        Self { name: name.into(), instances: 0, violations: 0, worst_rel_excess: f64::NEG_INFINITY }
    }

    fn record(&mut self, c: InequalityCheck) {
        self.instances += 1;
        if !c.holds {
            self.violations += 1;
        }
        let excess = (c.lhs - c.rhs) / c.rhs.abs().max(f64::MIN_POSITIVE);
        self.worst_rel_excess = self.worst_rel_excess.max(excess);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatrixSuiteReport {
    pub seed: u64,
    pub count: usize,
    pub checks: Vec<MatrixCheckStats>,
    /// Near-singular positive definite pairs (smallest eigenvalue `1e-6`).
    pub stress: Vec<MatrixCheckStats>,
    pub pass: bool,
}

fn spd<R: Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Result<SymMatrix> {
    let vals: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    SymMatrix::random_with_spectrum(&vals, rng)
}

fn min_eig(a: &SymMatrix) -> Result<f64> {
    Ok(eig_sym(a)?.values[0])
}

/// The four matrix inequalities on `count` random instances each, `d ∈ 2..=8`, plus a stress set.
pub fn verify_matrix_suite(seed: u64, count: usize) -> Result<MatrixSuiteReport> {
    if count == 0 {
        return Err(Error::BadParams("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut abs_c = MatrixCheckStats::new("abs_contraction");
    let mut trace = MatrixCheckStats::new("trace_inequality");
    let mut lip = MatrixCheckStats::new("sqrt_lipschitz");
    let mut dg = MatrixCheckStats::new("dg_bound");
    for _ in 0..count {
        let d = rng.random_range(2..=8);
        let a = SymMatrix::random(d, 5.0, &mut rng)?;
        let b = SymMatrix::random(d, 5.0, &mut rng)?;
        abs_c.record(check_abs_contraction(&a, &b)?);
        trace.record(check_trace_inequality(&a, &b)?);
    }
    for i in 0..count {
        let d = rng.random_range(2..=8);
        let floor = rng.random_range(0.05..=1.0);
        let a = spd(d, floor, floor + 4.0, &mut rng)?;
        // alternate far pairs with close ones, where the first-order bound is tight
        let b = if i % 2 == 0 {
            spd(d, floor, floor + 4.0, &mut rng)?
        } else {
            let e = SymMatrix::random(d, 1e-3 * floor, &mut rng)?;
            a.add(&e)?
        };
        let mu = min_eig(&a)?.min(min_eig(&b)?);
        if mu > 0.0 {
            lip.record(check_sqrt_lipschitz(&a, &b, mu)?);
        }
        let dir = SymMatrix::random(d, 1.0, &mut rng)?;
        dg.record(check_dg_bound(&a, &dir, None)?);
    }
    let mut s_abs = MatrixCheckStats::new("abs_contraction");
    let mut s_trace = MatrixCheckStats::new("trace_inequality");
    let mut s_lip = MatrixCheckStats::new("sqrt_lipschitz");
    let mut s_dg = MatrixCheckStats::new("dg_bound");
    let tiny = 1e-6;
    for _ in 0..(count / 10).max(1) {
        let d = rng.random_range(2..=8);
        let mut va: Vec<f64> = (0..d).map(|_| rng.random_range(tiny..=1.0)).collect();
        va[0] = tiny;
        let a = SymMatrix::random_with_spectrum(&va, &mut rng)?;
        let mut vb: Vec<f64> = (0..d).map(|_| rng.random_range(tiny..=1.0)).collect();
        vb[0] = tiny;
        let b = SymMatrix::random_with_spectrum(&vb, &mut rng)?;
        s_abs.record(check_abs_contraction(&a, &b)?);
        s_trace.record(check_trace_inequality(&a, &b)?);
        let mu = min_eig(&a)?.min(min_eig(&b)?);
        if mu > 0.0 {
            s_lip.record(check_sqrt_lipschitz(&a, &b, mu)?);
        }
        let dir = SymMatrix::random(d, 1.0, &mut rng)?;
        let ea = eig_sym(&a)?;
        let h = (1e-6 * ea.max_abs()).min(1e-2 * ea.values[0]);
        if h > 0.0 {
            s_dg.record(check_dg_bound(&a, &dir, Some(h))?);
        }
    }
    let checks = vec![abs_c, trace, lip, dg];
    let stress = vec![s_abs, s_trace, s_lip, s_dg];
    let pass = checks.iter().chain(&stress).all(|c| c.violations == 0 && c.instances > 0);
    Ok(MatrixSuiteReport { seed, count, checks, stress, pass })
}
