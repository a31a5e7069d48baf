//! Grid-sampled size constants. Every value here is a lower estimate of the true
//! sup-norm (or an upper estimate of the true infimum) taken over a tensor grid.

use num_complex::Complex64;
use rand::SeedableRng;
use serde::Serialize;

use super::{for_box_grid, random_in_ball, AmplitudeFamily, PhaseModel, R_MAX};
use crate::error::{Error, Result};
use crate::jet::multi_indices;
use crate::symmat::eig_sym;

pub const DEFAULT_ALPHA: f64 = 0.4;
pub const DEFAULT_EPSILON: f64 = 0.2;
const MU_PAIRS: usize = 10_000;
const MU_SEED: u64 = 0x5eed_0001;

/// Default grid resolution: 64 per axis for `d ≤ 2`, 24 for `d = 3`.
pub fn default_grid(dim: usize) -> usize {
    if dim <= 2 {
        64
    } else {
        24
    }
}

/// Points of the `grid_n^d` grid on `[−1,1]^d` lying in the closed unit ball, with their
/// flat grid index.
fn ball_grid(d: usize, grid_n: usize) -> Vec<(usize, Vec<f64>)> {
    let mut pts = Vec::new();
    let mut k = 0;
    for_box_grid(&vec![0.0; d], 1.0, grid_n, d, |x| {
        if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12 {
            pts.push((k, x.to_vec()));
        }
        k += 1;
    });
    pts
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < 8 {
        return Err(Error::BadParams(format!("grid_n must be at least 8, got {grid_n}")));
    }
    Ok(())
}

/// Sum over `|β| = 2` of the sampled `C^{r−2}` norms of `𝒟^βΦ` on `B(0,1)`.
///
/// Each term is the sum of the sups of `|𝒟^{β+γ}Φ|` for `|γ| ≤ [r]−2`, plus, when `r` is not an
/// integer, the Hölder quotient of the top derivatives over adjacent grid pairs.
/// Returns 0 for `r < 2`.
pub fn p_norm(m: &PhaseModel, r: f64, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    if r < 2.0 {
        return Ok(0.0);
    }
    let k = r.floor() as usize;
    if k > R_MAX {
        return Err(Error::InsufficientDerivatives { requested: k, available: R_MAX });
    }
    let theta = r - k as f64;
    let d = m.dim;
    let betas = multi_indices(d, 2);
    // every (β, γ) pair becomes one derivative slot
    let mut slots: Vec<(Vec<usize>, bool)> = Vec::new();
    for b in &betas {
        for deg in 0..=(k - 2) {
            for g in multi_indices(d, deg) {
                let a: Vec<usize> = b.iter().zip(&g).map(|(x, y)| x + y).collect();
                slots.push((a, deg == k - 2));
            }
        }
    }
    let pts = ball_grid(d, grid_n);
    let mut sups = vec![0.0f64; slots.len()];
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for (_, x) in &pts {
        let j = m.jet(x, k);
        let vals: Vec<f64> = slots.iter().map(|(a, _)| j.partial(a)).collect();
        for (s, v) in sups.iter_mut().zip(&vals) {
            *s = s.max(v.abs());
        }
        if theta > 0.0 {
            table.push(vals);
        }
    }
    let mut holder = vec![0.0f64; slots.len()];
    if theta > 0.0 {
        let h = 2.0 / (grid_n - 1) as f64;
        let pos: std::collections::HashMap<usize, usize> = pts.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
        for (i, (flat, _)) in pts.iter().enumerate() {
            let mut stride = 1;
            for _ in 0..d {
                let coord = (flat / stride) % grid_n;
                if coord + 1 < grid_n {
                    if let Some(&nb) = pos.get(&(flat + stride)) {
                        for (s, (_, top)) in slots.iter().enumerate() {
                            if *top {
                                let q = (table[i][s] - table[nb][s]).abs() / h.powf(theta);
                                holder[s] = holder[s].max(q);
                            }
                        }
                    }
                }
                stride *= grid_n;
            }
        }
    }
    Ok(sups.iter().sum::<f64>() + holder.iter().sum::<f64>())
}

/// Sampled `‖ψ_λ‖_{C^r}` = Σ_{|γ|≤r} sup |𝒟^γψ_λ| over a grid of the support box.
pub fn a_norm(f: &AmplitudeFamily, r: usize, lambda: f64, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    if r > R_MAX {
        return Err(Error::InsufficientDerivatives { requested: r, available: R_MAX });
    }
    let d = f.dim;
    let s = f.support(lambda);
    if s.radius == 0.0 {
        return Ok(0.0);
    }
    let layout = crate::jet::Layout::get(d, r);
    let mut sups = vec![0.0f64; layout.len()];
    let factors: Vec<f64> =
        layout.indices.iter().map(|a| a.iter().map(|&k| (1..=k).fold(1.0, |p, i| p * i as f64)).product()).collect();
    for_box_grid(&s.center, s.radius, grid_n, d, |x| {
        // builtins vanish identically around every zero they have
        if f.value(lambda, x).norm() == 0.0 {
            return;
        }
        let (re, im) = f.jet(lambda, x, r);
        for (i, sup) in sups.iter_mut().enumerate() {
            let v = Complex64::new(re.coeffs()[i], im.coeffs()[i]).norm() * factors[i];
            *sup = sup.max(v);
        }
    });
    Ok(sups.iter().sum())
}

/// `Ã = max_{|γ| ≤ d+1} sup |𝒟^γψ_λ| / λ^{|γ|β}` at the given λ.
pub fn a_tilde(f: &AmplitudeFamily, lambda: f64, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    let beta = f.beta.unwrap_or(0.0);
    let d = f.dim;
    let s = f.support(lambda);
    if s.radius == 0.0 {
        return Ok(0.0);
    }
    let layout = crate::jet::Layout::get(d, d + 1);
    let mut worst: f64 = 0.0;
    for_box_grid(&s.center, s.radius, grid_n, d, |x| {
        let (re, im) = f.jet(lambda, x, d + 1);
        for a in &layout.indices {
            let g = re.partial(a);
            let h = im.partial(a);
            let deg: usize = a.iter().sum();
            worst = worst.max(Complex64::new(g, h).norm() / lambda.powf(deg as f64 * beta));
        }
    });
    Ok(worst)
}

/// `P̃ = max_{2 ≤ |γ| ≤ d+1} sup_{supp ψ_λ} |𝒟^γΦ| / λ^{β(|γ|−2)}`.
pub fn p_tilde(m: &PhaseModel, f: &AmplitudeFamily, lambda: f64, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    let beta = f.beta.unwrap_or(0.0);
    let d = m.dim;
    let s = f.support(lambda);
    if s.radius == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for_box_grid(&s.center, s.radius, grid_n, d, |x| {
        if x.iter().map(|v| v * v).sum::<f64>() > 1.0 {
            return;
        }
        let j = m.jet(x, d + 1);
        for deg in 2..=d + 1 {
            for a in multi_indices(d, deg) {
                worst = worst.max(j.partial(&a).abs() / lambda.powf(beta * (deg as f64 - 2.0)));
            }
        }
    });
    Ok(worst)
}

/// Sampled `inf |det HΦ|` on `B(0,1)`; exact metadata wins.
pub fn l_star(m: &PhaseModel, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    if let Some(v) = m.meta.exact_lstar {
        return Ok(v);
    }
    Ok(ball_grid(m.dim, grid_n).iter().map(|(_, x)| m.det_hess(x).abs()).fold(f64::INFINITY, f64::min))
}

/// Sampled gradient-separation constant `μ`; exact metadata wins.
///
/// When the Hessian is definite at every grid point the estimate is the smallest
/// `|eigenvalue|`; otherwise it is the minimum of `|∇Φ(x)−∇Φ(y)|/|x−y|` over a fixed
/// pseudo-random set of pairs.
pub fn mu_est(m: &PhaseModel, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    if let Some(v) = m.meta.exact_mu {
        return Ok(v);
    }
    let mut definite = true;
    let mut sign = 0.0;
    let mut min_sv = f64::INFINITY;
    for (_, x) in ball_grid(m.dim, grid_n) {
        let e = eig_sym(&m.hess(&x))?;
        let (lo, hi) = (e.values[0], e.values[m.dim - 1]);
        let s = if lo > 0.0 {
            1.0
        } else if hi < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s == 0.0 || (sign != 0.0 && s != sign) {
            definite = false;
            break;
        }
        sign = s;
        min_sv = min_sv.min(e.min_abs());
    }
    if definite {
        return Ok(min_sv);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(MU_SEED);
    let mut best = f64::INFINITY;
    for _ in 0..MU_PAIRS {
        let x = random_in_ball(m.dim, 1.0, &mut rng);
        let y = random_in_ball(m.dim, 1.0, &mut rng);
        let gx = m.grad(&x);
        let gy = m.grad(&y);
        let num: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if den > 0.0 {
            best = best.min(num / den);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEntry {
    pub order: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseConstants {
    pub dim: usize,
    /// `𝒫_r` for every order used below.
    pub p: Vec<NormEntry>,
    /// `𝒜_r` at the evaluation λ.
    pub a: Vec<NormEntry>,
    pub lstar: f64,
    pub mu: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `𝔉C_n = (1 + (𝒫_n/𝒫₃)^n) 𝒜_n`.
    pub frak_c: Vec<NormEntry>,
    pub n0: f64,
    pub n_eps: usize,
    pub grid_n: usize,
}

impl PhaseConstants {
    fn lookup(v: &[NormEntry], r: f64) -> Option<f64> {
        v.iter().find(|e| e.order == r).map(|e| e.value)
    }

    pub fn p(&self, r: f64) -> Option<f64> {
        Self::lookup(&self.p, r)
    }

    pub fn a(&self, r: usize) -> Option<f64> {
        Self::lookup(&self.a, r as f64)
    }

    pub fn frak_c(&self, n: usize) -> Option<f64> {
        Self::lookup(&self.frak_c, n as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsConfig {
    pub grid_n: usize,
    /// Hölder exponent in `n₀ = d/2 + 1 + α`.
    pub alpha: f64,
    /// Regime parameter in `N_ε = [d(1+ε)/ε] + 1`.
    pub eps: f64,
    /// Extra `𝔉C_n` orders to evaluate.
    pub extra_n: Vec<usize>,
    /// Grid for the (expensive) high-order amplitude norms.
    pub amp_grid_n: Option<usize>,
}

impl ConstantsConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            grid_n: default_grid(dim),
            alpha: DEFAULT_ALPHA,
            eps: DEFAULT_EPSILON,
            extra_n: Vec::new(),
            amp_grid_n: None,
        }
    }
}

pub fn n_eps(dim: usize, eps: f64) -> usize {
    (dim as f64 * (1.0 + eps) / eps + 1e-9).floor() as usize + 1
}

/// `n₀ = d/2 + 1 + α`, raised to 2 where it would fall below the lowest defined order.
pub fn n0(dim: usize, alpha: f64) -> f64 {
    (dim as f64 / 2.0 + 1.0 + alpha).max(2.0)
}

pub fn constants(m: &PhaseModel, f: &AmplitudeFamily, lambda: f64, grid_n: usize) -> Result<PhaseConstants> {
    let mut cfg = ConstantsConfig::new(m.dim);
    cfg.grid_n = grid_n;
    constants_with(m, f, lambda, &cfg)
}

pub fn constants_with(
    m: &PhaseModel,
    f: &AmplitudeFamily,
    lambda: f64,
    cfg: &ConstantsConfig,
) -> Result<PhaseConstants> {
    let d = m.dim;
    if f.dim != d {
        return Err(Error::DimensionMismatch { left: d, right: f.dim });
    }
    let grid_n = cfg.grid_n;
    let amp_grid = cfg.amp_grid_n.unwrap_or(grid_n);
    let n0 = n0(d, cfg.alpha);
    let n_eps = n_eps(d, cfg.eps);

    let mut frak_orders: Vec<usize> = vec![d + 1];
    frak_orders.extend(cfg.extra_n.iter().copied());
    if n_eps <= R_MAX {
        frak_orders.push(n_eps);
    }
    frak_orders.sort_unstable();
    frak_orders.dedup();

    let mut p_orders: Vec<f64> = vec![2.0, 3.0, 4.0, n0];
    p_orders.extend(frak_orders.iter().map(|&n| n as f64));
    p_orders.sort_by(f64::total_cmp);
    p_orders.dedup();
    let mut p = Vec::new();
    for &r in &p_orders {
        p.push(NormEntry { order: r, value: p_norm(m, r, grid_n)? });
    }

    let mut a_orders: Vec<usize> = vec![0, 1, d / 2 + 1, d + 1];
    a_orders.extend(frak_orders.iter().copied());
    a_orders.sort_unstable();
    a_orders.dedup();
    let mut a = Vec::new();
    for &r in &a_orders {
        a.push(NormEntry { order: r as f64, value: a_norm(f, r, lambda, amp_grid)? });
    }

    let lstar = l_star(m, grid_n)?;
    let mu = mu_est(m, grid_n)?;
    let pv = |r: f64| p.iter().find(|e: &&NormEntry| e.order == r).map(|e| e.value).unwrap_or(0.0);
    let av = |r: usize| a.iter().find(|e: &&NormEntry| e.order == r as f64).map(|e| e.value).unwrap_or(0.0);
    let lambda0 = pv(3.0).powi(2) * pv(2.0) * mu.powi(-4);
    let lambda1 = 2f64.powi(8) * (d as f64).powi(8) * lambda0;
    let frak_c = frak_orders
        .iter()
        .map(|&n| {
            let ratio = if pv(3.0) > 0.0 { pv(n as f64) / pv(3.0) } else { 0.0 };
            NormEntry { order: n as f64, value: (1.0 + ratio.powi(n as i32)) * av(n) }
        })
        .collect();
    Ok(PhaseConstants { dim: d, p, a, lstar, mu, lambda0, lambda1, frak_c, n0, n_eps, grid_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_norms() {
        let m = PhaseModel::quadratic(2).unwrap();
        assert_eq!(p_norm(&m, 2.0, 16).unwrap(), 2.0);
        assert_eq!(p_norm(&m, 3.0, 16).unwrap(), 2.0);
        assert_eq!(p_norm(&m, 2.4, 16).unwrap(), 2.0);
        assert_eq!(p_norm(&m, 1.0, 16).unwrap(), 0.0);
        assert!(matches!(p_norm(&m, 17.0, 16), Err(Error::InsufficientDerivatives { .. })));
        assert_eq!(l_star(&m, 16).unwrap(), 1.0);
        assert_eq!(mu_est(&m, 16).unwrap(), 1.0);
    }

    #[test]
    fn aniso_constants() {
        let m = PhaseModel::aniso_quadratic(2, 0.1).unwrap();
        assert_relative_eq!(l_star(&m, 16).unwrap(), 0.1);
        assert_relative_eq!(mu_est(&m, 16).unwrap(), 0.1);
        let mut stripped = m.clone();
        stripped.meta = Default::default();
        assert_relative_eq!(l_star(&stripped, 16).unwrap(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(mu_est(&stripped, 16).unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(p_norm(&m, 3.0, 16).unwrap(), 1.1, max_relative = 1e-15);
    }

    #[test]
    fn fold_norm_converges_and_lstar_vanishes() {
        let m = PhaseModel::degenerate_fold().unwrap();
        let coarse = p_norm(&m, 2.0, 64).unwrap();
        let fine = p_norm(&m, 2.0, 640).unwrap();
        assert!((coarse - fine).abs() <= 0.05 * fine);
        let mut stripped = m.clone();
        stripped.meta = Default::default();
        assert!(l_star(&stripped, 33).unwrap() < 1e-12);
        assert!(mu_est(&stripped, 33).unwrap() < 0.1);
    }

    #[test]
    fn refinement_is_monotone() {
        let m = PhaseModel::perturbed_quadratic(2, 0.1).unwrap();
        let mut stripped = m.clone();
        stripped.meta = Default::default();
        let f = AmplitudeFamily::bump(2, 0.8, None).unwrap();
        let grids = [9, 17, 33, 65];
        let mut last = (0.0, 0.0, f64::INFINITY, f64::INFINITY);
        for g in grids {
            let p = p_norm(&m, 3.0, g).unwrap();
            let a = a_norm(&f, 2, 1.0, g).unwrap();
            let l = l_star(&stripped, g).unwrap();
            let mu = mu_est(&stripped, g).unwrap();
            assert!(p >= last.0 && a >= last.1 && l <= last.2 && mu <= last.3);
            last = (p, a, l, mu);
        }
    }

    #[test]
    fn amplitude_norms() {
        assert_eq!(a_norm(&AmplitudeFamily::zero(2).unwrap(), 3, 1.0, 16).unwrap(), 0.0);
        let b = AmplitudeFamily::bump(2, 1.0, None).unwrap();
        assert_eq!(a_norm(&b, 0, 1.0, 17).unwrap(), 1.0);
        // shrinking bump: first derivatives scale like λ^{1-β}
        let lam = 1e3;
        let sb = AmplitudeFamily::shrinking_bump(1, 0.6).unwrap();
        let bare = AmplitudeFamily::bump(1, 1.0, None).unwrap();
        let c1 = a_norm(&bare, 1, 1.0, 2001).unwrap() - 1.0;
        let got = a_norm(&sb, 1, lam, 2001).unwrap() - 1.0;
        // the chirp factor adds λ|x| ≤ λ^β on the support
        let expected = lam.powf(0.4) * c1;
        assert!(got >= 0.95 * expected && got <= expected + lam.powf(0.6) * 1.05, "{got} vs {expected}");
    }

    #[test]
    fn constants_plug_in() {
        let m = PhaseModel::quadratic(2).unwrap();
        let f = AmplitudeFamily::bump(2, 1.0, None).unwrap();
        let mut cfg = ConstantsConfig::new(2);
        cfg.grid_n = 16;
        let c = constants_with(&m, &f, 1.0, &cfg).unwrap();
        assert_eq!(c.lambda0, 8.0);
        assert_eq!(c.lambda1, 256.0 * 256.0 * 8.0);
        assert_eq!(c.n_eps, 13);
        assert_eq!(c.n0, 2.4);
        assert_eq!(c.frak_c(13), Some(2.0 * c.a(13).unwrap()));
        assert_eq!(c.mu, 1.0);
        assert_eq!(c.lstar, 1.0);

        let e = PhaseModel::aniso_quadratic(2, 0.1).unwrap();
        let ce = constants_with(&e, &f, 1.0, &cfg).unwrap();
        let expected = 1.1f64.powi(3) * 1e4;
        assert_relative_eq!(ce.lambda0, expected, max_relative = 1e-12);
        assert_relative_eq!(ce.lambda0 / c.lambda0, 1.1f64.powi(3) / 8.0 * 1e4, max_relative = 1e-12);
        assert_eq!(n0(1, 0.4), 2.0);
    }
}
