//! Uniform `λ^{-1/2}`-lattice wave packets.
//!
//! With `φ` the product partition bump, `I(λ) = Σ_ν ∫ e^{iλΦ}ψ φ(λ^{1/2}(x−ν)) dx`. After rescaling each
//! packet and expanding `χ^{λ,ν}` in a Fourier series on `[−π,π]^d`,
//!
//! `I(λ) = λ^{-d/2} Σ_ν e^{iλΦ(ν)} Σ_k C_k^{λ,ν} φ̂(λ^{1/2}∇Φ(ν) + k)`,
//!
//! with `φ̂(ξ) = ∫ e^{iξ·x} φ(x) dx`.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{integrate_with, PhaseIntegrand, QuadratureConfig, QuadratureResult};
use crate::phasekit::bumps::{hull_bump, partition_1d, partition_bump, PARTITION_HALF_WIDTH};
use crate::phasekit::{AmplitudeFamily, PhaseModel};
use crate::sum::{ComplexSum, NeumaierSum};

const TABLE_STEP: f64 = 1.0 / 64.0;
const TABLE_MAX: f64 = 1024.0;
const FFT_LEN: usize = 1 << 19;

/// Partition bump `φ`, hull bump `φ̃` and a tabulated `φ̂`.
#[derive(Debug)]
pub struct BumpSystem {
    /// `ϑ̂(j/64)` for `j = 0..=65536`, where `φ̂(ξ) = Π_j ϑ̂(ξ_j)`.
    table: Vec<f64>,
}

impl BumpSystem {
    pub fn shared() -> Arc<BumpSystem> {
        static SYS: OnceLock<Arc<BumpSystem>> = OnceLock::new();
        SYS.get_or_init(|| Arc::new(BumpSystem::build())).clone()
    }

    /// `ϑ̂(ξ)` on the grid `ξ_j = j/64` by one FFT of the sampled profile. The sampling frequency
    /// `2π/h = 8192` leaves the aliased mass far below rounding for `|ξ| ≤ 1024`.
    fn build() -> Self {
        let n = FFT_LEN;
        let period = 2.0 * std::f64::consts::PI / TABLE_STEP;
        let h = period / n as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let reach = (PARTITION_HALF_WIDTH / h).ceil() as usize + 1;
        for i in 0..=reach {
            let v = partition_1d(i as f64 * h);
            buf[i] = Complex64::new(v * h, 0.0);
            if i > 0 {
                buf[n - i] = Complex64::new(v * h, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        let len = (TABLE_MAX / TABLE_STEP) as usize + 1;
        // even profile: the transform is real and sign-convention free
        let table = buf[..len].iter().map(|z| z.re).collect();
        Self { table }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        partition_bump(x)
    }

    pub fn phi_tilde(&self, x: &[f64]) -> f64 {
        hull_bump(x)
    }

    /// 1D transform `ϑ̂(ξ) = ∫ e^{iξt} ϑ(t) dt`.
    pub fn theta_hat(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a > TABLE_MAX - 2.0 * TABLE_STEP {
            return theta_hat_direct(a);
        }
        let pos = a / TABLE_STEP;
        let i = pos.floor() as usize;
        let i0 = i.saturating_sub(1);
        let i0 = i0.min(self.table.len() - 4);
        // cubic Lagrange through four neighbours
        let t = pos - i0 as f64;
        let y = &self.table[i0..i0 + 4];
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        y[0] * l0 + y[1] * l1 + y[2] * l2 + y[3] * l3
    }

    /// `φ̂(ξ) = ∫ e^{iξ·x} φ(x) dx`; real because `φ` is even.
    pub fn phi_hat(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&v| self.theta_hat(v)).product()
    }
}

/// Midpoint rule for `∫ cos(ξt) ϑ(t) dt`, resolving the oscillation with margin.
pub fn theta_hat_direct(xi: f64) -> f64 {
    let a = PARTITION_HALF_WIDTH;
    let n = ((2.0 * a * xi / std::f64::consts::PI) * 4.0 + 2048.0).ceil() as usize;
    let h = 2.0 * a / n as f64;
    let mut s = NeumaierSum::new();
    for i in 0..n {
        let t = -a + (i as f64 + 0.5) * h;
        s.add((xi * t).cos() * partition_1d(t));
    }
    s.value() * h
}

/// Lattice `λ^{-1/2}ℤ^d ∩ B(0,2)` (strict), in lexicographic order.
pub fn centers(lambda: f64, dim: usize) -> Vec<Vec<f64>> {
    center_indices(lambda, dim).into_iter().map(|m| m.iter().map(|&v| v as f64 / lambda.sqrt()).collect()).collect()
}

/// Integer labels `m` of [`centers`], `|m|² < 4λ`.
pub fn center_indices(lambda: f64, dim: usize) -> Vec<Vec<i64>> {
    let bound = 4.0 * lambda;
    let r = (2.0 * lambda.sqrt()).floor() as i64 + 1;
    let mut out = Vec::new();
    let mut m = vec![-r; dim];
    loop {
        let n2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
        if n2 < bound {
            out.push(m.clone());
        }
        let mut j = dim;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if m[j] < r {
                m[j] += 1;
                for v in &mut m[j + 1..] {
                    *v = -r;
                }
                break;
            }
        }
    }
}

/// `χ^{λ,ν}(x) = e^{iλΦ^{λ,ν}(x)} ψ(λ^{-1/2}x + ν) φ̃(x)`, zero for `|x| > 2`.
pub fn chi_eval(m: &PhaseModel, f: &AmplitudeFamily, lambda: f64, nu: &[f64], x: &[f64]) -> Complex64 {
    let packet = Packet::new(m, lambda, nu);
    packet.chi(f, x)
}

/// Phase data at one center, reused across many `χ` evaluations.
struct Packet<'a> {
    m: &'a PhaseModel,
    lambda: f64,
    nu: Vec<f64>,
    phi_nu: f64,
    grad_nu: Vec<f64>,
}

impl<'a> Packet<'a> {
    fn new(m: &'a PhaseModel, lambda: f64, nu: &[f64]) -> Self {
        Self { m, lambda, nu: nu.to_vec(), phi_nu: m.value(nu), grad_nu: m.grad(nu) }
    }

    fn point(&self, x: &[f64], out: &mut [f64]) {
        let s = self.lambda.sqrt();
        for j in 0..x.len() {
            out[j] = x[j] / s + self.nu[j];
        }
    }

    /// `λ Φ^{λ,ν}(x)`.
    fn local_phase(&self, x: &[f64]) -> f64 {
        let mut y = [0.0; 3];
        self.point(x, &mut y);
        let d = x.len();
        let lin: f64 = (0..d).map(|j| self.grad_nu[j] * x[j]).sum();
        self.lambda * (self.m.value(&y[..d]) - self.phi_nu) - self.lambda.sqrt() * lin
    }

    fn chi(&self, f: &AmplitudeFamily, x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > 4.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut y = [0.0; 3];
        self.point(x, &mut y);
        let d = x.len();
        let a = f.value(self.lambda, &y[..d]);
        if a.re == 0.0 && a.im == 0.0 {
            return a;
        }
        let w = crate::phasekit::bumps::hull_bump_radial(r2.sqrt());
        a * Complex64::from_polar(w, self.local_phase(x))
    }

    /// Sampled sup over `|x| ≤ 2` of `|∇_x(λΦ^{λ,ν})|`.
    fn local_frequency(&self) -> f64 {
        let d = self.nu.len();
        let n: usize = 17;
        let s = self.lambda.sqrt();
        let mut best: f64 = 0.0;
        let mut g = [0.0; 3];
        let total = n.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut y = [0.0; 3];
        for k in 0..total {
            let mut rem = k;
            for j in (0..d).rev() {
                x[j] = -2.0 + 4.0 * (rem % n) as f64 / (n - 1) as f64;
                rem /= n;
            }
            if x.iter().map(|v| v * v).sum::<f64>() > 4.0 {
                continue;
            }
            self.point(&x, &mut y);
            self.m.grad_into(&y[..d], &mut g);
            let v: f64 = (0..d).map(|j| (s * (g[j] - self.grad_nu[j])).powi(2)).sum::<f64>().sqrt();
            best = best.max(v);
        }
        // slack for the sampling gaps
        best * 1.0625
    }
}

/// `∫ e^{iλΦ}ψ φ(λ^{1/2}(x−ν)) dx` by the oracle.
pub fn packet_value(
    m: &PhaseModel,
    f: &AmplitudeFamily,
    lambda: f64,
    nu: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult> {
    let ig = PhaseIntegrand::with_window(m, f, lambda, nu)?;
    if ig.is_empty() {
        return Ok(QuadratureResult::zero());
    }
    integrate_with(&ig, cfg)
}

/// Fourier coefficients `C_k^{λ,ν}`, `|k|_∞ ≤ K`, with a tail estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PacketCoefficients {
    pub nu: Vec<f64>,
    pub k_max: usize,
    pub grid_n: usize,
    /// Row-major over `k ∈ [−K, K]^d`.
    pub coeffs: Vec<Complex64>,
    /// Bound on `Σ_{|k|_∞ > K} |C_k| |φ̂(·)|` from the fitted shell decay.
    pub tail_bound: f64,
    /// Fitted log-log slope of the shell maxima over `[K/2, K]`.
    pub slope: f64,
}

impl PacketCoefficients {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    fn offset(&self, k: &[i64]) -> Option<usize> {
        let w = 2 * self.k_max as i64 + 1;
        let mut idx = 0i64;
        for &kj in k {
            if kj.unsigned_abs() as usize > self.k_max {
                return None;
            }
            idx = idx * w + kj + self.k_max as i64;
        }
        Some(idx as usize)
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.offset(k).map(|i| self.coeffs[i])
    }

    /// `max_{|k|_∞ = n} |C_k|` for `n = 0..=K`.
    pub fn shell_max(&self) -> Vec<f64> {
        let d = self.dim();
        let kk = self.k_max as i64;
        let mut out = vec![0.0f64; self.k_max + 1];
        for_each_k(d, kk, |k| {
            let n = k.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
            let v = self.get(k).unwrap_or_default().norm();
            out[n] = out[n].max(v);
        });
        out
    }
}

fn for_each_k(d: usize, kk: i64, mut f: impl FnMut(&[i64])) {
    let w = 2 * kk + 1;
    let total = w.pow(d as u32);
    let mut k = vec![0i64; d];
    for idx in 0..total {
        let mut rem = idx;
        for j in (0..d).rev() {
            k[j] = rem % w - kk;
            rem /= w;
        }
        f(&k);
    }
}

/// Least-squares slope of `log y` against `log x` over positive entries.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0 && p.0 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn shell_count(n: usize, d: usize) -> f64 {
    let a = (2 * n + 1) as f64;
    let b = (2 * n) as f64 - 1.0;
    a.powi(d as i32) - b.max(0.0).powi(d as i32)
}

/// `Σ_{n>K} M (n/K)^s · #shell(n)` with `s ≤ −(d + 0.2)`.
fn tail_estimate(shell_max: &[f64], d: usize) -> (f64, f64) {
    let k = shell_max.len() - 1;
    if k == 0 {
        return (f64::INFINITY, 0.0);
    }
    let lo = (k / 2).max(1);
    let pts: Vec<(f64, f64)> = (lo..=k).map(|n| (n as f64, shell_max[n])).collect();
    let floor = -(d as f64 + 0.2);
    let slope = loglog_slope(&pts).unwrap_or(floor);
    let s = slope.min(floor);
    // anchor at the largest shell maximum in the fitted window
    let anchor = (lo..=k).map(|n| shell_max[n] * (k as f64 / n as f64).powf(s)).fold(0.0, f64::max);
    if anchor == 0.0 {
        return (0.0, slope);
    }
    let kf = k as f64;
    let mut sum = NeumaierSum::new();
    let direct_end = 64 * k;
    for n in (k + 1)..=direct_end {
        sum.add((n as f64 / kf).powf(s) * shell_count(n, d));
    }
    // remainder: #shell(n) ≤ 2d·3^{d−1} n^{d−1}
    let a = direct_end as f64;
    let c = 2.0 * d as f64 * 3f64.powi(d as i32 - 1);
    let rest = c * kf.powf(-s) * a.powf(s + d as f64) / (-s - d as f64);
    sum.add(rest);
    (anchor * sum.value(), slope)
}

/// Minimum Fourier grid for `(λ, ν, K)`: `max(4K, 8⌈sup|∇(λΦ^{λ,ν})|⌉)`.
pub fn required_grid(m: &PhaseModel, lambda: f64, nu: &[f64], k_max: usize) -> usize {
    let freq = Packet::new(m, lambda, nu).local_frequency();
    (4 * k_max).max(8 * freq.ceil() as usize)
}

/// `C_k^{λ,ν} = (2π)^{-d} ∫ e^{−ik·x} χ^{λ,ν}(x) dx` by the trapezoid rule on `[−π,π]^d` (one FFT).
pub fn fourier_coeffs(
    m: &PhaseModel,
    f: &AmplitudeFamily,
    lambda: f64,
    nu: &[f64],
    k_max: usize,
    grid_n: usize,
) -> Result<PacketCoefficients> {
    let d = m.dim;
    if k_max < 1 {
        return Err(Error::BadParams("K must be at least 1".into()));
    }
    if nu.len() != d || f.dim != d {
        return Err(Error::DimensionMismatch { left: d, right: nu.len().min(f.dim) });
    }
    let packet = Packet::new(m, lambda, nu);
    let required = (4 * k_max).max(8 * packet.local_frequency().ceil() as usize);
    if grid_n < required {
        return Err(Error::GridTooCoarse { grid_n, required });
    }
    let n = grid_n;
    let pi = std::f64::consts::PI;
    let h = 2.0 * pi / n as f64;
    let total = n.pow(d as u32);
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    let mut x = vec![0.0; d];
    for (idx, slot) in buf.iter_mut().enumerate() {
        let mut rem = idx;
        for j in (0..d).rev() {
            x[j] = -pi + h * (rem % n) as f64;
            rem /= n;
        }
        *slot = packet.chi(f, &x);
    }
    // separable d-dimensional FFT, one axis at a time
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for start in 0..total {
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for i in 0..n {
                line[i] = buf[start + i * stride];
            }
            fft.process(&mut line);
            for i in 0..n {
                buf[start + i * stride] = line[i];
            }
        }
    }
    let kk = k_max as i64;
    let norm = 1.0 / total as f64;
    let mut coeffs = Vec::with_capacity((2 * k_max + 1).pow(d as u32));
    for_each_k(d, kk, |k| {
        let mut idx = 0usize;
        let mut parity = 0i64;
        for &kj in k {
            idx = idx * n + kj.rem_euclid(n as i64) as usize;
            parity += kj;
        }
        // x_0 = −π shifts every coefficient by e^{ikπ}
        let sign = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        coeffs.push(buf[idx] * (norm * sign));
    });
    let mut pc = PacketCoefficients { nu: nu.to_vec(), k_max, grid_n, coeffs, tail_bound: 0.0, slope: 0.0 };
    let (tail, slope) = tail_estimate(&pc.shell_max(), d);
    pc.tail_bound = tail;
    pc.slope = slope;
    Ok(pc)
}

fn default_grid(m: &PhaseModel, lambda: f64, nu: &[f64], k_max: usize) -> usize {
    required_grid(m, lambda, nu, k_max).max(64).next_power_of_two() * 2
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub value: Complex64,
    /// `λ^{-d/2} Σ_ν tail_bound_ν`, on the same scale as `value`.
    pub tail_bound: f64,
    pub k_max: usize,
    pub packets: usize,
    pub tail_dominates: bool,
}

/// `λ^{-d/2} Σ_ν e^{iλΦ(ν)} Σ_{|k|_∞ ≤ K} C_k φ̂(λ^{1/2}∇Φ(ν) + k)`.
pub fn reconstruct(m: &PhaseModel, f: &AmplitudeFamily, lambda: f64, k_max: usize) -> Result<Reconstruction> {
    let d = m.dim;
    let sys = BumpSystem::shared();
    let s = lambda.sqrt();
    let mut total = ComplexSum::new();
    let mut tail = NeumaierSum::new();
    let mut packets = 0;
    let support = f.support(lambda);
    let reach = support.radius + PARTITION_HALF_WIDTH * (d as f64).sqrt() / s;
    for nu in centers(lambda, d) {
        let dist: f64 = nu.iter().zip(&support.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist >= reach || f.is_zero() {
            continue;
        }
        let grid = default_grid(m, lambda, &nu, k_max);
        let pc = fourier_coeffs(m, f, lambda, &nu, k_max, grid)?;
        packets += 1;
        let g = m.grad(&nu);
        let base: Vec<f64> = g.iter().map(|v| s * v).collect();
        let mut inner = ComplexSum::new();
        let mut xi = vec![0.0; d];
        let mut i = 0;
        for_each_k(d, k_max as i64, |k| {
            for j in 0..d {
                xi[j] = base[j] + k[j] as f64;
            }
            inner.add(pc.coeffs[i] * sys.phi_hat(&xi));
            i += 1;
        });
        let phase = Complex64::from_polar(1.0, lambda * m.value(&nu));
        total.add(phase * inner.value());
        tail.add(pc.tail_bound);
    }
    let scale = lambda.powf(-(d as f64) / 2.0);
    let value = total.value() * scale;
    let tail_bound = tail.value() * scale;
    Ok(Reconstruction { value, tail_bound, k_max, packets, tail_dominates: tail_bound > 0.5 * value.norm() })
}

/// [`reconstruct`] with `K` doubled from 4 up to 256 until the tail bound drops below `tol`.
pub fn reconstruct_adaptive(m: &PhaseModel, f: &AmplitudeFamily, lambda: f64, tol: f64) -> Result<Reconstruction> {
    let mut k = 4;
    loop {
        let r = reconstruct(m, f, lambda, k)?;
        if r.tail_bound < tol || k >= 256 {
            return Ok(r);
        }
        k *= 2;
    }
}

/// `Σ_ν (1 + |k + λ^{1/2}∇Φ(ν)|)^{−d−1}` over [`centers`].
pub fn ksum(m: &PhaseModel, k: &[f64], lambda: f64) -> f64 {
    let d = m.dim;
    let s = lambda.sqrt();
    let mut acc = NeumaierSum::new();
    let mut g = [0.0; 3];
    for nu in centers(lambda, d) {
        m.grad_into(&nu, &mut g);
        let r: f64 = (0..d).map(|j| (k[j] + s * g[j]).powi(2)).sum::<f64>().sqrt();
        acc.add((1.0 + r).powi(-(d as i32) - 1));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gauss::gauss_legendre, integrate};
    use approx::assert_relative_eq;

    #[test]
    fn center_examples() {
        let c = centers(4.0, 1);
        assert_eq!(c, vec![vec![-1.5], vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0], vec![1.5]]);
        assert_eq!(centers(1.0, 1), vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let brute =
            (-20i64..=20).flat_map(|a| (-20i64..=20).map(move |b| (a, b))).filter(|(a, b)| a * a + b * b < 400).count();
        assert_eq!(centers(100.0, 2).len(), brute);
        let c = center_indices(100.0, 2);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn phi_hat_table_matches_direct_quadrature() {
        let sys = BumpSystem::shared();
        assert_relative_eq!(sys.theta_hat(0.0), 1.0, epsilon = 1e-13);
        for xi in [0.3, 1.7, 5.0, 12.3456, 40.0, 100.01, 333.3] {
            assert!((sys.theta_hat(xi) - theta_hat_direct(xi)).abs() < 1e-10, "xi={xi}");
        }
        // beyond the table the direct rule takes over seamlessly
        let a = sys.theta_hat(1023.9);
        assert!((a - theta_hat_direct(1023.9)).abs() < 1e-12);
        assert!(sys.phi_hat(&[0.0, 0.0, 0.0]) <= 1.0 + 1e-13);
    }

    #[test]
    fn phi_hat_envelope_decays() {
        let sys = BumpSystem::shared();
        let env = |a: f64, b: f64| {
            let mut m: f64 = 0.0;
            let mut x = a;
            while x <= b {
                m = m.max(sys.theta_hat(x).abs());
                x += 1.0 / 64.0;
            }
            m
        };
        let mut r = 8.0;
        while r <= 512.0 {
            assert!(env(r, 2.0 * r) <= env(r / 2.0, r), "R={r}");
            r *= 2.0;
        }
    }

    #[test]
    fn chi_examples() {
        let q = PhaseModel::quadratic(2).unwrap();
        let b = AmplitudeFamily::bump(2, 1.0, None).unwrap();
        let nu = [0.1, -0.2];
        let v = chi_eval(&q, &b, 100.0, &nu, &[0.0, 0.0]);
        assert_relative_eq!(v.re, b.value(100.0, &nu).re, epsilon = 1e-15);
        assert_eq!(v.im, 0.0);
        let v = chi_eval(&q, &b, 100.0, &[0.0, 0.0], &[1.0, 0.0]);
        let amp = b.value(100.0, &[0.1, 0.0]).re;
        assert_relative_eq!(v.arg(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(v.norm(), amp, epsilon = 1e-15);
        let lin = PhaseModel::linear(vec![0.7, -0.3]).unwrap();
        let v = chi_eval(&lin, &b, 100.0, &nu, &[1.5, 0.2]);
        let y = [0.15 + 0.1, 0.02 - 0.2];
        assert!(v.im.abs() < 1e-15);
        assert_relative_eq!(v.re, b.value(100.0, &y).re * hull_bump(&[1.5, 0.2]), epsilon = 1e-13);
        assert_eq!(chi_eval(&q, &b, 100.0, &nu, &[2.1, 0.0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coefficients_of_hull_bump() {
        // ψ ≡ 1 near ν and a linear phase: χ = φ̃, so C_k = (2π)^{-1} φ̃̂(k)
        let lin = PhaseModel::linear(vec![0.4]).unwrap();
        let one = AmplitudeFamily::unit(1).unwrap();
        let pc = fourier_coeffs(&lin, &one, 100.0, &[0.0], 16, 256).unwrap();
        let gl = gauss_legendre(200);
        for k in 0..=16i64 {
            let mut s = 0.0;
            for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                let x = 2.0 * t;
                s += 2.0 * w * (k as f64 * x).cos() * hull_bump(&[x]);
            }
            let expect = s / (2.0 * std::f64::consts::PI);
            assert!((pc.get(&[k]).unwrap().re - expect).abs() < 1e-8, "k={k}");
            assert!((pc.get(&[k]).unwrap() - pc.get(&[-k]).unwrap().conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn coefficient_spot_checks_and_symmetry() {
        let q = PhaseModel::quadratic(2).unwrap();
        let b = AmplitudeFamily::bump(2, 1.0, None).unwrap();
        let nu = [0.05, -0.1];
        let lam = 400.0;
        let pc = fourier_coeffs(&q, &b, lam, &nu, 8, 128).unwrap();
        let packet = Packet::new(&q, lam, &nu);
        let gl = gauss_legendre(120);
        for k in [[0i64, 0], [3, -2], [-5, 7]] {
            let mut s = Complex64::new(0.0, 0.0);
            for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
                for (v, wv) in gl.nodes.iter().zip(&gl.weights) {
                    let x = [2.0 * u, 2.0 * v];
                    let e = Complex64::from_polar(1.0, -(k[0] as f64 * x[0] + k[1] as f64 * x[1]));
                    s += e * packet.chi(&b, &x) * (4.0 * wu * wv);
                }
            }
            let expect = s / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
            assert!((pc.get(&k).unwrap() - expect).norm() < 1e-8, "k={k:?}");
        }
        assert!(matches!(fourier_coeffs(&q, &b, lam, &nu, 8, 16), Err(Error::GridTooCoarse { .. })));
        let z = AmplitudeFamily::zero(2).unwrap();
        let pz = fourier_coeffs(&q, &z, lam, &nu, 4, 64).unwrap();
        assert!(pz.coeffs.iter().all(|c| c.norm() == 0.0));
        assert_eq!(pz.tail_bound, 0.0);
    }

    #[test]
    fn ksum_examples() {
        let q = PhaseModel::quadratic(1).unwrap();
        let s = ksum(&q, &[0.0], 1e4);
        let brute: f64 = (-199i64..=199).map(|m| (1.0 + m.abs() as f64).powi(-2)).sum();
        assert_relative_eq!(s, brute, max_relative = 1e-14);
        assert!(s > 2.2 && s < 2.3);
        let lam: f64 = 100.0;
        let k = 3.0 * lam.sqrt() * 2.0;
        let n = centers(lam, 1).len() as f64;
        assert!(ksum(&q, &[k], lam) <= n * (1.0 + k / 3.0).powi(-2));
    }

    #[test]
    fn packets_sum_to_the_integral() {
        let q = PhaseModel::quadratic(1).unwrap();
        let b = AmplitudeFamily::bump(1, 1.0, None).unwrap();
        let cfg = QuadratureConfig::default().with_tol(1e-10);
        let lam = 64.0;
        let full = integrate(&q, &b, lam, &cfg).unwrap().value;
        let mut s = ComplexSum::new();
        for nu in centers(lam, 1) {
            s.add(packet_value(&q, &b, lam, &nu, &cfg).unwrap().value);
        }
        assert!((s.value() - full).norm() <= 1e-8 * full.norm());
        assert_eq!(packet_value(&q, &AmplitudeFamily::zero(1).unwrap(), lam, &[0.0], &cfg).unwrap().value.norm(), 0.0);
    }

    #[test]
    fn reconstruction_small_case() {
        let q = PhaseModel::quadratic(1).unwrap();
        let b = AmplitudeFamily::bump(1, 1.0, None).unwrap();
        let lam = 256.0;
        let r = reconstruct_adaptive(&q, &b, lam, 1e-6).unwrap();
        let o = integrate(&q, &b, lam, &QuadratureConfig::default()).unwrap().value;
        assert!(r.tail_bound < 1e-6);
        assert!((r.value - o).norm() <= 1e-3 * o.norm(), "{} vs {}", r.value, o);
        let z = reconstruct(&q, &AmplitudeFamily::zero(1).unwrap(), lam, 4).unwrap();
        assert_eq!(z.value.norm(), 0.0);
    }
}
