//! Hessian-adapted packets `B_ν = ν + λ^{-1/2}T_ν(B(0,1))` with `T_ν = |HΦ(ν)|^{-1/2}`,
//! a greedy separated cover, the induced partition of unity and the checks built on it.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{integrate_with, Integrand, QuadratureConfig};
use crate::phasekit::bumps::hull_bump_radial;
use crate::phasekit::DEFAULT_EPSILON;
use crate::phasekit::{random_in_ball, AmplitudeFamily, PhaseModel};
use crate::sum::{ComplexSum, NeumaierSum};
use crate::symmat::{abs_power_from, eig_sym, InequalityCheck, SymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnisoPacket {
    pub nu: Vec<f64>,
    pub t: SymMatrix,
    pub t_inv: SymMatrix,
    pub lambda: f64,
    pub det_t: f64,
}

impl AnisoPacket {
    pub fn new(m: &PhaseModel, lambda: f64, nu: &[f64]) -> Result<Self> {
        let e = eig_sym(&m.hess(nu))?;
        let t = abs_power_from(&e, -0.5)?;
        let t_inv = abs_power_from(&e, 0.5)?;
        let det_t = e.values.iter().map(|v| v.abs().powf(-0.5)).product();
        Ok(Self { nu: nu.to_vec(), t, t_inv, lambda, det_t })
    }

    /// `x_ν = λ^{1/2} T_ν^{-1}(x − ν)`.
    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        let s = self.lambda.sqrt();
        let diff: Vec<f64> = x.iter().zip(&self.nu).map(|(a, b)| s * (a - b)).collect();
        self.t_inv.mul_vec(&diff)
    }

    /// `ν + λ^{-1/2} T_ν y`.
    pub fn global(&self, y: &[f64]) -> Vec<f64> {
        let s = self.lambda.sqrt();
        self.t.mul_vec(y).iter().zip(&self.nu).map(|(a, b)| a / s + b).collect()
    }

    /// `|x_ν|` without allocating.
    pub fn local_norm(&self, x: &[f64]) -> f64 {
        let d = self.nu.len();
        let s = self.lambda.sqrt();
        let a = self.t_inv.as_slice();
        let mut diff = [0.0; 3];
        for j in 0..d {
            diff[j] = s * (x[j] - self.nu[j]);
        }
        let mut acc = 0.0;
        for i in 0..d {
            let v: f64 = (0..d).map(|j| a[i * d + j] * diff[j]).sum();
            acc += v * v;
        }
        acc.sqrt()
    }

    /// `x ∈ rB_ν`.
    pub fn contains(&self, x: &[f64], r: f64) -> bool {
        self.local_norm(x) < r
    }

    /// Radius of the smallest ball about `ν` containing `rB_ν`.
    pub fn outer_radius(&self, r: f64) -> f64 {
        r * self.t.op_norm() / self.lambda.sqrt()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closed ball of `B(0,1)` on which the cover is built; the default is the whole ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverDomain {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CoverDomain {
    pub fn unit(dim: usize) -> Self {
        Self { center: vec![0.0; dim], radius: 1.0 }
    }

    fn contains(&self, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.radius * (1.0 + 1e-12) && norm(x) <= 1.0 + 1e-12
    }

    /// Lexicographic probe grid with `probe_n` points per axis on the bounding box.
    pub fn probes(&self, probe_n: usize) -> Vec<Vec<f64>> {
        let d = self.center.len();
        let n = probe_n.max(2);
        let h = 2.0 * self.radius / (n - 1) as f64;
        let mut out = Vec::new();
        let mut x = vec![0.0; d];
        for idx in 0..n.pow(d as u32) {
            let mut rem = idx;
            for j in (0..d).rev() {
                x[j] = self.center[j] - self.radius + h * (rem % n) as f64;
                rem /= n;
            }
            if self.contains(&x) {
                out.push(x.clone());
            }
        }
        out
    }

    pub fn spacing(&self, probe_n: usize) -> f64 {
        2.0 * self.radius / (probe_n.max(2) - 1) as f64
    }
}

/// `δ = ε / (2(1+ε))`.
pub fn default_delta(eps: f64) -> f64 {
    eps / (2.0 * (1.0 + eps))
}

/// `N = [d/(2δ)] + 1`.
pub fn default_n(dim: usize, delta: f64) -> usize {
    (dim as f64 / (2.0 * delta) + 1e-9).floor() as usize + 1
}

/// Probe count per axis giving spacing `⅓ λ^{-1/2} 𝒫₂^{-1/2}` on `domain`.
pub fn default_probe_n(lambda: f64, p2: f64, domain: &CoverDomain) -> usize {
    let h = inscribed_radius(lambda, p2) / 3.0;
    (2.0 * domain.radius / h).ceil() as usize + 1
}

/// `λ^{-1/2} 𝒫₂^{-1/2}`, the radius of a ball about `ν` inside every `B_ν`.
pub fn inscribed_radius(lambda: f64, p2: f64) -> f64 {
    1.0 / (lambda * p2).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverOptions {
    pub domain: CoverDomain,
    /// `𝒫₂`, bounding the inscribed radius.
    pub p2: f64,
    pub delta: f64,
    /// When given and `λ < λ₁`, the cover records a warning.
    pub lambda1: Option<f64>,
}

impl CoverOptions {
    pub fn new(dim: usize, p2: f64) -> Self {
        Self { domain: CoverDomain::unit(dim), p2, delta: default_delta(DEFAULT_EPSILON), lambda1: None }
    }
}

/// Uniform grid hash over packet centers.
#[derive(Clone, Debug)]
struct SpatialHash {
    cell: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl SpatialHash {
    fn new(cell: f64) -> Self {
        Self { cell, map: HashMap::new() }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64], id: usize) {
        let k = self.key(x);
        self.map.entry(k).or_default().push(id);
    }

    /// Ids whose center lies within one cell of `x` (a superset of those within `cell`).
    fn near(&self, x: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let base = self.key(x);
        let d = base.len();
        let mut off = vec![-1i64; d];
        loop {
            let k: Vec<i64> = base.iter().zip(&off).map(|(a, b)| a + b).collect();
            if let Some(ids) = self.map.get(&k) {
                out.extend_from_slice(ids);
            }
            let mut j = d;
            loop {
                if j == 0 {
                    out.sort_unstable();
                    return;
                }
                j -= 1;
                if off[j] < 1 {
                    off[j] += 1;
                    for v in &mut off[j + 1..] {
                        *v = -1;
                    }
                    break;
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverSet {
    pub lambda: f64,
    pub delta: f64,
    pub domain: CoverDomain,
    pub probe_n: usize,
    pub packets: Vec<AnisoPacket>,
    /// Indices with `|T_ν∇Φ(ν)| ≤ λ^{-1/2+δ}`.
    pub i_delta: Vec<usize>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    index: SpatialHash,
}

impl CoverSet {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.center.len()
    }

    /// Packets whose `rB_ν` contains `x`, for `r ≤ 2`.
    pub fn containing(&self, x: &[f64], r: f64) -> Vec<usize> {
        let mut near = Vec::new();
        self.index.near(x, &mut near);
        near.retain(|&i| self.packets[i].contains(x, r));
        near
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.packets.iter().map(|p| p.nu.clone()).collect()
    }
}

/// Greedy separated cover of `domain`: seed at the critical point when known (else the domain
/// center), then repeatedly add the lexicographically first probe point not yet in any `B_ν`.
pub fn greedy_cover(m: &PhaseModel, lambda: f64, probe_n: usize, opts: &CoverOptions) -> Result<CoverSet> {
    let d = m.dim;
    if opts.domain.center.len() != d {
        return Err(Error::DimensionMismatch { left: d, right: opts.domain.center.len() });
    }
    if !(lambda >= 1.0) || !(opts.p2 > 0.0) || !(opts.delta > 0.0 && opts.delta < 0.5) {
        return Err(Error::BadParams(format!("lambda={lambda} p2={} delta={}", opts.p2, opts.delta)));
    }
    let spacing = opts.domain.spacing(probe_n);
    let allowed = 0.5 * inscribed_radius(lambda, opts.p2);
    if spacing > allowed {
        return Err(Error::ProbeTooCoarse { spacing, allowed });
    }
    let mut warnings = Vec::new();
    if let Some(l1) = opts.lambda1 {
        if lambda < l1 {
            warnings.push(format!("lambda {lambda:.6e} is below lambda1 {l1:.6e}"));
        }
    }
    let seed = match &m.meta.critical_point {
        Some(xc) if opts.domain.contains(xc) => xc.clone(),
        _ => opts.domain.center.clone(),
    };
    let first = AnisoPacket::new(m, lambda, &seed)?;
    // the hash cell must reach every packet whose 2B_ν can contain a point; it grows on demand
    let mut index = SpatialHash::new(first.outer_radius(2.0));
    index.insert(&first.nu, 0);
    let mut packets = vec![first];
    let mut near = Vec::new();
    for x in opts.domain.probes(probe_n) {
        index.near(&x, &mut near);
        if near.iter().any(|&i| packets[i].contains(&x, 1.0)) {
            continue;
        }
        let p = AnisoPacket::new(m, lambda, &x)?;
        let reach = p.outer_radius(2.0);
        packets.push(p);
        if reach > index.cell {
            index = SpatialHash::new(reach * 1.25);
            for (i, q) in packets.iter().enumerate() {
                index.insert(&q.nu, i);
            }
        } else {
            index.insert(&x, packets.len() - 1);
        }
    }
    let bound = lambda.powf(-0.5 + opts.delta);
    let i_delta = packets
        .iter()
        .enumerate()
        .filter(|(_, p)| norm(&p.t.mul_vec(&m.grad(&p.nu))) <= bound)
        .map(|(i, _)| i)
        .collect();
    Ok(CoverSet { lambda, delta: opts.delta, domain: opts.domain.clone(), probe_n, packets, i_delta, warnings, index })
}

/// Structural checks of a cover on its probe grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverValidity {
    pub probes: usize,
    pub uncovered: usize,
    /// Pairs with `ν ∈ B_σ` and `σ ∈ B_ν`.
    pub pair_violations: usize,
    pub min_center_distance: f64,
    pub inscribed_radius: f64,
}

impl CoverValidity {
    pub fn holds(&self) -> bool {
        self.uncovered == 0
            && self.pair_violations == 0
            && self.min_center_distance >= self.inscribed_radius * (1.0 - 1e-12)
    }
}

pub fn validate_cover(cover: &CoverSet, p2: f64) -> CoverValidity {
    let probes = cover.domain.probes(cover.probe_n);
    let uncovered = probes.iter().filter(|x| cover.containing(x, 1.0).is_empty()).count();
    let mut pair_violations = 0;
    let mut min_dist = f64::INFINITY;
    let mut near = Vec::new();
    for (i, p) in cover.packets.iter().enumerate() {
        cover.index.near(&p.nu, &mut near);
        for &j in &near {
            if j <= i {
                continue;
            }
            let q = &cover.packets[j];
            min_dist = min_dist.min(dist(&p.nu, &q.nu));
            if q.contains(&p.nu, 1.0) && p.contains(&q.nu, 1.0) {
                pair_violations += 1;
            }
        }
    }
    CoverValidity {
        probes: probes.len(),
        uncovered,
        pair_violations,
        min_center_distance: min_dist,
        inscribed_radius: inscribed_radius(cover.lambda, p2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapStats {
    pub max_overlap: usize,
    /// `histogram[k]` = number of probes lying in exactly `k` of the `2B_ν`.
    pub histogram: Vec<usize>,
}

/// Max over probe points of `#{ν : x ∈ 2B_ν}`.
pub fn overlap_stats(cover: &CoverSet, probe_n: usize) -> OverlapStats {
    let mut histogram = vec![0usize; 2];
    for x in cover.domain.probes(probe_n) {
        let k = cover.containing(&x, 2.0).len();
        if k >= histogram.len() {
            histogram.resize(k + 1, 0);
        }
        histogram[k] += 1;
    }
    let max_overlap = histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
    OverlapStats { max_overlap, histogram }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    /// `+∞` when no pair was examined.
    pub min_gap: f64,
    pub pairs: usize,
    pub holds: bool,
}

impl GapCheck {
    fn from_min(min_gap: f64, pairs: usize) -> Self {
        Self { min_gap, pairs, holds: min_gap >= 0.5 - 1e-9 }
    }
}

/// Min over probes `x` and packets with `x ∈ 2B_{ν₁} ∩ 2B_{ν₂}` of `|x_{ν₁} − x_{ν₂}|`.
pub fn separation_check(cover: &CoverSet, probe_n: usize) -> GapCheck {
    let mut min_gap = f64::INFINITY;
    let mut pairs = 0;
    for x in cover.domain.probes(probe_n) {
        let ids = cover.containing(&x, 2.0);
        let locals: Vec<Vec<f64>> = ids.iter().map(|&i| cover.packets[i].local(&x)).collect();
        for a in 0..locals.len() {
            for b in (a + 1)..locals.len() {
                min_gap = min_gap.min(dist(&locals[a], &locals[b]));
                pairs += 1;
            }
        }
    }
    GapCheck::from_min(min_gap, pairs)
}

/// Min over pairs in `ℐ_{λ,δ}` of `λ^{1/2}|T_ν∇Φ(ν) − T_σ∇Φ(σ)|`.
pub fn grad_separation(m: &PhaseModel, cover: &CoverSet) -> GapCheck {
    let s = cover.lambda.sqrt();
    let v: Vec<Vec<f64>> = cover
        .i_delta
        .iter()
        .map(|&i| {
            let p = &cover.packets[i];
            p.t.mul_vec(&m.grad(&p.nu)).iter().map(|a| s * a).collect()
        })
        .collect();
    let mut min_gap = f64::INFINITY;
    let mut pairs = 0;
    for a in 0..v.len() {
        for b in (a + 1)..v.len() {
            min_gap = min_gap.min(dist(&v[a], &v[b]));
            pairs += 1;
        }
    }
    GapCheck::from_min(min_gap, pairs)
}

/// `φ_ν(x) = φ̃(x_ν) / Σ_σ φ̃(x_σ)` over packets with nonzero weight, in index order.
pub fn partition_weight(cover: &CoverSet, x: &[f64]) -> Result<Vec<(usize, f64)>> {
    let mut near = Vec::new();
    cover.index.near(x, &mut near);
    let mut w = Vec::new();
    let mut total = NeumaierSum::new();
    for i in near {
        let r = cover.packets[i].local_norm(x);
        if r < 2.0 {
            let v = hull_bump_radial(r);
            if v > 0.0 {
                w.push((i, v));
                total.add(v);
            }
        }
    }
    let t = total.value();
    if t <= 0.0 {
        return Err(Error::UncoveredPoint);
    }
    for e in &mut w {
        e.1 /= t;
    }
    Ok(w)
}

/// `Σ_ν (det T_ν)(1 + |λ^{1/2}T_ν∇Φ(ν)|)^{-N}`.
pub fn aniso_bound_sum(m: &PhaseModel, cover: &CoverSet, n: usize) -> Result<f64> {
    if n < m.dim + 1 {
        return Err(Error::BadParams(format!("N must be at least d+1, got {n}")));
    }
    let s = cover.lambda.sqrt();
    let mut acc = NeumaierSum::new();
    for p in &cover.packets {
        let r = s * norm(&p.t.mul_vec(&m.grad(&p.nu)));
        acc.add(p.det_t * (1.0 + r).powi(-(n as i32)));
    }
    Ok(acc.value())
}

/// `max/min |det HΦ(ν)|` over `ℐ_{λ,δ}`; 1 when the set has fewer than two members.
pub fn det_comparability(m: &PhaseModel, cover: &CoverSet) -> f64 {
    let dets: Vec<f64> = cover.i_delta.iter().map(|&i| m.det_hess(&cover.packets[i].nu).abs()).collect();
    if dets.len() < 2 {
        return 1.0;
    }
    let hi = dets.iter().cloned().fold(0.0, f64::max);
    let lo = dets.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Worst case over `count` random pairs of `‖T_ν − T_σ‖_op ≤ d^{7/2} 𝒫₃ μ^{-3/2} |ν − σ|`.
pub fn t_lipschitz_check(m: &PhaseModel, p3: f64, mu: f64, count: usize, seed: u64) -> Result<InequalityCheck> {
    let d = m.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (d as f64).powf(3.5) * p3 * mu.powf(-1.5);
    let mut worst = InequalityCheck { lhs: 0.0, rhs: 0.0, holds: true };
    let mut worst_ratio = f64::NEG_INFINITY;
    for _ in 0..count {
        let a = random_in_ball(d, 1.0, &mut rng);
        // half the pairs are close, where the first-order bound is tightest
        let b = if rng.random_bool(0.5) {
            let step = random_in_ball(d, 1e-2, &mut rng);
            let b: Vec<f64> = a.iter().zip(&step).map(|(x, y)| x + y).collect();
            if norm(&b) > 1.0 {
                continue;
            }
            b
        } else {
            random_in_ball(d, 1.0, &mut rng)
        };
        let ta = abs_power_from(&eig_sym(&m.hess(&a))?, -0.5)?;
        let tb = abs_power_from(&eig_sym(&m.hess(&b))?, -0.5)?;
        let lhs = ta.sub(&tb)?.op_norm();
        let rhs = c * dist(&a, &b) * (1.0 + 1e-6);
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst = InequalityCheck { lhs, rhs, holds: lhs <= rhs };
        }
    }
    Ok(worst)
}

/// One packet after `x = ν + λ^{-1/2}T_ν y`: `e^{iλΦ(x)} ψ(x) φ_ν(x)` on `|y| < 2`.
struct PacketIntegrand<'a> {
    m: &'a PhaseModel,
    f: &'a AmplitudeFamily,
    cover: &'a CoverSet,
    id: usize,
    /// Packets whose `2B_σ` can meet `2B_ν`, including `ν` itself.
    neighbours: Vec<usize>,
    freq: Vec<f64>,
    feature: f64,
}

impl<'a> PacketIntegrand<'a> {
    fn new(m: &'a PhaseModel, f: &'a AmplitudeFamily, cover: &'a CoverSet, id: usize) -> Self {
        let p = &cover.packets[id];
        let d = m.dim;
        let lambda = cover.lambda;
        let s = lambda.sqrt();
        // ∇_y(λΦ(x)) = λ^{1/2} T_ν ∇Φ(x); bound |∇Φ| on the image of the box
        let reach = p.outer_radius(2.0 * (d as f64).sqrt());
        let mut gmax: f64 = 0.0;
        let mut hmax: f64 = 0.0;
        let n = 9usize;
        let mut y = vec![0.0; d];
        for idx in 0..n.pow(d as u32) {
            let mut rem = idx;
            for j in (0..d).rev() {
                y[j] = -2.0 + 4.0 * (rem % n) as f64 / (n - 1) as f64;
                rem /= n;
            }
            let x = p.global(&y);
            gmax = gmax.max(norm(&p.t.mul_vec(&m.grad(&x))));
            hmax = hmax.max(m.hess(&x).frob_norm());
        }
        let cell = reach / (n - 1) as f64 * 2.0;
        let g = s * (gmax + p.t.op_norm() * hmax * cell) + f.own_frequency(lambda) * p.t.op_norm() / s;
        let feature = (f.feature_scale(lambda) * s / p.t.op_norm()).min(0.5);
        let own = p.outer_radius(2.0);
        let neighbours = (0..cover.packets.len())
            .filter(|&j| {
                let q = &cover.packets[j];
                dist(&p.nu, &q.nu) < own + q.outer_radius(2.0)
            })
            .collect();
        Self { m, f, cover, id, neighbours, freq: vec![g; d], feature }
    }
}

impl Integrand for PacketIntegrand<'_> {
    fn dim(&self) -> usize {
        self.m.dim
    }

    fn eval(&self, y: &[f64]) -> Complex64 {
        if norm(y) >= 2.0 {
            return Complex64::new(0.0, 0.0);
        }
        let p = &self.cover.packets[self.id];
        let d = y.len();
        let s = self.cover.lambda.sqrt();
        let t = p.t.as_slice();
        let mut xa = [0.0; 3];
        for i in 0..d {
            xa[i] = p.nu[i] + (0..d).map(|j| t[i * d + j] * y[j]).sum::<f64>() / s;
        }
        let x = &xa[..d];
        let a = self.f.value(self.cover.lambda, x);
        if a.re == 0.0 && a.im == 0.0 {
            return a;
        }
        let num = hull_bump_radial(norm(y));
        if num == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut total = NeumaierSum::new();
        for &j in &self.neighbours {
            let r = if j == self.id { norm(y) } else { self.cover.packets[j].local_norm(x) };
            if r < 2.0 {
                total.add(hull_bump_radial(r));
            }
        }
        let w = num / total.value();
        a * Complex64::from_polar(w, self.cover.lambda * self.m.value(x))
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-2.0; self.m.dim], vec![2.0; self.m.dim])
    }

    fn support_ball(&self) -> Option<(Vec<f64>, f64)> {
        Some((vec![0.0; self.m.dim], 2.0))
    }

    fn frequency(&self) -> Vec<f64> {
        self.freq.clone()
    }

    fn feature_scale(&self) -> f64 {
        self.feature
    }
}

const PACKET_MASS_FLOOR: f64 = 1e-3;

/// `Σ_ν det T_ν λ^{-d/2} ∫ e^{iλΦ(λ^{-1/2}T_ν y + ν)} (ψ φ_ν)(λ^{-1/2}T_ν y + ν) dy`.
///
/// Packets whose `2B_ν` misses the support ball of `ψ` are skipped. The cover must cover that
/// support.
pub fn aniso_decompose(
    m: &PhaseModel,
    f: &AmplitudeFamily,
    cover: &CoverSet,
    cfg: &QuadratureConfig,
) -> Result<AnisoDecomposition> {
    let lambda = cover.lambda;
    let d = m.dim;
    let sup = f.support(lambda);
    let scale = lambda.powf(-(d as f64) / 2.0);
    let mut total = ComplexSum::new();
    let mut err = NeumaierSum::new();
    let mut used = 0;
    let mut converged = true;
    // single packets cancel to far below their mass; the partition sums the masses back to ∫|ψ|
    let mut cfg = cfg.clone();
    cfg.mass_floor = cfg.mass_floor.max(PACKET_MASS_FLOOR);
    let cfg = &cfg;
    if !f.is_zero() {
        for (id, p) in cover.packets.iter().enumerate() {
            if dist(&p.nu, &sup.center) >= sup.radius + p.outer_radius(2.0) {
                continue;
            }
            let ig = PacketIntegrand::new(m, f, cover, id);
            let r = integrate_with(&ig, cfg)?;
            converged &= r.converged;
            total.add(r.value * (p.det_t * scale));
            err.add(r.abs_err_est * p.det_t * scale);
            used += 1;
        }
    }
    Ok(AnisoDecomposition { value: total.value(), abs_err_est: err.value(), packets_used: used, converged })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnisoDecomposition {
    pub value: Complex64,
    pub abs_err_est: f64,
    pub packets_used: usize,
    pub converged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::integrate;
    use crate::phasekit::p_norm;
    use approx::assert_relative_eq;

    fn unit_cover(m: &PhaseModel, lambda: f64) -> CoverSet {
        let p2 = p_norm(m, 2.0, 32).unwrap();
        let opts = CoverOptions::new(m.dim, p2);
        let n = default_probe_n(lambda, p2, &opts.domain);
        greedy_cover(m, lambda, n, &opts).unwrap()
    }

    #[test]
    fn packet_geometry() {
        let m = PhaseModel::aniso_quadratic(2, 0.25).unwrap();
        let p = AnisoPacket::new(&m, 100.0, &[0.1, 0.2]).unwrap();
        assert_relative_eq!(p.t.get(0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.t.get(1, 1), 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.det_t, 2.0, epsilon = 1e-12);
        let y = [0.3, -0.7];
        let x = p.global(&y);
        let back = p.local(&x);
        assert!(dist(&back, &y) < 1e-12);
        assert!(p.contains(&x, 1.0));
        assert!(!p.contains(&p.global(&[0.0, 1.01]), 1.0));
        assert_relative_eq!(p.outer_radius(1.0), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_cover_in_one_dimension() {
        let m = PhaseModel::quadratic(1).unwrap();
        let c = unit_cover(&m, 1e4);
        assert!(c.len() >= 100 && c.len() <= 400, "{}", c.len());
        assert_eq!(c.packets[0].nu, vec![0.0]);
        let v = validate_cover(&c, 1.0);
        assert!(v.holds(), "{v:?}");
        // T ≡ I, so consecutive centers sit exactly one radius apart
        let mut xs: Vec<f64> = c.centers().iter().map(|v| v[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(xs.windows(2).all(|w| w[1] - w[0] >= 0.01 - 1e-12));
    }

    #[test]
    fn anisotropic_axes_and_checks() {
        let eps = 0.25;
        let m = PhaseModel::aniso_quadratic(2, eps).unwrap();
        let c = unit_cover(&m, 400.0);
        for p in &c.packets {
            assert_relative_eq!(p.t.get(1, 1) / p.t.get(0, 0), eps.powf(-0.5), epsilon = 1e-12);
            assert_relative_eq!(p.det_t, eps.powf(-0.5), epsilon = 1e-12);
        }
        let p2 = p_norm(&m, 2.0, 32).unwrap();
        assert!(validate_cover(&c, p2).holds());
        let ov = overlap_stats(&c, c.probe_n);
        assert!(ov.max_overlap <= 36 && ov.max_overlap >= 1);
        assert_eq!(ov.histogram[0], 0);
        assert!(separation_check(&c, c.probe_n).holds);
        assert!(grad_separation(&m, &c).holds);
        assert!(det_comparability(&m, &c) <= 2.0);
    }

    #[test]
    fn probe_precondition() {
        let m = PhaseModel::quadratic(2).unwrap();
        let opts = CoverOptions::new(2, 1.0);
        assert!(matches!(greedy_cover(&m, 100.0, 10, &opts), Err(Error::ProbeTooCoarse { .. })));
        let mut opts = CoverOptions::new(2, 1.0);
        opts.lambda1 = Some(1e9);
        let c = greedy_cover(&m, 100.0, 80, &opts).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn weights_partition_unity() {
        let m = PhaseModel::perturbed_quadratic(2, 0.05).unwrap();
        let c = unit_cover(&m, 300.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let x = random_in_ball(2, 0.999, &mut rng);
            let w = partition_weight(&c, &x).unwrap();
            let s: f64 = w.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for (i, v) in w {
                assert!(v >= 0.0);
                assert!(c.packets[i].contains(&x, 2.0));
            }
        }
        let lone = {
            let opts = CoverOptions {
                domain: CoverDomain { center: vec![0.0, 0.0], radius: 0.01 },
                ..CoverOptions::new(2, 1.0)
            };
            greedy_cover(&PhaseModel::quadratic(2).unwrap(), 100.0, 5, &opts).unwrap()
        };
        assert_eq!(lone.len(), 1);
        assert_eq!(partition_weight(&lone, &[0.0, 0.0]).unwrap(), vec![(0, 1.0)]);
        assert_eq!(overlap_stats(&lone, 5).max_overlap, 1);
        assert!(separation_check(&lone, 5).holds);
        assert_eq!(partition_weight(&lone, &[0.9, 0.0]), Err(Error::UncoveredPoint));
    }

    #[test]
    fn bound_sum_closed_form() {
        let m = PhaseModel::quadratic(2).unwrap();
        let c = unit_cover(&m, 200.0);
        let s = aniso_bound_sum(&m, &c, 5).unwrap();
        let expect: f64 = c.packets.iter().map(|p| (1.0 + 200f64.sqrt() * norm(&p.nu)).powi(-5)).sum();
        assert_relative_eq!(s, expect, max_relative = 1e-13);
        assert!(aniso_bound_sum(&m, &c, 2).is_err());
    }

    #[test]
    fn lipschitz_transport() {
        for m in [PhaseModel::perturbed_quadratic(2, 0.1).unwrap(), PhaseModel::aniso_quadratic(2, 0.3).unwrap()] {
            let p3 = p_norm(&m, 3.0, 32).unwrap().max(1e-300);
            let mu = m.meta.exact_mu.unwrap_or(0.5);
            let chk = t_lipschitz_check(&m, p3, mu, 300, 3).unwrap();
            assert!(chk.holds, "{} {chk:?}", m.name);
        }
    }

    #[test]
    fn decomposition_matches_oracle() {
        let cfg = QuadratureConfig::default().with_tol(1e-9);
        let m = PhaseModel::quadratic(2).unwrap();
        let f = AmplitudeFamily::bump(2, 1.0, None).unwrap();
        let lam = 60.0;
        let c = unit_cover(&m, lam);
        let a = aniso_decompose(&m, &f, &c, &cfg).unwrap();
        let o = integrate(&m, &f, lam, &cfg).unwrap().value;
        assert!((a.value - o).norm() <= 1e-6 * o.norm(), "{} vs {}", a.value, o);
        let z = aniso_decompose(&m, &AmplitudeFamily::zero(2).unwrap(), &c, &cfg).unwrap();
        assert_eq!(z.value.norm(), 0.0);
    }

    #[test]
    fn defaults() {
        let delta = default_delta(0.2);
        assert_relative_eq!(delta, 0.2 / 2.4, epsilon = 1e-15);
        assert_eq!(default_n(2, delta), 13);
    }
}
