//! Phase and amplitude models, the builtin example families, and sampled size constants.

pub mod bumps;
mod norms;

pub use norms::{
    a_norm, a_tilde, constants, constants_with, default_grid, l_star, mu_est, n0, n_eps, p_norm, p_tilde,
    ConstantsConfig, NormEntry, PhaseConstants, DEFAULT_ALPHA, DEFAULT_EPSILON,
};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};
use crate::symmat::SymMatrix;
use bumps::{eta, radial_bump};

/// Highest mixed-partial order offered by every builtin phase.
pub const R_MAX: usize = 16;

const PERTURB_CENTER: f64 = 0.25;
const PERTURB_WIDTH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PhaseKind {
    Quadratic,
    AnisoQuadratic { eps: f64 },
    PerturbedQuadratic { a: f64 },
    DegenerateFold,
    Linear { coef: Vec<f64> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PhaseMeta {
    pub critical_point: Option<Vec<f64>>,
    pub exact_mu: Option<f64>,
    pub exact_lstar: Option<f64>,
}

/// A real phase `Φ` on `B(0,1) ⊂ ℝ^d`, `d ≤ 3`, possibly multiplied by a constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseModel {
    pub name: String,
    pub dim: usize,
    pub kind: PhaseKind,
    pub scale: f64,
    pub meta: PhaseMeta,
}

fn check_phase_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::DimensionUnsupported(dim))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PhaseModel {
    fn build(name: String, dim: usize, kind: PhaseKind, meta: PhaseMeta) -> Result<Self> {
        check_phase_dim(dim)?;
        let mut m = Self { name, dim, kind, scale: 1.0, meta };
        if let PhaseKind::PerturbedQuadratic { .. } = m.kind {
            m.meta.critical_point = Some(m.newton_critical_point()?);
        }
        Ok(m)
    }

    /// `|x|²/2`.
    pub fn quadratic(dim: usize) -> Result<Self> {
        let meta = PhaseMeta { critical_point: Some(vec![0.0; dim]), exact_mu: Some(1.0), exact_lstar: Some(1.0) };
        Self::build("quadratic".into(), dim, PhaseKind::Quadratic, meta)
    }

    /// `(x₁² + ε Σ_{j≥2} x_j²)/2`.
    pub fn aniso_quadratic(dim: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::BadParams(format!("aniso-quadratic needs eps > 0, got {eps}")));
        }
        let meta = PhaseMeta {
            critical_point: Some(vec![0.0; dim]),
            exact_mu: Some(if dim == 1 { 1.0 } else { eps.min(1.0) }),
            exact_lstar: Some(eps.powi(dim as i32 - 1)),
        };
        Self::build(format!("aniso-quadratic({eps})"), dim, PhaseKind::AnisoQuadratic { eps }, meta)
    }

    /// `|x|²/2 + a·exp(−|x − c|²/s²)` with `c = (1/4, 0, …)`, `s = 1/2`; definite for `|a| < 1/8`.
    pub fn perturbed_quadratic(dim: usize, a: f64) -> Result<Self> {
        if !(a.abs() < 0.125) {
            return Err(Error::BadParams(format!("perturbed-quadratic needs |a| < 0.125, got {a}")));
        }
        Self::build(format!("perturbed-quadratic({a})"), dim, PhaseKind::PerturbedQuadratic { a }, PhaseMeta::default())
    }

    /// `(x₂ + x₁²)²` on ℝ²; `det HΦ = 8(x₂ + x₁²)` vanishes on the fold.
    pub fn degenerate_fold() -> Result<Self> {
        let meta = PhaseMeta { critical_point: None, exact_mu: None, exact_lstar: Some(0.0) };
        Self::build("degenerate-fold".into(), 2, PhaseKind::DegenerateFold, meta)
    }

    /// `c·x`; the zero vector gives the constant phase.
    pub fn linear(coef: Vec<f64>) -> Result<Self> {
        let dim = coef.len();
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadParams("linear phase coefficients must be finite".into()));
        }
        let meta = PhaseMeta { critical_point: None, exact_mu: Some(0.0), exact_lstar: Some(0.0) };
        let name = if coef.iter().all(|&c| c == 0.0) { "constant".to_string() } else { "linear".to_string() };
        Self::build(name, dim, PhaseKind::Linear { coef }, meta)
    }

    /// `t·Φ`. Metadata is rescaled accordingly.
    pub fn scaled(&self, t: f64) -> Self {
        let mut m = self.clone();
        m.scale *= t;
        m.meta.exact_mu = m.meta.exact_mu.map(|v| v * t.abs());
        m.meta.exact_lstar = m.meta.exact_lstar.map(|v| v * t.abs().powi(self.dim as i32));
        if t != 1.0 {
            m.name = format!("{}*{}", self.name, t);
        }
        m
    }

    /// Generic evaluator; with [`Jet`] inputs it yields every mixed partial.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let v = match &self.kind {
            PhaseKind::Quadratic => {
                let mut acc = x[0].sqr();
                for xi in &x[1..] {
                    acc = acc + xi.sqr();
                }
                acc * 0.5
            }
            PhaseKind::AnisoQuadratic { eps } => {
                let mut acc = x[0].sqr();
                for xi in &x[1..] {
                    acc = acc + xi.sqr() * *eps;
                }
                acc * 0.5
            }
            PhaseKind::PerturbedQuadratic { a } => {
                let mut q = x[0].sqr();
                let mut r = (x[0].clone() - PERTURB_CENTER).sqr();
                for xi in &x[1..] {
                    q = q + xi.sqr();
                    r = r + xi.sqr();
                }
                q * 0.5 + (r * (-1.0 / (PERTURB_WIDTH * PERTURB_WIDTH))).exp() * *a
            }
            PhaseKind::DegenerateFold => (x[1].clone() + x[0].sqr()).sqr(),
            PhaseKind::Linear { coef } => {
                let mut acc = x[0].clone() * coef[0];
                for (xi, c) in x[1..].iter().zip(&coef[1..]) {
                    acc = acc + xi.clone() * *c;
                }
                acc
            }
        };
        v * self.scale
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.kind {
            PhaseKind::Quadratic => out[..d].copy_from_slice(&x[..d]),
            PhaseKind::AnisoQuadratic { eps } => {
                out[0] = x[0];
                for j in 1..d {
                    out[j] = eps * x[j];
                }
            }
            PhaseKind::PerturbedQuadratic { a } => {
                let (b, diff) = perturb_bump(x);
                let s2 = PERTURB_WIDTH * PERTURB_WIDTH;
                for j in 0..d {
                    out[j] = x[j] - a * b * 2.0 * diff[j] / s2;
                }
            }
            PhaseKind::DegenerateFold => {
                let u = x[1] + x[0] * x[0];
                out[0] = 4.0 * x[0] * u;
                out[1] = 2.0 * u;
            }
            PhaseKind::Linear { coef } => out[..d].copy_from_slice(coef),
        }
        for g in &mut out[..d] {
            *g *= self.scale;
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.grad_into(x, &mut g);
        g
    }

    /// Row-major Hessian entries.
    pub fn hess_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out[..d * d].iter_mut().for_each(|v| *v = 0.0);
        match &self.kind {
            PhaseKind::Quadratic => (0..d).for_each(|i| out[i * d + i] = 1.0),
            PhaseKind::AnisoQuadratic { eps } => {
                out[0] = 1.0;
                (1..d).for_each(|i| out[i * d + i] = *eps);
            }
            PhaseKind::PerturbedQuadratic { a } => {
                let (b, diff) = perturb_bump(x);
                let s2 = PERTURB_WIDTH * PERTURB_WIDTH;
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        out[i * d + j] = delta + a * b * (4.0 * diff[i] * diff[j] / (s2 * s2) - 2.0 * delta / s2);
                    }
                }
            }
            PhaseKind::DegenerateFold => {
                let u = x[1] + x[0] * x[0];
                out[0] = 4.0 * u + 8.0 * x[0] * x[0];
                out[1] = 4.0 * x[0];
                out[2] = 4.0 * x[0];
                out[3] = 2.0;
            }
            PhaseKind::Linear { .. } => {}
        }
        for h in &mut out[..d * d] {
            *h *= self.scale;
        }
    }

    pub fn hess(&self, x: &[f64]) -> SymMatrix {
        let mut h = [0.0; 9];
        self.hess_into(x, &mut h);
        SymMatrix::from_row_major(self.dim, &h[..self.dim * self.dim]).expect("finite Hessian")
    }

    pub fn det_hess(&self, x: &[f64]) -> f64 {
        self.hess(x).det()
    }

    /// Taylor jet of order `order` at `x`.
    pub fn jet(&self, x: &[f64], order: usize) -> Jet {
        self.eval(&Jet::variables(x, order))
    }

    /// `𝒟^γ Φ(x)` for `|γ| ≤ R_MAX`.
    pub fn mixed_partial(&self, x: &[f64], gamma: &[usize]) -> Result<f64> {
        let order: usize = gamma.iter().sum();
        if order > R_MAX {
            return Err(Error::InsufficientDerivatives { requested: order, available: R_MAX });
        }
        if gamma.len() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: gamma.len() });
        }
        Ok(self.jet(x, order).partial(gamma))
    }

    fn newton_critical_point(&self) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut x = vec![0.0; d];
        for _ in 0..100 {
            let g = self.grad(&x);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-15 {
                break;
            }
            let inv = crate::symmat::abs_power(&self.hess(&x), -1.0)?;
            // Hessian is positive definite here, so |H|^{-1} = H^{-1}
            let step = inv.mul_vec(&g);
            for j in 0..d {
                x[j] -= step[j];
            }
        }
        Ok(x)
    }

    /// Grad and Hess against central finite differences (step `1e-5`) at `count` random points.
    /// Returns the worst relative deviation.
    pub fn self_test(&self, count: usize, seed: u64) -> f64 {
        let d = self.dim;
        let h = 1e-5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let x = random_in_ball(d, 1.0, &mut rng);
            let g = self.grad(&x);
            let hm = self.hess(&x);
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
                worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
                let gp = self.grad(&xp);
                let gm = self.grad(&xm);
                for i in 0..d {
                    let fdh = (gp[i] - gm[i]) / (2.0 * h);
                    worst = worst.max((fdh - hm.get(i, j)).abs() / hm.get(i, j).abs().max(1.0));
                }
            }
        }
        worst
    }
}

fn perturb_bump(x: &[f64]) -> (f64, [f64; 3]) {
    let mut diff = [0.0; 3];
    let mut r2 = 0.0;
    for (j, &xj) in x.iter().enumerate() {
        diff[j] = if j == 0 { xj - PERTURB_CENTER } else { xj };
        r2 += diff[j] * diff[j];
    }
    ((-r2 / (PERTURB_WIDTH * PERTURB_WIDTH)).exp(), diff)
}

/// Uniform sample from the ball `B(0, r)` by rejection.
pub fn random_in_ball<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        if dot(&x, &x) < r * r {
            return x;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AmpKind {
    Zero,
    /// `1` on the closed unit ball; only meaningful for local packet checks.
    Unit,
    Bump {
        radius: f64,
        center: Vec<f64>,
    },
    HessianCutoff,
    LatticeChirp,
    ShrinkingBump {
        beta: f64,
    },
    Combination(Vec<(Complex64, AmplitudeFamily)>),
}

/// An amplitude `ψ` or a λ-dependent family `ψ_λ`, supported in `B(0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmplitudeFamily {
    pub name: String,
    pub dim: usize,
    pub kind: AmpKind,
    pub beta: Option<f64>,
}

/// Ball containing `supp ψ_λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl AmplitudeFamily {
    fn build(name: String, dim: usize, kind: AmpKind, beta: Option<f64>) -> Result<Self> {
        check_phase_dim(dim)?;
        Ok(Self { name, dim, kind, beta })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::build("zero".into(), dim, AmpKind::Zero, None)
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::build("unit".into(), dim, AmpKind::Unit, None)
    }

    /// `exp(1 − 1/(1 − |x−c|²/ρ²))`, peak 1 at `c`.
    pub fn bump(dim: usize, radius: f64, center: Option<Vec<f64>>) -> Result<Self> {
        let center = center.unwrap_or_else(|| vec![0.0; dim]);
        if center.len() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: center.len() });
        }
        let reach = dot(&center, &center).sqrt() + radius;
        if !(radius > 0.0) || reach > 1.0 + 1e-12 {
            return Err(Error::BadParams(format!("bump must satisfy 0 < |c| + radius <= 1, got {reach}")));
        }
        let name = if center.iter().all(|&c| c == 0.0) {
            format!("bump({radius})")
        } else {
            format!("bump({radius};{center:?})")
        };
        Self::build(name, dim, AmpKind::Bump { radius, center }, None)
    }

    /// `η(|λ^{1/2} det HΦ(x)|)φ(x)` for the fold phase, `det HΦ = 8(x₂ + x₁²)`.
    pub fn hessian_cutoff() -> Result<Self> {
        Self::build("hessian-cutoff".into(), 2, AmpKind::HessianCutoff, Some(0.5))
    }

    /// `Σ_{ν ∈ λ^{-1}ℤ^d, |ν| < 1/2} φ(2λ(x−ν)) e^{−iλ|ν|²/2}`.
    pub fn lattice_chirp(dim: usize) -> Result<Self> {
        Self::build("lattice-chirp".into(), dim, AmpKind::LatticeChirp, Some(1.0))
    }

    /// `φ(λ^{1−β}x) e^{−iλ|x|²/2}`.
    pub fn shrinking_bump(dim: usize, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::BadParams(format!("shrinking-bump needs beta in [0, 1], got {beta}")));
        }
        Self::build(format!("shrinking-bump({beta})"), dim, AmpKind::ShrinkingBump { beta }, Some(beta))
    }

    pub fn combination(terms: Vec<(Complex64, AmplitudeFamily)>) -> Result<Self> {
        let dim = terms.first().map(|t| t.1.dim).ok_or_else(|| Error::BadParams("empty combination".into()))?;
        if terms.iter().any(|t| t.1.dim != dim) {
            return Err(Error::BadParams("combination terms differ in dimension".into()));
        }
        let beta =
            terms.iter().filter_map(|t| t.1.beta).fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.max(b))));
        Self::build("combination".into(), dim, AmpKind::Combination(terms), beta)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, AmpKind::Zero)
    }

    pub fn depends_on_lambda(&self) -> bool {
        match &self.kind {
            AmpKind::HessianCutoff | AmpKind::LatticeChirp | AmpKind::ShrinkingBump { .. } => true,
            AmpKind::Combination(t) => t.iter().any(|t| t.1.depends_on_lambda()),
            _ => false,
        }
    }

    /// Generic evaluator returning `(Re ψ_λ, Im ψ_λ)`.
    pub fn eval<S: Scalar>(&self, lambda: f64, x: &[S]) -> (S, S) {
        let zero = x[0].zero_like();
        match &self.kind {
            AmpKind::Zero => (zero.clone(), zero),
            AmpKind::Unit => {
                let r2: f64 = x.iter().map(|v| v.value() * v.value()).sum();
                (zero.cst(if r2 <= 1.0 { 1.0 } else { 0.0 }), zero)
            }
            AmpKind::Bump { radius, center } => {
                let inv = 1.0 / (radius * radius);
                let mut s = zero.clone();
                for (xi, c) in x.iter().zip(center) {
                    s = s + (xi.clone() - *c).sqr() * inv;
                }
                (radial_bump(s), zero)
            }
            AmpKind::HessianCutoff => {
                let s = (x[1].clone() + x[0].sqr()) * (8.0 * lambda.sqrt());
                let cut = eta(s.clone()) + eta(-s);
                let r2 = x[0].sqr() + x[1].sqr();
                (cut * radial_bump(r2), zero)
            }
            AmpKind::LatticeChirp => {
                let mut nu2 = 0.0;
                let mut s = zero.clone();
                for xi in x {
                    let nu = (xi.value() * lambda).round() / lambda;
                    nu2 += nu * nu;
                    s = s + (xi.clone() - nu).sqr() * (4.0 * lambda * lambda);
                }
                if nu2 >= 0.25 {
                    return (zero.clone(), zero);
                }
                let b = radial_bump(s);
                let (sn, cs) = (-0.5 * lambda * nu2).sin_cos();
                (b.clone() * cs, b * sn)
            }
            AmpKind::ShrinkingBump { beta } => {
                let k = lambda.powf(1.0 - beta);
                let mut r2 = zero.clone();
                for xi in x {
                    r2 = r2 + xi.sqr();
                }
                let b = radial_bump(r2.clone() * (k * k));
                let ph = r2 * (-0.5 * lambda);
                (b.clone() * ph.cos(), b * ph.sin())
            }
            AmpKind::Combination(terms) => {
                let mut re = zero.clone();
                let mut im = zero;
                for (w, f) in terms {
                    let (a, b) = f.eval(lambda, x);
                    re = re + a.clone() * w.re - b.clone() * w.im;
                    im = im + a * w.im + b * w.re;
                }
                (re, im)
            }
        }
    }

    #[inline]
    pub fn value(&self, lambda: f64, x: &[f64]) -> Complex64 {
        let (re, im) = self.eval(lambda, x);
        Complex64::new(re, im)
    }

    pub fn jet(&self, lambda: f64, x: &[f64], order: usize) -> (Jet, Jet) {
        self.eval(lambda, &Jet::variables(x, order))
    }

    pub fn mixed_partial(&self, lambda: f64, x: &[f64], gamma: &[usize]) -> Result<Complex64> {
        let order: usize = gamma.iter().sum();
        if order > R_MAX {
            return Err(Error::InsufficientDerivatives { requested: order, available: R_MAX });
        }
        if gamma.len() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: gamma.len() });
        }
        let (re, im) = self.jet(lambda, x, order);
        Ok(Complex64::new(re.partial(gamma), im.partial(gamma)))
    }

    /// Ball containing `supp ψ_λ`.
    pub fn support(&self, lambda: f64) -> Support {
        let origin = vec![0.0; self.dim];
        match &self.kind {
            AmpKind::Zero => Support { center: origin, radius: 0.0 },
            AmpKind::Unit | AmpKind::HessianCutoff => Support { center: origin, radius: 1.0 },
            AmpKind::Bump { radius, center } => Support { center: center.clone(), radius: *radius },
            AmpKind::LatticeChirp => Support { center: origin, radius: (0.5 + 0.5 / lambda).min(1.0) },
            AmpKind::ShrinkingBump { beta } => Support { center: origin, radius: lambda.powf(beta - 1.0).min(1.0) },
            AmpKind::Combination(terms) => {
                let reach = terms
                    .iter()
                    .map(|t| {
                        let s = t.1.support(lambda);
                        dot(&s.center, &s.center).sqrt() + s.radius
                    })
                    .fold(0.0, f64::max);
                Support { center: origin, radius: reach.min(1.0) }
            }
        }
    }

    /// Smallest length scale on which `ψ_λ` varies.
    pub fn feature_scale(&self, lambda: f64) -> f64 {
        match &self.kind {
            AmpKind::Zero | AmpKind::Unit => 1.0,
            AmpKind::Bump { radius, .. } => *radius,
            AmpKind::HessianCutoff => 1.0 / (16.0 * lambda.sqrt()),
            AmpKind::LatticeChirp => 0.5 / lambda,
            AmpKind::ShrinkingBump { beta } => lambda.powf(beta - 1.0),
            AmpKind::Combination(t) => t.iter().map(|t| t.1.feature_scale(lambda)).fold(1.0, f64::min),
        }
    }

    /// Largest local angular frequency of `arg ψ_λ` on its support.
    pub fn own_frequency(&self, lambda: f64) -> f64 {
        match &self.kind {
            AmpKind::ShrinkingBump { .. } => lambda * self.support(lambda).radius,
            AmpKind::Combination(t) => t.iter().map(|t| t.1.own_frequency(lambda)).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Whether the box `[lo, hi]` may meet `supp ψ_λ`. Never returns a false negative.
    pub fn may_be_nonzero(&self, lambda: f64, lo: &[f64], hi: &[f64]) -> bool {
        match &self.kind {
            AmpKind::Zero => false,
            AmpKind::HessianCutoff => {
                if !box_meets_ball(lo, hi, &[0.0, 0.0], 1.0) {
                    return false;
                }
                let sq_lo = if lo[0] <= 0.0 && hi[0] >= 0.0 { 0.0 } else { (lo[0] * lo[0]).min(hi[0] * hi[0]) };
                let sq_hi = (lo[0] * lo[0]).max(hi[0] * hi[0]);
                let u_lo = lo[1] + sq_lo;
                let u_hi = hi[1] + sq_hi;
                let s = 8.0 * lambda.sqrt();
                let (a, b) = (0.5 / s, 2.0 / s);
                let meets = |p: f64, q: f64| u_lo < q && u_hi > p;
                meets(a, b) || meets(-b, -a)
            }
            AmpKind::Combination(t) => t.iter().any(|t| t.1.may_be_nonzero(lambda, lo, hi)),
            _ => {
                let s = self.support(lambda);
                box_meets_ball(lo, hi, &s.center, s.radius)
            }
        }
    }

    /// Support shell vanishing and, for β-families, the sampled growth bound
    /// `|𝒟^γψ_λ| ≤ Ã λ^{|γ|β}` for `|γ| ≤ 2`. Returns the worst observed ratio to `Ã`.
    pub fn self_test(&self, lambdas: &[f64], a_tilde: f64, grid_n: usize) -> Result<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &lam in lambdas {
            let s = self.support(lam);
            for _ in 0..100 {
                let dir = random_in_ball(self.dim, 1.0, &mut rng);
                let n = dot(&dir, &dir).sqrt().max(1e-12);
                let r = s.radius * (1.0 + 1e-9) + rng.random_range(0.0..1e-3);
                let x: Vec<f64> = (0..self.dim).map(|j| s.center[j] + dir[j] / n * r).collect();
                if self.value(lam, &x).norm() != 0.0 {
                    return Err(Error::BadParams(format!("{} is nonzero outside its support", self.name)));
                }
            }
        }
        let Some(beta) = self.beta else { return Ok(0.0) };
        let mut worst: f64 = 0.0;
        for &lam in lambdas {
            let s = self.support(lam);
            for_box_grid(&s.center, s.radius, grid_n, self.dim, |x| {
                let (re, im) = self.jet(lam, x, 2);
                for deg in 0..=2 {
                    for g in crate::jet::multi_indices(self.dim, deg) {
                        let v = Complex64::new(re.partial(&g), im.partial(&g)).norm();
                        worst = worst.max(v / (a_tilde * lam.powf(deg as f64 * beta)));
                    }
                }
            });
        }
        Ok(worst)
    }
}

/// Visits the `grid_n^d` tensor grid on the box `center ± radius`.
pub(crate) fn for_box_grid(center: &[f64], radius: f64, grid_n: usize, d: usize, mut f: impl FnMut(&[f64])) {
    let step = if grid_n > 1 { 2.0 * radius / (grid_n - 1) as f64 } else { 0.0 };
    let total = grid_n.pow(d as u32);
    let mut x = vec![0.0; d];
    for k in 0..total {
        let mut rem = k;
        for j in (0..d).rev() {
            x[j] = center[j] - radius + step * (rem % grid_n) as f64;
            rem /= grid_n;
        }
        f(&x);
    }
}

pub fn box_meets_ball(lo: &[f64], hi: &[f64], c: &[f64], r: f64) -> bool {
    let mut d2 = 0.0;
    for j in 0..lo.len() {
        let t = c[j].clamp(lo[j], hi[j]) - c[j];
        d2 += t * t;
    }
    d2 < r * r
}

/// Splits `name(p1,p2)` or `name,p1,p2` into a name and parameters.
pub fn parse_spec(spec: &str) -> Result<(String, Vec<f64>)> {
    let spec = spec.trim();
    let (name, rest) = if let Some(open) = spec.find('(') {
        let close = spec.rfind(')').ok_or_else(|| Error::BadParams(format!("unbalanced parentheses in `{spec}`")))?;
        (&spec[..open], &spec[open + 1..close])
    } else if let Some(comma) = spec.find(',') {
        (&spec[..comma], &spec[comma + 1..])
    } else {
        (spec, "")
    };
    let params = rest
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::BadParams(format!("bad number `{s}` in `{spec}`"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim().to_string(), params))
}

pub const PHASE_NAMES: &[&str] =
    &["quadratic", "aniso-quadratic(eps)", "perturbed-quadratic(a)", "degenerate-fold", "linear(c1,..,cd)", "constant"];
pub const AMPLITUDE_NAMES: &[&str] =
    &["bump[(radius[,c1,..,cd])]", "hessian-cutoff", "lattice-chirp", "shrinking-bump(beta)", "zero", "unit"];

fn arity(name: &str, params: &[f64], allowed: &[usize]) -> Result<()> {
    if allowed.contains(&params.len()) {
        Ok(())
    } else {
        Err(Error::BadParams(format!("`{name}` takes {allowed:?} parameters, got {}", params.len())))
    }
}

/// Registry lookup for phases.
pub fn builtin_phase(name: &str, params: &[f64], dim: usize) -> Result<PhaseModel> {
    let m = match name {
        "quadratic" => {
            arity(name, params, &[0])?;
            PhaseModel::quadratic(dim)?
        }
        "aniso-quadratic" => {
            arity(name, params, &[1])?;
            PhaseModel::aniso_quadratic(dim, params[0])?
        }
        "perturbed-quadratic" => {
            arity(name, params, &[1])?;
            PhaseModel::perturbed_quadratic(dim, params[0])?
        }
        "degenerate-fold" => {
            arity(name, params, &[0])?;
            if dim != 2 {
                return Err(Error::BadParams("degenerate-fold is two-dimensional".into()));
            }
            PhaseModel::degenerate_fold()?
        }
        "linear" => {
            arity(name, params, &[dim])?;
            PhaseModel::linear(params.to_vec())?
        }
        "constant" => {
            arity(name, params, &[0])?;
            PhaseModel::linear(vec![0.0; dim])?
        }
        _ => return Err(Error::UnknownName(name.to_string())),
    };
    Ok(m)
}

/// Registry lookup for amplitudes.
pub fn builtin_amplitude(name: &str, params: &[f64], dim: usize) -> Result<AmplitudeFamily> {
    match name {
        "bump" => match params.len() {
            0 => AmplitudeFamily::bump(dim, 1.0, None),
            1 => AmplitudeFamily::bump(dim, params[0], None),
            n if n == dim + 1 => AmplitudeFamily::bump(dim, params[0], Some(params[1..].to_vec())),
            _ => Err(Error::BadParams(format!("`bump` takes 0, 1 or {} parameters", dim + 1))),
        },
        "hessian-cutoff" => {
            arity(name, params, &[0])?;
            if dim != 2 {
                return Err(Error::BadParams("hessian-cutoff is two-dimensional".into()));
            }
            AmplitudeFamily::hessian_cutoff()
        }
        "lattice-chirp" => {
            arity(name, params, &[0])?;
            AmplitudeFamily::lattice_chirp(dim)
        }
        "shrinking-bump" => {
            arity(name, params, &[1])?;
            AmplitudeFamily::shrinking_bump(dim, params[0])
        }
        "zero" => AmplitudeFamily::zero(dim),
        "unit" => AmplitudeFamily::unit(dim),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

pub fn phase_from_spec(spec: &str, dim: usize) -> Result<PhaseModel> {
    let (n, p) = parse_spec(spec)?;
    builtin_phase(&n, &p, dim)
}

pub fn amplitude_from_spec(spec: &str, dim: usize) -> Result<AmplitudeFamily> {
    let (n, p) = parse_spec(spec)?;
    builtin_amplitude(&n, &p, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_phases() -> Vec<PhaseModel> {
        let mut v = Vec::new();
        for d in 1..=3 {
            v.push(PhaseModel::quadratic(d).unwrap());
            v.push(PhaseModel::aniso_quadratic(d, 0.1).unwrap());
            v.push(PhaseModel::perturbed_quadratic(d, 0.1).unwrap());
            v.push(PhaseModel::linear((0..d).map(|j| j as f64 - 0.5).collect()).unwrap());
        }
        v.push(PhaseModel::degenerate_fold().unwrap());
        v
    }

    #[test]
    fn builtin_phases_pass_self_test() {
        for m in all_phases() {
            let worst = m.self_test(100, 3);
            assert!(worst < 1e-6, "{}: {worst}", m.name);
        }
    }

    #[test]
    fn jets_agree_with_analytic_grad_and_hessian() {
        let x = [0.3, -0.4];
        for m in all_phases().into_iter().filter(|m| m.dim == 2) {
            let j = m.jet(&x, 2);
            let g = m.grad(&x);
            let h = m.hess(&x);
            assert_relative_eq!(j.value(), m.value(&x), epsilon = 1e-15);
            assert_relative_eq!(j.partial(&[1, 0]), g[0], epsilon = 1e-14);
            assert_relative_eq!(j.partial(&[0, 1]), g[1], epsilon = 1e-14);
            assert_relative_eq!(j.partial(&[2, 0]), h.get(0, 0), epsilon = 1e-13);
            assert_relative_eq!(j.partial(&[1, 1]), h.get(0, 1), epsilon = 1e-13);
            assert_relative_eq!(j.partial(&[0, 2]), h.get(1, 1), epsilon = 1e-13);
        }
    }

    #[test]
    fn quadratic_metadata() {
        let m = PhaseModel::quadratic(2).unwrap();
        assert_eq!(m.grad(&[0.2, -0.7]), vec![0.2, -0.7]);
        assert_eq!(m.hess(&[0.2, -0.7]), SymMatrix::identity(2).unwrap());
        assert_eq!(m.meta.critical_point, Some(vec![0.0, 0.0]));
        assert_eq!(m.meta.exact_mu, Some(1.0));
        assert_eq!(m.meta.exact_lstar, Some(1.0));
    }

    #[test]
    fn fold_determinant() {
        let m = PhaseModel::degenerate_fold().unwrap();
        assert_eq!(m.det_hess(&[0.0, 0.0]), 0.0);
        for x in [[0.3, 0.1], [-0.5, 0.2], [0.1, -0.6]] {
            assert_relative_eq!(m.det_hess(&x), 8.0 * (x[1] + x[0] * x[0]), epsilon = 1e-14);
        }
        // second-order central differences of Φ give the same determinant
        let h = 1e-4;
        let x = [0.3, 0.1];
        let f = |a: f64, b: f64| m.value(&[a, b]);
        let fxx = (f(x[0] + h, x[1]) - 2.0 * f(x[0], x[1]) + f(x[0] - h, x[1])) / (h * h);
        let fyy = (f(x[0], x[1] + h) - 2.0 * f(x[0], x[1]) + f(x[0], x[1] - h)) / (h * h);
        let fxy = (f(x[0] + h, x[1] + h) - f(x[0] + h, x[1] - h) - f(x[0] - h, x[1] + h) + f(x[0] - h, x[1] - h))
            / (4.0 * h * h);
        assert_relative_eq!(fxx * fyy - fxy * fxy, 8.0 * (0.1 + 0.09), max_relative = 1e-5);
    }

    #[test]
    fn perturbed_critical_point_is_stationary() {
        for d in 1..=3 {
            let m = PhaseModel::perturbed_quadratic(d, 0.1).unwrap();
            let xc = m.meta.critical_point.clone().unwrap();
            assert!(m.grad(&xc).iter().all(|g| g.abs() < 1e-14));
            // the bump pushes the minimum away from its centre (1/4, 0, …)
            assert!(xc[0] < 0.0);
        }
        assert!(matches!(PhaseModel::perturbed_quadratic(2, 0.2), Err(Error::BadParams(_))));
    }

    #[test]
    fn registry() {
        assert!(matches!(builtin_phase("nope", &[], 2), Err(Error::UnknownName(_))));
        assert!(matches!(builtin_phase("aniso-quadratic", &[0.0], 2), Err(Error::BadParams(_))));
        assert!(matches!(builtin_phase("aniso-quadratic", &[-1.0], 2), Err(Error::BadParams(_))));
        assert_eq!(phase_from_spec("aniso-quadratic(0.25)", 2).unwrap().kind, PhaseKind::AnisoQuadratic { eps: 0.25 });
        assert_eq!(phase_from_spec("aniso-quadratic,0.25", 2).unwrap().kind, PhaseKind::AnisoQuadratic { eps: 0.25 });
        assert_eq!(amplitude_from_spec("shrinking-bump(0.75)", 1).unwrap().beta, Some(0.75));
        assert!(amplitude_from_spec("bump(0.5,0.6,0.0)", 2).is_err());
        assert!(amplitude_from_spec("bump(0.3,0.6,0.0)", 2).is_ok());
    }

    #[test]
    fn shrinking_bump_dilation() {
        let f = AmplitudeFamily::shrinking_bump(2, 0.75).unwrap();
        let lam = 1e4;
        let r = lam.powf(-0.25);
        assert_relative_eq!(f.support(lam).radius, r);
        assert_eq!(f.value(lam, &[0.0, 0.0]).norm(), 1.0);
        assert_eq!(f.value(lam, &[r, 0.0]).norm(), 0.0);
        assert!(f.value(lam, &[0.99 * r, 0.0]).norm() > 0.0);
        let mut sup: f64 = 0.0;
        for_box_grid(&[0.0, 0.0], r, 33, 2, |x| sup = sup.max(f.value(lam, x).norm()));
        assert_relative_eq!(sup, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lattice_chirp_structure() {
        let f = AmplitudeFamily::lattice_chirp(1).unwrap();
        let lam = 100.0;
        // centre of the packet at ν = 0.2 carries phase e^{-iλ|ν|²/2}
        let v = f.value(lam, &[0.2]);
        assert_relative_eq!(v.re, (-0.5 * lam * 0.04f64).cos(), epsilon = 1e-12);
        assert_relative_eq!(v.im, (-0.5 * lam * 0.04f64).sin(), epsilon = 1e-12);
        // between packets and outside |ν| < 1/2 it vanishes
        assert_eq!(f.value(lam, &[0.205]).norm(), 0.0);
        assert_eq!(f.value(lam, &[0.6]).norm(), 0.0);
    }

    #[test]
    fn hessian_cutoff_lives_near_the_fold() {
        let f = AmplitudeFamily::hessian_cutoff().unwrap();
        let lam: f64 = 1e4;
        let s = 8.0 * lam.sqrt();
        let x1 = 0.3;
        let on = [x1, 1.25 / s - x1 * x1];
        assert_relative_eq!(f.value(lam, &on).re, crate::phasekit::bumps::radial_bump(x1 * x1 + on[1] * on[1]));
        let below = [x1, -1.25 / s - x1 * x1];
        assert!(f.value(lam, &below).re > 0.0);
        assert_eq!(f.value(lam, &[x1, -x1 * x1]).re, 0.0);
        assert!(!f.may_be_nonzero(lam, &[0.0, 0.5], &[0.1, 0.6]));
        assert!(f.may_be_nonzero(lam, &[0.29, -0.1], &[0.31, 0.0]));
    }

    #[test]
    fn amplitudes_vanish_outside_support_and_obey_growth() {
        let lams = [1e2, 1e3, 1e4];
        let fams = [
            (AmplitudeFamily::shrinking_bump(1, 0.6).unwrap(), 4.0),
            (AmplitudeFamily::shrinking_bump(2, 0.75).unwrap(), 4.0),
            (AmplitudeFamily::hessian_cutoff().unwrap(), 1200.0),
            (AmplitudeFamily::lattice_chirp(1).unwrap(), 100.0),
        ];
        for (f, at) in fams {
            let w = f.self_test(&lams, at, 41).unwrap();
            assert!(w <= 1.0, "{}: ratio {w}", f.name);
        }
        for f in [AmplitudeFamily::bump(2, 0.5, Some(vec![0.2, 0.1])).unwrap(), AmplitudeFamily::zero(3).unwrap()] {
            assert_eq!(f.self_test(&[1.0], 1.0, 9).unwrap(), 0.0);
        }
    }

    #[test]
    fn amplitude_partials_match_finite_differences() {
        let f = AmplitudeFamily::shrinking_bump(2, 0.6).unwrap();
        let lam = 50.0;
        let x = [0.05, -0.08];
        let h = 1e-6;
        let d = f.mixed_partial(lam, &x, &[1, 0]).unwrap();
        let fd = (f.value(lam, &[x[0] + h, x[1]]) - f.value(lam, &[x[0] - h, x[1]])) / (2.0 * h);
        assert!((d - fd).norm() < 1e-5 * d.norm().max(1.0));
    }
}
