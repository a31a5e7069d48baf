//! Smooth compactly supported cutoffs shared by amplitudes and packets.

use crate::jet::Scalar;

/// Half-width of the 1D generator behind the partition bump.
pub const PARTITION_HALF_WIDTH: f64 = 0.55;

/// `exp(1 − 1/(1 − s))` for `s = |x|²/ρ² < 1`, zero otherwise. Peak value 1 at `s = 0`.
pub fn radial_bump<S: Scalar>(s: S) -> S {
    if s.value() >= 1.0 {
        return s.zero_like();
    }
    let inv = (-s.clone() + 1.0).recip();
    (-inv + 1.0).exp()
}

/// Bump supported on `[1/2, 2]`, peak 1 at `t = 5/4`.
pub fn eta<S: Scalar>(t: S) -> S {
    let u = (t - 1.25) * (1.0 / 0.75);
    radial_bump(u.sqr())
}

fn generator<S: Scalar>(t: S) -> S {
    let a = PARTITION_HALF_WIDTH;
    let s = (t * (1.0 / a)).sqr();
    if s.value() >= 1.0 {
        return s.zero_like();
    }
    (-(-s + 1.0).recip()).exp()
}

/// 1D partition profile `ϑ = g / Σ_m g(· − m)`; `Σ_m ϑ(t − m) = 1` on ℝ and `supp ϑ ⊂ [−0.55, 0.55]`.
pub fn partition_1d<S: Scalar>(t: S) -> S {
    if t.value().abs() >= PARTITION_HALF_WIDTH {
        return t.zero_like();
    }
    let g0 = generator(t.clone());
    let den = generator(t.clone() - 1.0) + g0.clone() + generator(t + 1.0);
    g0 * den.recip()
}

/// Product partition bump `φ(x) = Π ϑ(x_j)`, supported in `[−0.55, 0.55]^d ⊂ B(0,1)` for `d ≤ 3`.
pub fn partition_bump(x: &[f64]) -> f64 {
    x.iter().map(|&t| partition_1d(t)).product()
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Hull bump `φ̃`: exactly 1 on `B(0,1)`, zero outside `B(0,2)`.
pub fn hull_bump(x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    hull_bump_radial(r)
}

pub fn hull_bump_radial(r: f64) -> f64 {
    smooth_step(2.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn partition_sums_to_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t: f64 = rng.random_range(-3.0..3.0);
            let s: f64 = (-5..=5).map(|m| partition_1d(t - m as f64)).sum();
            assert!((s - 1.0).abs() < 1e-14, "t={t} s={s}");
        }
        for d in 1..=3usize {
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let mut total = 0.0;
                let span = -3i64..=3;
                let pts: Vec<Vec<i64>> = match d {
                    1 => span.clone().map(|a| vec![a]).collect(),
                    2 => span.clone().flat_map(|a| span.clone().map(move |b| vec![a, b])).collect(),
                    _ => span
                        .clone()
                        .flat_map(|a| span.clone().flat_map(move |b| (-3i64..=3).map(move |c| vec![a, b, c])))
                        .collect(),
                };
                for m in pts {
                    let y: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a - *b as f64).collect();
                    total += partition_bump(&y);
                }
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn supports() {
        assert_eq!(partition_1d(0.55), 0.0);
        assert!(partition_1d(0.54) > 0.0);
        assert_eq!(radial_bump(1.0), 0.0);
        assert_eq!(radial_bump(0.0), 1.0);
        assert_eq!(eta(0.5), 0.0);
        assert_eq!(eta(2.0), 0.0);
        assert_eq!(eta(1.25), 1.0);
        assert_eq!(hull_bump(&[0.6, 0.8]), 1.0);
        assert_eq!(hull_bump(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(hull_bump(&[2.0, 0.0]), 0.0);
        let mid = hull_bump(&[1.5]);
        assert!((mid - 0.5).abs() < 1e-15);
    }
}
