//! Gauss–Legendre nodes and weights on `[−1, 1]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n).or_insert_with(|| Arc::new(build(n))).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_polynomials() {
        for n in [4usize, 7, 12, 20] {
            let r = gauss_legendre(n);
            let ws: f64 = r.weights.iter().sum();
            assert_relative_eq!(ws, 2.0, epsilon = 1e-14);
            for k in 0..(2 * n) {
                let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn known_three_point_rule() {
        let r = gauss_legendre(3);
        assert_relative_eq!(r.nodes[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-15);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}
