//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A jet of order `n` in `d` variables stores `c_α = ∂^α f(x₀) / α!` for every
//! multi-index `|α| ≤ n`. Arithmetic on jets is exact up to truncation, so any
//! function written generically over [`Scalar`] yields all mixed partials at once.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Number type accepted by the generic evaluators of phases and amplitudes.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant carrying the same shape as `self`.
    fn cst(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn recip(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powf(&self, p: f64) -> Self;

    fn zero_like(&self) -> Self {
        self.cst(0.0)
    }

    fn sqr(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn cst(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
}

/// Multi-index table for a given `(dim, order)`.
#[derive(Debug)]
pub struct Layout {
    pub dim: usize,
    pub order: usize,
    pub indices: Vec<Vec<usize>>,
    degree: Vec<usize>,
    lookup: Vec<u32>,
    // (i, j, k): α_i + α_j = α_k, restricted to |α_k| ≤ order
    products: Vec<(u32, u32, u32)>,
}

const NONE: u32 = u32::MAX;

impl Layout {
    fn build(dim: usize, order: usize) -> Self {
        let mut indices = Vec::new();
        for deg in 0..=order {
            push_degree(dim, deg, &mut Vec::new(), &mut indices);
        }
        let base = order + 1;
        let mut lookup = vec![NONE; base.pow(dim as u32)];
        for (i, a) in indices.iter().enumerate() {
            lookup[encode(a, base)] = i as u32;
        }
        let degree: Vec<usize> = indices.iter().map(|a| a.iter().sum()).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let s: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[encode(&s, base)]));
            }
        }
        Self { dim, order, indices, degree, lookup, products }
    }

    pub fn get(dim: usize, order: usize) -> Arc<Layout> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry((dim, order)).or_insert_with(|| Arc::new(Layout::build(dim, order))).clone()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        if alpha.len() != self.dim || alpha.iter().sum::<usize>() > self.order {
            return None;
        }
        let i = self.lookup[encode(alpha, self.order + 1)];
        (i != NONE).then_some(i as usize)
    }
}

fn encode(a: &[usize], base: usize) -> usize {
    a.iter().rev().fold(0, |acc, &x| acc * base + x)
}

fn push_degree(dim: usize, deg: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == dim - 1 {
        let mut a = prefix.clone();
        a.push(deg);
        out.push(a);
        return;
    }
    for k in (0..=deg).rev() {
        prefix.push(k);
        push_degree(dim, deg - k, prefix, out);
        prefix.pop();
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<Layout>,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(layout: &Arc<Layout>, v: f64) -> Self {
        let mut c = vec![0.0; layout.len()];
        c[0] = v;
        Self { layout: layout.clone(), c }
    }

    /// Independent variables `x_j` expanded around `x0`.
    pub fn variables(x0: &[f64], order: usize) -> Vec<Jet> {
        let d = x0.len();
        let layout = Layout::get(d, order);
        (0..d)
            .map(|j| {
                let mut v = Jet::constant(&layout, x0[j]);
                if order >= 1 {
                    let mut e = vec![0; d];
                    e[j] = 1;
                    v.c[layout.index_of(&e).expect("first-order index")] = 1.0;
                }
                v
            })
            .collect()
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// `∂^α f(x₀)`; zero when `|α|` exceeds the jet order.
    pub fn partial(&self, alpha: &[usize]) -> f64 {
        match self.layout.index_of(alpha) {
            Some(i) => self.c[i] * alpha.iter().map(|&a| factorial(a)).product::<f64>(),
            None => 0.0,
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        Jet { layout: self.layout.clone(), c: self.c.iter().zip(&other.c).map(|(a, b)| f(*a, *b)).collect() }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let mut c = vec![0.0; self.c.len()];
        for &(i, j, k) in &self.layout.products {
            let a = self.c[i as usize];
            if a != 0.0 {
                c[k as usize] += a * other.c[j as usize];
            }
        }
        Jet { layout: self.layout.clone(), c }
    }

    /// `Σ_k t_k (self − c₀)^k` for the Taylor coefficients `t_k` of a univariate function at `c₀`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let n = self.layout.order;
        let mut acc = Jet::constant(&self.layout, taylor[n]);
        for k in (0..n).rev() {
            acc = acc.mul_jet(&h);
            acc.c[0] += taylor[k];
        }
        acc
    }

    fn binomial_series(&self, p: f64) -> Jet {
        let a0 = self.c[0];
        let n = self.layout.order;
        let mut t = Vec::with_capacity(n + 1);
        let mut coef = 1.0;
        for k in 0..=n {
            t.push(coef * a0.powf(p - k as f64));
            coef *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&t)
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.layout.degree[i]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.mul_jet(&o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.c.iter_mut().for_each(|a| *a = -*a);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, v: f64) -> Jet {
        self.c[0] += v;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, v: f64) -> Jet {
        self.c[0] -= v;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, v: f64) -> Jet {
        self.c.iter_mut().for_each(|a| *a *= v);
        self
    }
}

impl Scalar for Jet {
    fn cst(&self, v: f64) -> Self {
        Jet::constant(&self.layout, v)
    }

    fn value(&self) -> f64 {
        self.c[0]
    }

    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let t: Vec<f64> = (0..=self.layout.order).map(|k| e / factorial(k)).collect();
        self.compose(&t)
    }

    fn recip(&self) -> Self {
        self.binomial_series(-1.0)
    }

    fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let t: Vec<f64> = (0..=self.layout.order).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&t)
    }

    fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let t: Vec<f64> = (0..=self.layout.order).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&t)
    }

    fn powf(&self, p: f64) -> Self {
        self.binomial_series(p)
    }
}

/// All multi-indices of dimension `dim` with total degree exactly `deg`.
pub fn multi_indices(dim: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    push_degree(dim, deg, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn layout_counts() {
        assert_eq!(Layout::get(1, 5).len(), 6);
        assert_eq!(Layout::get(2, 3).len(), 10);
        assert_eq!(Layout::get(3, 4).len(), 35);
        let l = Layout::get(2, 3);
        assert_eq!(l.indices[0], vec![0, 0]);
        assert_eq!(l.index_of(&[2, 1]).map(|i| l.indices[i].clone()), Some(vec![2, 1]));
        assert_eq!(l.index_of(&[3, 1]), None);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }

    #[test]
    fn polynomial_partials_are_exact() {
        // f = x² y³ at (2, -1)
        let v = Jet::variables(&[2.0, -1.0], 6);
        let f = v[0].sqr() * v[1].clone() * v[1].sqr();
        assert_eq!(f.value(), -4.0);
        assert_eq!(f.partial(&[1, 0]), -4.0);
        assert_eq!(f.partial(&[0, 1]), 12.0);
        assert_eq!(f.partial(&[2, 3]), 12.0);
        assert_eq!(f.partial(&[1, 2]), -(2.0 * 2.0 * 3.0 * 2.0));
        assert_eq!(f.partial(&[3, 0]), 0.0);
    }

    #[test]
    fn elementary_functions() {
        let x = &Jet::variables(&[0.3], 8)[0];
        let e = x.exp();
        let s = x.sin();
        let c = x.cos();
        let r = (x.clone() + 1.0).recip();
        let p = (x.clone() + 1.0).powf(0.5);
        for k in 0..=8 {
            assert_relative_eq!(e.partial(&[k]), 0.3f64.exp(), max_relative = 1e-13);
            let sd = [0.3f64.sin(), 0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos()][k % 4];
            let cd = [0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos(), 0.3f64.sin()][k % 4];
            assert_relative_eq!(s.partial(&[k]), sd, max_relative = 1e-12);
            assert_relative_eq!(c.partial(&[k]), cd, max_relative = 1e-12);
            let rd = (-1f64).powi(k as i32) * factorial(k) * 1.3f64.powi(-(k as i32) - 1);
            assert_relative_eq!(r.partial(&[k]), rd, max_relative = 1e-12);
        }
        assert_relative_eq!(p.partial(&[2]), -0.25 * 1.3f64.powf(-1.5), max_relative = 1e-13);
    }

    #[test]
    fn mixed_partial_of_composite_matches_finite_difference() {
        let f = |x: f64, y: f64| (x * y).sin() * (x - y * y).exp();
        let v = Jet::variables(&[0.4, -0.7], 4);
        let j = (v[0].clone() * v[1].clone()).sin() * (v[0].clone() - v[1].sqr()).exp();
        let h = 1e-4;
        let fd =
            (f(0.4 + h, -0.7 + h) - f(0.4 + h, -0.7 - h) - f(0.4 - h, -0.7 + h) + f(0.4 - h, -0.7 - h)) / (4.0 * h * h);
        assert_relative_eq!(j.partial(&[1, 1]), fd, max_relative = 1e-6);
    }
}
