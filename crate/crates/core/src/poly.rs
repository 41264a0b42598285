//! Sparse real polynomials with exact moments under the correlated-pairs Gaussian.
//!
//! Features `2j` and `2j+1` form a pair with correlation `ρ`; pairs are independent and every
//! marginal is standard normal. A trailing unpaired feature (odd `d`) is an independent standard normal.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::subset::{binomial, FeatureSet};

/// `Σ_m c_m Π_i x_i^{m_i}`; exponents keyed by per-feature powers.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    d: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

/// `E[Z^k]` for a standard normal `Z`.
pub fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        (1..k).step_by(2).map(|v| v as f64).product()
    }
}

impl Polynomial {
    pub fn zero(d: usize) -> Self {
        Polynomial { d, terms: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        let mut p = Self::zero(d);
        p.add_term(vec![0; d], c);
        p
    }

    /// The coordinate `x_i`.
    pub fn var(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        let mut p = Self::zero(d);
        p.add_term(e, 1.0);
        p
    }

    /// `c · Π_{i∈S} x_i`.
    pub fn monomial(d: usize, s: FeatureSet, c: f64) -> Self {
        let mut e = vec![0; d];
        for i in s.indices() {
            e[i] = 1;
        }
        let mut p = Self::zero(d);
        p.add_term(e, c);
        p
    }

    pub fn from_terms(d: usize, terms: impl IntoIterator<Item = (Vec<u8>, f64)>) -> Self {
        let mut p = Self::zero(d);
        for (e, c) in terms {
            assert_eq!(e.len(), d, "exponent length");
            p.add_term(e, c);
        }
        p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<u8>, c: f64) {
        if c == 0.0 {
            return;
        }
        *self.terms.entry(e).or_insert(0.0) += c;
    }

    /// Drops exact cancellations so supports stay exact.
    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    /// Features with a non-zero exponent in some term.
    pub fn support(&self) -> FeatureSet {
        let mut s = FeatureSet::EMPTY;
        for e in self.terms.keys() {
            for (i, &p) in e.iter().enumerate() {
                if p > 0 {
                    s = s.with(i);
                }
            }
        }
        s
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().map(|&p| p as u32).sum()).max().unwrap_or(0)
    }

    /// Every feature appears with power at most one.
    pub fn is_multilinear(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&p| p <= 1))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .fold(*c, |acc, (i, &p)| acc * x[i].powi(p as i32))
            })
            .sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        Polynomial { d: self.d, terms: self.terms.iter().map(|(e, c)| (e.clone(), c * a)).collect() }.prune()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out.prune()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.d);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u8> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out.prune()
    }

    /// Drops terms with `|c| ≤ tol`.
    pub fn chop(&self, tol: f64) -> Self {
        Polynomial {
            d: self.d,
            terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(e, c)| (e.clone(), *c)).collect(),
        }
    }

    /// `E[P(X) | X_S = x_S]` under the pairs world, as a polynomial in the observed features.
    pub fn conditional_expectation(&self, rho: f64, observed: FeatureSet) -> Self {
        let d = self.d;
        let sigma = (1.0 - rho * rho).max(0.0).sqrt();
        let mut out = Self::zero(d);
        for (e, c) in &self.terms {
            // expand pair by pair; each factor is a small polynomial in the observed pair members
            let mut acc: Vec<(Vec<u8>, f64)> = vec![(vec![0; d], *c)];
            let mut i = 0;
            while i < d {
                let factor: Vec<(Vec<(usize, u8)>, f64)> = if i + 1 < d {
                    pair_factor(i, e[i], e[i + 1], observed.contains(i), observed.contains(i + 1), rho, sigma)
                } else {
                    single_factor(i, e[i], observed.contains(i))
                };
                let mut next = Vec::with_capacity(acc.len() * factor.len());
                for (ae, ac) in &acc {
                    for (fe, fc) in &factor {
                        if *fc == 0.0 {
                            continue;
                        }
                        let mut ne = ae.clone();
                        for &(v, p) in fe {
                            ne[v] += p;
                        }
                        next.push((ne, ac * fc));
                    }
                }
                acc = next;
                i += 2;
            }
            for (ae, ac) in acc {
                out.add_term(ae, ac);
            }
        }
        out.prune()
    }

    /// `E[P(X)]` under the pairs world.
    pub fn expectation(&self, rho: f64) -> f64 {
        self.conditional_expectation(rho, FeatureSet::EMPTY)
            .terms
            .values()
            .sum()
    }

    /// `E[P(X)²]` under the pairs world.
    pub fn mean_square(&self, rho: f64) -> f64 {
        self.mul(self).expectation(rho)
    }

    pub fn variance(&self, rho: f64) -> f64 {
        let m = self.expectation(rho);
        (self.mean_square(rho) - m * m).max(0.0)
    }
}

fn single_factor(i: usize, a: u8, obs: bool) -> Vec<(Vec<(usize, u8)>, f64)> {
    if a == 0 {
        vec![(vec![], 1.0)]
    } else if obs {
        vec![(vec![(i, a)], 1.0)]
    } else {
        vec![(vec![], normal_moment(a as u32))]
    }
}

/// `E[X_p^a X_q^b | observed members]` with `X_q = ρ X_p + σ Z` (and symmetrically).
fn pair_factor(p: usize, a: u8, b: u8, obs_p: bool, obs_q: bool, rho: f64, sigma: f64) -> Vec<(Vec<(usize, u8)>, f64)> {
    let q = p + 1;
    if a == 0 && b == 0 {
        return vec![(vec![], 1.0)];
    }
    match (obs_p, obs_q) {
        (true, true) => vec![(vec![(p, a), (q, b)], 1.0)],
        (true, false) => conditional_power(p, a, b, rho, sigma),
        (false, true) => conditional_power(q, b, a, rho, sigma),
        (false, false) => {
            // E[X_p^a (ρX_p + σZ)^b]
            let mut v = 0.0;
            for j in 0..=b as u32 {
                v += binomial(b as usize, j as usize)
                    * rho.powi(j as i32)
                    * sigma.powi((b as u32 - j) as i32)
                    * normal_moment(b as u32 - j)
                    * normal_moment(a as u32 + j);
            }
            vec![(vec![], v)]
        }
    }
}

/// `x_o^a · E[(ρ x_o + σ Z)^b]` as a polynomial in the observed member `o`.
fn conditional_power(o: usize, a: u8, b: u8, rho: f64, sigma: f64) -> Vec<(Vec<(usize, u8)>, f64)> {
    (0..=b as u32)
        .map(|j| {
            let coef = binomial(b as usize, j as usize)
                * rho.powi(j as i32)
                * sigma.powi((b as u32 - j) as i32)
                * normal_moment(b as u32 - j);
            let power = a as u32 + j;
            let e = if power > 0 { vec![(o, power as u8)] } else { vec![] };
            (e, coef)
        })
        .collect()
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "·x{}", i + 1)?,
                    _ => write!(f, "·x{}^{p}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(d: usize, i: usize) -> Polynomial {
        Polynomial::var(d, i)
    }

    #[test]
    fn normal_moments() {
        assert_eq!(normal_moment(0), 1.0);
        assert_eq!(normal_moment(2), 1.0);
        assert_eq!(normal_moment(4), 3.0);
        assert_eq!(normal_moment(6), 15.0);
        assert_eq!(normal_moment(5), 0.0);
    }

    #[test]
    fn two_dimensional_conditionals() {
        let rho = 0.4;
        let f = x(2, 0).add(&x(2, 0).mul(&x(2, 1)));
        let fx = f.conditional_expectation(rho, FeatureSet::singleton(0));
        let fy = f.conditional_expectation(rho, FeatureSet::singleton(1));
        for &(a, b) in &[(0.3, -1.2), (2.0, 0.5)] {
            assert!((fx.eval(&[a, b]) - (a + rho * a * a)).abs() < 1e-12);
            assert!((fy.eval(&[a, b]) - (rho * b + rho * b * b)).abs() < 1e-12);
        }
        assert!((f.expectation(rho) - rho).abs() < 1e-12);
        assert!((f.mean_square(rho) - (2.0 + 2.0 * rho * rho)).abs() < 1e-12);
    }

    #[test]
    fn squared_conditional_includes_noise() {
        // E[X_2^2 | x_1] = ρ² x_1² + 1 − ρ²
        let rho = 0.6;
        let f = x(2, 1).mul(&x(2, 1));
        let c = f.conditional_expectation(rho, FeatureSet::singleton(0));
        assert!((c.eval(&[1.5, 0.0]) - (rho * rho * 2.25 + 1.0 - rho * rho)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_pair_copies_partner() {
        let f = x(2, 0).mul(&x(2, 1));
        let c = f.conditional_expectation(1.0, FeatureSet::singleton(0));
        assert!((c.eval(&[1.7, 9.0]) - 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn tower_property() {
        let d = 4;
        let f = x(d, 0).mul(&x(d, 1)).mul(&x(d, 2)).add(&x(d, 3).mul(&x(d, 3)).mul(&x(d, 0)));
        let rho = 0.7;
        let inner = f.conditional_expectation(rho, FeatureSet::from_indices(&[0, 2, 3]));
        let outer = inner.conditional_expectation(rho, FeatureSet::from_indices(&[0]));
        let direct = f.conditional_expectation(rho, FeatureSet::from_indices(&[0]));
        let probe = [0.4, 0.0, 0.0, 0.0];
        assert!((outer.eval(&probe) - direct.eval(&probe)).abs() < 1e-12);
    }

    #[test]
    fn cancellation_prunes_terms() {
        let p = x(3, 1).sub(&x(3, 1));
        assert!(p.is_empty());
        assert_eq!(p.support(), FeatureSet::EMPTY);
        assert_eq!(format!("{p:?}"), "0");
    }
}
