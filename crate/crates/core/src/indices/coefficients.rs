//! Möbius-to-index coefficients for the interaction-index families.
//!
//! Every family maps purified effects to an index of size `s` by
//! `φ_S = Σ_{T⊇S} c(s, |T|, k) · f̃_T`. Coefficients are exact rationals.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::binomial_exact;

pub type Rational = Ratio<i128>;

/// Interaction-index families expressible as Möbius coefficient rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexFamily {
    /// Shapley interaction index.
    Sii,
    /// Shapley-Taylor interaction index.
    Taylor,
    /// n-Shapley values.
    NShapley,
    /// Faithful Shapley interaction index.
    Faith,
}

impl IndexFamily {
    pub const ALL: [IndexFamily; 4] = [IndexFamily::Sii, IndexFamily::Taylor, IndexFamily::NShapley, IndexFamily::Faith];
}

fn binom(n: u32, k: u32) -> i128 {
    binomial_exact(n as u64, k as u64)
}

/// Bernoulli numbers `B_0..=B_n` with the `B_1 = −1/2` convention.
pub fn bernoulli_numbers(n: usize) -> Vec<Rational> {
    let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(Rational::from_integer(1));
            continue;
        }
        let mut acc = Rational::from_integer(0);
        for (j, bj) in b.iter().enumerate() {
            acc += *bj * Rational::from_integer(binom(m as u32 + 1, j as u32));
        }
        b.push(-acc / Rational::from_integer(m as i128 + 1));
    }
    b
}

/// Coefficient applied to a purified effect of size `t` when computing an index of size `s` at order `k`.
pub fn index_coefficient(family: IndexFamily, s: u32, t: u32, k: u32) -> Result<Rational> {
    if s == 0 || s > k || t < s {
        return Err(Error::InvalidParameter(format!(
            "coefficient needs 1 <= s <= k and s <= t (s={s}, t={t}, k={k})"
        )));
    }
    let one = Rational::from_integer(1);
    let zero = Rational::from_integer(0);
    Ok(match family {
        IndexFamily::Sii => Rational::new(1, (t - s + 1) as i128),
        IndexFamily::Taylor => {
            if s < k {
                if t == s { one } else { zero }
            } else {
                Rational::new(1, binom(t, k))
            }
        }
        IndexFamily::NShapley => {
            let top = k.min(t) - s;
            let bern = bernoulli_numbers(top as usize);
            (0..=top)
                .map(|j| bern[j as usize] * Rational::new(binom(t - s, j), (t - s - j + 1) as i128))
                .sum()
        }
        IndexFamily::Faith => {
            if t == s {
                one
            } else if t <= k {
                zero
            } else {
                let sign = if (k - s) % 2 == 0 { 1 } else { -1 };
                Rational::new(sign * binom(k + s - 1, s - 1) * binom(t - s - 1, k - s), binom(t + k - 1, k))
            }
        }
    })
}

/// Float coefficient table `c[s][t]` for `1 <= s <= k`, `s <= t <= d`; other entries are zero.
pub(crate) fn coefficient_grid(family: IndexFamily, k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![vec![0.0; d + 1]; k + 1];
    for s in 1..=k {
        for t in s..=d {
            let r = index_coefficient(family, s as u32, t as u32, k as u32).expect("valid range");
            grid[s][t] = *r.numer() as f64 / *r.denom() as f64;
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn worked_examples() {
        assert_eq!(index_coefficient(IndexFamily::Faith, 2, 3, 2).unwrap(), r(1, 2));
        assert_eq!(index_coefficient(IndexFamily::Faith, 1, 4, 2).unwrap(), r(-1, 5));
        assert_eq!(index_coefficient(IndexFamily::NShapley, 1, 3, 2).unwrap(), r(-1, 6));
        assert_eq!(index_coefficient(IndexFamily::Taylor, 2, 4, 2).unwrap(), r(1, 6));
        assert_eq!(index_coefficient(IndexFamily::Sii, 2, 3, 2).unwrap(), r(1, 2));
    }

    #[test]
    fn order_one_is_shapley_for_every_family() {
        for fam in IndexFamily::ALL {
            for t in 1..=25 {
                assert_eq!(index_coefficient(fam, 1, t, 1).unwrap(), r(1, t as i128));
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(index_coefficient(IndexFamily::Sii, 0, 1, 1).is_err());
        assert!(index_coefficient(IndexFamily::Sii, 3, 4, 2).is_err());
        assert!(index_coefficient(IndexFamily::Faith, 2, 1, 2).is_err());
    }

    #[test]
    fn bernoulli_values() {
        let b = bernoulli_numbers(6);
        assert_eq!(b[1], r(-1, 2));
        assert_eq!(b[2], r(1, 6));
        assert_eq!(b[3], r(0, 1));
        assert_eq!(b[4], r(-1, 30));
        assert_eq!(b[6], r(1, 42));
    }

    #[test]
    fn faith_claim_matches_original_mobius_form() {
        // (−1)^{k−s} s/(k+s) C(k,s) C(t−1,k) / C(t+k−1,k+s)
        for k in 1..=6u32 {
            for s in 1..=k {
                for t in (k + 1)..=22 {
                    let sign = if (k - s) % 2 == 0 { 1 } else { -1 };
                    let original = r(sign * s as i128, (k + s) as i128)
                        * r(binom(k, s) * binom(t - 1, k), binom(t + k - 1, k + s));
                    assert_eq!(index_coefficient(IndexFamily::Faith, s, t, k).unwrap(), original);
                }
            }
        }
    }

    #[test]
    fn n_shapley_keeps_low_order_effects_whole() {
        for k in 1..=6u32 {
            for s in 1..=k {
                for t in s..=k {
                    let expect = if t == s { r(1, 1) } else { r(0, 1) };
                    assert_eq!(index_coefficient(IndexFamily::NShapley, s, t, k).unwrap(), expect);
                }
            }
        }
    }
}
