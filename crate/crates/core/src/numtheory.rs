//! Exact integer machinery for the sampling schedules.
//!
//! Everything here works on checked `i64` arithmetic. Rates up to `10^7`
//! combined with lag and snapshot counts up to `10^4` stay far inside the
//! representable range; anything that would not is reported as
//! [`Error::Overflow`] instead of wrapping.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

/// Greatest common divisor of `a` and `b`, always nonnegative.
pub fn gcd(a: i64, b: i64) -> Result<u64> {
    if a == 0 && b == 0 {
        return Err(Error::domain("gcd(0, 0) is undefined"));
    }
    Ok(gcd_u(a.unsigned_abs(), b.unsigned_abs()))
}

pub(crate) fn gcd_u(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Extended Euclid: returns `(g, x, y)` with `a·x + b·y = g`, `g ≥ 0`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a as i128, b as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (old_r, old_s, old_t) = (-old_r, -old_s, -old_t);
    }
    (old_r as i64, old_s as i64, old_t as i64)
}

/// Smallest positive `x` with `a·x ≡ 1 (mod m)`.
///
/// For `m = 1` every integer qualifies and the answer is `1`.
pub fn mod_inverse(a: i64, m: i64) -> Result<i64> {
    if m <= 0 {
        return Err(Error::domain(format!("modulus must be positive, got {m}")));
    }
    if m == 1 {
        return Ok(1);
    }
    let (g, x, _) = extended_gcd(a.rem_euclid(m), m);
    if g != 1 {
        return Err(Error::NotCoprime(a, m));
    }
    let inv = x.rem_euclid(m);
    Ok(if inv == 0 { m } else { inv })
}

/// `(alpha, beta)` with `alpha·M1 − beta·M2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BezoutPair {
    pub alpha: i64,
    pub beta: i64,
}

/// Bézout coefficients for a co-prime rate pair: `alpha` is the inverse of
/// `m1` modulo `m2`, `beta = (alpha·m1 − 1) / m2`.
pub fn bezout_coprime_pair(m1: i64, m2: i64) -> Result<BezoutPair> {
    if m1 < 2 || m2 < 2 {
        return Err(Error::domain(format!(
            "rates must be at least 2, got ({m1}, {m2})"
        )));
    }
    if gcd_u(m1 as u64, m2 as u64) != 1 {
        return Err(Error::NotCoprime(m1, m2));
    }
    let alpha = mod_inverse(m1, m2)?;
    let num = alpha
        .checked_mul(m1)
        .and_then(|v| v.checked_sub(1))
        .ok_or(Error::Overflow("bezout_coprime_pair"))?;
    Ok(BezoutPair {
        alpha,
        beta: num / m2,
    })
}

/// Zero-sum coefficient pair for a sampler triple: `a·M = 0`, `b·M = 1`,
/// `Σa = Σb = 0`.
///
/// Exactly one position carries a negative coefficient in both `a` and
/// `b`; that sampler is read conjugated by the third-order estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DioSolution3 {
    pub rates: [i64; 3],
    pub a: [i64; 3],
    pub b: [i64; 3],
}

impl DioSolution3 {
    /// Index of the conjugated sampler (the negative coefficient).
    pub fn negative_index(&self) -> usize {
        self.a.iter().position(|&v| v < 0).unwrap_or(1)
    }

    /// Largest coefficient magnitude over `a` and `b`.
    pub fn max_coefficient(&self) -> i64 {
        self.a
            .iter()
            .chain(self.b.iter())
            .map(|v| v.abs())
            .max()
            .unwrap_or(0)
    }

    /// Checks the defining identities exactly.
    pub fn is_valid(&self) -> bool {
        let dot = |c: &[i64; 3]| -> Option<i64> {
            c.iter()
                .zip(self.rates.iter())
                .try_fold(0i64, |acc, (x, m)| acc.checked_add(x.checked_mul(*m)?))
        };
        let neg = self.negative_index();
        dot(&self.a) == Some(0)
            && dot(&self.b) == Some(1)
            && self.a.iter().sum::<i64>() == 0
            && self.b.iter().sum::<i64>() == 0
            && self.a.iter().filter(|&&v| v < 0).count() == 1
            && self.b[neg] < 0
            && self.b.iter().filter(|&&v| v < 0).count() == 1
    }
}

/// Canonical zero-sum solution for three distinct rates.
///
/// With the rates sorted descending as `M(1) > M(2) > M(3)` the middle rate
/// takes the negative coefficient:
/// `a = (M(2)−M(3), −(M(1)−M(3)), M(1)−M(2))`, `b(1)` is the smallest
/// positive inverse of `M(1)−M(2)` modulo `M(2)−M(3)`,
/// `b(3) = (b(1)(M(1)−M(2)) − 1)/(M(2)−M(3))` and `b(2) = −b(1) − b(3)`.
/// The result is returned in the caller's rate order.
pub fn solve_dio3_zero_sum(rates: [i64; 3]) -> Result<DioSolution3> {
    if rates.iter().any(|&m| m <= 0) {
        return Err(Error::domain(format!("rates must be positive: {rates:?}")));
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| rates[j].cmp(&rates[i]));
    let (hi, mid, lo) = (rates[order[0]], rates[order[1]], rates[order[2]]);
    if hi == mid || mid == lo {
        return Err(Error::domain(format!("rates must be distinct: {rates:?}")));
    }
    let upper = hi - mid;
    let lower = mid - lo;
    let g = gcd_u(upper as u64, lower as u64) as i64;
    if g != 1 {
        return Err(Error::NoZeroSumSolution(rates, g));
    }
    let b_hi = mod_inverse(upper, lower)?;
    let b_lo = b_hi
        .checked_mul(upper)
        .map(|v| (v - 1) / lower)
        .ok_or(Error::Overflow("solve_dio3_zero_sum"))?;
    let sorted_a = [lower, -(hi - lo), upper];
    let sorted_b = [b_hi, -b_hi - b_lo, b_lo];
    let mut a = [0i64; 3];
    let mut b = [0i64; 3];
    for (slot, &idx) in order.iter().enumerate() {
        a[idx] = sorted_a[slot];
        b[idx] = sorted_b[slot];
    }
    Ok(DioSolution3 { rates, a, b })
}

/// Sampling indices `m = k·b + l·a` realizing lag `k` with snapshot `l`.
///
/// `m·M = k` holds exactly; the negative entry marks the conjugated
/// sampler, whose physical index is `|m|`. `k = 0` is accepted and yields
/// the zero-lag term.
pub fn lag_solution(sol: &DioSolution3, k: i64, l: i64) -> Result<[i64; 3]> {
    if k < 0 || l < 1 {
        return Err(Error::domain(format!(
            "lag must be >= 0 and snapshot >= 1, got k={k}, l={l}"
        )));
    }
    let mut m = [0i64; 3];
    for ((slot, &b), &a) in m.iter_mut().zip(&sol.b).zip(&sol.a) {
        *slot = k
            .checked_mul(b)
            .and_then(|x| l.checked_mul(a).and_then(|y| x.checked_add(y)))
            .ok_or(Error::Overflow("lag_solution"))?;
    }
    Ok(m)
}

/// A sampler triple (1-based indices into the rate family) and its solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogTriple {
    pub indices: [usize; 3],
    pub solution: DioSolution3,
}

/// All solvable triples for the consecutive family `M_i = i + Γ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TripleCatalog {
    pub n: usize,
    pub gamma: i64,
    pub triples: Vec<CatalogTriple>,
}

impl TripleCatalog {
    pub fn rate(&self, index: usize) -> i64 {
        index as i64 + self.gamma
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// `floor(n(n−1)(n−2)/π²)`, the guaranteed minimum catalog size.
    pub fn guaranteed_floor(n: usize) -> u64 {
        let n = n as f64;
        (n * (n - 1.0) * (n - 2.0) / (std::f64::consts::PI * std::f64::consts::PI)).floor() as u64
    }
}

/// Enumerates every unordered triple of `{1..n}` whose zero-sum system is
/// solvable under rates `M_i = i + gamma`.
///
/// The co-primality of the two differences does not depend on which rate
/// is taken as the middle one (`gcd(x, y) = gcd(x, x + y)`), so one test
/// per triple suffices.
pub fn coprime_triples(n: usize, gamma: i64) -> Result<TripleCatalog> {
    if n < 3 {
        return Err(Error::domain(format!("need at least 3 samplers, got {n}")));
    }
    if gamma < 0 {
        return Err(Error::domain(format!("gamma must be >= 0, got {gamma}")));
    }
    let mut triples = Vec::new();
    for i1 in 1..=n {
        for i2 in i1 + 1..=n {
            for i3 in i2 + 1..=n {
                if gcd_u((i2 - i1) as u64, (i3 - i2) as u64) != 1 {
                    continue;
                }
                let rates = [i1 as i64 + gamma, i2 as i64 + gamma, i3 as i64 + gamma];
                let solution = solve_dio3_zero_sum(rates)?;
                triples.push(CatalogTriple {
                    indices: [i1, i2, i3],
                    solution,
                });
            }
        }
    }
    Ok(TripleCatalog { n, gamma, triples })
}

fn binomial3(n: u64) -> u64 {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Both sides of the parity-based triple-count bound, side by side.
///
/// Left: `C(n,3) − C(n_even,3) − C(n−n_even,3)` (triples that are not all
/// of one parity). Right: `n(n−1)(n−2)/8`. The left side can exceed the
/// right for small or balanced inputs, so no ordering is asserted.
pub fn triple_count_bounds(n: u64, n_even: u64) -> Result<(u64, Ratio<u64>)> {
    if n_even > n {
        return Err(Error::domain(format!("n_even={n_even} exceeds n={n}")));
    }
    let left = binomial3(n) - binomial3(n_even) - binomial3(n - n_even);
    let right = if n < 2 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(n * (n - 1) * (n - 2), 8)
    };
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_examples() {
        assert_eq!(gcd(2, 3).unwrap(), 1);
        assert_eq!(gcd(12, 18).unwrap(), 6);
        assert_eq!(gcd(5 + 1_000_000, 2 + 1_000_000).unwrap(), 3);
        assert_eq!(gcd(-12, 18).unwrap(), 6);
        assert_eq!(gcd(0, 7).unwrap(), 7);
        assert!(matches!(gcd(0, 0), Err(Error::Domain(_))));
    }

    // Modular inverse by enumeration, independent of extended Euclid.
    fn inverse_by_search(a: i64, m: i64) -> i64 {
        (1..=m).find(|x| (a * x) % m == 1 % m).unwrap()
    }

    #[test]
    fn bezout_examples() {
        let p = bezout_coprime_pair(2, 3).unwrap();
        assert_eq!((p.alpha, p.beta), (2, 1));
        assert_eq!(p.alpha * 2 - p.beta * 3, 1);
        let p = bezout_coprime_pair(3, 5).unwrap();
        assert_eq!((p.alpha, p.beta), (2, 1));
        assert_eq!(inverse_by_search(3, 5), 2);
        assert_eq!(bezout_coprime_pair(4, 6), Err(Error::NotCoprime(4, 6)));
        assert!(matches!(bezout_coprime_pair(1, 6), Err(Error::Domain(_))));
    }

    #[test]
    fn bezout_ranges() {
        for m1 in 2..40 {
            for m2 in 2..40 {
                if gcd_u(m1 as u64, m2 as u64) != 1 {
                    continue;
                }
                let p = bezout_coprime_pair(m1, m2).unwrap();
                assert_eq!(p.alpha, inverse_by_search(m1, m2));
                assert!(p.alpha > 0 && p.alpha <= m2);
                assert!(p.beta >= 0 && p.beta < m1);
            }
        }
    }

    #[test]
    fn dio3_reference_triple() {
        let s = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        assert_eq!(s.a, [2, -3, 1]);
        assert_eq!(s.b, [1, -2, 1]);
        assert!(s.is_valid());
        assert_eq!(s.negative_index(), 1);

        let shifted = solve_dio3_zero_sum([9, 10, 12]).unwrap();
        assert_eq!((shifted.a, shifted.b), (s.a, s.b));
    }

    #[test]
    fn dio3_input_order_is_preserved() {
        let s = solve_dio3_zero_sum([5, 2, 3]).unwrap();
        assert_eq!(s.a, [1, 2, -3]);
        assert_eq!(s.b, [1, 1, -2]);
        assert!(s.is_valid());
    }

    #[test]
    fn dio3_errors() {
        assert_eq!(
            solve_dio3_zero_sum([4, 6, 8]),
            Err(Error::NoZeroSumSolution([4, 6, 8], 2))
        );
        assert!(matches!(
            solve_dio3_zero_sum([4, 4, 5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solve_dio3_zero_sum([0, 4, 5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lag_solution_examples() {
        let s = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        assert_eq!(lag_solution(&s, 1, 1).unwrap(), [3, -5, 2]);
        assert_eq!(lag_solution(&s, 2, 1).unwrap(), [4, -7, 3]);
        let (kk, ll) = (37, 41);
        for k in 1..=kk {
            for l in 1..=ll {
                let m = lag_solution(&s, k, l).unwrap();
                assert!(m.iter().all(|v| v.abs() <= 2 * kk + 3 * ll));
                assert_eq!(m[0] * 2 + m[1] * 3 + m[2] * 5, k);
            }
        }
        assert!(lag_solution(&s, 1, 0).is_err());
    }

    #[test]
    fn lag_solution_overflow_is_reported() {
        let s = DioSolution3 {
            rates: [2, 3, 5],
            a: [i64::MAX / 2, -3, 1],
            b: [1, -2, 1],
        };
        assert_eq!(lag_solution(&s, 1, 3), Err(Error::Overflow("lag_solution")));
    }

    fn brute_force_triples(n: usize) -> usize {
        let mut count = 0;
        for i in 1..=n {
            for j in i + 1..=n {
                for k in j + 1..=n {
                    // a triple is solvable iff some integer combination hits 1
                    let d1 = (j - i) as i64;
                    let d2 = (k - j) as i64;
                    let found = (-(n as i64)..=n as i64).any(|x| (1 - x * d1) % d2 == 0);
                    if found {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn catalog_examples() {
        let c = coprime_triples(3, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.triples[0].indices, [1, 2, 3]);

        let c = coprime_triples(5, 0).unwrap();
        assert_eq!(c.len(), brute_force_triples(5));
        assert!(c.len() as u64 >= 6);

        let c = coprime_triples(20, 100).unwrap();
        assert_eq!(c.len(), brute_force_triples(20));
        assert!(c.len() as u64 >= 693);
        assert_eq!(TripleCatalog::guaranteed_floor(20), 693);
        for t in &c.triples {
            assert!(t.solution.is_valid());
            assert!(t.solution.max_coefficient() <= 2 * 19);
        }
        assert!(coprime_triples(2, 0).is_err());
    }

    #[test]
    fn count_bounds_examples() {
        assert_eq!(triple_count_bounds(4, 2).unwrap(), (4, Ratio::new(3, 1)));
        assert_eq!(
            triple_count_bounds(100, 50).unwrap(),
            (122_500, Ratio::new(121_275, 1))
        );
        assert_eq!(triple_count_bounds(3, 3).unwrap(), (0, Ratio::new(3, 4)));
        assert!(triple_count_bounds(3, 4).is_err());
    }
}
