//! Temporal sampling planners: the co-prime baseline, the three-sampler
//! Diophantine schedule, and the distributed N-sampler schedule.
//!
//! Every lag tuple is a signed coefficient vector `c` over the plan's
//! samplers with `c · rates = k`. Sampler `i` is read at index `|c_i|`,
//! conjugated when `c_i < 0`. Delays are integer Nyquist ticks.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numtheory::{
    bezout_coprime_pair, coprime_triples, gcd_u, lag_solution, solve_dio3_zero_sum, DioSolution3,
};

/// One sampler read: index `index` of sampler `sampler`, conjugated when
/// the sampler sits on the minus side of the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub sampler: usize,
    pub index: i64,
    pub conjugate: bool,
}

impl Term {
    fn new(sampler: usize, coefficient: i64, conjugate: bool) -> Self {
        Self {
            sampler,
            index: coefficient.abs(),
            conjugate,
        }
    }

    /// Signed coefficient `±index`.
    pub fn coefficient(&self) -> i64 {
        if self.conjugate {
            -self.index
        } else {
            self.index
        }
    }
}

/// Sampler reads for one virtual snapshot; samplers not listed are unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagTuple {
    pub terms: Vec<Term>,
}

impl LagTuple {
    /// `Σ ±n_i · rates[i]`, checked.
    pub fn evaluate(&self, rates: &[i64]) -> Option<i64> {
        self.terms.iter().try_fold(0i64, |acc, t| {
            acc.checked_add(t.coefficient().checked_mul(*rates.get(t.sampler)?)?)
        })
    }

    /// Signed coefficients for every sampler, as emitted in plan JSON.
    pub fn dense(&self, n: usize) -> Vec<i64> {
        let mut v = vec![0; n];
        for t in &self.terms {
            v[t.sampler] = t.coefficient();
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Coprime,
    Three,
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub kind: PlanKind,
    /// Undersampling rates as multiples of the Nyquist interval.
    pub rates: Vec<i64>,
    /// Per-sampler sorted, deduplicated sample indices.
    pub instants: Vec<Vec<i64>>,
    pub lag_map: BTreeMap<i64, Vec<LagTuple>>,
    /// `max_i (max index_i) · M_i`.
    pub delay_ticks: i64,
}

impl SamplingPlan {
    fn assemble(
        kind: PlanKind,
        rates: Vec<i64>,
        lag_map: BTreeMap<i64, Vec<LagTuple>>,
    ) -> Result<Self> {
        let mut sets: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); rates.len()];
        for tuples in lag_map.values() {
            for t in tuples {
                for term in &t.terms {
                    sets[term.sampler].insert(term.index);
                }
            }
        }
        let instants: Vec<Vec<i64>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut delay = 0i64;
        for (idx, rate) in instants.iter().zip(&rates) {
            if let Some(&last) = idx.last() {
                let d = last
                    .checked_mul(*rate)
                    .ok_or(Error::Overflow("delay_ticks"))?;
                delay = delay.max(d);
            }
        }
        Ok(Self {
            kind,
            rates,
            instants,
            lag_map,
            delay_ticks: delay,
        })
    }

    /// Index tuples per lag before any deduplication (the smallest count
    /// over all lags).
    pub fn virtual_snapshots_per_lag(&self) -> usize {
        self.lag_map.values().map(Vec::len).min().unwrap_or(0)
    }

    /// Distinct `(sampler, index)` reads the plan needs.
    pub fn physical_samples(&self) -> usize {
        self.instants.iter().map(Vec::len).sum()
    }

    pub fn delay_seconds(&self, ts: f64) -> f64 {
        self.delay_ticks as f64 * ts
    }

    /// Re-evaluates every tuple against its lag.
    pub fn verify(&self) -> bool {
        self.lag_map
            .iter()
            .all(|(&k, tuples)| tuples.iter().all(|t| t.evaluate(&self.rates) == Some(k)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

struct LagMapJson<'a>(&'a BTreeMap<i64, Vec<LagTuple>>, usize);

impl Serialize for LagMapJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, tuples) in self.0 {
            let dense: Vec<Vec<i64>> = tuples.iter().map(|t| t.dense(self.1)).collect();
            map.serialize_entry(&k.to_string(), &dense)?;
        }
        map.end()
    }
}

impl Serialize for SamplingPlan {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(8))?;
        map.serialize_entry("kind", &self.kind)?;
        if self.kind == PlanKind::Coprime {
            // m2 can be 0, so the sign of the second sampler is stated
            map.serialize_entry("sign_pattern", &[1, -1])?;
        }
        map.serialize_entry("rates", &self.rates)?;
        map.serialize_entry("instants", &self.instants)?;
        map.serialize_entry("delay_ticks", &self.delay_ticks)?;
        map.serialize_entry(
            "virtual_snapshots_per_lag",
            &self.virtual_snapshots_per_lag(),
        )?;
        map.serialize_entry("physical_samples", &self.physical_samples())?;
        map.serialize_entry("lag_map", &LagMapJson(&self.lag_map, self.rates.len()))?;
        map.end()
    }
}

fn check_kl(k: i64, l: i64) -> Result<()> {
    if k < 1 || l < 1 {
        return Err(Error::domain(format!(
            "K and L must be >= 1, got K={k}, L={l}"
        )));
    }
    Ok(())
}

fn triple_tuples(
    sol: &DioSolution3,
    samplers: [usize; 3],
    k: i64,
    l_max: i64,
) -> Result<Vec<LagTuple>> {
    (1..=l_max)
        .map(|l| {
            let m = lag_solution(sol, k, l)?;
            Ok(LagTuple {
                terms: samplers
                    .iter()
                    .zip(m)
                    .map(|(&s, c)| Term::new(s, c, c < 0))
                    .collect(),
            })
        })
        .collect()
}

/// Three samplers at rates `(2+Γ, 3+Γ, 5+Γ)`, lags `0..=K`, `L` snapshots
/// each. Tuples are `(k+2l, −(2k+3l), k+l)`.
pub fn three_sampler_plan(gamma: i64, k_max: i64, l_max: i64) -> Result<SamplingPlan> {
    check_kl(k_max, l_max)?;
    if gamma < 0 {
        return Err(Error::domain(format!("gamma must be >= 0, got {gamma}")));
    }
    let sol = solve_dio3_zero_sum([2 + gamma, 3 + gamma, 5 + gamma])?;
    let mut lag_map = BTreeMap::new();
    for k in 0..=k_max {
        lag_map.insert(k, triple_tuples(&sol, [0, 1, 2], k, l_max)?);
    }
    SamplingPlan::assemble(PlanKind::Three, sol.rates.to_vec(), lag_map)
}

/// `(2K + 3L)(5 + Γ)`, the three-sampler delay bound.
pub fn three_sampler_delay_bound(gamma: i64, k_max: i64, l_max: i64) -> i64 {
    (2 * k_max + 3 * l_max) * (5 + gamma)
}

/// Distributed plan over rates `M_i = i + Γ`, `i = 1..=n`, using every
/// solvable triple of the catalog.
pub fn n_sampler_plan(n: usize, gamma: i64, k_max: i64, l_max: i64) -> Result<SamplingPlan> {
    check_kl(k_max, l_max)?;
    let catalog = coprime_triples(n, gamma)?;
    let rates: Vec<i64> = (1..=n).map(|i| catalog.rate(i)).collect();
    let mut lag_map: BTreeMap<i64, Vec<LagTuple>> = BTreeMap::new();
    for k in 0..=k_max {
        let mut tuples = Vec::with_capacity(catalog.len() * l_max as usize);
        for t in &catalog.triples {
            let samplers = t.indices.map(|i| i - 1);
            tuples.extend(triple_tuples(&t.solution, samplers, k, l_max)?);
        }
        lag_map.insert(k, tuples);
    }
    SamplingPlan::assemble(PlanKind::Distributed, rates, lag_map)
}

/// `2(n−1)(K+L)(n+Γ)`, the distributed delay bound.
pub fn n_sampler_delay_bound(n: usize, gamma: i64, k_max: i64, l_max: i64) -> i64 {
    let n = n as i64;
    2 * (n - 1) * (k_max + l_max) * (n + gamma)
}

/// `floor(L·n(n−1)(n−2)/π²)`, the guaranteed virtual snapshots per lag.
pub fn n_sampler_snapshot_floor(n: usize, l_max: i64) -> u64 {
    let n = n as f64;
    (l_max as f64 * n * (n - 1.0) * (n - 2.0) / (PI * PI)).floor() as u64
}

/// Co-prime baseline: for lag `k ∈ [0, K]` and window `r ∈ [0, L)`, the
/// unique `m1 ∈ [rM2, (r+2)M2)`, `m2 ∈ [rM1, (r+1)M1)` with
/// `m1·M1 − m2·M2 = k`.
pub fn coprime_plan(m1: i64, m2: i64, k_max: i64, l_max: i64) -> Result<SamplingPlan> {
    if m1 < 2 || m2 < 2 {
        return Err(Error::domain(format!(
            "rates must be >= 2, got ({m1}, {m2})"
        )));
    }
    if gcd_u(m1 as u64, m2 as u64) != 1 {
        return Err(Error::NotCoprime(m1, m2));
    }
    if k_max < 0 || l_max < 1 {
        return Err(Error::domain(format!(
            "need K >= 0 and L >= 1, got K={k_max}, L={l_max}"
        )));
    }
    let span = (m1 as i128) * (m2 as i128);
    if k_max as i128 > span {
        return Err(Error::domain(format!("K={k_max} exceeds M1*M2={span}")));
    }
    let alpha = bezout_coprime_pair(m1, m2)?.alpha as i128;
    let (a, b) = (m1 as i128, m2 as i128);
    let mut lag_map = BTreeMap::new();
    for k in 0..=k_max {
        let base = (k as i128 * alpha).rem_euclid(b);
        let mut tuples = Vec::with_capacity(l_max as usize);
        for r in 0..l_max as i128 {
            let mut x1 = r * b + base;
            let mut x2 = (x1 * a - k as i128) / b;
            if x2 < r * a {
                x1 += b;
                x2 += a;
            }
            debug_assert!(x1 >= r * b && x1 < (r + 2) * b);
            debug_assert!(x2 >= r * a && x2 < (r + 1) * a);
            let to_i64 = |v: i128| i64::try_from(v).map_err(|_| Error::Overflow("coprime_plan"));
            tuples.push(LagTuple {
                terms: vec![
                    Term::new(0, to_i64(x1)?, false),
                    Term::new(1, to_i64(x2)?, true),
                ],
            });
        }
        lag_map.insert(k, tuples);
    }
    SamplingPlan::assemble(PlanKind::Coprime, vec![m1, m2], lag_map)
}

/// Delay of the co-prime baseline at rates `(2+Γ, 3+Γ)` against the
/// three-sampler plan at the same `Γ`.
#[derive(Debug, Clone, Serialize)]
pub struct DelayComparison {
    pub gamma: i64,
    pub k: i64,
    pub l: i64,
    pub coprime_delay_ticks: i64,
    pub diophantine_delay_ticks: i64,
    pub ratio: f64,
}

pub fn compare_delays(gamma: i64, k_max: i64, l_max: i64) -> Result<DelayComparison> {
    let co = coprime_plan(2 + gamma, 3 + gamma, k_max, l_max)?;
    let dio = three_sampler_plan(gamma, k_max, l_max)?;
    Ok(DelayComparison {
        gamma,
        k: k_max,
        l: l_max,
        coprime_delay_ticks: co.delay_ticks,
        diophantine_delay_ticks: dio.delay_ticks,
        ratio: co.delay_ticks as f64 / dio.delay_ticks as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub ok: bool,
    /// Ordered source triples `(i, u, v)` that hit the failure set.
    pub violations: Vec<(usize, usize, usize)>,
}

pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Flags every source triple `(i, u, v)`, not all equal, where
/// `a1·M1(ω_i − ω_v) + a2·M2(ω_u − ω_v)` vanishes modulo `2π` to within
/// `tol`; for those the cross term of the third-order estimator does not
/// average out.
pub fn degeneracy_check(sol: &DioSolution3, freqs: &[f64], tol: f64) -> Result<DegeneracyReport> {
    for (i, a) in freqs.iter().enumerate() {
        if freqs[..i].contains(a) {
            return Err(Error::domain(format!("duplicate frequency {a}")));
        }
    }
    let c1 = (sol.a[0] as f64) * (sol.rates[0] as f64);
    let c2 = (sol.a[1] as f64) * (sol.rates[1] as f64);
    let d = freqs.len();
    let mut violations = Vec::new();
    for i in 0..d {
        for u in 0..d {
            for v in 0..d {
                if i == u && u == v {
                    continue;
                }
                let x = c1 * (freqs[i] - freqs[v]) + c2 * (freqs[u] - freqs[v]);
                if wrap_phase(x).abs() < tol {
                    violations.push((i, u, v));
                }
            }
        }
    }
    Ok(DegeneracyReport {
        ok: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_sampler_examples() {
        let p = three_sampler_plan(0, 1, 1).unwrap();
        assert_eq!(p.lag_map[&1][0].dense(3), vec![3, -5, 2]);
        assert!(p.delay_ticks <= 25);
        assert!(p.verify());

        let p = three_sampler_plan(1_000_000, 50, 50).unwrap();
        assert!(p.delay_ticks <= 250 * (1_000_000 + 5));
        assert!(p.verify());
        for idx in &p.instants {
            assert!(idx.len() <= 50 * 50);
        }
        // the index set never depends on gamma
        let q = three_sampler_plan(7, 50, 50).unwrap();
        assert_eq!(p.instants, q.instants);
    }

    #[test]
    fn n_sampler_examples() {
        let p = n_sampler_plan(3, 0, 4, 3).unwrap();
        assert_eq!(p.virtual_snapshots_per_lag(), 3);
        assert!(p.verify());

        let p = n_sampler_plan(10, 100, 10, 10).unwrap();
        assert!(p.virtual_snapshots_per_lag() as u64 >= 729);
        assert_eq!(n_sampler_snapshot_floor(10, 10), 729);
        assert!(p.delay_ticks <= 39_600);
        assert_eq!(n_sampler_delay_bound(10, 100, 10, 10), 39_600);
        assert!(p.verify());
    }

    #[test]
    fn coprime_plan_examples() {
        let p = coprime_plan(2, 3, 1, 1).unwrap();
        assert_eq!(p.lag_map[&1][0].dense(2), vec![2, -1]);

        let p = coprime_plan(2, 3, 6, 4).unwrap();
        assert!(p.verify());
        // windows end at (L+1)·M2 for m1, giving ~L·M1·M2 ticks
        assert!(p.delay_ticks <= (4 + 1) * 3 * 2);
        assert!(p.delay_ticks >= 3 * 6);

        assert_eq!(
            coprime_plan(4, 6, 1, 1).unwrap_err(),
            Error::NotCoprime(4, 6)
        );
        assert!(coprime_plan(2, 3, 7, 1).is_err());
    }

    #[test]
    fn coprime_windows() {
        let (m1, m2) = (5, 7);
        let p = coprime_plan(m1, m2, m1 * m2, 6).unwrap();
        for tuples in p.lag_map.values() {
            for (r, t) in tuples.iter().enumerate() {
                let r = r as i64;
                let x1 = t.terms[0].index;
                let x2 = t.terms[1].index;
                assert!(t.terms[1].conjugate && !t.terms[0].conjugate);
                assert!((r * m2..(r + 2) * m2).contains(&x1));
                assert!((r * m1..(r + 1) * m1).contains(&x2));
            }
        }
        assert!(p.verify());
    }

    #[test]
    fn delay_ratio_is_large() {
        let c = compare_delays(1_000_000, 50, 50).unwrap();
        assert!(c.ratio > 1e5, "ratio {}", c.ratio);
    }

    #[test]
    fn degeneracy_examples() {
        let sol = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        let r = degeneracy_check(&sol, &[0.3], DEGENERACY_TOLERANCE).unwrap();
        assert!(r.ok);

        // a1·M1 = 4, a2·M2 = −9: direct evaluation of one triple
        let r = degeneracy_check(&sol, &[0.1, 0.2, 0.3], DEGENERACY_TOLERANCE).unwrap();
        let x: f64 = 4.0 * (0.1 - 0.3) - 9.0 * (0.2 - 0.3);
        assert!((x - 0.1).abs() < 1e-12);
        assert!(r.ok);

        // 4(ω1 − ω3) = 9(ω2 − ω3) with ω3 = 0, ω2 = 0.4 → ω1 = 0.9
        let r = degeneracy_check(&sol, &[0.9, 0.4, 0.0], DEGENERACY_TOLERANCE).unwrap();
        assert!(!r.ok);
        assert!(r.violations.contains(&(0, 1, 2)));

        assert!(degeneracy_check(&sol, &[0.1, 0.1], DEGENERACY_TOLERANCE).is_err());
    }

    #[test]
    fn plan_json_shape() {
        let p = three_sampler_plan(0, 1, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["rates"], serde_json::json!([2, 3, 5]));
        assert_eq!(v["lag_map"]["1"], serde_json::json!([[3, -5, 2]]));
        assert_eq!(v["delay_ticks"], serde_json::json!(p.delay_ticks));
    }
}
