//! Difference co-array engine: cross sums, 2q-th symmetric difference sets,
//! consecutive-lag analysis and spacing statistics.
//!
//! Repeat-allowed signed sums are computed on dense bitsets: the q-fold sum
//! set is built by repeated shift-OR, and the symmetric difference is the
//! support of its autocorrelation. Work scales with
//! `|sum set| × range / 64` rather than `|S|^(2q)`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::bitset::IntBitSet;
use crate::error::{Error, Result};

/// Metadata a constructor attaches to its output.
///
/// These are the construction's own claims; analysis results are always
/// measured separately.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Claims {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Order `2q` of the difference set the construction targets
    /// (3 for the third-order signed set).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    /// Guaranteed consecutive radius `U` (every lag in `[-U, U]`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consecutive_radius: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor_count: Option<usize>,
    /// Positions generated before merging coincident sensors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_spacing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof_order: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// Sorted, distinct integer sensor positions in units of `d = λ/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub label: String,
    pub unit: String,
    positions: Vec<i64>,
    pub claims: Claims,
    /// Generating subarrays before merging, when the constructor has them.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub subarrays: Vec<Vec<i64>>,
}

impl ArrayGeometry {
    /// Sorts and merges duplicates; an empty position list is rejected.
    pub fn new(label: impl Into<String>, mut positions: Vec<i64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("an array needs at least one sensor"));
        }
        positions.sort_unstable();
        positions.dedup();
        Ok(Self {
            label: label.into(),
            unit: "half-wavelength".to_string(),
            positions,
            claims: Claims::default(),
            subarrays: Vec::new(),
        })
    }

    /// Union of the subarrays; `claims.raw_count` records the size before
    /// coincident sensors are merged.
    pub fn from_subarrays(label: impl Into<String>, subarrays: Vec<Vec<i64>>) -> Result<Self> {
        let raw: Vec<i64> = subarrays.iter().flatten().copied().collect();
        let raw_count = raw.len();
        let mut g = Self::new(label, raw)?;
        g.claims.raw_count = Some(raw_count);
        g.subarrays = subarrays;
        Ok(g)
    }

    pub fn with_claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn aperture(&self) -> i64 {
        self.positions[self.positions.len() - 1] - self.positions[0]
    }

    /// Same array translated so the first sensor sits at 0.
    pub fn translated(&self) -> ArrayGeometry {
        let base = self.positions[0];
        ArrayGeometry {
            positions: self.positions.iter().map(|p| p - base).collect(),
            subarrays: self
                .subarrays
                .iter()
                .map(|s| s.iter().map(|p| p - base).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }
}

/// Distinct lags of a difference set plus its consecutive-segment summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSet {
    pub distinct: Vec<i64>,
    pub dof: u64,
    pub consecutive_radius: u64,
    pub holes: Vec<i64>,
}

impl LagSet {
    pub fn from_values(values: impl IntoIterator<Item = i64>) -> LagSet {
        let set: BTreeSet<i64> = values.into_iter().collect();
        Self::from_sorted(set.into_iter().collect())
    }

    fn from_sorted(distinct: Vec<i64>) -> LagSet {
        let lookup: HashSet<i64> = distinct.iter().copied().collect();
        let mut radius = 0u64;
        if lookup.contains(&0) {
            while lookup.contains(&(radius as i64 + 1)) && lookup.contains(&-(radius as i64 + 1)) {
                radius += 1;
            }
        }
        let mut holes = Vec::new();
        for w in distinct.windows(2) {
            holes.extend(w[0] + 1..w[1]);
        }
        LagSet {
            dof: distinct.len() as u64,
            consecutive_radius: radius,
            holes,
            distinct,
        }
    }

    fn from_bitset(set: &IntBitSet) -> LagSet {
        Self::from_sorted(set.values())
    }

    pub fn contains(&self, lag: i64) -> bool {
        self.distinct.binary_search(&lag).is_ok()
    }

    /// Number of consecutive lags `2U + 1` around zero.
    pub fn consecutive_dof(&self) -> u64 {
        2 * self.consecutive_radius + 1
    }

    pub fn min(&self) -> Option<i64> {
        self.distinct.first().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.distinct.last().copied()
    }
}

/// Histogram of adjacent-sensor gaps: `tau[j]` pairs spaced `j·d` apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpacingHistogram {
    pub tau: BTreeMap<i64, usize>,
}

impl SpacingHistogram {
    pub fn min_spacing(&self) -> i64 {
        *self.tau.keys().next().expect("histogram is nonempty")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("spacing,count\n");
        for (j, c) in &self.tau {
            out.push_str(&format!("{j},{c}\n"));
        }
        out
    }
}

/// Combined JSON view of an order-specific analysis.
#[derive(Debug, Clone, Serialize)]
pub struct LagReport {
    pub label: String,
    pub order: u32,
    pub sensors: usize,
    pub dof: u64,
    pub consecutive_dof: u64,
    pub consecutive_radius: u64,
    pub min_lag: i64,
    pub max_lag: i64,
    pub holes: Vec<i64>,
    pub min_spacing: i64,
    pub tau: BTreeMap<i64, usize>,
}

impl LagReport {
    pub fn new(
        geometry: &ArrayGeometry,
        order: u32,
        lags: &LagSet,
        tau: &SpacingHistogram,
    ) -> Self {
        LagReport {
            label: geometry.label.clone(),
            order,
            sensors: geometry.len(),
            dof: lags.dof,
            consecutive_dof: lags.consecutive_dof(),
            consecutive_radius: lags.consecutive_radius,
            min_lag: lags.min().unwrap_or(0),
            max_lag: lags.max().unwrap_or(0),
            holes: lags.holes.clone(),
            min_spacing: tau.min_spacing(),
            tau: tau.tau.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `{Σ sign_i · p_i : p_i ∈ term i}`, sorted.
pub fn cross_sum(terms: &[(Sign, &[i64])]) -> Result<Vec<i64>> {
    let (first, rest) = terms
        .split_first()
        .ok_or_else(|| Error::domain("cross sum needs at least one term"))?;
    let mut acc = signed_set(first.0, first.1)?;
    for (sign, values) in rest {
        let next = IntBitSet::from_values(values)?;
        acc = match sign {
            Sign::Plus => acc.sum(&next)?,
            Sign::Minus => acc.difference(&next)?,
        };
    }
    Ok(acc.values())
}

fn signed_set(sign: Sign, values: &[i64]) -> Result<IntBitSet> {
    match sign {
        Sign::Plus => IntBitSet::from_values(values),
        Sign::Minus => {
            let neg: Vec<i64> = values.iter().map(|v| -v).collect();
            IntBitSet::from_values(&neg)
        }
    }
}

/// q-fold repeat-allowed sum set of `positions`.
fn fold_sum(positions: &[i64], q: u32) -> Result<IntBitSet> {
    let base = IntBitSet::from_values(positions)?;
    let mut acc = base.clone();
    for _ in 1..q {
        acc = acc.sum(&base)?;
    }
    Ok(acc)
}

const MAX_DISTINCT_TUPLES: u128 = 200_000_000;

/// The 2q-th symmetric difference set `{Σ_{i≤q} p_{n_i} − Σ_{i>q} p_{n_i}}`.
///
/// With `allow_repeats` the indices range freely over the sensors (the
/// moment/cumulant virtual array). Without it all 2q indices are distinct,
/// which needs at least `2q` sensors.
pub fn symmetric_difference_2q(s: &ArrayGeometry, q: u32, allow_repeats: bool) -> Result<LagSet> {
    if q == 0 {
        return Err(Error::domain("order parameter q must be >= 1"));
    }
    let positions = s.translated().positions;
    if allow_repeats {
        let sums = fold_sum(&positions, q)?;
        let diff = sums.difference(&sums)?;
        Ok(LagSet::from_bitset(&diff))
    } else {
        distinct_index_difference(&positions, q as usize)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn distinct_index_difference(positions: &[i64], q: usize) -> Result<LagSet> {
    let n = positions.len();
    if 2 * q > n {
        return Err(Error::domain(format!(
            "distinct-index order {} needs at least {} sensors, array has {n}",
            2 * q,
            2 * q
        )));
    }
    let work = binomial(n as u128, q as u128) * binomial((n - q) as u128, q as u128);
    if work > MAX_DISTINCT_TUPLES {
        return Err(Error::ResourceLimit(format!(
            "distinct-index enumeration needs {work} tuples; use allow_repeats"
        )));
    }
    let mut out = BTreeSet::new();
    let mut plus = Vec::with_capacity(q);
    for_each_combination(n, q, &[], &mut plus, &mut |plus_idx| {
        let plus_sum: i64 = plus_idx.iter().map(|&i| positions[i]).sum();
        let mut minus = Vec::with_capacity(q);
        for_each_combination(n, q, plus_idx, &mut minus, &mut |minus_idx| {
            let minus_sum: i64 = minus_idx.iter().map(|&i| positions[i]).sum();
            out.insert(plus_sum - minus_sum);
        });
    });
    Ok(LagSet::from_sorted(out.into_iter().collect()))
}

fn for_each_combination(
    n: usize,
    k: usize,
    excluded: &[usize],
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if current.len() == k {
        visit(current);
        return;
    }
    let start = current.last().map_or(0, |&i| i + 1);
    for i in start..n {
        if excluded.contains(&i) {
            continue;
        }
        current.push(i);
        for_each_combination(n, k, excluded, current, visit);
        current.pop();
    }
}

/// `{±(p_a − p_b + p_c)}` over all sensor indices, repeats allowed.
pub fn third_order_signed_set(s: &ArrayGeometry) -> Result<LagSet> {
    let base = IntBitSet::from_values(s.positions())?;
    let pairs = base.sum(&base)?;
    let signed = pairs.difference(&base)?;
    let both = signed.union(&signed.negated())?;
    Ok(LagSet::from_bitset(&both))
}

/// Largest `U` with every integer of `[-U, U]` present.
pub fn consecutive_radius(lags: &LagSet) -> Result<u64> {
    if !lags.contains(0) {
        return Err(Error::domain("lag set does not contain 0"));
    }
    let mut u = 0i64;
    while lags.contains(u + 1) && lags.contains(-(u + 1)) {
        u += 1;
    }
    Ok(u as u64)
}

pub fn weight_tau(s: &ArrayGeometry) -> Result<SpacingHistogram> {
    if s.len() < 2 {
        return Err(Error::domain(
            "spacing histogram needs at least two sensors",
        ));
    }
    let mut tau = BTreeMap::new();
    for w in s.positions().windows(2) {
        *tau.entry(w[1] - w[0]).or_insert(0) += 1;
    }
    Ok(SpacingHistogram { tau })
}

/// True iff every distance `1..=k` is a difference of two marks.
pub fn verify_sparse_ruler(marks: &[i64], k: i64) -> Result<bool> {
    if !marks.contains(&0) {
        return Err(Error::domain("a ruler must contain the mark 0"));
    }
    let set: HashSet<i64> = marks.iter().copied().collect();
    Ok((1..=k).all(|dist| marks.iter().any(|&m| set.contains(&(m + dist)))))
}

/// `n^(2q) / (q!)²`, the count of sign-balanced 2q-subsets with distinct
/// indices.
pub fn dof_upper_bound_2q(q: u32, n: u64) -> Result<Ratio<u128>> {
    if q == 0 || n == 0 {
        return Err(Error::domain("q and n must be >= 1"));
    }
    let num = (n as u128)
        .checked_pow(2 * q)
        .ok_or(Error::Overflow("dof_upper_bound_2q"))?;
    let fact: u128 = (1..=q as u128).product();
    let den = fact
        .checked_mul(fact)
        .ok_or(Error::Overflow("dof_upper_bound_2q"))?;
    Ok(Ratio::new(num, den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(p: &[i64]) -> ArrayGeometry {
        ArrayGeometry::new("test", p.to_vec()).unwrap()
    }

    #[test]
    fn geometry_sorts_and_merges() {
        let g = geom(&[5, 0, 3, 3]);
        assert_eq!(g.positions(), &[0, 3, 5]);
        assert!(ArrayGeometry::new("x", vec![]).is_err());
        assert_eq!(geom(&[-4, 2]).translated().positions(), &[0, 6]);
    }

    #[test]
    fn cross_sum_examples() {
        let a = [0, 1];
        let b = [0, 2];
        assert_eq!(
            cross_sum(&[(Sign::Plus, &a), (Sign::Minus, &b)]).unwrap(),
            vec![-2, -1, 0, 1]
        );
        assert_eq!(cross_sum(&[(Sign::Plus, &[0])]).unwrap(), vec![0]);
        assert_eq!(cross_sum(&[(Sign::Minus, &[3, 4])]).unwrap(), vec![-4, -3]);
        assert!(cross_sum(&[]).is_err());
    }

    #[test]
    fn symmetric_difference_examples() {
        let l = symmetric_difference_2q(&geom(&[0, 1, 3]), 1, true).unwrap();
        assert_eq!(l.distinct, (-3..=3).collect::<Vec<_>>());
        let l = symmetric_difference_2q(&geom(&[0, 1]), 2, true).unwrap();
        assert_eq!(l.distinct, (-2..=2).collect::<Vec<_>>());
        assert_eq!(l.consecutive_radius, 2);
        assert!(symmetric_difference_2q(&geom(&[0, 1]), 0, true).is_err());
    }

    #[test]
    fn distinct_index_variant() {
        // {0,1,3}: distinct pairs give ±1, ±2, ±3 but never 0
        let l = symmetric_difference_2q(&geom(&[0, 1, 3]), 1, false).unwrap();
        assert_eq!(l.distinct, vec![-3, -2, -1, 1, 2, 3]);
        assert!(symmetric_difference_2q(&geom(&[0, 1, 3]), 2, false).is_err());
        let l = symmetric_difference_2q(&geom(&[0, 1, 2, 4]), 2, false).unwrap();
        // 0+4-1-2, 0+1-2-4, ...
        assert!(l.contains(1) && l.contains(-5) && l.contains(5));
    }

    #[test]
    fn third_order_examples() {
        let l = third_order_signed_set(&geom(&[0, 1])).unwrap();
        assert_eq!(l.distinct, (-2..=2).collect::<Vec<_>>());
    }

    #[test]
    fn radius_and_holes() {
        let l = LagSet::from_values([-1, 0, 1, 5]);
        assert_eq!(consecutive_radius(&l).unwrap(), 1);
        assert_eq!(l.holes, vec![2, 3, 4]);
        assert_eq!(consecutive_radius(&LagSet::from_values([0])).unwrap(), 0);
        assert!(consecutive_radius(&LagSet::from_values([1, 2])).is_err());
    }

    #[test]
    fn coprime_second_order_radius() {
        let s = geom(&[0, 3, 5, 6, 9, 10, 12, 15, 18, 21, 24, 27]);
        let l = symmetric_difference_2q(&s, 1, true).unwrap();
        assert!(l.consecutive_radius >= 14);
    }

    #[test]
    fn weight_tau_examples() {
        let h = weight_tau(&geom(&[0, 3, 5, 8])).unwrap();
        assert_eq!(h.tau, BTreeMap::from([(2, 1), (3, 2)]));
        assert_eq!(h.min_spacing(), 2);
        assert!(weight_tau(&geom(&[4])).is_err());
        assert_eq!(h.to_csv(), "spacing,count\n2,1\n3,2\n");
    }

    #[test]
    fn sparse_ruler_examples() {
        assert!(verify_sparse_ruler(&[0, 1, 2, 3, 6, 10], 10).unwrap());
        let regular: Vec<i64> = (0..=10).collect();
        assert!(verify_sparse_ruler(&regular, 10).unwrap());
        assert!(!verify_sparse_ruler(&[0, 1, 5], 3).unwrap());
        assert!(verify_sparse_ruler(&[1, 5], 3).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(dof_upper_bound_2q(1, 4).unwrap(), Ratio::from_integer(16));
        assert_eq!(dof_upper_bound_2q(2, 4).unwrap(), Ratio::from_integer(64));
        assert_eq!(dof_upper_bound_2q(3, 6).unwrap(), Ratio::from_integer(1296));
        assert_eq!(dof_upper_bound_2q(2, 3).unwrap(), Ratio::new(81, 4));
    }

    #[test]
    fn resource_limit_is_reported() {
        let s = geom(&[0, 1, 1 << 40]);
        assert!(matches!(
            symmetric_difference_2q(&s, 2, true),
            Err(Error::ResourceLimit(_))
        ));
    }
}
