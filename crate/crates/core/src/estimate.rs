//! Moment-sequence estimators and the Hankel/MUSIC subspace step.
//!
//! Third-order products carry per-source weights `A_i³ e^{jφ_i}` (temporal)
//! or `|s_i|² s_i` (spatial) rather than powers, so the lag sequence is not
//! Hermitian-symmetric. The subspace step therefore factors a one-sided
//! Hankel matrix `H[i, j] = v[i + j]`, whose column space is the
//! Vandermonde span of the sources whenever the weights are nonzero.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Dio3Params;
use crate::numtheory::{lag_solution, DioSolution3};
use crate::sampling::{PlanKind, SamplingPlan};
use crate::simulate::SampleSource;

/// Moment values on consecutive lags `first_lag, first_lag + 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualLagSequence {
    pub first_lag: i64,
    pub values: Vec<Complex64>,
    pub provenance: String,
}

impl VirtualLagSequence {
    pub fn last_lag(&self) -> i64 {
        self.first_lag + self.values.len() as i64 - 1
    }

    pub fn at(&self, lag: i64) -> Option<Complex64> {
        usize::try_from(lag - self.first_lag)
            .ok()
            .and_then(|i| self.values.get(i).copied())
    }
}

fn read(x: &dyn SampleSource, index: i64, conjugate: bool, what: &str) -> Result<Complex64> {
    let v = x
        .sample(index)
        .ok_or_else(|| Error::domain(format!("{what}: index {index} out of range")))?;
    Ok(if conjugate { v.conj() } else { v })
}

/// Averages, per lag, the product of each tuple's sampler reads.
pub fn autocorr_plan(
    streams: &[&dyn SampleSource],
    plan: &SamplingPlan,
) -> Result<VirtualLagSequence> {
    if streams.len() != plan.rates.len() {
        return Err(Error::domain(format!(
            "plan has {} samplers, got {} streams",
            plan.rates.len(),
            streams.len()
        )));
    }
    let first_lag = *plan
        .lag_map
        .keys()
        .next()
        .ok_or_else(|| Error::domain("empty plan"))?;
    let mut values = Vec::with_capacity(plan.lag_map.len());
    for (i, (&k, tuples)) in plan.lag_map.iter().enumerate() {
        if k != first_lag + i as i64 {
            return Err(Error::domain("plan lags are not consecutive"));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in tuples {
            let mut prod = Complex64::new(1.0, 0.0);
            for term in &t.terms {
                prod *= read(
                    streams[term.sampler],
                    term.index,
                    term.conjugate,
                    "autocorr_plan",
                )?;
            }
            acc += prod;
        }
        values.push(acc / tuples.len() as f64);
    }
    let provenance = match plan.kind {
        PlanKind::Coprime => "coprime second-order",
        PlanKind::Three => "three-sampler third-order",
        PlanKind::Distributed => "distributed third-order",
    };
    Ok(VirtualLagSequence {
        first_lag,
        values,
        provenance: provenance.into(),
    })
}

/// Second-order estimate `mean_r x1[m1]·conj(x2[m2])` from a co-prime plan.
pub fn autocorr_coprime(
    x1: &dyn SampleSource,
    x2: &dyn SampleSource,
    plan: &SamplingPlan,
) -> Result<VirtualLagSequence> {
    if plan.kind != PlanKind::Coprime {
        return Err(Error::domain("autocorr_coprime needs a co-prime plan"));
    }
    autocorr_plan(&[x1, x2], plan)
}

/// Third-order estimate for lags `0..=K`:
/// `mean_l x1[m1]·conj(x2[m2])·x3[m3]` with `m = k·b + l·a`, the negative
/// coefficient marking the conjugated sampler. A single noiseless source
/// gives exactly `A³ e^{jφ} e^{jωk}`.
pub fn autocorr_dio3(
    streams: [&dyn SampleSource; 3],
    sol: &DioSolution3,
    k_max: i64,
    l_max: i64,
) -> Result<VirtualLagSequence> {
    if k_max < 1 || l_max < 1 {
        return Err(Error::domain(format!(
            "K and L must be >= 1, got K={k_max}, L={l_max}"
        )));
    }
    let mut values = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 1..=l_max {
            let m = lag_solution(sol, k, l)?;
            let mut prod = Complex64::new(1.0, 0.0);
            for (x, c) in streams.iter().zip(m) {
                prod *= read(*x, c.abs(), c < 0, "autocorr_dio3")?;
            }
            acc += prod;
        }
        values.push(acc / l_max as f64);
    }
    Ok(VirtualLagSequence {
        first_lag: 0,
        values,
        provenance: "three-sampler third-order".into(),
    })
}

/// Sensor triple `(plus, minus, plus)` realizing a spatial lag; `negated`
/// means the triple realizes `−k` and its product must be conjugated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagEntry {
    pub sensors: [usize; 3],
    pub negated: bool,
}

/// Every lag of the third-order signed set of one array, each with the
/// first realizing triple in lexicographic order. Positive realizations
/// `p_a − p_b + p_c = k` are preferred so all lags share the same
/// per-source weight.
#[derive(Debug, Clone)]
pub struct LagTable {
    pub positions: Vec<i64>,
    pub entries: HashMap<i64, LagEntry>,
}

impl LagTable {
    pub fn build(positions: &[i64]) -> Self {
        let n = positions.len();
        let mut plus: HashMap<i64, [usize; 3]> = HashMap::new();
        for a in 0..n {
            for c in a..n {
                for b in 0..n {
                    let k = positions[a] - positions[b] + positions[c];
                    plus.entry(k).or_insert([a, b, c]);
                }
            }
        }
        let mut entries: HashMap<i64, LagEntry> = plus
            .iter()
            .map(|(&k, &sensors)| {
                (
                    k,
                    LagEntry {
                        sensors,
                        negated: false,
                    },
                )
            })
            .collect();
        for (&k, &sensors) in &plus {
            entries.entry(-k).or_insert(LagEntry {
                sensors,
                negated: true,
            });
        }
        Self {
            positions: positions.to_vec(),
            entries,
        }
    }

    /// Largest `U` with every lag in `[−U, U]` present.
    pub fn radius(&self) -> i64 {
        let mut u = 0;
        while self.entries.contains_key(&(u + 1)) && self.entries.contains_key(&-(u + 1)) {
            u += 1;
        }
        u
    }

    /// Longest run of consecutive lags around 0 with positive realizations;
    /// sequences on this run have one weight `|s|² s` per source.
    pub fn positive_run(&self) -> (i64, i64) {
        let pos = |k: i64| self.entries.get(&k).is_some_and(|e| !e.negated);
        let mut lo = 0;
        while pos(lo - 1) {
            lo -= 1;
        }
        let mut hi = 0;
        while pos(hi + 1) {
            hi += 1;
        }
        (lo, hi)
    }

    /// Lags in `[−K, K]` that need a conjugated (negated) realization.
    pub fn negated_within(&self, k_max: i64) -> usize {
        (-k_max..=k_max)
            .filter(|k| self.entries.get(k).is_some_and(|e| e.negated))
            .count()
    }
}

type LagCache = RwLock<HashMap<Dio3Params, Arc<LagTable>>>;

/// Lag table for a third-order array, built once per parameter set.
pub fn lag_table(params: Dio3Params) -> Result<Arc<LagTable>> {
    static CACHE: OnceLock<LagCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.read().expect("lag cache poisoned").get(&params) {
        return Ok(Arc::clone(t));
    }
    let geom = params.build()?;
    let table = Arc::new(LagTable::build(geom.positions()));
    let mut w = cache.write().expect("lag cache poisoned");
    Ok(Arc::clone(w.entry(params).or_insert(table)))
}

/// Spatial third-order estimate on lags `−K..=K` from a `|S| × L` snapshot
/// matrix of a third-order array (rows in sensor-position order, column
/// `n − 1` at time `n`). Each lag averages
/// `x_a[n1]·conj(x_b[n2])·x_c[n3]` over the `L(L−1)/2` pairs with
/// `n1 + n3 = n2`. Lags with only a negated realization are conjugated,
/// which conjugates their source weights too; see [`spatial_dio3_range`].
pub fn spatial_dio3(
    snapshots: &DMatrix<Complex64>,
    params: Dio3Params,
    k_max: i64,
) -> Result<VirtualLagSequence> {
    if k_max < 1 {
        return Err(Error::domain(format!("K must be >= 1, got {k_max}")));
    }
    spatial_estimate(snapshots, params, -k_max, k_max, true)
}

/// [`spatial_dio3`] on lags `lo..=hi` using positive realizations only, so
/// every lag carries the same per-source weight. Use
/// [`LagTable::positive_run`] for the widest valid range.
pub fn spatial_dio3_range(
    snapshots: &DMatrix<Complex64>,
    params: Dio3Params,
    lo: i64,
    hi: i64,
) -> Result<VirtualLagSequence> {
    if lo >= hi {
        return Err(Error::domain(format!("empty lag range [{lo}, {hi}]")));
    }
    spatial_estimate(snapshots, params, lo, hi, false)
}

fn spatial_estimate(
    snapshots: &DMatrix<Complex64>,
    params: Dio3Params,
    lo: i64,
    hi: i64,
    allow_negated: bool,
) -> Result<VirtualLagSequence> {
    let table = lag_table(params)?;
    if snapshots.nrows() != table.positions.len() {
        return Err(Error::domain(format!(
            "snapshot matrix has {} rows, array has {} sensors",
            snapshots.nrows(),
            table.positions.len()
        )));
    }
    let l = snapshots.ncols();
    if l < 2 {
        return Err(Error::domain("need at least 2 snapshots"));
    }
    let pairs: Vec<(usize, usize, usize)> = (1..l)
        .flat_map(|n1| (1..=l - n1).map(move |n3| (n1 - 1, n1 + n3 - 1, n3 - 1)))
        .collect();
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for k in lo..=hi {
        let e = table
            .entries
            .get(&k)
            .filter(|e| allow_negated || !e.negated)
            .ok_or_else(|| {
                Error::domain(format!(
                    "lag {k} is not realizable by dio3({},{},{})",
                    params.p1, params.p2, params.p3
                ))
            })?;
        let [a, b, c] = e.sensors;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(i1, i2, i3) in &pairs {
            acc += snapshots[(a, i1)] * snapshots[(b, i2)].conj() * snapshots[(c, i3)];
        }
        let v = acc / pairs.len() as f64;
        values.push(if e.negated { v.conj() } else { v });
    }
    Ok(VirtualLagSequence {
        first_lag: lo,
        values,
        provenance: "spatial third-order".into(),
    })
}

/// Number of `(n1, n3)` pairs with `n1 + n3 = n2 ≤ L`.
pub fn spatial_products_per_lag(l: usize) -> usize {
    l * l.saturating_sub(1) / 2
}

/// Signal/noise split of the Hankel matrix of a lag sequence.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub window: usize,
    pub order: usize,
    /// Descending singular values.
    pub singular_values: Vec<f64>,
    /// Orthonormal `window × order` signal basis.
    pub signal: DMatrix<Complex64>,
}

impl Subspace {
    /// Singular values above `rel_tol · σ_max`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }
}

pub fn default_window(values: usize) -> usize {
    values.div_ceil(2)
}

/// Builds the `m × (n + 1 − m)` Hankel matrix of the `n` lag values,
/// factors it, and keeps the `order` dominant left singular vectors.
pub fn hankel_subspace(
    v: &VirtualLagSequence,
    window: Option<usize>,
    order: usize,
) -> Result<Subspace> {
    let n = v.values.len();
    let m = window.unwrap_or_else(|| default_window(n));
    if m == 0 || 2 * m > n + 1 {
        return Err(Error::domain(format!(
            "window {m} needs 2m - 1 <= {n} lag values"
        )));
    }
    if order == 0 || order >= m {
        return Err(Error::domain(format!(
            "model order {order} must be in [1, {m})"
        )));
    }
    if v.values
        .iter()
        .any(|x| !x.re.is_finite() || !x.im.is_finite())
    {
        return Err(Error::domain("lag sequence has non-finite values"));
    }
    let cols = n + 1 - m;
    let h = DMatrix::from_fn(m, cols, |i, j| v.values[i + j]);
    let svd = h.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    if singular_values[0] == 0.0 {
        return Err(Error::DegenerateModel(
            "lag sequence is identically zero".into(),
        ));
    }
    let signal = DMatrix::from_fn(m, order, |r, c| u[(r, idx[c])]);
    Ok(Subspace {
        window: m,
        order,
        singular_values,
        signal,
    })
}

/// What the spectrum grid parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumDomain {
    /// Digital frequency `ω`, circular over `(−π, π]`.
    Frequency,
    /// Arrival angle `θ`, steering phase `π sin θ` per unit lag.
    Angle,
}

/// `(−π, π]` in steps of `step`.
pub fn frequency_grid(step: f64) -> Vec<f64> {
    let n = (TAU / step).floor() as usize;
    (0..n).map(|i| PI - (n - 1 - i) as f64 * step).collect()
}

/// `[−max, max]` in steps of `step`.
pub fn angle_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step).floor() as i64;
    (-n..=n).map(|i| i as f64 * step).collect()
}

/// Pseudospectrum ratio `max / median` below which a spectrum is flagged.
pub const FLATNESS_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub domain: SpectrumDomain,
    pub grid: Vec<f64>,
    pub pseudospectrum: Vec<f64>,
    /// Estimated parameters, ascending.
    pub peaks: Vec<f64>,
    /// `max / median` of the pseudospectrum.
    pub flatness: f64,
    /// Set when fewer than the requested peaks stand out or the spectrum
    /// is nearly flat.
    pub low_confidence: bool,
}

impl SpectrumResult {
    /// `grid,pseudospectrum` rows followed by a `#`-prefixed JSON footer
    /// with the peaks.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("grid,pseudospectrum\n");
        for (g, p) in self.grid.iter().zip(&self.pseudospectrum) {
            let _ = writeln!(s, "{},{}", fmt17(*g), fmt17(*p));
        }
        let peaks: Vec<String> = self.peaks.iter().map(|p| fmt17(*p)).collect();
        let _ = writeln!(
            s,
            "# {{\"domain\":\"{}\",\"peaks\":[{}],\"flatness\":{},\"low_confidence\":{}}}",
            match self.domain {
                SpectrumDomain::Frequency => "frequency",
                SpectrumDomain::Angle => "angle",
            },
            peaks.join(","),
            fmt17(self.flatness),
            self.low_confidence
        );
        s
    }
}

/// 17-significant-digit scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `P = 1 / ‖E_nᴴ a‖²` over the grid, with `a_i = e^{jωi}` of length `m`.
/// Uses `‖E_nᴴ a‖² = m − ‖E_sᴴ a‖²` for the orthonormal split.
pub fn music_spectrum(
    sub: &Subspace,
    grid: &[f64],
    domain: SpectrumDomain,
) -> Result<SpectrumResult> {
    if grid.is_empty() {
        return Err(Error::domain("empty grid"));
    }
    let m = sub.window;
    let es = &sub.signal;
    let floor = m as f64 * 1e-15;
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    let pseudospectrum: Vec<f64> = grid
        .iter()
        .map(|&g| {
            let w = match domain {
                SpectrumDomain::Frequency => g,
                SpectrumDomain::Angle => PI * g.sin(),
            };
            for (i, ai) in a.iter_mut().enumerate() {
                *ai = Complex64::from_polar(1.0, w * i as f64);
            }
            let mut proj = 0.0;
            for c in 0..es.ncols() {
                let mut dot = Complex64::new(0.0, 0.0);
                for (i, ai) in a.iter().enumerate() {
                    dot += es[(i, c)].conj() * ai;
                }
                proj += dot.norm_sqr();
            }
            1.0 / (m as f64 - proj).max(floor)
        })
        .collect();
    let wrap = domain == SpectrumDomain::Frequency;
    let (peaks, enough) = pick_peaks(grid, &pseudospectrum, sub.order, wrap);
    let flatness = flatness(&pseudospectrum);
    Ok(SpectrumResult {
        domain,
        grid: grid.to_vec(),
        pseudospectrum,
        peaks,
        flatness,
        low_confidence: !enough || flatness < FLATNESS_THRESHOLD,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn flatness(p: &[f64]) -> f64 {
    let max = p.iter().copied().fold(f64::MIN, f64::max);
    max / median(p)
}

/// The `d` largest local maxima strictly above the median; a plateau
/// reports its first (lowest-parameter) point. Falls back to the largest
/// remaining grid values when too few maxima exist; the flag says whether
/// `d` genuine maxima were found.
fn pick_peaks(grid: &[f64], p: &[f64], d: usize, wrap: bool) -> (Vec<f64>, bool) {
    let n = p.len();
    let med = median(p);
    let mut cands: Vec<usize> = (0..n)
        .filter(|&i| {
            if p[i] <= med {
                return false;
            }
            let prev = if i > 0 {
                Some(p[i - 1])
            } else if wrap {
                Some(p[n - 1])
            } else {
                None
            };
            let next = if i + 1 < n {
                Some(p[i + 1])
            } else if wrap {
                Some(p[0])
            } else {
                None
            };
            prev.is_none_or(|q| p[i] > q) && next.is_none_or(|q| p[i] >= q)
        })
        .collect();
    let order = |a: &usize, b: &usize| p[*b].total_cmp(&p[*a]).then(a.cmp(b));
    cands.sort_by(order);
    let enough = cands.len() >= d && n > 1;
    cands.truncate(d);
    if cands.len() < d {
        let mut rest: Vec<usize> = (0..n).filter(|i| !cands.contains(i)).collect();
        rest.sort_by(order);
        cands.extend(rest.into_iter().take(d - cands.len()));
    }
    let mut peaks: Vec<f64> = cands.into_iter().map(|i| grid[i]).collect();
    peaks.sort_by(f64::total_cmp);
    (peaks, enough)
}

/// Root mean square error after sorting both lists (optimal 1-D matching).
pub fn rmse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() || truth.is_empty() {
        return Err(Error::domain(format!(
            "need equal nonzero cardinality, got {} estimates for {} truths",
            estimates.len(),
            truth.len()
        )));
    }
    let mut e = estimates.to_vec();
    let mut t = truth.to_vec();
    e.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    let ss: f64 = e.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / t.len() as f64).sqrt())
}

/// Hankel subspace plus MUSIC in one call, with the default window.
pub fn estimate_parameters(
    v: &VirtualLagSequence,
    order: usize,
    grid: &[f64],
    domain: SpectrumDomain,
) -> Result<SpectrumResult> {
    let sub = hankel_subspace(v, None, order)?;
    music_spectrum(&sub, grid, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::solve_dio3_zero_sum;
    use crate::sampling::{coprime_plan, three_sampler_plan};
    use crate::simulate::{gen_array_snapshots, gen_stream, DoaScene, NoiseSpec, SourceSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn streams(
        src: &SourceSet,
        rates: &[i64],
        len: usize,
        noise: &NoiseSpec,
    ) -> Vec<Vec<Complex64>> {
        rates
            .iter()
            .enumerate()
            .map(|(i, &r)| gen_stream(src, r, len, &noise.channel(i as u64)).unwrap())
            .collect()
    }

    #[test]
    fn dio3_single_source_exact() {
        let src = SourceSet::tone(1.0, 0.5, 0.3).unwrap();
        let sol = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        let x = streams(&src, &sol.rates, 200, &NoiseSpec::noiseless());
        let v = autocorr_dio3([&x[0], &x[1], &x[2]], &sol, 20, 10).unwrap();
        for k in 0..=20 {
            let want = Complex64::from_polar(1.0, 0.3 + 0.5 * k as f64);
            assert!((v.values[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_gives_zero_and_degenerate_subspace() {
        let z = vec![Complex64::new(0.0, 0.0); 400];
        let sol = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        let v = autocorr_dio3([&z, &z, &z], &sol, 10, 10).unwrap();
        assert!(v.values.iter().all(|x| x.norm() == 0.0));
        assert!(matches!(
            hankel_subspace(&v, Some(3), 1),
            Err(Error::DegenerateModel(_))
        ));

        let plan = coprime_plan(3, 4, 6, 5).unwrap();
        let v = autocorr_coprime(&z, &z, &plan).unwrap();
        assert!(v.values.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let short = vec![Complex64::new(1.0, 0.0); 3];
        let sol = solve_dio3_zero_sum([2, 3, 5]).unwrap();
        assert!(matches!(
            autocorr_dio3([&short, &short, &short], &sol, 5, 5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn coprime_single_tone_exact() {
        let src = SourceSet::tone(2.0, -1.1, 0.7).unwrap();
        let plan = coprime_plan(5, 7, 20, 4).unwrap();
        let x = streams(&src, &plan.rates, 100, &NoiseSpec::noiseless());
        let v = autocorr_coprime(&x[0], &x[1], &plan).unwrap();
        assert_eq!(v.first_lag, 0);
        for k in 0..=20 {
            let want = Complex64::from_polar(4.0, -1.1 * k as f64);
            assert!((v.values[k] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn coprime_two_tones_converge() {
        let src = SourceSet::new(vec![1.0, 1.0], vec![0.4, -1.3], vec![0.0, 1.0]).unwrap();
        let plan = coprime_plan(5, 7, 10, 1000).unwrap();
        let x = streams(&src, &plan.rates, 8000, &NoiseSpec::noiseless());
        let v = autocorr_coprime(&x[0], &x[1], &plan).unwrap();
        for k in 0..=10 {
            let kf = k as f64;
            let want = Complex64::from_polar(1.0, 0.4 * kf) + Complex64::from_polar(1.0, -1.3 * kf);
            assert!((v.values[k] - want).norm() < 1e-2, "lag {k}");
        }
    }

    #[test]
    fn dio3_three_tones_cross_terms_average_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = SourceSet::random(3, 0.2, &mut rng).unwrap();
        let gamma = 1000;
        let plan = three_sampler_plan(gamma, 10, 2000).unwrap();
        let x = streams(&src, &plan.rates, 6100, &NoiseSpec::noiseless());
        let v = autocorr_plan(&[&x[0], &x[1], &x[2]], &plan).unwrap();
        for k in 0..=10 {
            let want: Complex64 = (0..3)
                .map(|i| Complex64::from_polar(1.0, src.phases[i] + src.freqs[i] * k as f64))
                .sum();
            assert!((v.values[k] - want).norm() < 0.1, "lag {k}");
        }
    }

    #[test]
    fn hankel_rank_matches_source_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = SourceSet::random(4, 0.2, &mut rng).unwrap();
        let values = (0..=30)
            .map(|k| {
                (0..4)
                    .map(|i| {
                        Complex64::from_polar(
                            1.0 + i as f64,
                            src.phases[i] + src.freqs[i] * k as f64,
                        )
                    })
                    .sum()
            })
            .collect();
        let v = VirtualLagSequence {
            first_lag: 0,
            values,
            provenance: "test".into(),
        };
        let sub = hankel_subspace(&v, None, 4).unwrap();
        assert_eq!(sub.window, 16);
        assert_eq!(sub.numerical_rank(1e-8), 4);

        let tone = VirtualLagSequence {
            first_lag: 0,
            values: (0..5)
                .map(|k| Complex64::from_polar(1.0, 0.9 * k as f64))
                .collect(),
            provenance: "test".into(),
        };
        let sub = hankel_subspace(&tone, Some(3), 1).unwrap();
        assert!(sub.singular_values[1] / sub.singular_values[0] < 1e-10);
        assert!(hankel_subspace(&tone, Some(3), 3).is_err());
    }

    #[test]
    fn music_resolves_two_tones() {
        let values = (0..=40)
            .map(|k| {
                let k = k as f64;
                Complex64::from_polar(1.0, 0.8 * k + 0.2)
                    + Complex64::from_polar(0.7, 1.7 * k - 1.0)
            })
            .collect();
        let v = VirtualLagSequence {
            first_lag: 0,
            values,
            provenance: "test".into(),
        };
        let grid = frequency_grid(1e-3);
        let r = estimate_parameters(&v, 2, &grid, SpectrumDomain::Frequency).unwrap();
        assert!((r.peaks[0] - 0.8).abs() <= 1e-3);
        assert!((r.peaks[1] - 1.7).abs() <= 1e-3);
        assert!(!r.low_confidence);
        let csv = r.to_csv();
        assert!(csv.starts_with("grid,pseudospectrum\n"));
        assert!(csv
            .lines()
            .last()
            .unwrap()
            .starts_with("# {\"domain\":\"frequency\""));
    }

    #[test]
    fn white_noise_is_low_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = NoiseSpec::new(1.0, 99).unwrap();
        let src = SourceSet::tone(1e-300, 0.1, 0.0).unwrap();
        let v = VirtualLagSequence {
            first_lag: 0,
            values: gen_stream(&src, 1, 61, &noise).unwrap(),
            provenance: "noise".into(),
        };
        let _ = &mut rng;
        let r =
            estimate_parameters(&v, 1, &frequency_grid(1e-3), SpectrumDomain::Frequency).unwrap();
        assert_eq!(r.peaks.len(), 1);
        assert!(r.low_confidence, "flatness {}", r.flatness);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.1, 0.2], &[0.2, 0.1]).unwrap(), 0.0);
        assert!((rmse(&[0.1], &[0.15]).unwrap() - 0.05).abs() < 1e-15);
        assert!(rmse(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn lag_table_covers_guaranteed_range() {
        let params = Dio3Params {
            p1: 4,
            p2: 3,
            p3: 5,
        };
        let t = lag_table(params).unwrap();
        assert!(t.radius() >= 59);
        for k in -59..=59 {
            let e = t.entries[&k];
            let [a, b, c] = e.sensors;
            let s = t.positions[a] - t.positions[b] + t.positions[c];
            assert_eq!(if e.negated { -s } else { s }, k);
        }
        assert_eq!(spatial_products_per_lag(18), 153);
        assert_eq!(t.positive_run(), (-26, 86));
    }

    #[test]
    fn spatial_range_recovers_three_angles() {
        let params = Dio3Params {
            p1: 4,
            p2: 3,
            p3: 5,
        };
        let g = params.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let scene = DoaScene::random(3, 1.0, 0.1, true, &mut rng).unwrap();
        let x = gen_array_snapshots(&g, &scene, 50, &NoiseSpec::noiseless()).unwrap();
        let (lo, hi) = lag_table(params).unwrap().positive_run();
        let v = spatial_dio3_range(&x, params, lo, hi).unwrap();
        assert!(spatial_dio3_range(&x, params, -59, 0).is_err());
        let r = estimate_parameters(&v, 3, &angle_grid(1e-3, 1.2), SpectrumDomain::Angle).unwrap();
        let e = rmse(&r.peaks, &scene.angles).unwrap();
        assert!(
            e < 0.02,
            "rmse {e}, peaks {:?}, truth {:?}",
            r.peaks,
            scene.angles
        );
    }

    #[test]
    fn spatial_single_source_exact() {
        let params = Dio3Params {
            p1: 4,
            p2: 3,
            p3: 5,
        };
        let g = params.build().unwrap();
        let s = Complex64::from_polar(1.3, 0.4);
        let theta: f64 = 0.3;
        let scene = DoaScene::with_rotations(vec![theta], vec![s], vec![0.25]).unwrap();
        let x = gen_array_snapshots(&g, &scene, 18, &NoiseSpec::noiseless()).unwrap();
        let v = spatial_dio3(&x, params, 59).unwrap();
        let t = lag_table(params).unwrap();
        for k in -59..=59 {
            let w = s.norm_sqr() * if t.entries[&k].negated { s.conj() } else { s };
            let want = w * Complex64::from_polar(1.0, PI * theta.sin() * k as f64);
            assert!((v.at(k).unwrap() - want).norm() < 1e-10, "lag {k}");
        }
    }
}
