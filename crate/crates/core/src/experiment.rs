//! Monte Carlo RMSE-versus-SNR sweeps for frequency and DoA estimation.
//!
//! Trials run in parallel; results are assembled in trial order so output
//! is identical for a given configuration. Each trial's seed is
//! `derive_seed(seed, trial)`; its scene is drawn from that seed and its
//! noise at SNR index `s` from `derive_seed(trial_seed, NOISE_TAG + s)`, so
//! any single trial can be rerun alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::estimate::{
    angle_grid, autocorr_dio3, autocorr_plan, estimate_parameters, fmt17, frequency_grid,
    lag_table, rmse, spatial_dio3_range, SpectrumDomain,
};
use crate::geometry::Dio3Params;
use crate::numtheory::solve_dio3_zero_sum;
use crate::sampling::{degeneracy_check, n_sampler_plan, DEGENERACY_TOLERANCE};
use crate::simulate::{
    derive_seed, gen_array_snapshots, gen_sparse, gen_stream, DoaScene, NoiseSpec, SampleSource,
    SourceSet,
};

const NOISE_TAG: u64 = 1000;
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Freq,
    Doa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Three samplers at `(2+Γ, 3+Γ, 5+Γ)`.
    Three,
    /// `n` samplers at `i + Γ` over every solvable triple.
    Distributed,
}

/// Parsed experiment configuration. Unset keys take the defaults of
/// [`ExperimentConfig::defaults`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Source counts; one curve per entry (frequency experiments).
    pub sources: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Noise switched off entirely (SNR list kept for labelling).
    pub noiseless: bool,
    pub grid_step: f64,
    pub min_separation: f64,
    // frequency
    pub scheme: Scheme,
    pub samplers: usize,
    pub gamma: i64,
    pub lags: i64,
    pub snapshots: Vec<usize>,
    /// Source draws are redrawn until every cross-term phase offset of the
    /// third-order average is at least `degeneracy_margin / L` from 0 mod
    /// 2π; 0 keeps only the exact-degeneracy guard.
    pub degeneracy_margin: f64,
    // doa
    pub array: Dio3Params,
    pub max_angle: f64,
    pub rotation: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let snr_db = (-5..=5).map(|i| 2.0 * i as f64).collect();
        match kind {
            ExperimentKind::Freq => Self {
                kind,
                sources: vec![5],
                snr_db,
                trials: 100,
                seed: 1,
                noiseless: false,
                grid_step: 1e-3,
                min_separation: 0.2,
                scheme: Scheme::Three,
                samplers: 3,
                gamma: 1_000_000,
                lags: 100,
                snapshots: vec![2000],
                degeneracy_margin: 5.0,
                array: Dio3Params {
                    p1: 4,
                    p2: 3,
                    p3: 5,
                },
                max_angle: 1.0,
                rotation: true,
            },
            ExperimentKind::Doa => Self {
                kind,
                sources: vec![3],
                snr_db,
                trials: 100,
                seed: 1,
                noiseless: false,
                grid_step: 1e-3,
                min_separation: 0.15,
                scheme: Scheme::Three,
                samplers: 3,
                gamma: 0,
                lags: 0,
                snapshots: vec![18, 50],
                degeneracy_margin: 0.0,
                array: Dio3Params {
                    p1: 4,
                    p2: 3,
                    p3: 5,
                },
                max_angle: 1.0,
                rotation: true,
            },
        }
    }

    /// Parses `key = value` lines (`#` starts a comment), then applies
    /// `overrides` in order. `kind` must appear in one of them.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("line {}: expected key = value", no + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        for (k, v) in overrides {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let kind = match map.remove("kind").as_deref() {
            Some("freq") => ExperimentKind::Freq,
            Some("doa") => ExperimentKind::Doa,
            Some(other) => return Err(Error::domain(format!("unknown experiment kind '{other}'"))),
            None => return Err(Error::domain("config needs kind = freq | doa")),
        };
        let mut cfg = Self::defaults(kind);
        for (k, v) in &map {
            let bad = |e: String| Error::domain(format!("{k}: {e}"));
            match k.as_str() {
                "sources" => cfg.sources = parse_list(v).map_err(bad)?,
                "snr_db" => cfg.snr_db = parse_list(v).map_err(bad)?,
                "trials" => cfg.trials = parse_one(v).map_err(bad)?,
                "seed" => cfg.seed = parse_one(v).map_err(bad)?,
                "noiseless" => cfg.noiseless = parse_one(v).map_err(bad)?,
                "grid_step" => cfg.grid_step = parse_one(v).map_err(bad)?,
                "min_separation" => cfg.min_separation = parse_one(v).map_err(bad)?,
                "scheme" => {
                    cfg.scheme = match v.as_str() {
                        "three" => Scheme::Three,
                        "distributed" => Scheme::Distributed,
                        _ => return Err(bad(format!("unknown scheme '{v}'"))),
                    }
                }
                "samplers" => cfg.samplers = parse_one(v).map_err(bad)?,
                "gamma" => cfg.gamma = parse_one(v).map_err(bad)?,
                "lags" => cfg.lags = parse_one(v).map_err(bad)?,
                "snapshots" => cfg.snapshots = parse_list(v).map_err(bad)?,
                "degeneracy_margin" => cfg.degeneracy_margin = parse_one(v).map_err(bad)?,
                "array" => {
                    let p: Vec<i64> = parse_list(v).map_err(bad)?;
                    if p.len() != 3 {
                        return Err(bad("expected p1,p2,p3".into()));
                    }
                    cfg.array = Dio3Params {
                        p1: p[0],
                        p2: p[1],
                        p3: p[2],
                    };
                }
                "max_angle" => cfg.max_angle = parse_one(v).map_err(bad)?,
                "rotation" => {
                    cfg.rotation = match v.as_str() {
                        "random" => true,
                        "none" => false,
                        _ => return Err(bad(format!("expected random | none, got '{v}'"))),
                    }
                }
                _ => return Err(Error::domain(format!("unknown config key '{k}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::domain(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be >= 1");
        }
        if self.snr_db.is_empty() {
            return fail("snr_db must be nonempty");
        }
        if self.sources.is_empty() || self.sources.contains(&0) {
            return fail("sources must be a nonempty list of counts >= 1");
        }
        if self.snapshots.is_empty() || self.snapshots.iter().any(|&l| l < 2) {
            return fail("snapshots must be a nonempty list of counts >= 2");
        }
        if !(self.grid_step > 0.0 && self.grid_step < 0.1) {
            return fail("grid_step must be in (0, 0.1)");
        }
        if self.kind == ExperimentKind::Freq {
            if self.lags < 2 {
                return fail("lags must be >= 2");
            }
            if self.gamma < 0 {
                return fail("gamma must be >= 0");
            }
            if !(self.degeneracy_margin >= 0.0 && self.degeneracy_margin < 100.0) {
                return fail("degeneracy_margin must be in [0, 100)");
            }
            if self.scheme == Scheme::Distributed && self.samplers < 3 {
                return fail("samplers must be >= 3");
            }
        } else if !(self.max_angle > 0.0 && self.max_angle < PI / 2.0) {
            return fail("max_angle must be in (0, pi/2)");
        }
        Ok(())
    }

    /// The flat `key = value` form; parsing it back gives the same config.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut lines = vec![
            format!(
                "kind = {}",
                match self.kind {
                    ExperimentKind::Freq => "freq",
                    ExperimentKind::Doa => "doa",
                }
            ),
            format!(
                "sources = {}",
                join(self.sources.iter().map(|x| x.to_string()).collect())
            ),
            format!(
                "snr_db = {}",
                join(self.snr_db.iter().map(|x| x.to_string()).collect())
            ),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("noiseless = {}", self.noiseless),
            format!("grid_step = {}", self.grid_step),
            format!("min_separation = {}", self.min_separation),
            format!(
                "snapshots = {}",
                join(self.snapshots.iter().map(|x| x.to_string()).collect())
            ),
        ];
        match self.kind {
            ExperimentKind::Freq => {
                lines.push(format!(
                    "scheme = {}",
                    match self.scheme {
                        Scheme::Three => "three",
                        Scheme::Distributed => "distributed",
                    }
                ));
                lines.push(format!("samplers = {}", self.samplers));
                lines.push(format!("gamma = {}", self.gamma));
                lines.push(format!("lags = {}", self.lags));
                lines.push(format!("degeneracy_margin = {}", self.degeneracy_margin));
            }
            ExperimentKind::Doa => {
                let a = self.array;
                lines.push(format!("array = {},{},{}", a.p1, a.p2, a.p3));
                lines.push(format!("max_angle = {}", self.max_angle));
                lines.push(format!(
                    "rotation = {}",
                    if self.rotation { "random" } else { "none" }
                ));
            }
        }
        lines.join("\n") + "\n"
    }
}

fn parse_one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse '{v}'"))
}

fn parse_list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(parse_one).collect()
}

/// One curve: RMSE per SNR for one source count / snapshot count.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub sources: usize,
    pub snapshots: usize,
    /// `rmse[s][t]` for SNR index `s`, trial `t`.
    pub rmse: Vec<Vec<f64>>,
    /// Trials whose spectrum was flagged low-confidence, per SNR.
    pub low_confidence: Vec<usize>,
}

impl Curve {
    pub fn mean_rmse(&self) -> Vec<f64> {
        self.rmse
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }
}

/// Per-SNR comparison of two snapshot counts at one source count.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotComparison {
    pub sources: usize,
    pub fewer_snapshots: usize,
    pub more_snapshots: usize,
    /// Per SNR: RMSE with more snapshots is first-order stochastically
    /// smaller.
    pub dominates: Vec<bool>,
    /// Per SNR: fraction of paired trials where more snapshots did at least
    /// as well.
    pub paired_fraction: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub trial_seeds: Vec<u64>,
    pub curves: Vec<Curve>,
    /// How the third-order sequence feeds MUSIC, for the record.
    pub method: String,
}

impl SweepResult {
    /// `curve,sources,snapshots,snr_db,mean_rmse,median_rmse,low_confidence`.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("curve,sources,snapshots,snr_db,mean_rmse,median_rmse,low_confidence\n");
        for c in &self.curves {
            let means = c.mean_rmse();
            for (i, snr) in self.config.snr_db.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.label,
                    c.sources,
                    c.snapshots,
                    fmt17(*snr),
                    fmt17(means[i]),
                    fmt17(median(&c.rmse[i])),
                    c.low_confidence[i]
                ));
            }
        }
        s
    }

    /// For each source count, every pair of snapshot counts compared per
    /// SNR (larger snapshot count listed as `more_snapshots`).
    pub fn snapshot_comparisons(&self) -> Vec<SnapshotComparison> {
        let mut out = Vec::new();
        for (i, a) in self.curves.iter().enumerate() {
            for b in &self.curves[i + 1..] {
                if a.sources != b.sources || a.snapshots == b.snapshots {
                    continue;
                }
                let (few, more) = if a.snapshots < b.snapshots {
                    (a, b)
                } else {
                    (b, a)
                };
                out.push(SnapshotComparison {
                    sources: a.sources,
                    fewer_snapshots: few.snapshots,
                    more_snapshots: more.snapshots,
                    dominates: few
                        .rmse
                        .iter()
                        .zip(&more.rmse)
                        .map(|(f, m)| stochastically_smaller(m, f))
                        .collect(),
                    paired_fraction: few
                        .rmse
                        .iter()
                        .zip(&more.rmse)
                        .map(|(f, m)| paired_fraction(m, f))
                        .collect(),
                });
            }
        }
        out
    }

    /// Summary JSON with fixed 17-significant-digit floats.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct CurveJson<'a> {
            label: &'a str,
            sources: usize,
            snapshots: usize,
            mean_rmse: Vec<Box<RawValue>>,
            spearman_rho: Box<RawValue>,
            low_confidence: &'a [usize],
        }
        #[derive(Serialize)]
        struct ComparisonJson {
            sources: usize,
            fewer_snapshots: usize,
            more_snapshots: usize,
            /// Per SNR: more snapshots first-order dominates fewer.
            dominates: Vec<bool>,
            paired_fraction: Vec<Box<RawValue>>,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            config: String,
            method: &'a str,
            snr_db: Vec<Box<RawValue>>,
            trial_seeds: &'a [u64],
            curves: Vec<CurveJson<'a>>,
            #[serde(skip_serializing_if = "Vec::is_empty")]
            snapshot_comparisons: Vec<ComparisonJson>,
        }
        let curves = self
            .curves
            .iter()
            .map(|c| {
                let means = c.mean_rmse();
                CurveJson {
                    label: &c.label,
                    sources: c.sources,
                    snapshots: c.snapshots,
                    spearman_rho: raw_f64(spearman(&self.config.snr_db, &means)),
                    mean_rmse: means.into_iter().map(raw_f64).collect(),
                    low_confidence: &c.low_confidence,
                }
            })
            .collect();
        let snapshot_comparisons = self
            .snapshot_comparisons()
            .into_iter()
            .map(|c| ComparisonJson {
                sources: c.sources,
                fewer_snapshots: c.fewer_snapshots,
                more_snapshots: c.more_snapshots,
                dominates: c.dominates,
                paired_fraction: c.paired_fraction.into_iter().map(raw_f64).collect(),
            })
            .collect();
        let summary = Summary {
            snapshot_comparisons,
            config: self.config.to_text(),
            method: &self.method,
            snr_db: self.config.snr_db.iter().copied().map(raw_f64).collect(),
            trial_seeds: &self.trial_seeds,
            curves,
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}

/// A float as a raw JSON number in 17 significant digits (`null` if not
/// finite).
pub fn raw_f64(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        fmt17(x)
    } else {
        "null".into()
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties); NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// First-order stochastic dominance of `smaller` over `larger` (as error
/// samples): the empirical CDF of `smaller` is at least that of `larger`
/// at every point.
pub fn stochastically_smaller(smaller: &[f64], larger: &[f64]) -> bool {
    let mut a = smaller.to_vec();
    let mut b = larger.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], t: f64| s.partition_point(|&x| x <= t) as f64 / s.len() as f64;
    a.iter().chain(&b).all(|&t| cdf(&a, t) >= cdf(&b, t))
}

/// Fraction of paired trials with `first[t] <= second[t]`.
pub fn paired_fraction(first: &[f64], second: &[f64]) -> f64 {
    let wins = first.iter().zip(second).filter(|(a, b)| a <= b).count();
    wins as f64 / first.len() as f64
}

struct TrialOutcome {
    rmse: f64,
    low_confidence: bool,
}

fn noise_for(cfg: &ExperimentConfig, mean_power: f64, snr: f64, seed: u64) -> NoiseSpec {
    if cfg.noiseless {
        NoiseSpec::noiseless()
    } else {
        NoiseSpec::for_snr(mean_power, snr, seed)
    }
}

/// Frequency trial: random tones (screened against the three-sampler
/// degeneracy set), sub-Nyquist streams, third-order lag sequence on
/// `0..=lags`, Hankel/MUSIC over `(−π, π]`.
fn freq_trial(
    cfg: &ExperimentConfig,
    d: usize,
    l: usize,
    trial_seed: u64,
    snr_idx: usize,
    grid: &[f64],
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let sol = solve_dio3_zero_sum([2 + cfg.gamma, 3 + cfg.gamma, 5 + cfg.gamma])?;
    let tol = (cfg.degeneracy_margin / l as f64).max(DEGENERACY_TOLERANCE);
    let mut src = SourceSet::random(d, cfg.min_separation, &mut rng)?;
    let mut attempts = 1;
    while cfg.scheme == Scheme::Three && !degeneracy_check(&sol, &src.freqs, tol)?.ok {
        if attempts == MAX_DRAWS {
            return Err(Error::domain(format!(
                "no source draw passed the degeneracy margin in {MAX_DRAWS} attempts"
            )));
        }
        src = SourceSet::random(d, cfg.min_separation, &mut rng)?;
        attempts += 1;
    }
    let noise = noise_for(
        cfg,
        src.mean_power(),
        cfg.snr_db[snr_idx],
        derive_seed(trial_seed, NOISE_TAG + snr_idx as u64),
    );
    let l = l as i64;
    let v = match cfg.scheme {
        Scheme::Three => {
            // largest index read per sampler is |b_i|·K + |a_i|·L
            let x: Vec<Vec<_>> = (0..3)
                .map(|i| {
                    let len = sol.b[i].abs() * cfg.lags + sol.a[i].abs() * l + 1;
                    gen_stream(&src, sol.rates[i], len as usize, &noise.channel(i as u64))
                })
                .collect::<Result<_>>()?;
            autocorr_dio3([&x[0], &x[1], &x[2]], &sol, cfg.lags, l)?
        }
        Scheme::Distributed => {
            let plan = n_sampler_plan(cfg.samplers, cfg.gamma, cfg.lags, l)?;
            let x: Vec<_> = plan
                .instants
                .iter()
                .zip(&plan.rates)
                .enumerate()
                .map(|(i, (idx, &rate))| gen_sparse(&src, rate, idx, &noise.channel(i as u64)))
                .collect::<Result<_>>()?;
            let refs: Vec<&dyn SampleSource> = x.iter().map(|s| s as &dyn SampleSource).collect();
            autocorr_plan(&refs, &plan)?
        }
    };
    let spec = estimate_parameters(&v, d, grid, SpectrumDomain::Frequency)?;
    Ok(TrialOutcome {
        rmse: rmse(&spec.peaks, &src.freqs)?,
        low_confidence: spec.low_confidence,
    })
}

/// DoA trial: random far-field scene on the third-order array, spatial
/// third-order sequence on the positive-realization lag run, Hankel/MUSIC
/// over angle.
fn doa_trial(
    cfg: &ExperimentConfig,
    d: usize,
    l: usize,
    trial_seed: u64,
    snr_idx: usize,
    grid: &[f64],
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let scene = DoaScene::random(d, cfg.max_angle, cfg.min_separation, cfg.rotation, &mut rng)?;
    let noise = noise_for(
        cfg,
        scene.mean_power(),
        cfg.snr_db[snr_idx],
        derive_seed(trial_seed, NOISE_TAG + snr_idx as u64),
    );
    let geom = cfg.array.build()?;
    let x = gen_array_snapshots(&geom, &scene, l, &noise)?;
    let (lo, hi) = lag_table(cfg.array)?.positive_run();
    let v = spatial_dio3_range(&x, cfg.array, lo, hi)?;
    let spec = estimate_parameters(&v, d, grid, SpectrumDomain::Angle)?;
    Ok(TrialOutcome {
        rmse: rmse(&spec.peaks, &scene.angles)?,
        low_confidence: spec.low_confidence,
    })
}

/// Runs every (curve, SNR, trial) combination.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let trial_seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|t| derive_seed(cfg.seed, t))
        .collect();
    let (grid, method) = match cfg.kind {
        ExperimentKind::Freq => (
            frequency_grid(cfg.grid_step),
            "third-order lag sequence on lags 0..=K, one-sided Hankel (default window), MUSIC over (-pi, pi]",
        ),
        ExperimentKind::Doa => (
            angle_grid(cfg.grid_step, PI / 2.0 - cfg.grid_step),
            "spatial third-order sequence on the positive-realization lag run, one-sided Hankel (default window), MUSIC over angle",
        ),
    };
    if cfg.kind == ExperimentKind::Freq && cfg.scheme == Scheme::Distributed {
        // fail fast on a bad sampler count before spawning trials
        n_sampler_plan(cfg.samplers, cfg.gamma, 1, 1)?;
    }
    let mut curves = Vec::new();
    for &d in &cfg.sources {
        for &l in &cfg.snapshots {
            let jobs: Vec<(usize, usize)> = (0..cfg.snr_db.len())
                .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
                .collect();
            let outcomes: Vec<TrialOutcome> = jobs
                .par_iter()
                .map(|&(s, t)| match cfg.kind {
                    ExperimentKind::Freq => freq_trial(cfg, d, l, trial_seeds[t], s, &grid),
                    ExperimentKind::Doa => doa_trial(cfg, d, l, trial_seeds[t], s, &grid),
                })
                .collect::<Result<_>>()?;
            let mut rmse = vec![Vec::with_capacity(cfg.trials); cfg.snr_db.len()];
            let mut low = vec![0; cfg.snr_db.len()];
            for (&(s, _), o) in jobs.iter().zip(&outcomes) {
                rmse[s].push(o.rmse);
                low[s] += o.low_confidence as usize;
            }
            curves.push(Curve {
                label: format!("D={d},L={l}"),
                sources: d,
                snapshots: l,
                rmse,
                low_confidence: low,
            });
        }
    }
    Ok(SweepResult {
        config: cfg.clone(),
        trial_seeds,
        curves,
        method: method.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // ties share the average rank
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn dominance() {
        assert!(stochastically_smaller(&[0.1, 0.2, 0.3], &[0.2, 0.3, 0.4]));
        assert!(!stochastically_smaller(&[0.1, 0.5], &[0.2, 0.3]));
        assert_eq!(paired_fraction(&[0.1, 0.5], &[0.2, 0.3]), 0.5);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let cfg =
            ExperimentConfig::parse("kind = freq\n# comment\nsources = 5,10\ntrials = 3\n", &[])
                .unwrap();
        assert_eq!(cfg.sources, vec![5, 10]);
        assert_eq!(cfg.trials, 3);
        let again = ExperimentConfig::parse(&cfg.to_text(), &[]).unwrap();
        assert_eq!(cfg, again);
        let o = vec![("trials".to_string(), "7".to_string())];
        assert_eq!(
            ExperimentConfig::parse(&cfg.to_text(), &o).unwrap().trials,
            7
        );
        assert!(ExperimentConfig::parse("sources = 5", &[]).is_err());
        assert!(ExperimentConfig::parse("kind = freq\ntrials = 0", &[]).is_err());
        assert!(ExperimentConfig::parse("kind = freq\nbogus = 1", &[]).is_err());
        assert!(ExperimentConfig::parse("kind = doa\nmax_angle = 2", &[]).is_err());
    }

    #[test]
    fn small_sweeps_are_deterministic() {
        let text =
            "kind = freq\ntrials = 3\nsnr_db = 0,10\nlags = 30\nsnapshots = 200\ngamma = 1000\n";
        let cfg = ExperimentConfig::parse(text, &[]).unwrap();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.curves[0].rmse[0].len(), 3);

        let cfg = ExperimentConfig::parse(
            "kind = doa\ntrials = 2\nsnr_db = 10\nnoiseless = true\n",
            &[],
        )
        .unwrap();
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.curves.len(), 2);
        for c in &r.curves {
            assert!(c.rmse[0].iter().all(|&e| e < 2e-3), "{:?}", c.rmse);
        }
    }
}
