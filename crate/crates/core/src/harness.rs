//! Experiment driver: conditioned runs over a list of `n`, scaling fits,
//! EXC tail curves, SVG plots and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::conditioned::{default_half_width, warm_start, ChainCounters, ConditionSpec, ConstrainedChain};
use crate::droplet::{droplet_stats, write_csv, DropletStats, SampleTag};
use crate::error::{Error, Result};
use crate::lattice::{BondConfig, BoxGeom};
use crate::model::RcParams;
use crate::rng::StreamRng;
use crate::wulff::{build_wulff, choose_constants, estimate_xi, WulffShape, XiTable, DEFAULT_ANNULUS};

/// Assumption recorded in every run manifest.
pub const IRREDUCIBILITY_NOTE: &str =
    "single-edge dynamics restricted to the area event is assumed irreducible; this is not proved";

/// How the Wulff shape and regeneration constants are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WulffSpec {
    pub dirs: usize,
    pub kmax: u32,
    pub samples: u64,
    pub seed: u64,
    /// `(c1, C1)` used to bound `q0`.
    pub annulus: (f64, f64),
}

impl Default for WulffSpec {
    fn default() -> Self {
        WulffSpec { dirs: 16, kmax: 16, samples: 200_000, seed: 0, annulus: DEFAULT_ANNULUS }
    }
}

/// Cached `(XiTable, WulffShape)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WulffBundle {
    pub spec: WulffSpec,
    pub xi: XiTable,
    pub shape: WulffShape,
}

pub fn wulff_cache_name(params: &RcParams, spec: &WulffSpec) -> String {
    format!("wulff_p{}_q{}_k{}_s{}_seed{}_d{}.json", params.p, params.q, spec.kmax, spec.samples, spec.seed, spec.dirs)
}

/// Estimate the Wulff shape with constants, reading and writing a JSON
/// cache in `cache_dir` when one is given.
pub fn wulff_for(params: &RcParams, spec: &WulffSpec, cache_dir: Option<&Path>) -> Result<WulffBundle> {
    let path = cache_dir.map(|d| d.join(wulff_cache_name(params, spec)));
    if let Some(p) = &path {
        if p.exists() {
            let bundle: WulffBundle = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            if bundle.spec == *spec && bundle.shape.constants.is_some() {
                return Ok(bundle);
            }
        }
    }
    let xi = estimate_xi(params, spec.dirs, spec.kmax, spec.samples, spec.seed)?.symmetrize()?;
    let mut shape = build_wulff(&xi)?;
    shape.constants = Some(choose_constants(&shape, spec.annulus.0, spec.annulus.1)?);
    let bundle = WulffBundle { spec: *spec, xi, shape };
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string_pretty(&bundle)?)?;
    }
    Ok(bundle)
}

/// Settings shared by the chains of one conditioned run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub burn_in: u64,
    pub sweeps: u64,
    pub thin: u64,
    pub chains: u32,
    pub seed: u64,
}

impl ChainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.sweeps < self.thin {
            return Err(Error::input("need 0 < thin <= sweeps"));
        }
        if self.chains == 0 {
            return Err(Error::input("need at least one chain"));
        }
        Ok(())
    }

    pub fn samples_per_chain(&self) -> u64 {
        self.sweeps / self.thin
    }

    /// RNG stream of chain `k` at droplet size `n`.
    pub fn stream(n: u32, k: u32) -> u64 {
        ((n as u64) << 20) | k as u64
    }
}

/// Rows and counters of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub n: u32,
    pub chain: u32,
    pub stream: u64,
    pub rows: Vec<DropletStats>,
    pub counters: ChainCounters,
    /// State after the last sweep.
    #[serde(skip)]
    pub last: Option<BondConfig>,
}

/// Run one conditioned chain and measure every emitted sample.
pub fn run_chain(
    params: &RcParams,
    n: u32,
    half_width: u32,
    plan: &ChainPlan,
    chain: u32,
    wulff: &WulffShape,
) -> Result<ChainResult> {
    let geom = BoxGeom::new(half_width)?;
    let spec = ConditionSpec::new(n)?;
    spec.check_box(geom)?;
    let stream = ChainPlan::stream(n, chain);
    let mut rng = StreamRng::new(plan.seed, stream);
    let start = warm_start(geom, params, n, &mut rng)?;
    let mut ch = ConstrainedChain::new(*params, spec, start)?;
    for _ in 0..plan.burn_in {
        ch.sweep(&mut rng)?;
    }
    let mut rows = Vec::with_capacity(plan.samples_per_chain() as usize);
    for s in 1..=plan.sweeps {
        ch.sweep(&mut rng)?;
        if s % plan.thin == 0 {
            let tag = SampleTag { seed: plan.seed, stream, sample: rows.len() as u64 };
            let row = droplet_stats(ch.config(), n, wulff, tag)?;
            row.validate()?;
            rows.push(row);
        }
    }
    ch.verify()?;
    Ok(ChainResult { n, chain, stream, rows, counters: ch.counters(), last: Some(ch.config().clone()) })
}

/// Map `f` over `items` on up to `threads` workers; results keep input order.
pub fn fan_out<I, T, F>(items: Vec<I>, threads: usize, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| items.into_par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    items.into_iter().map(f).collect()
}

/// Scan over droplet sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub n_list: Vec<u32>,
    pub params: RcParams,
    pub chains: ChainPlan,
    /// Box half-width is `ceil(margin * n)`.
    pub margin: f64,
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("n_list must be strictly increasing"));
        }
        if self.n_list.first() == Some(&0) {
            return Err(Error::input("n must be positive"));
        }
        if !self.params.is_subcritical() {
            return Err(Error::input(format!("p = {} is not subcritical at q = {}", self.params.p, self.params.q)));
        }
        if !(self.margin >= 1.0) {
            return Err(Error::input("box margin must be at least 1"));
        }
        self.chains.validate()
    }

    pub fn samples_per_n(&self) -> u64 {
        self.chains.chains as u64 * self.chains.samples_per_chain()
    }

    pub fn half_width(&self, n: u32) -> u32 {
        if self.margin == 2.5 {
            default_half_width(n)
        } else {
            ((self.margin * n as f64).ceil() as u32).max(2)
        }
    }
}

/// Outcome of a scan at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub n: u32,
    pub half_width: u32,
    pub rows: Vec<DropletStats>,
    pub chains: Vec<ChainSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain: u32,
    pub stream: u64,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub counters: ChainCounters,
}

impl From<&ChainResult> for ChainSummary {
    fn from(r: &ChainResult) -> Self {
        ChainSummary {
            chain: r.chain,
            stream: r.stream,
            samples: r.rows.len(),
            acceptance_rate: r.counters.acceptance_rate(),
            counters: r.counters,
        }
    }
}

/// Run every `(n, chain)` work item and merge in `(n, chain)` order. A
/// failing `n` records its error and the scan continues.
pub fn run_scan(plan: &ScanPlan, wulff: &WulffShape, threads: usize) -> Result<Vec<ScanEntry>> {
    plan.validate()?;
    let items: Vec<(u32, u32)> =
        plan.n_list.iter().flat_map(|&n| (0..plan.chains.chains).map(move |k| (n, k))).collect();
    let results =
        fan_out(items, threads, |(n, k)| run_chain(&plan.params, n, plan.half_width(n), &plan.chains, k, wulff));
    let mut out = Vec::new();
    let mut it = results.into_iter();
    for &n in &plan.n_list {
        let mut entry =
            ScanEntry { n, half_width: plan.half_width(n), rows: Vec::new(), chains: Vec::new(), error: None };
        for _ in 0..plan.chains.chains {
            match it.next().expect("one result per work item") {
                Ok(r) => {
                    entry.chains.push(ChainSummary::from(&r));
                    entry.rows.extend(r.rows);
                }
                Err(Error::Invariant(msg)) => return Err(Error::Invariant(msg)),
                Err(e) => {
                    entry.error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        out.push(entry);
    }
    Ok(out)
}

/// CSV file name used for the rows at `n`.
pub fn scan_csv_name(n: u32) -> String {
    format!("droplets_n{n:03}.csv")
}

/// Write one CSV per `n`; returns the paths in `n` order.
pub fn write_scan(entries: &[ScanEntry], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for e in entries {
        let path = dir.join(scan_csv_name(e.n));
        write_csv(std::fs::File::create(&path)?, &e.rows)?;
        paths.push(path);
    }
    Ok(paths)
}

/// JSON run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub assumptions: Vec<String>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, parameters: serde_json::Value) -> Self {
        Manifest {
            tool: "droplab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            parameters,
            assumptions: Vec::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
            wall_clock_seconds: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Columns that can be fitted or plotted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mlr,
    Mfl,
    Mlrf,
    Exc,
    Gd,
    ThetaRgMax,
    Mprg,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mlr => "mlr",
            Statistic::Mfl => "mfl",
            Statistic::Mlrf => "mlrf",
            Statistic::Exc => "exc",
            Statistic::Gd => "gd",
            Statistic::ThetaRgMax => "theta_rg_max",
            Statistic::Mprg => "mprg",
        }
    }

    pub fn value(self, r: &DropletStats) -> f64 {
        match self {
            Statistic::Mlr => r.mlr,
            Statistic::Mfl => r.mfl,
            Statistic::Mlrf => r.mlrf,
            Statistic::Exc => r.exc as f64,
            Statistic::Gd => r.gd,
            Statistic::ThetaRgMax => r.theta_rg_max,
            Statistic::Mprg => r.mprg,
        }
    }

    /// Predicted growth used for the ratio band.
    pub fn normalization(self, n: f64) -> Option<f64> {
        let l = n.ln();
        match self {
            Statistic::Mlr => Some(n.cbrt() * l.powf(2.0 / 3.0)),
            Statistic::Mfl => Some(n.powf(2.0 / 3.0) * l.cbrt()),
            Statistic::ThetaRgMax => Some(l / n),
            _ => None,
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mlr" => Statistic::Mlr,
            "mfl" => Statistic::Mfl,
            "mlrf" => Statistic::Mlrf,
            "exc" => Statistic::Exc,
            "gd" => Statistic::Gd,
            "theta_rg_max" | "theta" => Statistic::ThetaRgMax,
            "mprg" => Statistic::Mprg,
            _ => return Err(Error::input(format!("unknown statistic `{s}`"))),
        })
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: u32,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Ordinary least squares line with a 95% t-interval on the slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub residuals: Vec<f64>,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let k = x.len();
    if k < 2 || y.len() != k {
        return Err(Error::input("a line fit needs at least two points"));
    }
    let mx = x.iter().sum::<f64>() / k as f64;
    let my = y.iter().sum::<f64>() / k as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::input("degenerate abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let (stderr, ci95) = if k > 2 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (k - 2) as f64;
        let se = (s2 / sxx).sqrt();
        let tq =
            StudentsT::new(0.0, 1.0, (k - 2) as f64).map_err(|e| Error::Invariant(e.to_string()))?.inverse_cdf(0.975);
        (se, (slope - tq * se, slope + tq * se))
    } else {
        (f64::NAN, (f64::NEG_INFINITY, f64::INFINITY))
    };
    Ok(LineFit { slope, intercept, stderr, ci95, residuals })
}

/// Fit of `log m = a + b log n + c log log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedFit {
    pub exponent: f64,
    pub log_power: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBand {
    pub ratios: Vec<(u32, f64)>,
    /// Largest over smallest ratio.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub statistic: Statistic,
    pub per_n: Vec<NSummary>,
    pub power: LineFit,
    pub corrected: Option<CorrectedFit>,
    pub ratio: Option<RatioBand>,
}

impl FitReport {
    /// Medians strictly increase with `n`.
    pub fn medians_increasing(&self) -> bool {
        self.per_n.windows(2).all(|w| w[1].median > w[0].median)
    }
}

/// Per-`n` medians and IQRs of one column.
pub fn summarize(rows: &[DropletStats], stat: Statistic) -> Vec<NSummary> {
    let mut by_n: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_n.entry(r.n).or_default().push(stat.value(r));
    }
    by_n.into_iter()
        .map(|(n, mut v)| {
            v.sort_by(f64::total_cmp);
            let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            NSummary { n, count: v.len(), median, q1, q3, iqr: q3 - q1 }
        })
        .collect()
}

/// Power-law and corrected-form fits of per-`n` medians.
pub fn fit_scaling(rows: &[DropletStats], stat: Statistic) -> Result<FitReport> {
    let per_n = summarize(rows, stat);
    if per_n.len() < 3 {
        return Err(Error::input(format!("fitting needs at least three distinct n, got {}", per_n.len())));
    }
    if per_n.iter().any(|s| !(s.median > 0.0)) {
        return Err(Error::input(format!("{} has a non-positive median; log fit undefined", stat.name())));
    }
    if per_n.windows(2).all(|w| w[0].median == w[1].median) {
        return Err(Error::input(format!("{} medians are constant; fit is degenerate", stat.name())));
    }
    let ln_n: Vec<f64> = per_n.iter().map(|s| (s.n as f64).ln()).collect();
    let ln_m: Vec<f64> = per_n.iter().map(|s| s.median.ln()).collect();
    let power = fit_line(&ln_n, &ln_m)?;
    let corrected = if per_n.iter().all(|s| s.n >= 3) {
        let k = per_n.len();
        let a = DMatrix::from_fn(k, 3, |i, j| match j {
            0 => 1.0,
            1 => ln_n[i],
            _ => ln_n[i].ln(),
        });
        let b = DVector::from_column_slice(&ln_m);
        let sol = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Invariant(e.to_string()))?;
        let fitted = &a * &sol;
        Some(CorrectedFit {
            intercept: sol[0],
            exponent: sol[1],
            log_power: sol[2],
            residuals: (0..k).map(|i| ln_m[i] - fitted[i]).collect(),
        })
    } else {
        None
    };
    let ratio = stat.normalization(1.0).map(|_| {
        let ratios: Vec<(u32, f64)> = per_n
            .iter()
            .map(|s| (s.n, s.median / stat.normalization(s.n as f64).expect("normalized statistic")))
            .collect();
        let hi = ratios.iter().map(|r| r.1).fold(f64::MIN, f64::max);
        let lo = ratios.iter().map(|r| r.1).fold(f64::MAX, f64::min);
        RatioBand { ratios, spread: hi / lo }
    });
    Ok(FitReport { statistic: stat, per_n, power, corrected, ratio })
}

/// Binned survival of `EXC / n` with a log-linear fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub n: u32,
    pub samples: usize,
    pub t: Vec<f64>,
    pub survival: Vec<f64>,
    pub counts: Vec<usize>,
    /// Bins where the survival fails to drop strictly while positive.
    pub flagged: Vec<usize>,
    /// Fit over bins with at least [`TAIL_MIN_COUNT`] exceedances.
    pub fit: Option<TailFit>,
}

/// Weighted fit of `log S(t) = a + b t`; the interval is a bootstrap
/// percentile interval over resampled droplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub bins_used: usize,
    pub replicates: usize,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

pub const TAIL_MIN_SAMPLES: usize = 200;
pub const TAIL_MIN_COUNT: usize = 5;
pub const TAIL_BOOTSTRAP: usize = 500;
const TAIL_BOOTSTRAP_SEED: u64 = 0x7a11;

fn survival_counts(sorted: &[f64], grid: &[f64], width: f64) -> Vec<usize> {
    grid.iter().map(|&g| sorted.len() - sorted.partition_point(|&v| v < g - 1e-12 * width)).collect()
}

/// Weighted least squares of `log S` on `t`; the weight of a bin is the
/// inverse delta-method variance `N S / (1 - S)`.
fn survival_line(grid: &[f64], counts: &[usize], total: usize) -> Option<(f64, f64, usize)> {
    let nf = total as f64;
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy, mut used) = (0.0, 0.0, 0.0, 0.0, 0.0, 0);
    for (&x, &c) in grid.iter().zip(counts) {
        if c < TAIL_MIN_COUNT {
            continue;
        }
        let s = c as f64 / nf;
        let w = nf * s / (1.0 - s).max(1.0 / nf);
        let y = s.ln();
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        used += 1;
    }
    let det = sw * sxx - sx * sx;
    if used < 3 || !(det > 0.0) {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    Some((slope, (sy - slope * sx) / sw, used))
}

impl TailReport {
    /// Survival never increases and ends below its start.
    pub fn decreasing(&self) -> bool {
        self.survival.windows(2).all(|w| w[1] <= w[0]) && self.survival.last().is_some_and(|&l| l < self.survival[0])
    }
}

pub fn tail_report(rows: &[DropletStats], n: u32, bins: usize) -> Result<TailReport> {
    if bins < 2 {
        return Err(Error::input("need at least two bins"));
    }
    let mut t: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.exc as f64 / n as f64).collect();
    if t.len() < TAIL_MIN_SAMPLES {
        return Err(Error::input(format!(
            "tail report needs at least {TAIL_MIN_SAMPLES} samples at n = {n}, got {}",
            t.len()
        )));
    }
    t.sort_by(f64::total_cmp);
    let t_max = t[t.len() - 1];
    let width = if t_max > 0.0 { t_max / bins as f64 } else { 1.0 / bins as f64 };
    let grid: Vec<f64> = (0..=bins).map(|j| j as f64 * width).collect();
    let total = t.len();
    let counts = survival_counts(&t, &grid, width);
    let survival: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let flagged = (1..survival.len()).filter(|&j| survival[j] > 0.0 && survival[j] >= survival[j - 1]).collect();
    let fit = survival_line(&grid, &counts, total).map(|(slope, intercept, bins_used)| {
        let mut rng = StreamRng::new(TAIL_BOOTSTRAP_SEED, n as u64);
        let mut boot = Vec::with_capacity(TAIL_BOOTSTRAP);
        let mut draw = vec![0.0; total];
        for _ in 0..TAIL_BOOTSTRAP {
            for d in draw.iter_mut() {
                *d = t[rng.random_range(0..total)];
            }
            draw.sort_by(f64::total_cmp);
            if let Some((b, _, _)) = survival_line(&grid, &survival_counts(&draw, &grid, width), total) {
                boot.push(b);
            }
        }
        boot.sort_by(f64::total_cmp);
        let (stderr, ci95) = if boot.len() >= 2 {
            let m = boot.iter().sum::<f64>() / boot.len() as f64;
            let var = boot.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;
            (var.sqrt(), (quantile(&boot, 0.025), quantile(&boot, 0.975)))
        } else {
            (f64::NAN, (f64::NEG_INFINITY, f64::INFINITY))
        };
        TailFit { slope, intercept, bins_used, replicates: boot.len(), stderr, ci95 }
    });
    Ok(TailReport { n, samples: total, t: grid, survival, counts, flagged, fit })
}

/// A minimal scatter/line plot rendered as standalone SVG.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Plot {
    /// Points with non-positive coordinates on a log axis are skipped.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 440.0);
        let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let ok = |&(x, y): &(f64, f64)| {
            x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
        };
        let pts: Vec<(f64, f64)> =
            self.series.iter().flat_map(|s| s.points.iter().copied().filter(ok)).map(|(x, y)| (tx(x), ty(y))).collect();
        let span = |vals: Vec<f64>| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(pts.iter().map(|p| p.0).collect());
        let (y0, y1) = span(pts.iter().map(|p| p.1).collect());
        let px = |v: f64| ml + (v - x0) / (x1 - x0) * (w - ml - mr);
        let py = |v: f64| h - mb - (v - y0) / (y1 - y0) * (h - mt - mb);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            w / 2.0,
            xml_escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<g class="axes" stroke="black" fill="none"><line x1="{ml}" y1="{}" x2="{}" y2="{}"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}"/></g>"#,
            h - mb,
            w - mr,
            h - mb,
            h - mb
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let lab = |v: f64, log: bool| if log { format!("{:.3}", 10f64.powf(v)) } else { format!("{v:.3}") };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                px(fx),
                h - mb + 18.0,
                lab(fx, self.log_x)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                ml - 6.0,
                py(fy) + 4.0,
                lab(fy, self.log_y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (ml + w - mr) / 2.0,
            h - 12.0,
            xml_escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (mt + h - mb) / 2.0,
            (mt + h - mb) / 2.0,
            xml_escape(&self.y_label)
        );
        for (i, ser) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let _ = writeln!(
                s,
                r#"<g class="series" data-name="{}" fill="{color}" stroke="{color}">"#,
                xml_escape(&ser.name)
            );
            let visible: Vec<(f64, f64)> = ser.points.iter().copied().filter(ok).collect();
            if ser.line && visible.len() > 1 {
                let path: Vec<String> =
                    visible.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y)))).collect();
                let _ = writeln!(s, r#"<polyline fill="none" points="{}"/>"#, path.join(" "));
            }
            for &(x, y) in &visible {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" data-x="{x}" data-y="{y}"/>"#,
                    px(tx(x)),
                    py(ty(y))
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" stroke="none">{}</text></g>"#,
                w - mr - 150.0,
                mt + 14.0 * (i + 1) as f64,
                xml_escape(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Medians against `n` on log-log axes, one series per report.
pub fn scaling_plot(reports: &[FitReport]) -> Plot {
    Plot {
        title: "median statistic against n".into(),
        x_label: "n".into(),
        y_label: "median".into(),
        log_x: true,
        log_y: true,
        series: reports
            .iter()
            .map(|r| Series {
                name: r.statistic.name().into(),
                points: r.per_n.iter().map(|s| (s.n as f64, s.median)).collect(),
                line: true,
            })
            .collect(),
    }
}

/// Empirical survival of `EXC / n` on a log axis.
pub fn survival_plot(tails: &[TailReport]) -> Plot {
    Plot {
        title: "survival of EXC / n".into(),
        x_label: "t".into(),
        y_label: "P(EXC >= t n)".into(),
        log_x: false,
        log_y: true,
        series: tails
            .iter()
            .map(|r| Series {
                name: format!("n = {}", r.n),
                points: r.t.iter().copied().zip(r.survival.iter().copied()).collect(),
                line: true,
            })
            .collect(),
    }
}
