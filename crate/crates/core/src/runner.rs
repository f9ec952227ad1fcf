//! Single runs, ensembles over seeds, and parameter sweeps.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::Month;
use crate::econ::{annualize, Economy, Event, EventKind, MonthRecord, StepContext};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Months of recovery that must stay inside the band.
pub const RECOVERY_STREAK: usize = 6;
/// Half-width of the recovery band around the pre-shock unemployment level.
pub const RECOVERY_BAND: f64 = 0.01;
/// Mean unemployment over the final year above which a run counts as collapsed.
pub const COLLAPSE_UNEMPLOYMENT: f64 = 0.5;
/// Monthly inflation reference used when the central bank has no target (2.4% a year).
pub const REFERENCE_TARGET: f64 = 0.002;

const RESCALE_ABOVE: f64 = 1e100;

/// Scalar summaries of one run, all computed from its recorded series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mean unemployment over the recorded months before the shock onset.
    pub pre_shock_unemployment: f64,
    /// Peak of perceived inflation compounded to a yearly rate, from the onset on.
    pub peak_inflation: f64,
    pub peak_inflation_month: Option<Month>,
    /// Peak of realized monthly inflation compounded to a yearly rate, from the onset on.
    pub peak_realized_inflation: f64,
    pub peak_unemployment: f64,
    pub peak_unemployment_month: Option<Month>,
    pub mean_unemployment: f64,
    pub mean_inflation: f64,
    pub collapsed: bool,
    /// First month of a streak back near the pre-shock unemployment level,
    /// once unemployment has left that band after the onset.
    pub recovery_month: Option<Month>,
    /// Months from the onset with perceived inflation above target.
    pub months_above_target: u32,
    pub runaway: bool,
}

impl RunMetrics {
    pub fn compute(records: &[MonthRecord], onset: Month, target: f64, runaway: bool) -> Self {
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                s / n as f64
            }
        };
        let pre = mean(&mut records.iter().filter(|r| r.month < onset).map(|r| r.unemployment));
        let post: Vec<&MonthRecord> = records.iter().filter(|r| r.month >= onset).collect();
        let argmax = |f: &dyn Fn(&MonthRecord) -> f64| {
            post.iter().fold((f64::NAN, None), |(best, m), r| {
                let v = f(r);
                if best.is_nan() || v > best {
                    (v, Some(r.month))
                } else {
                    (best, m)
                }
            })
        };
        let (peak_inflation, peak_inflation_month) = argmax(&|r| annualize(r.inflation_ema));
        let (peak_realized_inflation, _) = argmax(&|r| r.inflation_annual);
        let (peak_unemployment, peak_unemployment_month) = argmax(&|r| r.unemployment);
        let tail = &records[records.len().saturating_sub(12)..];
        let collapsed =
            !tail.is_empty() && mean(&mut tail.iter().map(|r| r.unemployment)) > COLLAPSE_UNEMPLOYMENT;
        let threshold = if target > 0.0 { target } else { REFERENCE_TARGET };
        let months_above_target = post.iter().filter(|r| r.inflation_ema > threshold).count() as u32;
        RunMetrics {
            pre_shock_unemployment: pre,
            peak_inflation,
            peak_inflation_month,
            peak_realized_inflation,
            peak_unemployment,
            peak_unemployment_month,
            mean_unemployment: mean(&mut records.iter().map(|r| r.unemployment)),
            mean_inflation: mean(&mut records.iter().map(|r| r.inflation_annual)),
            collapsed,
            recovery_month: recovery_month(&post, pre),
            months_above_target,
            runaway,
        }
    }
}

fn recovery_month(post: &[&MonthRecord], pre: f64) -> Option<Month> {
    if pre.is_nan() || post.is_empty() {
        return None;
    }
    let inside = |r: &MonthRecord| (r.unemployment - pre).abs() <= RECOVERY_BAND;
    let Some(left) = post.iter().position(|r| !inside(r)) else {
        return Some(post[0].month);
    };
    let mut streak = 0;
    for (i, r) in post.iter().enumerate().skip(left) {
        if inside(r) {
            streak += 1;
            if streak == RECOVERY_STREAK {
                return Some(post[i + 1 - RECOVERY_STREAK].month);
            }
        } else {
            streak = 0;
        }
    }
    None
}

/// Output of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<MonthRecord>,
    pub events: Vec<Event>,
    pub metrics: RunMetrics,
    /// Month in which the run stopped on runaway inflation.
    pub runaway: Option<Month>,
}

/// Run `config` with its own seed.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    run_seed(config, config.run.seed, None)
}

/// Run `config` with `seed`, checking `cancel` between months.
pub fn run_seed(config: &ScenarioConfig, seed: u64, cancel: Option<&AtomicBool>) -> Result<RunOutput> {
    config.validate()?;
    let p = &config.parameters;
    let run = &config.run;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = run.start.offset(-(run.equilibration_months as i32));
    let mut economy = Economy::seeded(p, &config.central_bank, first, &mut rng);
    let ctx = StepContext {
        params: p,
        central_bank: &config.central_bank,
        hooks: &config.interventions,
    };
    let mut records = Vec::with_capacity(run.horizon_months as usize);
    let mut events = window_events(config);
    let mut runaway = None;
    let end = run.end();
    while economy.month < end {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(Error::Cancelled(economy.month));
        }
        let month = economy.month;
        let drivers = config.shocks.drivers(month, p.zeta0);
        let step = economy.step(&ctx, &drivers, &mut rng)?;
        let recorded = month >= run.start;
        if recorded {
            records.push(step.record);
            events.extend(step.events);
        }
        if economy.cpi > RESCALE_ABOVE || economy.cpi < 1.0 / RESCALE_ABOVE {
            let factor = 1.0 / economy.cpi;
            economy.rescale(factor);
            if recorded {
                events.push(Event {
                    month,
                    kind: EventKind::Rescaled { factor },
                });
            }
        }
        if annualize(economy.expectations.ema) > run.runaway_inflation {
            runaway = Some(month);
            break;
        }
    }
    events.retain(|e| e.month < end && (e.month >= run.start || runaway.is_some_and(|m| e.month <= m)));
    events.sort_by_key(|e| e.month);
    let metrics = RunMetrics::compute(&records, config.shocks.onset, config.central_bank.target, runaway.is_some());
    Ok(RunOutput {
        seed,
        config_hash: config.hash(),
        records,
        events,
        metrics,
        runaway,
    })
}

/// Start and end events of every shock and intervention window.
fn window_events(config: &ScenarioConfig) -> Vec<Event> {
    let mut windows = config.shocks.windows();
    let w = &config.interventions.windfall;
    if w.enabled && w.surcharge > 0.0 {
        windows.push(("windfall".to_string(), w.start, w.end()));
    }
    let mut out = Vec::new();
    for (name, first, last) in windows {
        out.push(Event {
            month: first,
            kind: EventKind::WindowStart { name: name.clone() },
        });
        out.push(Event {
            month: last,
            kind: EventKind::WindowEnd { name },
        });
    }
    out
}

/// Pointwise statistics of one series across runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Medians and fractions of per-run metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub runs: usize,
    pub peak_inflation: f64,
    pub peak_realized_inflation: f64,
    pub peak_unemployment: f64,
    pub mean_unemployment: f64,
    pub mean_inflation: f64,
    pub months_above_target: f64,
    pub collapse_fraction: f64,
    pub recovered_fraction: f64,
    pub runaway_fraction: f64,
}

impl MetricSummary {
    pub fn from_metrics(metrics: &[&RunMetrics]) -> Self {
        let col = |f: &dyn Fn(&RunMetrics) -> f64| median(&metrics.iter().map(|m| f(m)).collect::<Vec<_>>());
        let frac = |f: &dyn Fn(&RunMetrics) -> bool| {
            if metrics.is_empty() {
                f64::NAN
            } else {
                metrics.iter().filter(|m| f(m)).count() as f64 / metrics.len() as f64
            }
        };
        MetricSummary {
            runs: metrics.len(),
            peak_inflation: col(&|m| m.peak_inflation),
            peak_realized_inflation: col(&|m| m.peak_realized_inflation),
            peak_unemployment: col(&|m| m.peak_unemployment),
            mean_unemployment: col(&|m| m.mean_unemployment),
            mean_inflation: col(&|m| m.mean_inflation),
            months_above_target: col(&|m| f64::from(m.months_above_target)),
            collapse_fraction: frac(&|m| m.collapsed),
            recovered_fraction: frac(&|m| m.recovery_month.is_some()),
            runaway_fraction: frac(&|m| m.runaway),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub months: Vec<Month>,
    pub bands: BTreeMap<String, Band>,
    pub metrics: Vec<(u64, RunMetrics)>,
    pub summary: MetricSummary,
    pub failures: Vec<SeedFailure>,
    /// Seed of the run with the median peak inflation.
    pub representative_seed: Option<u64>,
    #[serde(skip)]
    pub runs: Vec<RunOutput>,
}

impl EnsembleSummary {
    pub fn run(&self, seed: u64) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.seed == seed)
    }
}

/// Independent runs over `seeds`, in parallel. Failed seeds are listed rather
/// than aborting the ensemble.
pub fn run_ensemble(config: &ScenarioConfig, seeds: &[u64]) -> Result<EnsembleSummary> {
    run_ensemble_with_cancel(config, seeds, None)
}

/// [`run_ensemble`] that stops between months once `cancel` is set; the
/// whole ensemble then fails with [`Error::Cancelled`].
pub fn run_ensemble_with_cancel(
    config: &ScenarioConfig,
    seeds: &[u64],
    cancel: Option<&AtomicBool>,
) -> Result<EnsembleSummary> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    config.validate()?;
    let results: Vec<(u64, Result<RunOutput>)> = seeds
        .par_iter()
        .map(|&s| (s, run_seed(config, s, cancel)))
        .collect();
    if let Some(month) = results.iter().find_map(|(_, r)| match r {
        Err(Error::Cancelled(m)) => Some(*m),
        _ => None,
    }) {
        return Err(Error::Cancelled(month));
    }
    Ok(summarize(config, results))
}

fn summarize(config: &ScenarioConfig, results: Vec<(u64, Result<RunOutput>)>) -> EnsembleSummary {
    let seeds: Vec<u64> = results.iter().map(|(s, _)| *s).collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(out) => runs.push(out),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    let longest = runs.iter().max_by_key(|r| r.records.len());
    let months: Vec<Month> = longest
        .map(|r| r.records.iter().map(|x| x.month).collect())
        .unwrap_or_default();
    let mut bands = BTreeMap::new();
    for (j, name) in MonthRecord::SERIES.iter().enumerate() {
        let mut band = Band::default();
        for t in 0..months.len() {
            let mut xs: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.records.get(t).map(|x| x.values()[j]))
                .filter(|x| !x.is_nan())
                .collect();
            xs.sort_by(f64::total_cmp);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            band.mean.push(mean);
            band.median.push(quantile(&xs, 0.5));
            band.q10.push(quantile(&xs, 0.1));
            band.q90.push(quantile(&xs, 0.9));
        }
        bands.insert(name.to_string(), band);
    }
    let metrics: Vec<(u64, RunMetrics)> = runs.iter().map(|r| (r.seed, r.metrics.clone())).collect();
    let refs: Vec<&RunMetrics> = metrics.iter().map(|(_, m)| m).collect();
    let mut order: Vec<(f64, u64)> = metrics.iter().map(|(s, m)| (m.peak_inflation, *s)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let representative_seed = if order.is_empty() {
        None
    } else {
        Some(order[(order.len() - 1) / 2].1)
    };
    EnsembleSummary {
        config_hash: config.hash(),
        seeds,
        months,
        bands,
        summary: MetricSummary::from_metrics(&refs),
        metrics,
        failures,
        representative_seed,
        runs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub ensemble: EnsembleSummary,
}

/// One ensemble per value of the field at `path`. Every run is independent,
/// so the result does not depend on execution order.
pub fn sweep(config: &ScenarioConfig, path: &str, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = config.clone();
        c.set_f64(path, v)?;
        c.validate()?;
        configs.push(c);
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut results: Vec<(usize, u64, Result<RunOutput>)> = jobs
        .par_iter()
        .map(|&(i, s)| (i, s, run_seed(&configs[i], s, None)))
        .collect();
    let mut points = Vec::with_capacity(values.len());
    for (i, c) in configs.iter().enumerate().rev() {
        let mine: Vec<(u64, Result<RunOutput>)> = {
            let split = results.iter().position(|(j, _, _)| *j == i).unwrap_or(results.len());
            results.split_off(split).into_iter().map(|(_, s, r)| (s, r)).collect()
        };
        points.push(SweepPoint {
            value: values[i],
            ensemble: summarize(c, mine),
        });
    }
    points.reverse();
    Ok(points)
}

/// One row per sweep value: the value followed by the ensemble's metric medians.
pub fn sweep_table(points: &[SweepPoint]) -> Vec<(f64, MetricSummary)> {
    points.iter().map(|p| (p.value, p.ensemble.summary.clone())).collect()
}

/// Keep every `stride`-th record, starting with the first.
pub fn downsample(records: &[MonthRecord], stride: u32) -> Vec<MonthRecord> {
    records.iter().step_by(stride.max(1) as usize).cloned().collect()
}

/// Mean of `f` over the last `months` records.
pub fn tail_mean(records: &[MonthRecord], months: usize, f: impl Fn(&MonthRecord) -> f64) -> f64 {
    let tail = &records[records.len().saturating_sub(months)..];
    tail.iter().map(f).sum::<f64>() / tail.len().max(1) as f64
}
