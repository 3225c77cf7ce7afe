//! Per-step observables, congestion measures and traffic-state classification.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::traffic::NodeState;

/// Observables after one step. `n_c` is taken at the start of the delivery
/// phase; the other fields after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    #[serde(rename = "S")]
    pub s: u64,
    pub n_c: u64,
    #[serde(rename = "E_total")]
    pub e_total: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    #[serde(rename = "E_min")]
    pub e_min: f64,
    pub generated: u64,
    pub forwarded: u64,
    pub arrived: u64,
}

/// Hop counts of delivered packets, stored as a histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopLog {
    counts: Vec<u64>,
}

impl HopLog {
    pub fn record(&mut self, hops: u32) {
        let h = hops as usize;
        if self.counts.len() <= h {
            self.counts.resize(h + 1, 0);
        }
        self.counts[h] += 1;
    }

    pub fn from_hops(hops: impl IntoIterator<Item = u32>) -> Self {
        let mut log = Self::default();
        hops.into_iter().for_each(|h| log.record(h));
        log
    }

    pub fn count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `counts()[h]` is the number of packets delivered in `h` hops.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.count();
        if n == 0 {
            return None;
        }
        let sum: u64 = self.counts.iter().enumerate().map(|(h, &c)| h as u64 * c).sum();
        Some(sum as f64 / n as f64)
    }

    pub fn min(&self) -> Option<u32> {
        self.counts.iter().position(|&c| c > 0).map(|h| h as u32)
    }

    pub fn max(&self) -> Option<u32> {
        self.counts.iter().rposition(|&c| c > 0).map(|h| h as u32)
    }
}

/// Full time series of one run. `records[t]` is the record at time `t`,
/// starting with the initial state at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub config: SimConfig,
    pub records: Vec<StepRecord>,
    pub hop_log: HopLog,
}

impl RunSeries {
    pub fn last_t(&self) -> u64 {
        self.records.last().map_or(0, |r| r.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrafficState {
    NoCongestion,
    SlowCongestion,
    FastCongestion,
    AbsoluteCongestion,
}

impl TrafficState {
    pub const ALL: [TrafficState; 4] = [
        TrafficState::NoCongestion,
        TrafficState::SlowCongestion,
        TrafficState::FastCongestion,
        TrafficState::AbsoluteCongestion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrafficState::NoCongestion => "no",
            TrafficState::SlowCongestion => "slow",
            TrafficState::FastCongestion => "fast",
            TrafficState::AbsoluteCongestion => "absolute",
        }
    }
}

/// Thresholds of the traffic-state classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierThresholds {
    /// Absolute slack on the growth rate of `S` for the free-flow state.
    pub eps_abs: f64,
    /// Slack relative to `N * rho`.
    pub eps_rel: f64,
    /// Maximum median congested fraction for the free-flow state.
    pub theta_none: f64,
    /// Congested fraction counted as "all nodes congested".
    pub theta_full: f64,
    /// Steps within which full congestion means absolute congestion.
    pub early_window: u64,
    /// Fraction of the run at its end ignored by the classifier.
    pub tail_fraction: f64,
    /// Cap on the transient as a fraction of the run length.
    pub transient_fraction: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            eps_abs: 0.5,
            eps_rel: 0.01,
            theta_none: 0.01,
            theta_full: 0.95,
            early_window: 50,
            tail_fraction: 0.05,
            transient_fraction: 0.05,
        }
    }
}

/// Nodes holding more packets than they can send in one step.
pub fn congested_count(nodes: &[NodeState], config: &SimConfig) -> usize {
    nodes
        .iter()
        .filter(|n| n.queue.len() > config.capacity as usize)
        .count()
}

pub fn energy_range(record: &StepRecord) -> f64 {
    record.e_max - record.e_min
}

/// Start of the post-transient window for a run whose last step is `last_t`.
pub fn transient_start(last_t: u64, transient_cutoff: u64, transient_fraction: f64) -> u64 {
    let by_fraction = (transient_fraction * last_t as f64).floor() as u64;
    transient_cutoff.min(by_fraction)
}

fn window_slope(records: &[StepRecord], from: u64, to: u64) -> Result<f64> {
    if to <= from || to as usize >= records.len() {
        return Err(Error::InsufficientData(format!(
            "need a window of at least one step, got [{from}, {to}] over {} records",
            records.len()
        )));
    }
    let s0 = records[from as usize].s as f64;
    let s1 = records[to as usize].s as f64;
    Ok((s1 - s0) / (to - from) as f64)
}

/// Mean growth of `S` per step after the transient.
pub fn delta_s(series: &RunSeries, transient_cutoff: u64) -> Result<f64> {
    delta_s_with(
        series,
        transient_cutoff,
        ClassifierThresholds::default().transient_fraction,
    )
}

pub fn delta_s_with(series: &RunSeries, transient_cutoff: u64, transient_fraction: f64) -> Result<f64> {
    let last = series.last_t();
    let t0 = transient_start(last, transient_cutoff, transient_fraction);
    window_slope(&series.records, t0, last)
}

/// Mean hop count of delivered packets.
pub fn characteristic_time(hop_log: &HopLog) -> Result<f64> {
    hop_log
        .mean()
        .ok_or_else(|| Error::InsufficientData("no packet was delivered".into()))
}

fn median(values: &mut [u64]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// Classifies a finished run from the shape of `S(t)` and `n_c(t)`.
pub fn classify_state(
    series: &RunSeries,
    config: &SimConfig,
    thresholds: &ClassifierThresholds,
) -> Result<TrafficState> {
    let records = &series.records;
    let last = series.last_t();
    if last < thresholds.early_window {
        return Err(Error::InsufficientData(format!(
            "run of {last} steps is shorter than the early window of {} steps",
            thresholds.early_window
        )));
    }
    let n = config.n_nodes as f64;
    let tail = (thresholds.tail_fraction * last as f64).floor() as u64;
    let end = (last - tail).max(1);
    let t0 = transient_start(last, config.transient_cutoff, thresholds.transient_fraction).min(end - 1);

    let slope = window_slope(records, t0, end)?;
    let mut post: Vec<u64> = records[(t0 as usize + 1)..=(end as usize)]
        .iter()
        .map(|r| r.n_c)
        .collect();
    let median_nc = median(&mut post);
    if slope <= thresholds.eps_abs + thresholds.eps_rel * n * config.gen_rate && median_nc <= thresholds.theta_none * n
    {
        return Ok(TrafficState::NoCongestion);
    }

    let full = thresholds.theta_full * n;
    let early_end = thresholds.early_window.min(end) as usize;
    if records[1..=early_end].iter().any(|r| r.n_c as f64 >= full) {
        return Ok(TrafficState::AbsoluteCongestion);
    }
    if records[early_end..=(end as usize)].iter().any(|r| r.n_c as f64 >= full) {
        return Ok(TrafficState::FastCongestion);
    }
    Ok(TrafficState::SlowCongestion)
}

/// Majority-vote predicate "state is at least `level`" over replica states.
pub fn majority_at_least(states: &[TrafficState], level: TrafficState) -> bool {
    let hits = states.iter().filter(|&&s| s >= level).count();
    2 * hits > states.len()
}

/// The median state of an odd number of replicas; every boundary predicate
/// agrees with it.
pub fn majority_state(states: &[TrafficState]) -> Option<TrafficState> {
    if states.is_empty() {
        return None;
    }
    let mut sorted = states.to_vec();
    sorted.sort_unstable();
    Some(sorted[(sorted.len() - 1) / 2])
}
