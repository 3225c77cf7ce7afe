//! Single runs, replicated ensembles and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::lifetime;
use crate::metrics::{
    characteristic_time, classify_state, delta_s_with, energy_range, majority_state, ClassifierThresholds, RunSeries,
    TrafficState,
};
use crate::traffic::Network;

/// Everything reported about one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub seed: u64,
    pub config: SimConfig,
    /// False when the run stopped at `max_steps`.
    pub died: bool,
    pub steps: u64,
    /// Step at which the first node could no longer pay for a hop.
    pub lifetime: Option<u64>,
    pub delta_s: Option<f64>,
    pub tau0: Option<f64>,
    pub k: Option<f64>,
    pub state: Option<TrafficState>,
    pub range_at_death: Option<f64>,
    pub e_total_end: f64,
    pub generated: u64,
    pub arrived: u64,
    pub forwarded: u64,
    /// Cumulative forwarded over steps run.
    pub deliveries_per_step: f64,
    pub predicted_general: Option<f64>,
    pub predicted_no_congestion: Option<f64>,
    pub predicted_absolute: Option<f64>,
}

fn summarize(series: &RunSeries, died: bool, thresholds: &ClassifierThresholds) -> RunSummary {
    let c = &series.config;
    let last = series.records.last().expect("series holds the initial record");
    let steps = last.t;
    let generated: u64 = series.records.iter().map(|r| r.generated).sum();
    let arrived: u64 = series.records.iter().map(|r| r.arrived).sum();
    let forwarded: u64 = series.records.iter().map(|r| r.forwarded).sum();
    let lifetime = died.then_some(steps);
    let tau0 = characteristic_time(&series.hop_log).ok();
    let k = match (lifetime, tau0) {
        (Some(t), Some(tau)) if t > 0 => {
            lifetime::extract_k(t as f64, c.init_energy, c.gen_rate, tau, c.capacity as f64, c.hop_cost).ok()
        }
        _ => None,
    };
    let range_at_death = died.then(|| energy_range(last));
    let deliveries_per_step = if steps > 0 {
        forwarded as f64 / steps as f64
    } else {
        0.0
    };
    let e_total_0 = c.n_nodes as f64 * c.init_energy;
    RunSummary {
        seed: c.seed,
        config: c.clone(),
        died,
        steps,
        lifetime,
        delta_s: delta_s_with(series, c.transient_cutoff, thresholds.transient_fraction).ok(),
        tau0,
        k,
        state: classify_state(series, c, thresholds).ok(),
        range_at_death,
        e_total_end: last.e_total,
        generated,
        arrived,
        forwarded,
        deliveries_per_step,
        predicted_general: died
            .then(|| lifetime::predict_general(e_total_0, last.e_total, deliveries_per_step, c.hop_cost).ok())
            .flatten(),
        predicted_no_congestion: match (range_at_death, tau0) {
            (Some(r), Some(tau)) => lifetime::predict_no_congestion(c.init_energy, r, c.gen_rate, tau, c.hop_cost).ok(),
            _ => None,
        },
        predicted_absolute: lifetime::predict_absolute(c.init_energy, c.capacity as f64, c.hop_cost).ok(),
    }
}

/// Steps one network until its first node dies or `max_steps` is reached.
pub fn run_simulation(config: &SimConfig, thresholds: &ClassifierThresholds) -> Result<(RunSeries, RunSummary)> {
    let mut net = Network::new(config)?;
    let mut records = vec![net.initial_record()];
    while !net.is_dead() && net.now() < config.max_steps {
        records.push(net.step()?);
    }
    let died = net.is_dead();
    let series = RunSeries {
        config: config.clone(),
        records,
        hop_log: net.into_hop_log(),
    };
    let summary = summarize(&series, died, thresholds);
    Ok((series, summary))
}

/// Runs `f` over `items` on up to `jobs` threads, results in input order.
pub(crate) fn parallel_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

/// Mean and standard error of one field over the replicas that report it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    /// Absent with fewer than two samples.
    pub stderr: Option<f64>,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self {
                n,
                mean: None,
                stderr: None,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = (n > 1).then(|| {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Self {
            n,
            mean: Some(mean),
            stderr,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateCounts {
    pub no: usize,
    pub slow: usize,
    pub fast: usize,
    pub absolute: usize,
    pub unclassified: usize,
}

/// Aggregate of `n_runs` replicas of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaRow {
    /// Swept parameter value, when part of a sweep.
    pub value: Option<f64>,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    pub died: usize,
    pub lifetime: Stat,
    pub delta_s: Stat,
    pub tau0: Stat,
    pub k: Stat,
    pub range_at_death: Stat,
    pub generated: Stat,
    pub arrived: Stat,
    pub forwarded: Stat,
    pub predicted_no_congestion: Stat,
    pub states: StateCounts,
    pub majority_state: Option<TrafficState>,
}

impl ReplicaRow {
    pub fn from_summaries(value: Option<f64>, runs: &[RunSummary]) -> Self {
        let mut states = StateCounts::default();
        for r in runs {
            match r.state {
                Some(TrafficState::NoCongestion) => states.no += 1,
                Some(TrafficState::SlowCongestion) => states.slow += 1,
                Some(TrafficState::FastCongestion) => states.fast += 1,
                Some(TrafficState::AbsoluteCongestion) => states.absolute += 1,
                None => states.unclassified += 1,
            }
        }
        let classified: Vec<TrafficState> = runs.iter().filter_map(|r| r.state).collect();
        Self {
            value,
            n_runs: runs.len(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            died: runs.iter().filter(|r| r.died).count(),
            lifetime: Stat::of(runs.iter().filter_map(|r| r.lifetime.map(|t| t as f64))),
            delta_s: Stat::of(runs.iter().filter_map(|r| r.delta_s)),
            tau0: Stat::of(runs.iter().filter_map(|r| r.tau0)),
            k: Stat::of(runs.iter().filter_map(|r| r.k)),
            range_at_death: Stat::of(runs.iter().filter_map(|r| r.range_at_death)),
            generated: Stat::of(runs.iter().map(|r| r.generated as f64)),
            arrived: Stat::of(runs.iter().map(|r| r.arrived as f64)),
            forwarded: Stat::of(runs.iter().map(|r| r.forwarded as f64)),
            predicted_no_congestion: Stat::of(runs.iter().filter_map(|r| r.predicted_no_congestion)),
            states,
            majority_state: majority_state(&classified),
        }
    }
}

/// Summaries of `n_runs` replicas seeded `seed_base..seed_base + n_runs`,
/// in seed order.
pub fn replica_summaries(
    config: &SimConfig,
    n_runs: usize,
    seed_base: u64,
    jobs: usize,
    thresholds: &ClassifierThresholds,
) -> Result<Vec<RunSummary>> {
    if n_runs == 0 {
        return Err(Error::Usage("need at least one run".into()));
    }
    config.validate()?;
    let configs: Vec<SimConfig> = (0..n_runs as u64)
        .map(|i| SimConfig {
            seed: seed_base.wrapping_add(i),
            ..config.clone()
        })
        .collect();
    parallel_map(&configs, jobs, |c| run_simulation(c, thresholds).map(|(_, s)| s))
}

pub fn run_replicas(
    config: &SimConfig,
    n_runs: usize,
    seed_base: u64,
    jobs: usize,
    thresholds: &ClassifierThresholds,
) -> Result<ReplicaRow> {
    let runs = replica_summaries(config, n_runs, seed_base, jobs, thresholds)?;
    Ok(ReplicaRow::from_summaries(None, &runs))
}

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Rho,
    R,
    V,
    Alpha,
    L,
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Rho => "rho",
            SweepParam::R => "r",
            SweepParam::V => "v",
            SweepParam::Alpha => "alpha",
            SweepParam::L => "L",
            SweepParam::N => "N",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = base.clone();
        match self {
            SweepParam::Rho => c.gen_rate = value,
            SweepParam::R => c.comm_radius = value,
            SweepParam::V => c.speed = value,
            SweepParam::Alpha => c.alpha = value,
            SweepParam::L => c.area_side = value,
            SweepParam::N => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::config("n_nodes", format!("must be a whole number, got {value}")));
                }
                c.n_nodes = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rho" | "rate" => SweepParam::Rho,
            "r" | "radius" => SweepParam::R,
            "v" | "speed" => SweepParam::V,
            "alpha" => SweepParam::Alpha,
            "L" | "l" | "area" => SweepParam::L,
            "N" | "n" | "nodes" => SweepParam::N,
            other => {
                return Err(Error::Usage(format!(
                    "unknown sweep parameter `{other}` (expected one of rho, r, v, alpha, L, N)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub n_runs: usize,
    pub rows: Vec<ReplicaRow>,
}

/// One replica row per value, in input order. Every row reuses the seeds
/// `base.seed..base.seed + n_runs`.
pub fn sweep(
    base: &SimConfig,
    parameter: SweepParam,
    values: &[f64],
    n_runs: usize,
    jobs: usize,
    thresholds: &ClassifierThresholds,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    if n_runs == 0 {
        return Err(Error::Usage("need at least one run".into()));
    }
    let configs = values
        .iter()
        .map(|&v| parameter.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, SimConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            (0..n_runs as u64).map(move |j| {
                (
                    i,
                    SimConfig {
                        seed: base.seed.wrapping_add(j),
                        ..c.clone()
                    },
                )
            })
        })
        .collect();
    let summaries = parallel_map(&cells, jobs, |(_, c)| run_simulation(c, thresholds).map(|(_, s)| s))?;
    let rows = values
        .iter()
        .enumerate()
        .map(|(i, &v)| ReplicaRow::from_summaries(Some(v), &summaries[i * n_runs..(i + 1) * n_runs]))
        .collect();
    Ok(SweepTable {
        parameter,
        values: values.to_vec(),
        n_runs,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n_nodes: 60,
            area_side: 10.0,
            comm_radius: 2.5,
            init_energy: 60.0,
            gen_rate: 0.2,
            max_steps: 5000,
            transient_cutoff: 20,
            ..SimConfig::default()
        }
    }

    #[test]
    fn run_is_deterministic() {
        let th = ClassifierThresholds::default();
        let (s1, a) = run_simulation(&small(), &th).unwrap();
        let (s2, b) = run_simulation(&small(), &th).unwrap();
        assert_eq!(a, b);
        assert_eq!(s1, s2);
        assert!(a.died);
        assert_eq!(a.lifetime, Some(a.steps));
        assert_eq!(s1.records.len() as u64, a.steps + 1);
    }

    #[test]
    fn max_steps_reports_no_lifetime() {
        let c = SimConfig {
            gen_rate: 0.0,
            max_steps: 60,
            ..small()
        };
        let (_, s) = run_simulation(&c, &ClassifierThresholds::default()).unwrap();
        assert!(!s.died);
        assert_eq!(s.steps, 60);
        assert_eq!(s.lifetime, None);
        assert_eq!(s.k, None);
        assert_eq!(s.range_at_death, None);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = SimConfig { alpha: 2.0, ..small() };
        assert!(matches!(
            run_simulation(&c, &ClassifierThresholds::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn single_replica_has_no_stderr() {
        let th = ClassifierThresholds::default();
        let row = run_replicas(&small(), 1, 7, 1, &th).unwrap();
        let (_, one) = run_simulation(&SimConfig { seed: 7, ..small() }, &th).unwrap();
        assert_eq!(row.n_runs, 1);
        assert_eq!(row.seeds, vec![7]);
        assert_eq!(row.lifetime.mean, one.lifetime.map(|t| t as f64));
        assert_eq!(row.lifetime.stderr, None);
    }

    #[test]
    fn replicas_do_not_depend_on_jobs() {
        let th = ClassifierThresholds::default();
        let a = run_replicas(&small(), 4, 3, 1, &th).unwrap();
        let b = run_replicas(&small(), 4, 3, 3, &th).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rows_follow_values() {
        let th = ClassifierThresholds::default();
        let t = sweep(&small(), SweepParam::R, &[2.0, 3.0, 4.0], 2, 1, &th).unwrap();
        assert_eq!(t.rows.len(), 3);
        for (row, v) in t.rows.iter().zip([2.0, 3.0, 4.0]) {
            assert_eq!(row.value, Some(v));
            assert_eq!(row.n_runs, 2);
            assert_eq!(row.seeds, vec![1, 2]);
        }
        assert!(sweep(&small(), SweepParam::N, &[10.5], 1, 1, &th).is_err());
        assert!(sweep(&small(), SweepParam::R, &[], 1, 1, &th).is_err());
        assert!("speed".parse::<SweepParam>().is_ok());
        assert!(matches!("mass".parse::<SweepParam>(), Err(Error::Usage(_))));
    }

    #[test]
    fn stat_basics() {
        let s = Stat::of([1.0, 2.0, 3.0]);
        assert_eq!(s.mean, Some(2.0));
        assert!((s.stderr.unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of([]).mean, None);
    }
}
