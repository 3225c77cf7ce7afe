//! Bisection for the generation rates at which the traffic state changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::harness::replica_summaries;
use crate::metrics::{majority_at_least, majority_state, ClassifierThresholds, TrafficState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub rho: f64,
    pub states: Vec<TrafficState>,
    pub majority: TrafficState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalRates {
    /// Onset of slow congestion.
    pub rho_s: f64,
    /// Onset of fast congestion.
    pub rho_f: f64,
    /// Onset of absolute congestion.
    pub rho_a: f64,
    /// Final `[lo, hi]` bracket of each search, in the order s, f, a.
    pub brackets: [[f64; 2]; 3],
    pub tolerance: f64,
    pub replicas: usize,
    pub seed_base: u64,
    /// Every rate evaluated, ascending.
    pub probes: Vec<Probe>,
}

struct Prober<'a> {
    config: &'a SimConfig,
    replicas: usize,
    jobs: usize,
    thresholds: &'a ClassifierThresholds,
    cache: BTreeMap<u64, Vec<TrafficState>>,
}

impl Prober<'_> {
    fn states(&mut self, rho: f64) -> Result<&[TrafficState]> {
        let key = rho.to_bits();
        if !self.cache.contains_key(&key) {
            let c = SimConfig {
                gen_rate: rho,
                ..self.config.clone()
            };
            let runs = replica_summaries(&c, self.replicas, self.config.seed, self.jobs, self.thresholds)?;
            let states = runs
                .iter()
                .map(|r| {
                    r.state.ok_or_else(|| {
                        Error::InsufficientData(format!(
                            "run with seed {} at rho = {rho} lasted {} steps, too short to classify",
                            r.seed, r.steps
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            self.cache.insert(key, states);
        }
        Ok(&self.cache[&key])
    }

    fn at_least(&mut self, rho: f64, level: TrafficState) -> Result<bool> {
        Ok(majority_at_least(self.states(rho)?, level))
    }

    /// Narrows `[lo, hi]`, with the predicate false at `lo` and true at `hi`,
    /// to width at most `tolerance`.
    fn bisect(&mut self, mut lo: f64, mut hi: f64, level: TrafficState, tolerance: f64) -> Result<(f64, f64)> {
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if self.at_least(mid, level)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, hi))
    }
}

/// Locates the slow, fast and absolute congestion onsets between `rho_lo`
/// (free flow) and `rho_hi` (absolute congestion).
///
/// A rate counts as at least a given state when a strict majority of the
/// `replicas` runs, seeded from `config.seed` upward, classify at or above
/// it. The same seeds are used at every rate.
pub fn find_critical_rates(
    config: &SimConfig,
    rho_lo: f64,
    rho_hi: f64,
    replicas: usize,
    tolerance: f64,
    jobs: usize,
    thresholds: &ClassifierThresholds,
) -> Result<CriticalRates> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Usage(format!("tolerance must be positive, got {tolerance}")));
    }
    if replicas == 0 {
        return Err(Error::Usage("need at least one replica".into()));
    }
    if !(rho_lo >= 0.0 && rho_lo < rho_hi && rho_hi.is_finite()) {
        return Err(Error::Bracket {
            lo: rho_lo,
            hi: rho_hi,
            reason: "need 0 <= lo < hi".into(),
        });
    }
    config.validate()?;
    let mut p = Prober {
        config,
        replicas,
        jobs,
        thresholds,
        cache: BTreeMap::new(),
    };

    let lo_state = majority_state(p.states(rho_lo)?).expect("replicas > 0");
    if lo_state != TrafficState::NoCongestion {
        return Err(Error::Bracket {
            lo: rho_lo,
            hi: rho_hi,
            reason: format!("lower end classifies as {} congestion", lo_state.name()),
        });
    }
    let hi_state = majority_state(p.states(rho_hi)?).expect("replicas > 0");
    if hi_state != TrafficState::AbsoluteCongestion {
        return Err(Error::Bracket {
            lo: rho_lo,
            hi: rho_hi,
            reason: format!("upper end classifies as {} congestion", hi_state.name()),
        });
    }

    // Each onset lies above the previous one's lower bracket: a rate below
    // the slow onset is below every later onset too.
    let s = p.bisect(rho_lo, rho_hi, TrafficState::SlowCongestion, tolerance)?;
    let f = p.bisect(s.0, rho_hi, TrafficState::FastCongestion, tolerance)?;
    let a = p.bisect(f.0, rho_hi, TrafficState::AbsoluteCongestion, tolerance)?;

    let rho_s = 0.5 * (s.0 + s.1);
    let rho_f = (0.5 * (f.0 + f.1)).max(rho_s);
    let rho_a = (0.5 * (a.0 + a.1)).max(rho_f);

    let probes = p
        .cache
        .iter()
        .map(|(&bits, states)| Probe {
            rho: f64::from_bits(bits),
            states: states.clone(),
            majority: majority_state(states).expect("replicas > 0"),
        })
        .collect::<Vec<_>>();
    let mut probes = probes;
    probes.sort_by(|x, y| x.rho.total_cmp(&y.rho));

    Ok(CriticalRates {
        rho_s,
        rho_f,
        rho_a,
        brackets: [[s.0, s.1], [f.0, f.1], [a.0, a.1]],
        tolerance,
        replicas,
        seed_base: config.seed,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_rejected_without_congestion() {
        // Tiny rates never congest a node that can send 50 packets a step.
        let c = SimConfig {
            n_nodes: 40,
            area_side: 8.0,
            capacity: 50,
            init_energy: 80.0,
            transient_cutoff: 10,
            ..SimConfig::default()
        };
        let err = find_critical_rates(&c, 0.01, 0.05, 3, 0.01, 1, &ClassifierThresholds::default()).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }), "{err}");
    }

    #[test]
    fn argument_checks() {
        let c = SimConfig::default();
        let th = ClassifierThresholds::default();
        assert!(matches!(
            find_critical_rates(&c, 1.0, 0.5, 3, 0.1, 1, &th),
            Err(Error::Bracket { .. })
        ));
        assert!(matches!(
            find_critical_rates(&c, 0.1, 0.5, 3, 0.0, 1, &th),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            find_critical_rates(&c, 0.1, 0.5, 0, 0.1, 1, &th),
            Err(Error::Usage(_))
        ));
    }
}
