//! Model parameters and run controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a relay picks among its neighbors once the next-hop weights are known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingRule {
    /// The neighbor with the largest weight; ties are broken uniformly.
    #[default]
    MostProbable,
    /// A neighbor drawn from the normalized weights.
    Sample,
}

impl std::str::FromStr for RoutingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "most-probable" | "argmax" => Ok(RoutingRule::MostProbable),
            "sample" => Ok(RoutingRule::Sample),
            other => Err(Error::config(
                "routing",
                format!("expected `most-probable` or `sample`, got `{other}`"),
            )),
        }
    }
}

/// Every parameter of one simulation run.
///
/// Defaults are the reference setting: 1000 nodes on a 20x20 torus with
/// radius 3, speed 0.5, routing exponent 0.5, rate 0.1, capacity 5, initial
/// energy 1000 and unit hop cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub area_side: f64,
    pub comm_radius: f64,
    pub speed: f64,
    pub alpha: f64,
    pub gen_rate: f64,
    pub capacity: u32,
    pub init_energy: f64,
    pub hop_cost: f64,
    #[serde(default)]
    pub routing: RoutingRule,
    pub seed: u64,
    pub max_steps: u64,
    pub transient_cutoff: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 1000,
            area_side: 20.0,
            comm_radius: 3.0,
            speed: 0.5,
            alpha: 0.5,
            gen_rate: 0.1,
            capacity: 5,
            init_energy: 1000.0,
            hop_cost: 1.0,
            routing: RoutingRule::MostProbable,
            seed: 1,
            max_steps: 50_000,
            transient_cutoff: 100,
        }
    }
}

fn finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {value}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::config("n_nodes", format!("must be >= 2, got {}", self.n_nodes)));
        }
        for (field, value) in [
            ("area_side", self.area_side),
            ("comm_radius", self.comm_radius),
            ("speed", self.speed),
            ("alpha", self.alpha),
            ("gen_rate", self.gen_rate),
            ("init_energy", self.init_energy),
            ("hop_cost", self.hop_cost),
        ] {
            finite(field, value)?;
        }
        if self.area_side <= 0.0 {
            return Err(Error::config(
                "area_side",
                format!("must be > 0, got {}", self.area_side),
            ));
        }
        if self.comm_radius <= 0.0 {
            return Err(Error::config(
                "comm_radius",
                format!("must be > 0, got {}", self.comm_radius),
            ));
        }
        if self.speed < 0.0 {
            return Err(Error::config("speed", format!("must be >= 0, got {}", self.speed)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(
                "alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ));
        }
        if self.gen_rate < 0.0 {
            return Err(Error::config(
                "gen_rate",
                format!("must be >= 0, got {}", self.gen_rate),
            ));
        }
        if self.capacity < 1 {
            return Err(Error::config("capacity", "must be >= 1"));
        }
        if self.init_energy <= 0.0 {
            return Err(Error::config(
                "init_energy",
                format!("must be > 0, got {}", self.init_energy),
            ));
        }
        if self.hop_cost <= 0.0 {
            return Err(Error::config("hop_cost", format!("must be > 0, got {}", self.hop_cost)));
        }
        Ok(())
    }

    /// Sets one parameter from its flag-style key (`nodes`, `area`, `radius`,
    /// `speed`, `alpha`, `rate`, `capacity`, `energy`, `hop-cost`, `routing`, `seed`,
    /// `max-steps`, `transient-cutoff`). Returns `Ok(false)` when the key is
    /// not a simulation parameter.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
        }
        match key.trim().replace('_', "-").as_str() {
            "nodes" | "n-nodes" => self.n_nodes = parse(key, value)?,
            "area" | "area-side" => self.area_side = parse(key, value)?,
            "radius" | "comm-radius" => self.comm_radius = parse(key, value)?,
            "speed" => self.speed = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "rate" | "gen-rate" => self.gen_rate = parse(key, value)?,
            "capacity" => self.capacity = parse(key, value)?,
            "energy" | "init-energy" => self.init_energy = parse(key, value)?,
            "hop-cost" => self.hop_cost = parse(key, value)?,
            "routing" => self.routing = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "max-steps" => self.max_steps = parse(key, value)?,
            "transient-cutoff" => self.transient_cutoff = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Usage(format!(
                "config line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_named() {
        type Mutation = Box<dyn Fn(&mut SimConfig)>;
        let cases: Vec<(&str, Mutation)> = vec![
            ("n_nodes", Box::new(|c| c.n_nodes = 1)),
            ("area_side", Box::new(|c| c.area_side = 0.0)),
            ("comm_radius", Box::new(|c| c.comm_radius = -1.0)),
            ("speed", Box::new(|c| c.speed = -0.1)),
            ("alpha", Box::new(|c| c.alpha = 1.5)),
            ("gen_rate", Box::new(|c| c.gen_rate = -1.0)),
            ("capacity", Box::new(|c| c.capacity = 0)),
            ("init_energy", Box::new(|c| c.init_energy = 0.0)),
            ("hop_cost", Box::new(|c| c.hop_cost = 0.0)),
            ("speed", Box::new(|c| c.speed = f64::NAN)),
        ];
        for (expected, mutate) in cases {
            let mut cfg = SimConfig::default();
            mutate(&mut cfg);
            match cfg.validate() {
                Err(Error::Config { field, .. }) => assert_eq!(field, expected),
                other => panic!("expected config error for {expected}, got {other:?}"),
            }
        }
    }

    #[test]
    fn key_value_file() {
        let text = "# comment\nnodes = 50\nrate=0.25 # trailing\n\nhop_cost = 2\nruns = 3\n";
        let pairs = parse_key_values(text).unwrap();
        let mut cfg = SimConfig::default();
        let mut unknown = Vec::new();
        for (k, v) in &pairs {
            if !cfg.set(k, v).unwrap() {
                unknown.push(k.clone());
            }
        }
        assert_eq!(cfg.n_nodes, 50);
        assert_eq!(cfg.gen_rate, 0.25);
        assert_eq!(cfg.hop_cost, 2.0);
        assert_eq!(unknown, vec!["runs".to_string()]);
        assert!(parse_key_values("nodes 5").is_err());
        assert!(cfg.set("nodes", "many").is_err());
    }
}
