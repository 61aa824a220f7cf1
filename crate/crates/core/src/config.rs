//! Scenario files: `key = value` lines, `#` starts a comment.
//!
//! | key | meaning |
//! |-----|---------|
//! | validators, slots_per_epoch, stakes | validator set; stakes is a comma list |
//! | byzantine | number of byzantine validators |
//! | strategy | honest, withhold, fork_builder or smoke_bomb |
//! | split_broadcast, vote_time, fake_timestamp | strategy parameters |
//! | a, eps1, eps2 | latency model (shared with the equivocation game) |
//! | epochs, inclusion_delay, consideration_delay, stale_filter | simulator |
//! | shuffle | seeded or identity committee shuffle |
//! | log_deliveries | record every delivery in the event log |
//! | seed | RNG seed |
//! | honest, dishonest_time, trials, random_split, timestamp_gate, dishonest_abstain, regime | equivocation game |
//! | committee_size, eps, p, r, horizon | liveness analytics |

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::LivenessParams;
use crate::equiv_game::{EquivGameConfig, Regime};
use crate::error::{Error, Result};
use crate::simulator::{SimConfig, Strategy};

pub const KEYS: &[&str] = &[
    "validators",
    "slots_per_epoch",
    "stakes",
    "byzantine",
    "strategy",
    "split_broadcast",
    "vote_time",
    "fake_timestamp",
    "a",
    "eps1",
    "eps2",
    "epochs",
    "inclusion_delay",
    "consideration_delay",
    "stale_filter",
    "shuffle",
    "log_deliveries",
    "seed",
    "honest",
    "dishonest_time",
    "trials",
    "random_split",
    "timestamp_gate",
    "dishonest_abstain",
    "regime",
    "committee_size",
    "eps",
    "p",
    "r",
    "horizon",
];

/// Parsed scenario: every key seen, plus the configs they resolve to.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub entries: BTreeMap<String, String>,
    pub sim: SimConfig,
    pub equiv: EquivGameConfig,
    pub liveness: LivenessParams,
    pub seed: Option<u64>,
}

fn key_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {msg}"))
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| key_err(key, format!("cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(key_err(key, format!("expected a boolean, got `{v}`"))),
    }
}

fn nonneg(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse(key, v)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(key_err(key, "must be finite and nonnegative"));
    }
    Ok(x)
}

fn unit(key: &str, v: &str) -> Result<f64> {
    let x = nonneg(key, v)?;
    if x > 1.0 {
        return Err(key_err(key, "must lie in [0, 1]"));
    }
    Ok(x)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown key `{k}` on line {}", i + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(key_err(k, "given twice"));
            }
        }
        Scenario::from_entries(entries)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Scenario> {
        let mut sc = Scenario { entries: entries.clone(), ..Default::default() };
        let get = |k: &str| entries.get(k).map(String::as_str);
        let sim = &mut sc.sim;
        let eq = &mut sc.equiv;
        let lp = &mut sc.liveness;

        if let Some(regime) = get("regime") {
            let r = Regime::parse(regime).ok_or_else(|| key_err("regime", "expected pessimistic, inbetween or optimistic"))?;
            *eq = eq.clone().with_regime(r);
            let (a, eps1, eps2) = r.params();
            sim.network.a = a;
            sim.network.eps1 = eps1;
            sim.network.eps2 = eps2;
        }
        for (k, v) in &entries {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "validators" => sim.validators = parse(k, v)?,
                "slots_per_epoch" => sim.slots_per_epoch = parse(k, v)?,
                "stakes" => {
                    let s = v.split(',').map(|x| nonneg(k, x.trim())).collect::<Result<Vec<f64>>>()?;
                    sim.stakes = Some(s);
                }
                "byzantine" => {
                    let b: usize = parse(k, v)?;
                    sim.byzantine = b;
                    eq.byzantine = b;
                }
                "a" => (sim.network.a, eq.a) = (nonneg(k, v)?, nonneg(k, v)?),
                "eps1" => (sim.network.eps1, eq.eps1) = (nonneg(k, v)?, nonneg(k, v)?),
                "eps2" => (sim.network.eps2, eq.eps2) = (nonneg(k, v)?, nonneg(k, v)?),
                "epochs" => sim.epochs = parse(k, v)?,
                "inclusion_delay" => sim.inclusion_delay = parse(k, v)?,
                "consideration_delay" => sim.consideration_delay = parse_bool(k, v)?,
                "stale_filter" => sim.stale_filter = parse_bool(k, v)?,
                "shuffle" => {
                    sim.identity_shuffle = match v {
                        "identity" => true,
                        "seeded" => false,
                        _ => return Err(key_err(k, "expected seeded or identity")),
                    }
                }
                "log_deliveries" => sim.log_deliveries = parse_bool(k, v)?,
                "seed" => sc.seed = Some(parse(k, v)?),
                "honest" => eq.honest = parse(k, v)?,
                "dishonest_time" => eq.dishonest_vote_time = unit(k, v)?,
                "trials" => eq.trials = parse(k, v)?,
                "random_split" => eq.random_split = parse_bool(k, v)?,
                "timestamp_gate" => eq.timestamp_gate = parse_bool(k, v)?,
                "dishonest_abstain" => eq.dishonest_abstain = parse_bool(k, v)?,
                "committee_size" => lp.committee_size = nonneg(k, v)?,
                "eps" => lp.eps = nonneg(k, v)?,
                "p" => lp.p = unit(k, v)?,
                "r" => lp.r = unit(k, v)?,
                "horizon" => lp.n = parse(k, v)?,
                // strategy keys are resolved together below
                "strategy" | "split_broadcast" | "vote_time" | "fake_timestamp" | "regime" => {}
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        if let Some(c) = get("slots_per_epoch") {
            lp.slots_per_epoch = parse("slots_per_epoch", c)?;
        }

        let split = get("split_broadcast").map(|v| parse_bool("split_broadcast", v)).transpose()?;
        let vote_time = get("vote_time").map(|v| unit("vote_time", v)).transpose()?;
        let fake = get("fake_timestamp").map(|v| unit("fake_timestamp", v)).transpose()?;
        sim.strategy = match get("strategy").unwrap_or("honest") {
            "honest" => Strategy::Honest,
            "withhold" => Strategy::Withhold,
            "fork_builder" => Strategy::ForkBuilder { split_broadcast: split.unwrap_or(false) },
            "smoke_bomb" => Strategy::SmokeBomb {
                vote_time: vote_time.unwrap_or(0.3),
                fake_timestamp: fake.unwrap_or(0.5),
            },
            other => return Err(key_err("strategy", format!("unknown strategy `{other}`"))),
        };
        if let Some(s) = sc.seed {
            sim.seed = s;
            eq.seed = s;
        }
        sim.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("simulator settings: {m}")),
            other => other,
        })?;
        if entries.keys().any(|k| ["honest", "dishonest_time", "trials", "random_split", "timestamp_gate", "dishonest_abstain", "regime"].contains(&k.as_str())) {
            eq.validate()?;
        }
        Ok(sc)
    }

    /// Applies a seed to every config.
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.seed = Some(seed);
        self.sim.seed = seed;
        self.equiv.seed = seed;
        self
    }
}

/// Resolves the seed: explicit flag, then the scenario, then the
/// environment value, then 0.
pub fn resolve_seed(flag: Option<u64>, scenario: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(scenario) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| Error::Config(format!("GASPERLAB_SEED `{v}` is not an integer"))),
        None => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_scenario() {
        let sc = Scenario::parse(
            "# withholding run\nvalidators = 32\nslots_per_epoch = 4\nbyzantine = 10 # under a third\n\
             strategy = withhold\nepochs = 6\na = 0.1\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(sc.sim.validators, 32);
        assert_eq!(sc.sim.strategy, Strategy::Withhold);
        assert_eq!(sc.sim.network.a, 0.1);
        assert_eq!(sc.equiv.a, 0.1);
        assert_eq!(sc.sim.seed, 9);
        assert_eq!(sc.equiv.byzantine, 10);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = Scenario::parse("validators = 8\nvalidatorz = 3\n").unwrap_err();
        assert!(e.to_string().contains("validatorz"), "{e}");
    }

    #[test]
    fn bad_values_name_the_key() {
        for (text, key) in [
            ("eps2 = -1", "eps2"),
            ("p = 1.5", "p"),
            ("strategy = chaos", "strategy"),
            ("consideration_delay = maybe", "consideration_delay"),
            ("dishonest_time = 2", "dishonest_time"),
        ] {
            let e = Scenario::parse(text).unwrap_err();
            assert!(e.to_string().contains(key), "{text}: {e}");
        }
        assert!(Scenario::parse("validators = 10\nslots_per_epoch = 4").is_err());
    }

    #[test]
    fn regime_then_override() {
        let sc = Scenario::parse("regime = inbetween\neps2 = 0.2\n").unwrap();
        assert_eq!((sc.equiv.a, sc.equiv.eps2), (0.1, 0.2));
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some("3")).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(resolve_seed(None, None, Some("x")).is_err());
    }
}
