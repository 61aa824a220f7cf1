use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-shot two-option vote under uniform latency. Honest validators vote
/// at 0.5 + X for whichever option has more visible stake (O1 on ties);
/// byzantine validators split their votes between the options at
/// `dishonest_vote_time` + X. A vote sent at t reaches each recipient at
/// t + a + Y with a fresh Y per recipient. All times are clamped to [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivGameConfig {
    pub honest: usize,
    pub byzantine: usize,
    /// Per-validator stake, honest first. `None` means all 1.
    pub stakes: Option<Vec<f64>>,
    pub a: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub dishonest_vote_time: f64,
    /// Byzantine validators stay silent.
    pub dishonest_abstain: bool,
    /// Each byzantine vote picks its option by a fair coin. When false the
    /// first floor(N_b/2) byzantine validators take O1 and the rest O2.
    pub random_split: bool,
    /// Honest validators ignore byzantine votes until 0.5, the claimed
    /// timestamp of those votes.
    pub timestamp_gate: bool,
    pub trials: u64,
    pub seed: u64,
}

impl Default for EquivGameConfig {
    fn default() -> Self {
        EquivGameConfig {
            honest: 74,
            byzantine: 37,
            stakes: None,
            a: 0.15,
            eps1: 0.05,
            eps2: 0.15,
            dishonest_vote_time: 0.3,
            dishonest_abstain: false,
            random_split: true,
            timestamp_gate: false,
            trials: 20_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Pessimistic,
    Inbetween,
    Optimistic,
}

impl Regime {
    pub fn params(self) -> (f64, f64, f64) {
        match self {
            Regime::Pessimistic => (0.15, 0.05, 0.15),
            Regime::Inbetween => (0.1, 0.05, 0.1),
            Regime::Optimistic => (0.0, 0.05, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Pessimistic => "pessimistic",
            Regime::Inbetween => "inbetween",
            Regime::Optimistic => "optimistic",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "pessimistic" => Some(Regime::Pessimistic),
            "inbetween" => Some(Regime::Inbetween),
            "optimistic" => Some(Regime::Optimistic),
            _ => None,
        }
    }

    pub fn all() -> [Regime; 3] {
        [Regime::Pessimistic, Regime::Inbetween, Regime::Optimistic]
    }
}

impl EquivGameConfig {
    pub fn with_regime(mut self, r: Regime) -> Self {
        (self.a, self.eps1, self.eps2) = r.params();
        self
    }

    pub fn total(&self) -> usize {
        self.honest + self.byzantine
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.honest == 0 {
            return bad("honest must be positive");
        }
        for (name, v) in [("a", self.a), ("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        if !(0.0..=1.0).contains(&self.dishonest_vote_time) {
            return bad("dishonest_time must lie in [0, 1]");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if let Some(s) = &self.stakes {
            if s.len() != self.total() {
                return bad("stakes must list one entry per validator");
            }
            if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return bad("stakes must be finite and nonnegative");
            }
        }
        Ok(())
    }

    fn stake(&self, i: usize) -> f64 {
        self.stakes.as_ref().map_or(1.0, |s| s[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub o1: f64,
    pub o2: f64,
    pub win: bool,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn jitter<R: Rng>(rng: &mut R, half: f64) -> f64 {
    if half == 0.0 {
        0.0
    } else {
        rng.random_range(-half..=half)
    }
}

pub fn play_once<R: Rng>(cfg: &EquivGameConfig, rng: &mut R) -> GameOutcome {
    let nh = cfg.honest;
    let nb = if cfg.dishonest_abstain { 0 } else { cfg.byzantine };
    let honest_time: Vec<f64> = (0..nh).map(|_| clamp01(0.5 + jitter(rng, cfg.eps1))).collect();
    // (send time, option, stake)
    let byz: Vec<(f64, usize, f64)> = (0..nb)
        .map(|k| {
            let t = clamp01(cfg.dishonest_vote_time + jitter(rng, cfg.eps1));
            let opt = if cfg.random_split {
                rng.random_range(0..2usize)
            } else {
                usize::from(k >= nb / 2)
            };
            (t, opt, cfg.stake(nh + k))
        })
        .collect();

    let mut order: Vec<usize> = (0..nh).collect();
    order.sort_by(|&i, &j| honest_time[i].total_cmp(&honest_time[j]).then(i.cmp(&j)));
    let mut honest_vote = vec![0usize; nh];
    for (pos, &i) in order.iter().enumerate() {
        let t = honest_time[i];
        let mut seen = [0.0f64; 2];
        for &(sent, opt, w) in &byz {
            let arrive = clamp01(sent + cfg.a + jitter(rng, cfg.eps2));
            let visible = if cfg.timestamp_gate { arrive.max(0.5) } else { arrive };
            if visible <= t {
                seen[opt] += w;
            }
        }
        for &j in &order[..pos] {
            let arrive = clamp01(honest_time[j] + cfg.a + jitter(rng, cfg.eps2));
            if arrive <= t {
                seen[honest_vote[j]] += cfg.stake(j);
            }
        }
        honest_vote[i] = usize::from(seen[1] > seen[0]);
    }

    let mut tally = [0.0f64; 2];
    for i in 0..nh {
        tally[honest_vote[i]] += cfg.stake(i);
    }
    for &(_, opt, w) in &byz {
        tally[opt] += w;
    }
    let total: f64 = (0..cfg.total()).map(|i| cfg.stake(i)).sum();
    let win = 3.0 * tally[0] >= 2.0 * total || 3.0 * tally[1] >= 2.0 * total;
    GameOutcome { o1: tally[0], o2: tally[1], win }
}

/// Trial `index` draws from its own ChaCha stream, so any partition of the
/// trials gives the same result.
pub fn play_trial(cfg: &EquivGameConfig, index: u64) -> GameOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    play_once(cfg, &mut rng)
}

pub fn count_wins(cfg: &EquivGameConfig, range: std::ops::Range<u64>) -> u64 {
    range.filter(|&i| play_trial(cfg, i).win).count() as u64
}

pub fn estimate_win_rate(cfg: &EquivGameConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(count_wins(cfg, 0..cfg.trials) as f64 / cfg.trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silent_byzantine_always_lose() {
        for regime in Regime::all() {
            let cfg = EquivGameConfig { dishonest_abstain: true, trials: 300, ..Default::default() }.with_regime(regime);
            assert_eq!(estimate_win_rate(&cfg).unwrap(), 1.0);
        }
    }

    #[test]
    fn no_latency_no_jitter_wins() {
        let cfg = EquivGameConfig { a: 0.0, eps1: 0.0, eps2: 0.0, dishonest_abstain: true, trials: 5, ..Default::default() };
        let o = play_trial(&cfg, 0);
        assert_eq!(o.o1, 74.0);
        assert!(o.win);
    }

    #[test]
    fn even_split_is_eighteen_nineteen() {
        let cfg = EquivGameConfig {
            random_split: false,
            a: 0.0,
            eps1: 0.0,
            eps2: 0.0,
            dishonest_vote_time: 0.9,
            ..Default::default()
        };
        // byzantine votes land after every honest vote
        let o = play_trial(&cfg, 3);
        assert_eq!((o.o1, o.o2), (74.0 + 18.0, 19.0));
    }

    #[test]
    fn single_trial_rate_is_binary() {
        let cfg = EquivGameConfig { trials: 1, ..Default::default() };
        let r = estimate_win_rate(&cfg).unwrap();
        assert!(r == 0.0 || r == 1.0);
    }

    #[test]
    fn seed_determinism() {
        let cfg = EquivGameConfig { trials: 500, seed: 11, ..Default::default() };
        assert_eq!(estimate_win_rate(&cfg).unwrap(), estimate_win_rate(&cfg).unwrap());
        let split = count_wins(&cfg, 0..200) + count_wins(&cfg, 200..500);
        assert_eq!(split as f64 / 500.0, estimate_win_rate(&cfg).unwrap());
    }

    #[test]
    fn validation() {
        assert!(EquivGameConfig { trials: 0, ..Default::default() }.validate().is_err());
        assert!(EquivGameConfig { a: -0.1, ..Default::default() }.validate().is_err());
        assert!(EquivGameConfig { dishonest_vote_time: 1.5, ..Default::default() }.validate().is_err());
    }
}
