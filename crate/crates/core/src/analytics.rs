use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows of the no-finalization table: (n, p).
pub const TABLE1_ROWS: [(u32, f64); 10] = [
    (2, 0.5),
    (5, 0.5),
    (7, 0.5),
    (10, 0.5),
    (20, 0.5),
    (2, 0.66),
    (5, 0.66),
    (7, 0.66),
    (10, 0.66),
    (20, 0.66),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundForm {
    /// Keeps the sampling-without-replacement correction.
    Tight,
    /// Drops the correction factor.
    Weak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LivenessParams {
    pub slots_per_epoch: u64,
    pub committee_size: f64,
    pub eps: f64,
    pub p: f64,
    pub r: f64,
    pub n: u32,
}

impl Default for LivenessParams {
    fn default() -> Self {
        LivenessParams { slots_per_epoch: 64, committee_size: 900.0, eps: 30.0, p: 0.5, r: 1.0, n: 20 }
    }
}

/// Tail bound for the mean of n draws without replacement from a population
/// of N_pop values in [lo, hi] exceeding its expectation by delta.
pub fn serfling_tail(n: u64, n_pop: u64, delta: f64, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Err(Error::InvalidArgument("need hi > lo".into()));
    }
    if n == 0 || n > n_pop {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= N_pop, got n={n}, N_pop={n_pop}")));
    }
    if delta < 0.0 {
        return Err(Error::InvalidArgument("delta must be nonnegative".into()));
    }
    let f = 1.0 - (n as f64 - 1.0) / n_pop as f64;
    let range = hi - lo;
    Ok((-2.0 * n as f64 * delta * delta / (f * range * range)).exp().min(1.0))
}

fn log2_exact(c: u64) -> Result<u32> {
    if c == 0 || !c.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("slots per epoch {c} is not a power of two")));
    }
    Ok(c.trailing_zeros())
}

/// Sum of the per-level failure terms of the justification event.
pub fn justification_failure_sum(c: u64, s: f64, eps: f64, form: BoundForm) -> Result<f64> {
    let l = log2_exact(c)?;
    let mut total = 0.0;
    for i in 1..=l {
        let two_i = 2f64.powi(i as i32);
        let corr = match form {
            BoundForm::Weak => 1.0,
            BoundForm::Tight => 1.0 - (2f64.powi(i as i32 - 1) * s - 1.0) / (2f64.powi(l as i32) * s),
        };
        total += (-two_i * eps * eps / (corr * s)).exp();
    }
    Ok(total)
}

/// Lower bound on the probability that every committee prefix keeps the
/// honest majority margin.
pub fn justification_event_bound(c: u64, s: f64, eps: f64, form: BoundForm) -> Result<f64> {
    Ok(1.0 - justification_failure_sum(c, s, eps, form)?)
}

/// Lower bound on the probability that an epoch justifies a new descendant
/// of the last justified block, given the equivocation-game win rate r.
pub fn justification_liveness_bound(r: f64, c: u64, s: f64, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument("r must lie in [0, 1]".into()));
    }
    let sum = justification_failure_sum(c, s, eps, BoundForm::Weak)?;
    let tail = 3f64.powi(-(c as i32 - 1));
    Ok((r - sum - tail).max(0.0))
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Number of length-n outcome sequences with i failures and no two adjacent
/// successes.
pub fn fail_pattern_count(n: u64, i: u64) -> u128 {
    if i > n || n - i > i + 1 {
        return 0;
    }
    let (top, k) = (i + 1, n - i);
    let k = k.min(top - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (top - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Probability that n independent epochs, each justifying with probability
/// p, never contain two consecutive justifications.
pub fn no_finalization_prob(n: u32, p: f64) -> Result<f64> {
    check_np(n, p)?;
    let n = n as u64;
    if n > 500 {
        return Ok(no_finalization_prob_log(n, p));
    }
    let mut total = 0.0;
    for i in 0..=n {
        let k = n - i;
        if k > i + 1 {
            continue;
        }
        total += binomial_f64(i + 1, k) * (1.0 - p).powi(i as i32) * p.powi(k as i32);
    }
    Ok(total)
}

fn no_finalization_prob_log(n: u64, p: f64) -> f64 {
    let mut ln_fact = vec![0.0f64; n as usize + 2];
    for k in 1..ln_fact.len() {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln_pow = |base: f64, e: u64| if e == 0 { 0.0 } else { e as f64 * base.ln() };
    let mut total = 0.0;
    for i in 0..=n {
        let k = n - i;
        if k > i + 1 {
            continue;
        }
        let top = (i + 1) as usize;
        let lb = ln_fact[top] - ln_fact[k as usize] - ln_fact[top - k as usize];
        total += (lb + ln_pow(1.0 - p, i) + ln_pow(p, k)).exp();
    }
    total
}

fn check_np(n: u32, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("p must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Same quantity by a two-state recurrence on whether the last epoch
/// justified.
pub fn no_finalization_prob_dp(n: u32, p: f64) -> Result<f64> {
    check_np(n, p)?;
    let (mut last_fail, mut last_ok) = (1.0 - p, p);
    for _ in 1..n {
        let f = (last_fail + last_ok) * (1.0 - p);
        let s = last_fail * p;
        last_fail = f;
        last_ok = s;
    }
    Ok(last_fail + last_ok)
}

/// Same quantity by enumerating every outcome sequence. n is capped at 24.
pub fn no_finalization_prob_enum(n: u32, p: f64) -> Result<f64> {
    check_np(n, p)?;
    if n > 24 {
        return Err(Error::InvalidArgument("enumeration is limited to n <= 24".into()));
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        if mask & (mask >> 1) != 0 {
            continue;
        }
        let k = mask.count_ones() as i32;
        total += p.powi(k) * (1.0 - p).powi(n as i32 - k);
    }
    Ok(total)
}

/// Asymptotic upper bound (1/sqrt 5)((1 + sqrt 5)/4)^n, valid for p >= 1/2
/// up to a constant factor.
pub fn finalization_failure_upper(n: u32, p: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("the bound requires p in [0.5, 1]".into()));
    }
    let s5 = 5f64.sqrt();
    Ok(((1.0 + s5) / 4.0).powi(n as i32) / s5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n: u32,
    pub p: f64,
    pub closed_form: f64,
    pub dp: f64,
    pub enumeration: Option<f64>,
}

pub fn table1() -> Vec<Table1Row> {
    TABLE1_ROWS
        .iter()
        .map(|&(n, p)| Table1Row {
            n,
            p,
            closed_form: no_finalization_prob(n, p).unwrap(),
            dp: no_finalization_prob_dp(n, p).unwrap(),
            enumeration: if n <= 20 { no_finalization_prob_enum(n, p).ok() } else { None },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serfling_edges() {
        assert_eq!(serfling_tail(10, 100, 0.0, 0.0, 1.0).unwrap(), 1.0);
        let one = serfling_tail(1, 100, 0.3, 0.0, 1.0).unwrap();
        assert!((one - (-2.0f64 * 0.09).exp()).abs() < 1e-15);
        assert!(serfling_tail(1, 100, 0.3, 1.0, 1.0).is_err());
    }

    #[test]
    fn weak_bound_values() {
        let w30 = justification_event_bound(64, 900.0, 30.0, BoundForm::Weak).unwrap();
        assert!((w30 - 0.846014).abs() < 5e-7, "{w30}");
        let w40 = justification_event_bound(64, 900.0, 40.0, BoundForm::Weak).unwrap();
        assert!((0.970..=0.972).contains(&w40), "{w40}");
        assert!(justification_event_bound(48, 900.0, 30.0, BoundForm::Weak).is_err());
    }

    #[test]
    fn liveness_bound_arithmetic() {
        let v = justification_liveness_bound(0.8, 64, 900.0, 30.0).unwrap();
        assert!((v - 0.646014).abs() < 1e-6, "{v}");
        let big = justification_liveness_bound(1.0, 8, 900.0, 1e4).unwrap();
        assert!((big - (1.0 - 3f64.powi(-7))).abs() < 1e-15);
    }

    #[test]
    fn fail_patterns() {
        assert_eq!(fail_pattern_count(5, 3), 6);
        assert_eq!(fail_pattern_count(7, 7), 1);
        assert_eq!(fail_pattern_count(5, 1), 0);
    }

    #[test]
    fn single_epoch_never_finalizes() {
        for p in [0.0, 0.3, 1.0] {
            assert_eq!(no_finalization_prob_dp(1, p).unwrap(), 1.0);
            assert_eq!(no_finalization_prob(1, p).unwrap(), 1.0);
        }
    }

    #[test]
    fn log_space_agrees_near_the_switch() {
        let direct = {
            let mut t = 0.0;
            let n = 480u64;
            for i in 0..=n {
                let k = n - i;
                if k <= i + 1 {
                    t += binomial_f64(i + 1, k) * 0.5f64.powi(i as i32) * 0.5f64.powi(k as i32);
                }
            }
            t
        };
        let logv = no_finalization_prob_log(480, 0.5);
        assert!(((direct - logv) / direct).abs() < 1e-9);
    }

    #[test]
    fn upper_bound_domain() {
        assert!(finalization_failure_upper(5, 0.4).is_err());
        let r = finalization_failure_upper(11, 0.5).unwrap() / finalization_failure_upper(10, 0.5).unwrap();
        assert!((r - 0.80902).abs() < 1e-5);
    }
}
