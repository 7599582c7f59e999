//! Sample-size schedules and scenario bounds.

use statrs::function::gamma::ln_gamma;

use super::SampleSchedule;
use crate::error::UncertaintyError;

/// `ln xi(alpha)` for `alpha = 1.1`, rounded as in the verification schedule.
pub const SCHEDULE_LOG_XI: f64 = 2.3;
/// Growth exponent `alpha` of the verification schedule.
pub const SCHEDULE_ALPHA: f64 = 1.1;
/// Leading constant of the analytic sufficient scenario bound.
pub const ALAMO_FACTOR: f64 = 1.582;

pub(crate) fn check_level(v: f64) -> Result<f64, UncertaintyError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(UncertaintyError::InvalidLevel(v))
    }
}

fn check_helly(h: u64) -> Result<u64, UncertaintyError> {
    if h >= 2 {
        Ok(h)
    } else {
        Err(UncertaintyError::InvalidSet(format!("Helly number {h} < 2")))
    }
}

/// `M_k = ceil((2.3 + 1.1 ln k + ln(1/delta)) / ln(1/(1 - eps)))`.
pub fn sample_size_for(k: u64, eps: f64, delta: f64) -> u64 {
    let k = k.max(1) as f64;
    let num = SCHEDULE_LOG_XI + SCHEDULE_ALPHA * k.ln() + (1.0 / delta).ln();
    let den = (1.0 / (1.0 - eps)).ln();
    (num / den).ceil().max(1.0) as u64
}

/// Multi-sample size for the schedule's current counter.
pub fn sample_size(schedule: &SampleSchedule) -> u64 {
    sample_size_for(schedule.counter(), schedule.eps(), schedule.delta())
}

/// `ln P(Bin(m, eps) <= max_successes)`, summed in the log domain.
pub fn log_binomial_tail(m: u64, eps: f64, max_successes: u64) -> f64 {
    if max_successes >= m {
        return 0.0;
    }
    let ln_eps = eps.ln();
    let ln_q = (-eps).ln_1p();
    let mf = m as f64;
    let terms: Vec<f64> = (0..=max_successes)
        .map(|l| {
            let lf = l as f64;
            ln_gamma(mf + 1.0) - ln_gamma(lf + 1.0) - ln_gamma(mf - lf + 1.0)
                + lf * ln_eps
                + (mf - lf) * ln_q
        })
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln()
}

/// Left-hand side of the scenario condition: `sum_{l=0}^{h-2} C(m,l) eps^l (1-eps)^{m-l}`.
pub fn scenario_tail(m: u64, eps: f64, h: u64) -> f64 {
    log_binomial_tail(m, eps, h.saturating_sub(2)).exp()
}

fn tail_ok(m: u64, eps: f64, delta: f64, h: u64) -> bool {
    log_binomial_tail(m, eps, h - 2) <= delta.ln()
}

/// Smallest `M` with `scenario_tail(M, eps, h) <= delta`.
pub fn scenario_bound(eps: f64, delta: f64, h: u64) -> Result<u64, UncertaintyError> {
    let eps = check_level(eps)?;
    let delta = check_level(delta)?;
    let h = check_helly(h)?;
    let mut hi = alamo_bound(eps, delta, h)?.max(h - 1);
    while !tail_ok(hi, eps, delta, h) {
        hi *= 2;
    }
    // the tail is 1 for M <= h - 2 and non-increasing afterwards
    let mut lo = h - 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail_ok(mid, eps, delta, h) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Analytic sufficient sample size `ceil((1.582 / eps)(ln(1/delta) + h - 2))`.
pub fn alamo_bound(eps: f64, delta: f64, h: u64) -> Result<u64, UncertaintyError> {
    let eps = check_level(eps)?;
    let delta = check_level(delta)?;
    let h = check_helly(h)?;
    Ok(((ALAMO_FACTOR / eps) * ((1.0 / delta).ln() + h as f64 - 2.0)).ceil() as u64)
}

/// Verification counter beyond which the schedule reaches the analytic scenario bound:
/// `exp((0.58 ln(1/delta) + 1.58 (h - 2) - 2.3) / 1.1)`.
///
/// `delta = 1` is accepted here; the result is then below one.
pub fn verification_counter_threshold(delta: f64, h: u64) -> Result<f64, UncertaintyError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(UncertaintyError::InvalidLevel(delta));
    }
    let h = check_helly(h)?;
    let exponent = (0.58 * (1.0 / delta).ln() + 1.58 * (h as f64 - 2.0) - SCHEDULE_LOG_XI) / SCHEDULE_ALPHA;
    Ok(exponent.exp())
}
