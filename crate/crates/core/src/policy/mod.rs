//! Decision layer: Bayes risk, stopping rules and their evaluation.
//!
//! All stopping rules read a posterior trajectory `Pi_1 .. Pi_n` (plus the
//! prior where needed) and report the 1-based step at which they stop. A
//! rule that never fires stops at the last observation with the Bayes
//! decision and reports [`StopRule::Horizon`].

mod dp;
mod risk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{posterior_from_log_lr, BeliefState};
use crate::Hypothesis;

pub use dp::{
    solve_thresholds, NextObservationModel, Outcome, SinglePathModel, SolverConfig, ThresholdSolution,
    ThresholdTable, Thresholds,
};
pub use risk::{risk_estimate, Policy, RiskReport, RiskSetup};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("invalid costs: {0}")]
    Costs(String),
    #[error("invalid SPRT boundaries: {0}")]
    Boundaries(String),
    #[error("invalid solver configuration: {0}")]
    Solver(String),
}

/// Error and propagation costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostSpec {
    /// Cost of declaring a genuine item fake.
    pub c_i: f64,
    /// Cost of declaring a fake item genuine.
    pub c_ii: f64,
    /// Per-step cost while a fake item keeps spreading.
    pub c: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec {
            c_i: 10.0,
            c_ii: 10.0,
            c: 0.05,
        }
    }
}

impl CostSpec {
    pub fn new(c_i: f64, c_ii: f64, c: f64) -> Result<Self, PolicyError> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !(ok(c_i) && ok(c_ii) && ok(c)) {
            return Err(PolicyError::Costs("costs must be finite and non-negative".into()));
        }
        if c_i + c_ii <= 0.0 {
            return Err(PolicyError::Costs("c_I + c_II must be positive".into()));
        }
        Ok(CostSpec { c_i, c_ii, c })
    }

    /// `c_I / (c_I + c_II)`, where the two error costs balance.
    pub fn break_even(&self) -> f64 {
        self.c_i / (self.c_i + self.c_ii)
    }
}

/// Expected cost of stopping now: `min(c_II pi, c_I (1 - pi))`.
pub fn g(pi: f64, costs: &CostSpec) -> f64 {
    (costs.c_ii * pi).min(costs.c_i * (1.0 - pi))
}

/// Fake iff `c_II pi > c_I (1 - pi)`; ties go to genuine.
pub fn bayes_decision(pi: f64, costs: &CostSpec) -> Hypothesis {
    if costs.c_ii * pi > costs.c_i * (1.0 - pi) {
        Hypothesis::Fake
    } else {
        Hypothesis::Genuine
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    DpThreshold,
    Sprt,
    Convergence,
    Horizon,
    Oracle,
}

impl StopRule {
    pub fn name(self) -> &'static str {
        match self {
            StopRule::DpThreshold => "dp_threshold",
            StopRule::Sprt => "sprt",
            StopRule::Convergence => "convergence",
            StopRule::Horizon => "horizon",
            StopRule::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    /// Number of observations used, at least 1.
    pub stopping_step: usize,
    pub verdict: Hypothesis,
    pub rule: StopRule,
}

fn horizon(posteriors: &[f64], verdict: impl Fn(f64) -> Hypothesis) -> Option<DecisionOutcome> {
    let last = *posteriors.last()?;
    Some(DecisionOutcome {
        stopping_step: posteriors.len(),
        verdict: verdict(last),
        rule: StopRule::Horizon,
    })
}

/// First step with `Pi_l` outside `(pi_low, pi_up)`. `None` only for an
/// empty trajectory.
pub fn dp_stop_step(posteriors: &[f64], thresholds: Thresholds, costs: &CostSpec) -> Option<DecisionOutcome> {
    for (i, &pi) in posteriors.iter().enumerate() {
        if pi <= thresholds.pi_low || pi >= thresholds.pi_up {
            return Some(DecisionOutcome {
                stopping_step: i + 1,
                verdict: if pi <= thresholds.pi_low {
                    Hypothesis::Genuine
                } else {
                    Hypothesis::Fake
                },
                rule: StopRule::DpThreshold,
            });
        }
    }
    horizon(posteriors, |pi| bayes_decision(pi, costs))
}

/// Wald's boundaries for target error probabilities `p` (declaring fake
/// under genuine) and `q` (declaring genuine under fake).
pub fn wald_bounds(p: f64, q: f64) -> Result<(f64, f64), PolicyError> {
    if !(p > 0.0 && p < 0.5 && q > 0.0 && q < 0.5) {
        return Err(PolicyError::Boundaries(format!("targets ({p}, {q}) must lie in (0, 0.5)")));
    }
    Ok((q / (1.0 - p), (1.0 - q) / p))
}

/// Likelihood-ratio boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtConfig {
    pub b_low: f64,
    pub b_up: f64,
}

impl SprtConfig {
    pub fn new(b_low: f64, b_up: f64) -> Result<Self, PolicyError> {
        if !(b_low > 0.0 && b_low <= 1.0 && b_up >= 1.0 && b_up.is_finite()) {
            return Err(PolicyError::Boundaries(format!(
                "need 0 < B_low <= 1 <= B_up < inf, got ({b_low}, {b_up})"
            )));
        }
        Ok(SprtConfig { b_low, b_up })
    }

    pub fn from_error_targets(p: f64, q: f64) -> Result<Self, PolicyError> {
        let (lo, up) = wald_bounds(p, q)?;
        Self::new(lo, up)
    }

    /// Boundaries equivalent to posterior thresholds under `prior`:
    /// `B = (1 - prior) / prior * pi_b / (1 - pi_b)`.
    pub fn from_pi_thresholds(prior: f64, thresholds: Thresholds) -> Result<Self, PolicyError> {
        let Thresholds { pi_low, pi_up } = thresholds;
        if !(prior > 0.0 && prior < 1.0) {
            return Err(PolicyError::Boundaries(format!("prior {prior} must lie in (0, 1)")));
        }
        if !(pi_low > 0.0 && pi_low <= prior && prior <= pi_up && pi_up < 1.0) {
            return Err(PolicyError::Boundaries(format!(
                "need 0 < pi_low <= prior <= pi_up < 1, got ({pi_low}, {prior}, {pi_up})"
            )));
        }
        let odds = (1.0 - prior) / prior;
        Self::new(odds * pi_low / (1.0 - pi_low), odds * pi_up / (1.0 - pi_up))
    }
}

/// Checks the current belief against the boundaries: genuine once
/// `Lambda <= B_low`, fake once `Lambda >= B_up`.
pub fn sprt_step(belief: &BeliefState, cfg: &SprtConfig) -> Option<DecisionOutcome> {
    if belief.step == 0 {
        return None;
    }
    sprt_check(belief.log_lr, cfg).map(|verdict| DecisionOutcome {
        stopping_step: belief.step,
        verdict,
        rule: StopRule::Sprt,
    })
}

fn sprt_check(log_lr: f64, cfg: &SprtConfig) -> Option<Hypothesis> {
    if log_lr <= cfg.b_low.ln() {
        Some(Hypothesis::Genuine)
    } else if log_lr >= cfg.b_up.ln() {
        Some(Hypothesis::Fake)
    } else {
        None
    }
}

/// SPRT over a whole trajectory of `log Lambda_1 .. log Lambda_n`.
pub fn sprt_stop(prior: f64, log_lrs: &[f64], cfg: &SprtConfig, costs: &CostSpec) -> Option<DecisionOutcome> {
    for (i, &l) in log_lrs.iter().enumerate() {
        if let Some(verdict) = sprt_check(l, cfg) {
            return Some(DecisionOutcome {
                stopping_step: i + 1,
                verdict,
                rule: StopRule::Sprt,
            });
        }
    }
    let last = *log_lrs.last()?;
    Some(DecisionOutcome {
        stopping_step: log_lrs.len(),
        verdict: bayes_decision(posterior_from_log_lr(prior, last), costs),
        rule: StopRule::Horizon,
    })
}

/// Stops at the first step whose posterior moved by less than `epsilon`;
/// fake iff `Pi_T >= threshold`.
pub fn convergence_stop(prior: f64, posteriors: &[f64], epsilon: f64, threshold: f64) -> Option<DecisionOutcome> {
    let decide = |pi: f64| {
        if pi >= threshold {
            Hypothesis::Fake
        } else {
            Hypothesis::Genuine
        }
    };
    let mut prev = prior;
    for (i, &pi) in posteriors.iter().enumerate() {
        if (pi - prev).abs() < epsilon {
            return Some(DecisionOutcome {
                stopping_step: i + 1,
                verdict: decide(pi),
                rule: StopRule::Convergence,
            });
        }
        prev = pi;
    }
    horizon(posteriors, decide)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: CostSpec = CostSpec {
        c_i: 10.0,
        c_ii: 10.0,
        c: 0.05,
    };

    #[test]
    fn g_and_bayes() {
        assert_eq!(g(0.0, &REFERENCE), 0.0);
        assert_eq!(g(1.0, &REFERENCE), 0.0);
        assert_eq!(g(0.5, &REFERENCE), 5.0);
        assert!((g(0.3, &REFERENCE) - 3.0).abs() < 1e-12);
        assert_eq!(bayes_decision(0.6, &REFERENCE), Hypothesis::Fake);
        assert_eq!(bayes_decision(0.5, &REFERENCE), Hypothesis::Genuine);
        let skew = CostSpec::new(19.0, 1.0, 0.0).unwrap();
        assert_eq!(bayes_decision(0.9, &skew), Hypothesis::Genuine);
        assert!(CostSpec::new(0.0, 0.0, 1.0).is_err());
        assert!(CostSpec::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dp_stop_examples() {
        let t = Thresholds {
            pi_low: 0.05,
            pi_up: 0.95,
        };
        let o = dp_stop_step(&[0.5, 0.7, 0.96], t, &REFERENCE).unwrap();
        assert_eq!((o.stopping_step, o.verdict, o.rule), (3, Hypothesis::Fake, StopRule::DpThreshold));
        let o = dp_stop_step(&[0.5, 0.04], t, &REFERENCE).unwrap();
        assert_eq!((o.stopping_step, o.verdict), (2, Hypothesis::Genuine));
        let o = dp_stop_step(&[0.5, 0.6, 0.7], t, &REFERENCE).unwrap();
        assert_eq!((o.stopping_step, o.verdict, o.rule), (3, Hypothesis::Fake, StopRule::Horizon));
        assert_eq!(dp_stop_step(&[], t, &REFERENCE), None);
    }

    #[test]
    fn wald_examples() {
        let (lo, up) = wald_bounds(0.05, 0.05).unwrap();
        assert!((lo - 0.05 / 0.95).abs() < 1e-15 && (up - 19.0).abs() < 1e-12);
        let (lo, up) = wald_bounds(0.01, 0.1).unwrap();
        assert!((lo - 0.1 / 0.99).abs() < 1e-15 && (up - 90.0).abs() < 1e-12);
        let mut last = (1.0, 1.0);
        for k in 1..10 {
            let p = 0.4 / f64::from(k * k);
            let b = wald_bounds(p, p).unwrap();
            assert!(b.0 < last.0 && b.1 > last.1);
            last = b;
        }
        assert!(wald_bounds(0.5, 0.1).is_err());
    }

    #[test]
    fn sprt_examples() {
        let cfg = SprtConfig::from_error_targets(0.05, 0.05).unwrap();
        let mut b = BeliefState::new(0.5).unwrap();
        assert_eq!(sprt_step(&b, &cfg), None);
        b = b.update_log(0.0, 0.0, 0).unwrap();
        assert_eq!(sprt_step(&b, &cfg), None);
        b = b.update_log(0.0, 20f64.ln(), 1).unwrap();
        let o = sprt_step(&b, &cfg).unwrap();
        assert_eq!((o.stopping_step, o.verdict, o.rule), (2, Hypothesis::Fake, StopRule::Sprt));
    }

    #[test]
    fn pi_threshold_boundaries() {
        let t = Thresholds {
            pi_low: 0.05,
            pi_up: 0.95,
        };
        let cfg = SprtConfig::from_pi_thresholds(0.5, t).unwrap();
        assert!((cfg.b_low - 0.05 / 0.95).abs() < 1e-15);
        assert!((cfg.b_up - 19.0).abs() < 1e-12);
        assert!(SprtConfig::from_pi_thresholds(0.99, t).is_err());
    }

    #[test]
    fn convergence_examples() {
        let o = convergence_stop(0.5, &[0.5005, 0.7], 0.001, 0.5).unwrap();
        assert_eq!((o.stopping_step, o.verdict, o.rule), (1, Hypothesis::Fake, StopRule::Convergence));
        let o = convergence_stop(0.3, &[0.3, 0.3, 0.3], 0.001, 0.5).unwrap();
        assert_eq!((o.stopping_step, o.verdict), (1, Hypothesis::Genuine));
        // Fake-news trajectory from the reference study's worked example.
        let fake = [
            0.8796690694959185,
            0.766147458417471,
            0.3226277144757841,
            0.7768803411661945,
            0.9621987260629985,
            0.9946547016351934,
            0.9881506494402302,
            0.9983623633791093,
        ];
        let o = convergence_stop(0.5, &fake, 0.001, 0.5).unwrap();
        assert_eq!((o.stopping_step, o.rule), (8, StopRule::Horizon));
        assert!((fake[7] - fake[6] - 0.0102).abs() < 1e-4);
    }
}
