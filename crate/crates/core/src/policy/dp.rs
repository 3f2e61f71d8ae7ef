//! Grid value iteration for the optimal stopping thresholds.
//!
//! The value `s(ctx, pi)` is the minimal expected remaining cost when the
//! posterior is `pi` and the next observation is drawn from the outcome
//! distribution of context `ctx`:
//!
//! `s(ctx, pi) = min{ g(pi), c pi + sum_o (pi a1 + (1 - pi) a0) s(next_o, pi'_o) }`
//!
//! with `pi'_o = pi a1 / (pi a1 + (1 - pi) a0)`. Off-grid values are linearly
//! interpolated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{g, CostSpec, PolicyError};
use crate::markov::SpreadModel;
use crate::Hypothesis;

/// One possible next observation: its probability under each hypothesis and
/// the context it leads to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub a0: f64,
    pub a1: f64,
    pub next_context: usize,
}

/// Distribution of the next observation as a function of a finite context.
pub trait NextObservationModel {
    fn num_contexts(&self) -> usize;
    /// Context whose table is reported as the default.
    fn initial_context(&self) -> usize;
    fn outcomes(&self, context: usize) -> &[Outcome];
}

/// Observations follow a single path: context `z < Z` means the last class
/// seen was `z` and the next one is drawn from row `z` of `alpha`; context
/// `Z` means nothing has been seen and the next class comes from `eta`.
#[derive(Debug, Clone)]
pub struct SinglePathModel {
    outcomes: Vec<Vec<Outcome>>,
}

impl SinglePathModel {
    pub fn new(model: &SpreadModel) -> Self {
        let z = model.num_classes();
        let (g0, g1) = (Hypothesis::Genuine, Hypothesis::Fake);
        let mut outcomes: Vec<Vec<Outcome>> = (0..z)
            .map(|from| {
                (0..z)
                    .map(|to| Outcome {
                        a0: model.alpha(g0).get(from, to),
                        a1: model.alpha(g1).get(from, to),
                        next_context: to,
                    })
                    .collect()
            })
            .collect();
        outcomes.push(
            (0..z)
                .map(|to| Outcome {
                    a0: model.eta(g0)[to],
                    a1: model.eta(g1)[to],
                    next_context: to,
                })
                .collect(),
        );
        SinglePathModel { outcomes }
    }

    pub fn source_context(&self) -> usize {
        self.outcomes.len() - 1
    }
}

impl NextObservationModel for SinglePathModel {
    fn num_contexts(&self) -> usize {
        self.outcomes.len()
    }

    fn initial_context(&self) -> usize {
        self.source_context()
    }

    fn outcomes(&self, context: usize) -> &[Outcome] {
        &self.outcomes[context]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid_step: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_step: 0.001,
            max_sweeps: 10_000,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub pi_low: f64,
    pub pi_up: f64,
}

impl Thresholds {
    pub fn contains(&self, pi: f64) -> bool {
        self.pi_low < pi && pi < self.pi_up
    }
}

/// Value function on the grid for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub costs: CostSpec,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub pi_low: f64,
    pub pi_up: f64,
}

impl ThresholdTable {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            pi_low: self.pi_low,
            pi_up: self.pi_up,
        }
    }

    /// Header line with the costs and thresholds, then `pi,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# c_I={},c_II={},c={},pi_low={},pi_up={}",
            self.costs.c_i, self.costs.c_ii, self.costs.c, self.pi_low, self.pi_up
        )?;
        writeln!(w, "pi,value")?;
        for (p, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{p},{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution {
    /// One table per context.
    pub tables: Vec<ThresholdTable>,
    pub default_context: usize,
    pub converged: bool,
    pub sweeps: usize,
    /// Sup-norm change in the last sweep.
    pub last_change: f64,
}

impl ThresholdSolution {
    pub fn table(&self) -> &ThresholdTable {
        &self.tables[self.default_context]
    }

    pub fn thresholds(&self) -> Thresholds {
        self.table().thresholds()
    }
}

fn interpolate(values: &[f64], n: usize, pi: f64) -> f64 {
    let x = pi.clamp(0.0, 1.0) * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let frac = x - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Solves for the value function and extracts `(pi_low, pi_up)` per context.
pub fn solve_thresholds(
    costs: &CostSpec,
    model: &dyn NextObservationModel,
    cfg: &SolverConfig,
) -> Result<ThresholdSolution, PolicyError> {
    if !(cfg.grid_step > 0.0 && cfg.grid_step <= 0.1) {
        return Err(PolicyError::Solver(format!("grid step {} not in (0, 0.1]", cfg.grid_step)));
    }
    if cfg.max_sweeps == 0 {
        return Err(PolicyError::Solver("at least one sweep is required".into()));
    }
    let n = (1.0 / cfg.grid_step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let stop: Vec<f64> = grid.iter().map(|&p| g(p, costs)).collect();
    let k = model.num_contexts();

    // Posterior successors and their weights do not change between sweeps.
    let transitions: Vec<Vec<Vec<(f64, f64, usize)>>> = (0..k)
        .map(|ctx| {
            grid.iter()
                .map(|&pi| {
                    model
                        .outcomes(ctx)
                        .iter()
                        .filter_map(|o| {
                            let w = pi * o.a1 + (1.0 - pi) * o.a0;
                            (w > 0.0).then(|| (w, pi * o.a1 / w, o.next_context))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut values = vec![stop.clone(); k];
    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let next: Vec<Vec<f64>> = (0..k)
            .map(|ctx| {
                (0..=n)
                    .map(|i| {
                        let cont: f64 = costs.c * grid[i]
                            + transitions[ctx][i]
                                .iter()
                                .map(|&(w, post, to)| w * interpolate(&values[to], n, post))
                                .sum::<f64>();
                        stop[i].min(cont)
                    })
                    .collect()
            })
            .collect();
        change = next
            .iter()
            .zip(&values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        values = next;
        if change < cfg.tolerance {
            break;
        }
    }
    let converged = change < cfg.tolerance;
    if !converged {
        log::warn!("threshold solver stopped after {sweeps} sweeps with change {change:.3e}");
    }

    let split = costs.break_even();
    let tables = values
        .into_iter()
        .map(|v| {
            let stops = |i: usize| v[i] >= stop[i] - cfg.tolerance;
            let pi_low = (0..=n).rev().find(|&i| grid[i] <= split && stops(i)).map_or(0.0, |i| grid[i]);
            let pi_up = (0..=n).find(|&i| grid[i] >= split && stops(i)).map_or(1.0, |i| grid[i]);
            ThresholdTable {
                costs: *costs,
                grid: grid.clone(),
                values: v,
                pi_low,
                pi_up,
            }
        })
        .collect();
    Ok(ThresholdSolution {
        tables,
        default_context: model.initial_context(),
        converged,
        sweeps,
        last_change: change,
    })
}
