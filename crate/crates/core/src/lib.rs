//! Sequential misinformation detection on social graphs.
//!
//! Each retweet is an edge whose class (produced by an edge classifier) is
//! assumed to follow a Markov chain along every path from the source, with
//! transition laws that differ between genuine and fake items. Given a
//! partially observed cascade the crate maintains the exact posterior that
//! the item is fake and decides when to stop observing.
//!
//! - [`graph`]: social graph, typed edges, bounded simple-path enumeration.
//! - [`markov`]: spread model parameters, k-step transitions, cascade
//!   simulation and subsampling, trace files.
//! - [`inference`]: path scores, conditional observation probabilities and
//!   the posterior / likelihood-ratio recursion.
//! - [`policy`]: Bayes risk, dynamic-programming thresholds, SPRT, the
//!   convergence rule, and Monte Carlo risk estimation.
//! - [`offline`]: trace features, linear SVM edge classifier, parameter
//!   estimation.
//! - [`cli`]: the command surface used by the `misinfo` binary and the
//!   evaluation harness.

use serde::{Deserialize, Serialize};

pub mod cli;
pub mod graph;
pub mod inference;
pub mod markov;
pub mod offline;
pub mod policy;
pub mod rng;

pub use graph::{DirectedPath, Edge, NodeId, PathEnumConfig, PathSet, SocialGraph};
pub use inference::{BeliefState, DetectorConfig, PosteriorEngine, PosteriorRun};
pub use markov::{ObservationStream, SpreadModel, Trace};
pub use policy::{CostSpec, DecisionOutcome, StopRule};

/// Information type: the null hypothesis (genuine) or the alternative (fake).
/// Also used as the verdict of a decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    Genuine,
    Fake,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::Genuine, Hypothesis::Fake];

    pub fn index(self) -> usize {
        match self {
            Hypothesis::Genuine => 0,
            Hypothesis::Fake => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Hypothesis::Genuine),
            1 => Some(Hypothesis::Fake),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Hypothesis::Genuine => Hypothesis::Fake,
            Hypothesis::Fake => Hypothesis::Genuine,
        }
    }
}
