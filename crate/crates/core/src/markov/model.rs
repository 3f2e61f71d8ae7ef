use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Hypothesis;

/// Row-sum tolerance used when constructing a [`SpreadModel`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Dense square row-stochastic matrix indexed `[from][to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        TransitionMatrix { n, data }
    }

    /// Builds from rows; returns `None` unless the rows form a square matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(TransitionMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.n..(from + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul(&self, rhs: &TransitionMatrix) -> TransitionMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        TransitionMatrix { n, data }
    }

    /// `self^k` by repeated squaring; `k = 0` gives the identity.
    pub fn pow(&self, mut k: usize) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.n);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Row vector times matrix.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *o += vi * a;
            }
        }
        out
    }
}

/// Probability that the edge-type chain moves from class `from` to class
/// `to` in exactly `k` edges, i.e. `(alpha^k)[from][to]`.
pub fn k_step_transition(alpha: &TransitionMatrix, k: usize, from: usize, to: usize) -> f64 {
    assert!(k >= 1, "k-step transition needs k >= 1");
    alpha.pow(k).get(from, to)
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(Diagnostics),
    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("model file: {0}")]
    Format(String),
}

/// Which parameter table a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Table {
    Eta(Hypothesis),
    Alpha(Hypothesis),
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Table::Eta(h) => write!(f, "eta{}", h.index()),
            Table::Alpha(h) => write!(f, "alpha{}", h.index()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModelIssue {
    TooFewClasses { num_classes: usize },
    ShapeMismatch { table: Table, expected: String, got: String },
    NegativeEntry { table: Table, row: usize, col: usize, value: f64 },
    NonFinite { table: Table, row: usize, col: usize },
    RowSum { table: Table, row: usize, sum: f64 },
    PriorOutOfRange { value: f64 },
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelIssue::TooFewClasses { num_classes } => write!(f, "Z = {num_classes}, need at least 2"),
            ModelIssue::ShapeMismatch { table, expected, got } => {
                write!(f, "{table}: expected shape {expected}, got {got}")
            }
            ModelIssue::NegativeEntry { table, row, col, value } => {
                write!(f, "{table}[{row}][{col}] = {value} is negative")
            }
            ModelIssue::NonFinite { table, row, col } => write!(f, "{table}[{row}][{col}] is not finite"),
            ModelIssue::RowSum { table, row, sum } => write!(f, "{table} row {row} sums to {sum}"),
            ModelIssue::PriorOutOfRange { value } => write!(f, "prior_fake = {value} outside [0, 1]"),
        }
    }
}

/// Structured validation result; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub issues: Vec<ModelIssue>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Classifier parameters carried alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSection {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Raw margins mapped to scores 0 and 1.
    pub calibration: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<StandardizeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeSection {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "Z")]
    pub z: usize,
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    pub alpha0: Vec<Vec<f64>>,
    pub alpha1: Vec<Vec<f64>>,
    pub prior_fake: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSection>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    /// Rescales every row of every table to sum to one. Returns the largest
    /// absolute deviation found. Rows summing to zero are left alone.
    pub fn renormalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut fix = |row: &mut Vec<f64>| {
            let s: f64 = row.iter().sum();
            worst = worst.max((s - 1.0).abs());
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            }
        };
        fix(&mut self.eta0);
        fix(&mut self.eta1);
        self.alpha0.iter_mut().for_each(&mut fix);
        self.alpha1.iter_mut().for_each(&mut fix);
        worst
    }
}

/// Checks a model document without constructing it. Never panics.
pub fn validate_model(file: &ModelFile, tolerance: f64) -> Diagnostics {
    let z = file.z;
    let mut issues = Vec::new();
    if z < 2 {
        issues.push(ModelIssue::TooFewClasses { num_classes: z });
    }
    if !(0.0..=1.0).contains(&file.prior_fake) {
        issues.push(ModelIssue::PriorOutOfRange { value: file.prior_fake });
    }
    let check_row = |table: Table, row_idx: usize, row: &[f64], issues: &mut Vec<ModelIssue>| {
        for (col, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                issues.push(ModelIssue::NonFinite { table, row: row_idx, col });
            } else if x < 0.0 {
                issues.push(ModelIssue::NegativeEntry {
                    table,
                    row: row_idx,
                    col,
                    value: x,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum.is_nan() || (sum - 1.0).abs() > tolerance {
            issues.push(ModelIssue::RowSum { table, row: row_idx, sum });
        }
    };
    for (h, eta) in [(Hypothesis::Genuine, &file.eta0), (Hypothesis::Fake, &file.eta1)] {
        let table = Table::Eta(h);
        if eta.len() != z {
            issues.push(ModelIssue::ShapeMismatch {
                table,
                expected: format!("{z}"),
                got: format!("{}", eta.len()),
            });
        }
        check_row(table, 0, eta, &mut issues);
    }
    for (h, alpha) in [(Hypothesis::Genuine, &file.alpha0), (Hypothesis::Fake, &file.alpha1)] {
        let table = Table::Alpha(h);
        if alpha.len() != z || alpha.iter().any(|r| r.len() != z) {
            let widths: Vec<String> = alpha.iter().map(|r| r.len().to_string()).collect();
            issues.push(ModelIssue::ShapeMismatch {
                table,
                expected: format!("{z}x{z}"),
                got: format!("{}x[{}]", alpha.len(), widths.join(",")),
            });
        }
        for (i, row) in alpha.iter().enumerate() {
            check_row(table, i, row, &mut issues);
        }
    }
    Diagnostics { issues }
}

/// Edge-type Markov chain parameters under both hypotheses plus the prior
/// probability that the item is fake.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadModel {
    num_classes: usize,
    eta: [Vec<f64>; 2],
    alpha: [TransitionMatrix; 2],
    prior_fake: f64,
}

impl SpreadModel {
    pub fn new(
        eta: [Vec<f64>; 2],
        alpha: [Vec<Vec<f64>>; 2],
        prior_fake: f64,
    ) -> Result<Self, ModelError> {
        let [eta0, eta1] = eta;
        let [alpha0, alpha1] = alpha;
        let file = ModelFile {
            z: eta0.len(),
            eta0,
            eta1,
            alpha0,
            alpha1,
            prior_fake,
            classifier: None,
        };
        Self::from_file(&file)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self, ModelError> {
        let diag = validate_model(file, ROW_SUM_TOLERANCE);
        if !diag.is_valid() {
            return Err(ModelError::Invalid(diag));
        }
        let m = |rows: &Vec<Vec<f64>>| TransitionMatrix::from_rows(rows).expect("validated shape");
        Ok(SpreadModel {
            num_classes: file.z,
            eta: [file.eta0.clone(), file.eta1.clone()],
            alpha: [m(&file.alpha0), m(&file.alpha1)],
            prior_fake: file.prior_fake,
        })
    }

    /// Like [`SpreadModel::from_file`], but rows that only miss unity by
    /// rounding are rescaled first. The deviation is logged.
    pub fn from_file_renormalized(file: &ModelFile) -> Result<Self, ModelError> {
        let mut f = file.clone();
        let dev = f.renormalize();
        if dev > ROW_SUM_TOLERANCE {
            log::info!("renormalized model rows (max row-sum deviation {dev:.3e})");
        }
        Self::from_file(&f)
    }

    /// Parameters estimated on the Weibo corpus with four edge classes,
    /// rows rescaled to sum to one, and an even prior.
    pub fn weibo_z4() -> Self {
        Self::from_file_renormalized(&weibo_z4_file()).expect("reference tables are valid after rescaling")
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            z: self.num_classes,
            eta0: self.eta[0].clone(),
            eta1: self.eta[1].clone(),
            alpha0: self.alpha[0].to_rows(),
            alpha1: self.alpha[1].to_rows(),
            prior_fake: self.prior_fake,
            classifier: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn prior_fake(&self) -> f64 {
        self.prior_fake
    }

    pub fn with_prior(mut self, prior_fake: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&prior_fake) {
            return Err(ModelError::Invalid(Diagnostics {
                issues: vec![ModelIssue::PriorOutOfRange { value: prior_fake }],
            }));
        }
        self.prior_fake = prior_fake;
        Ok(self)
    }

    pub fn eta(&self, h: Hypothesis) -> &[f64] {
        &self.eta[h.index()]
    }

    pub fn alpha(&self, h: Hypothesis) -> &TransitionMatrix {
        &self.alpha[h.index()]
    }

    pub fn check_class(&self, class: usize) -> Result<(), ModelError> {
        if class < self.num_classes {
            Ok(())
        } else {
            Err(ModelError::ClassOutOfRange {
                class,
                num_classes: self.num_classes,
            })
        }
    }
}

/// Rounded Weibo tables (Z = 4) exactly as published, before rescaling.
pub fn weibo_z4_file() -> ModelFile {
    ModelFile {
        z: 4,
        eta0: vec![0.872, 0.004, 0.003, 0.120],
        eta1: vec![0.101, 0.006, 0.015, 0.876],
        alpha0: vec![
            vec![0.159, 0.029, 0.191, 0.621],
            vec![0.959, 0.001, 0.001, 0.039],
            vec![0.057, 0.017, 0.016, 0.91],
            vec![0.057, 0.145, 0.027, 0.771],
        ],
        alpha1: vec![
            vec![0.659, 0.017, 0.028, 0.297],
            vec![0.065, 0.015, 0.021, 0.899],
            vec![0.064, 0.011, 0.075, 0.85],
            vec![0.026, 0.004, 0.006, 0.964],
        ],
        prior_fake: 0.5,
        classifier: None,
    }
}

/// Cached matrix powers `alpha^k` for both hypotheses, grown on demand.
#[derive(Debug, Clone)]
pub struct PowerCache {
    powers: [Vec<TransitionMatrix>; 2],
}

impl PowerCache {
    pub fn new(model: &SpreadModel) -> Self {
        let z = model.num_classes();
        PowerCache {
            powers: [
                vec![TransitionMatrix::identity(z), model.alpha(Hypothesis::Genuine).clone()],
                vec![TransitionMatrix::identity(z), model.alpha(Hypothesis::Fake).clone()],
            ],
        }
    }

    /// `alpha_h^k`; `k = 0` is the identity.
    pub fn power(&mut self, h: Hypothesis, k: usize) -> &TransitionMatrix {
        let list = &mut self.powers[h.index()];
        while list.len() <= k {
            let next = list[list.len() - 1].mul(&list[1]);
            list.push(next);
        }
        &list[k]
    }

    /// Source-anchored marginal: probability that the edge at `depth`
    /// (1-based) along a path from the source has class `class`.
    pub fn source_marginal(&mut self, model: &SpreadModel, h: Hypothesis, depth: usize, class: usize) -> f64 {
        let eta = model.eta(h);
        let p = self.power(h, depth - 1);
        eta.iter().enumerate().map(|(z, &e)| e * p.get(z, class)).sum()
    }
}
