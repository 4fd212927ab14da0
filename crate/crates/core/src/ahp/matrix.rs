use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AhpError;

const RECIPROCITY_TOL: f64 = 1e-12;

/// Acceptability threshold on the consistency ratio.
pub const CR_THRESHOLD: f64 = 0.1;

/// Random index by matrix order (Saaty).
const RANDOM_INDEX: [f64; 11] = [
    0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49,
];

pub fn random_index(n: usize) -> Option<f64> {
    if n == 0 {
        return None;
    }
    RANDOM_INDEX.get(n).copied()
}

/// One consensus judgment on a pair, as exported by a Delphi session.
///
/// `worse` names the pair member with the higher cost; `value` is its
/// position on the 1..5 scale (1 = equal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub criterion_id: u8,
    pub tech_a: String,
    pub tech_b: String,
    pub worse: String,
    pub value: u8,
    #[serde(default = "default_true")]
    pub consensus: bool,
}

fn default_true() -> bool {
    true
}

/// Positive reciprocal judgment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    labels: Vec<String>,
    entries: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn new(labels: Vec<String>, entries: Vec<Vec<f64>>) -> Result<Self, AhpError> {
        let n = labels.len();
        if n < 2 {
            return Err(AhpError::TooFewAlternatives(n));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(AhpError::DuplicateLabel(l.clone()));
            }
        }
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(AhpError::Shape(n));
        }
        for (i, row) in entries.iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(AhpError::NonPositiveEntry {
                        row: i,
                        col: j,
                        value,
                    });
                }
            }
            if (row[i] - 1.0).abs() > RECIPROCITY_TOL {
                return Err(AhpError::Diagonal(i));
            }
        }
        for (i, row) in entries.iter().enumerate() {
            for j in (i + 1)..n {
                if (row[j] * entries[j][i] - 1.0).abs() > RECIPROCITY_TOL {
                    return Err(AhpError::NotReciprocal { row: i, col: j });
                }
            }
        }
        Ok(PairwiseMatrix { labels, entries })
    }

    /// The fully consistent matrix `a_ij = w_i / w_j`.
    pub fn from_weights(labels: Vec<String>, weights: &[f64]) -> Result<Self, AhpError> {
        if weights.len() != labels.len() {
            return Err(AhpError::Shape(labels.len()));
        }
        let entries = weights
            .iter()
            .map(|wi| weights.iter().map(|wj| wi / wj).collect())
            .collect();
        PairwiseMatrix::new(labels, entries)
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub(crate) fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Builds the reciprocal matrix over `labels` from one judgment per unordered pair.
pub fn matrix_from_ratings(
    labels: &[String],
    judgments: &[Judgment],
) -> Result<PairwiseMatrix, AhpError> {
    let n = labels.len();
    if n < 2 {
        return Err(AhpError::TooFewAlternatives(n));
    }
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    if index.len() != n {
        let mut seen = BTreeSet::new();
        let dup = labels.iter().find(|l| !seen.insert(l.as_str())).unwrap();
        return Err(AhpError::DuplicateLabel(dup.clone()));
    }
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| AhpError::UnknownAlternative(name.to_string()))
    };

    let mut entries = vec![vec![1.0; n]; n];
    let mut rated = BTreeSet::new();
    for j in judgments {
        let a = lookup(&j.tech_a)?;
        let b = lookup(&j.tech_b)?;
        if a == b {
            return Err(AhpError::SelfPair(j.tech_a.clone(), j.tech_b.clone()));
        }
        if !(1..=5).contains(&j.value) {
            return Err(AhpError::ValueOutOfScale(j.value));
        }
        let (worse, better) = if j.worse == j.tech_a {
            (a, b)
        } else if j.worse == j.tech_b {
            (b, a)
        } else {
            return Err(AhpError::BadOrientation(j.worse.clone()));
        };
        if !rated.insert((a.min(b), a.max(b))) {
            return Err(AhpError::DuplicatePair(j.tech_a.clone(), j.tech_b.clone()));
        }
        let s = f64::from(j.value);
        entries[worse][better] = s;
        entries[better][worse] = 1.0 / s;
    }
    for i in 0..n {
        for k in (i + 1)..n {
            if !rated.contains(&(i, k)) {
                return Err(AhpError::MissingPair(labels[i].clone(), labels[k].clone()));
            }
        }
    }
    PairwiseMatrix::new(labels.to_vec(), entries)
}

/// Normalized weights of alternatives on one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl PriorityVector {
    /// Rescales non-negative raw values to sum to 1.
    pub fn from_unnormalized(labels: Vec<String>, raw: Vec<f64>) -> Result<Self, AhpError> {
        if labels.len() != raw.len() {
            return Err(AhpError::Shape(labels.len()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AhpError::InvalidPriorities);
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(AhpError::InvalidPriorities);
        }
        let weights = raw.into_iter().map(|w| w / total).collect();
        Ok(PriorityVector { labels, weights })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.weights[i])
    }
}

/// Column-normalizes `m` and averages each row.
pub fn priority_from_matrix(m: &PairwiseMatrix) -> PriorityVector {
    let n = m.order();
    let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| m.get(i, j)).sum()).collect();
    let weights = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j) / col_sums[j]).sum::<f64>() / n as f64)
        .collect();
    PriorityVector {
        labels: m.labels().to_vec(),
        weights,
    }
}

/// Mean of `(M w)_i / w_i`.
///
/// Panics if `w` has a different order than `m`.
pub fn lambda_max(m: &PairwiseMatrix, w: &PriorityVector) -> f64 {
    assert_eq!(m.order(), w.weights().len(), "priority vector order");
    let mw = m.mul_vec(w.weights());
    mw.iter()
        .zip(w.weights())
        .map(|(x, wi)| x / wi)
        .sum::<f64>()
        / m.order() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub order: usize,
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    /// `None` when the random index is zero (order ≤ 2).
    pub cr: Option<f64>,
    pub acceptable: bool,
}

pub fn consistency(m: &PairwiseMatrix) -> Result<ConsistencyReport, AhpError> {
    let n = m.order();
    let ri = random_index(n).ok_or(AhpError::UnsupportedOrder(n))?;
    let w = priority_from_matrix(m);
    let lambda = lambda_max(m, &w);
    if n <= 2 {
        return Ok(ConsistencyReport {
            order: n,
            lambda_max: lambda,
            ci: 0.0,
            ri,
            cr: None,
            acceptable: true,
        });
    }
    let ci = ((lambda - n as f64) / (n as f64 - 1.0)).max(0.0);
    let cr = ci / ri;
    Ok(ConsistencyReport {
        order: n,
        lambda_max: lambda,
        ci,
        ri,
        cr: Some(cr),
        acceptable: cr < CR_THRESHOLD,
    })
}
