use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AhpError, CellFlag, ScoreColumn};
use crate::domain::Criterion;

/// Column-sum tolerance for freshly computed columns.
pub const STRICT_COLUMN_TOLERANCE: f64 = 1e-9;

const WEIGHT_SUM_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

/// Alternatives × criteria grid of normalized scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub technologies: Vec<String>,
    pub criteria: Vec<u8>,
    /// Row-major, `scores[technology][criterion]`.
    pub scores: Vec<Vec<f64>>,
    pub flags: Vec<Vec<CellFlag>>,
}

impl ScoreMatrix {
    pub fn get(&self, technology: &str, criterion_id: u8) -> Option<f64> {
        let i = self.technologies.iter().position(|t| t == technology)?;
        let j = self.criteria.iter().position(|c| *c == criterion_id)?;
        Some(self.scores[i][j])
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.criteria.len())
            .map(|j| self.scores.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// CSV grid: header `technology,<criterion ids>`, one row per technology.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("technology");
        for c in &self.criteria {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (t, row) in self.technologies.iter().zip(&self.scores) {
            out.push_str(t);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Orders one column per criterion (ids 1..10) into a [`ScoreMatrix`].
///
/// `column_sum_tolerance` bounds `|Σ column − 1|`; use
/// [`STRICT_COLUMN_TOLERANCE`] for computed columns and a looser bound for
/// display-rounded transcriptions.
pub fn assemble_score_matrix(
    mut columns: Vec<ScoreColumn>,
    column_sum_tolerance: f64,
) -> Result<ScoreMatrix, AhpError> {
    let mut ids = BTreeSet::new();
    for c in &columns {
        if !ids.insert(c.criterion_id) {
            return Err(AhpError::DuplicateCriterion(c.criterion_id));
        }
    }
    for c in Criterion::all() {
        if !ids.contains(&c.id) {
            return Err(AhpError::MissingCriterion(c.id));
        }
    }
    if let Some(extra) = ids.iter().find(|id| Criterion::by_id(**id).is_none()) {
        return Err(AhpError::UnknownCriterion(*extra));
    }
    columns.sort_by_key(|c| c.criterion_id);

    let technologies = columns[0].technologies.clone();
    for c in &columns {
        if c.technologies != technologies
            || c.scores.len() != technologies.len()
            || c.flags.len() != technologies.len()
        {
            return Err(AhpError::TechnologyMismatch);
        }
        let sum = c.sum();
        let in_range = c
            .scores
            .iter()
            .all(|s| s.is_finite() && (0.0..=1.0).contains(s));
        if !in_range || (sum - 1.0).abs() > column_sum_tolerance {
            return Err(AhpError::ColumnSum {
                criterion: c.criterion_id,
                sum,
            });
        }
    }

    let scores = (0..technologies.len())
        .map(|i| columns.iter().map(|c| c.scores[i]).collect())
        .collect();
    let flags = (0..technologies.len())
        .map(|i| columns.iter().map(|c| c.flags[i]).collect())
        .collect();
    Ok(ScoreMatrix {
        technologies,
        criteria: columns.iter().map(|c| c.criterion_id).collect(),
        scores,
        flags,
    })
}

pub fn equal_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnsResult {
    pub technologies: Vec<String>,
    pub tns: Vec<f64>,
    /// 1 = best (lowest TNS).
    pub rank: Vec<usize>,
    /// Set where another technology has the same TNS; such ranks were
    /// ordered by name.
    pub tied: Vec<bool>,
    pub weights_used: Vec<f64>,
}

impl TnsResult {
    /// Technology names from best to worst.
    pub fn ranking(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.technologies.len()).collect();
        order.sort_by_key(|&i| self.rank[i]);
        order
            .iter()
            .map(|&i| self.technologies[i].as_str())
            .collect()
    }

    pub fn tns_of(&self, technology: &str) -> Option<f64> {
        let i = self.technologies.iter().position(|t| t == technology)?;
        Some(self.tns[i])
    }

    pub fn rank_of(&self, technology: &str) -> Option<usize> {
        let i = self.technologies.iter().position(|t| t == technology)?;
        Some(self.rank[i])
    }
}

/// Weighted sum of each technology's scores, ranked ascending.
pub fn aggregate_tns(scores: &ScoreMatrix, weights: &[f64]) -> Result<TnsResult, AhpError> {
    if weights.len() != scores.criteria.len() {
        return Err(AhpError::WeightCount {
            expected: scores.criteria.len(),
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(AhpError::NegativeWeight(*w));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(AhpError::WeightSum(total));
    }

    let tns: Vec<f64> = scores
        .scores
        .iter()
        .map(|row| row.iter().zip(weights).map(|(s, w)| s * w).sum())
        .collect();

    let n = tns.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        tns[a]
            .total_cmp(&tns[b])
            .then_with(|| scores.technologies[a].cmp(&scores.technologies[b]))
    });
    // Sorting by exact value can interleave names within a near-tie; re-sort
    // each tie group by name so the lexicographic rule holds.
    let mut tied = vec![false; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (tns[order[end]] - tns[order[end - 1]]).abs() <= TIE_TOL {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&a, &b| scores.technologies[a].cmp(&scores.technologies[b]));
            for &i in &order[start..end] {
                tied[i] = true;
            }
        }
        start = end;
    }
    let mut rank = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }

    Ok(TnsResult {
        technologies: scores.technologies.clone(),
        tns,
        rank,
        tied,
        weights_used: weights.to_vec(),
    })
}
