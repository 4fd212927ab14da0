use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AhpError, PriorityVector};
use crate::domain::QuantVector;

/// Value supplied for a technology missing from the performance table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// A raw measurement in the criterion's units, normalized like any other value.
    Raw(f64),
    /// A final share of the column; the remaining shares are scaled to `1 - share`.
    Share(f64),
}

/// Resolution of missing quantitative cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationPolicy {
    /// Missing technologies get a zero share and a flag.
    #[default]
    ExcludeRenormalize,
    /// Missing technologies take the largest observed mid-range.
    WorstObserved,
    /// Caller-supplied values keyed by technology.
    Inject(BTreeMap<String, Injection>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFlag {
    Observed,
    Excluded,
    ImputedWorst,
    InjectedRaw,
    InjectedShare,
    /// Derived from a pairwise matrix.
    Priority,
    /// Priority supplied directly by the caller.
    Given,
}

/// Normalized scores of every technology on one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumn {
    pub criterion_id: u8,
    pub technologies: Vec<String>,
    pub scores: Vec<f64>,
    pub flags: Vec<CellFlag>,
}

impl ScoreColumn {
    pub fn from_priority(criterion_id: u8, priorities: &PriorityVector, flag: CellFlag) -> Self {
        ScoreColumn {
            criterion_id,
            technologies: priorities.labels().to_vec(),
            scores: priorities.weights().to_vec(),
            flags: vec![flag; priorities.labels().len()],
        }
    }

    pub fn get(&self, technology: &str) -> Option<f64> {
        let i = self.technologies.iter().position(|t| t == technology)?;
        Some(self.scores[i])
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Shares `v_i / Σ v_j` of a cost vector, with missing cells resolved by `policy`.
pub fn normalize_direct(
    vector: &QuantVector,
    policy: &ImputationPolicy,
) -> Result<ScoreColumn, AhpError> {
    let criterion = vector.criterion_id;
    let mut observed = Vec::new();
    for (t, v) in vector.technologies.iter().zip(&vector.values) {
        if let Some(v) = v {
            if !v.is_finite() || *v < 0.0 {
                return Err(AhpError::InvalidValue {
                    criterion,
                    technology: t.clone(),
                });
            }
            observed.push(*v);
        }
    }
    if observed.len() < 2 {
        return Err(AhpError::TooFewValues(criterion));
    }
    let worst = observed.iter().copied().fold(f64::MIN, f64::max);

    let mut raw: Vec<Option<f64>> = Vec::with_capacity(vector.values.len());
    let mut fixed: Vec<Option<f64>> = vec![None; vector.values.len()];
    let mut flags = Vec::with_capacity(vector.values.len());
    for (i, (t, v)) in vector.technologies.iter().zip(&vector.values).enumerate() {
        if let Some(v) = v {
            raw.push(Some(*v));
            flags.push(CellFlag::Observed);
            continue;
        }
        match policy {
            ImputationPolicy::ExcludeRenormalize => {
                raw.push(None);
                flags.push(CellFlag::Excluded);
            }
            ImputationPolicy::WorstObserved => {
                raw.push(Some(worst));
                flags.push(CellFlag::ImputedWorst);
            }
            ImputationPolicy::Inject(values) => match values.get(t) {
                Some(Injection::Raw(x)) => {
                    if !x.is_finite() || *x < 0.0 {
                        return Err(AhpError::InvalidValue {
                            criterion,
                            technology: t.clone(),
                        });
                    }
                    raw.push(Some(*x));
                    flags.push(CellFlag::InjectedRaw);
                }
                Some(Injection::Share(s)) => {
                    if !(s.is_finite() && (0.0..1.0).contains(s)) {
                        return Err(AhpError::InvalidShare {
                            criterion,
                            technology: t.clone(),
                            share: *s,
                        });
                    }
                    raw.push(None);
                    fixed[i] = Some(*s);
                    flags.push(CellFlag::InjectedShare);
                }
                None => {
                    return Err(AhpError::MissingInjection {
                        criterion,
                        technology: t.clone(),
                    })
                }
            },
        }
    }

    let total: f64 = raw.iter().flatten().sum();
    if total <= 0.0 {
        return Err(AhpError::AllZero(criterion));
    }
    let fixed_total: f64 = fixed.iter().flatten().sum();
    if fixed_total >= 1.0 {
        return Err(AhpError::SharesExhausted(criterion));
    }
    let remaining = 1.0 - fixed_total;
    let scores = raw
        .iter()
        .zip(&fixed)
        .map(|(r, f)| match (r, f) {
            (Some(v), _) => v / total * remaining,
            (None, Some(s)) => *s,
            (None, None) => 0.0,
        })
        .collect();

    Ok(ScoreColumn {
        criterion_id: criterion,
        technologies: vector.technologies.clone(),
        scores,
        flags,
    })
}
