//! End-to-end technology selection run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{
    aggregate_tns, assemble_score_matrix, consistency, equal_weights, matrix_from_ratings,
    normalize_direct, priority_from_matrix, AhpError, CellFlag, ConsistencyReport,
    ImputationPolicy, Injection, Judgment, PriorityVector, ScoreColumn, ScoreMatrix, TnsResult,
    STRICT_COLUMN_TOLERANCE,
};

use crate::anova::{anova_two_factor_no_rep, decide, AnovaDecision, AnovaError, AnovaTable};
use crate::delphi::ConsensusExport;
use crate::domain::{build_criterion_vector, Criterion, DataError, PerformanceTable};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ahp(AhpError),
    #[error(transparent)]
    Anova(#[from] AnovaError),
    #[error("missing data: {0}")]
    MissingData(AhpError),
    #[error("criterion {0} has neither consensus judgments nor an injected priority column")]
    MissingQualitative(u8),
    #[error("criterion {criterion}: injected priority column {problem}")]
    BadPriorityColumn { criterion: u8, problem: String },
    #[error("criterion {criterion}: judgment for criterion {found}")]
    JudgmentCriterion { criterion: u8, found: u8 },
    #[error("consistency gate failed for {}", describe_gate(.0))]
    ConsistencyGate(Vec<GateFailure>),
    #[error("alpha {0} must lie in (0, 1)")]
    Alpha(f64),
}

fn describe_gate(failures: &[GateFailure]) -> String {
    failures
        .iter()
        .map(|f| match f.cr {
            Some(cr) => format!("criterion {} (CR {cr:.4})", f.criterion_id),
            None => format!("criterion {}", f.criterion_id),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<AhpError> for PipelineError {
    fn from(e: AhpError) -> Self {
        match e {
            AhpError::MissingInjection { .. }
            | AhpError::MissingPair(..)
            | AhpError::TooFewValues(_) => PipelineError::MissingData(e),
            other => PipelineError::Ahp(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFailure {
    pub criterion_id: u8,
    pub cr: Option<f64>,
}

/// Source of a qualitative criterion's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualitativeInput {
    /// Consensus judgments, one per technology pair.
    Judgments(Vec<Judgment>),
    /// A priority column given directly; rescaled to sum to 1.
    Priorities(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    ExcludeRenormalize,
    WorstObserved,
    Inject,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" | "exclude_renormalize" => Ok(PolicyKind::ExcludeRenormalize),
            "worst" | "worst_observed" => Ok(PolicyKind::WorstObserved),
            "inject" => Ok(PolicyKind::Inject),
            other => Err(format!("unknown imputation policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// One weight per criterion in id order; `None` means equal weights.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub policy: PolicyKind,
    /// Values for missing quantitative cells, by criterion id then technology.
    #[serde(default)]
    pub injections: BTreeMap<u8, BTreeMap<String, Injection>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub allow_inconsistent: bool,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            weights: None,
            policy: PolicyKind::default(),
            injections: BTreeMap::new(),
            alpha: DEFAULT_ALPHA,
            allow_inconsistent: false,
        }
    }
}

impl PipelineOptions {
    fn policy_for(&self, criterion_id: u8) -> ImputationPolicy {
        match self.policy {
            PolicyKind::ExcludeRenormalize => ImputationPolicy::ExcludeRenormalize,
            PolicyKind::WorstObserved => ImputationPolicy::WorstObserved,
            PolicyKind::Inject => ImputationPolicy::Inject(
                self.injections
                    .get(&criterion_id)
                    .cloned()
                    .unwrap_or_default(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionConsistency {
    pub criterion_id: u8,
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub scores: ScoreMatrix,
    pub tns: TnsResult,
    pub anova: AnovaTable,
    pub decision: AnovaDecision,
    pub consistency: Vec<CriterionConsistency>,
    pub warnings: Vec<String>,
}

/// Injected priorities and missing-cell values, as stored in an injection file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InjectionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default)]
    pub qualitative: BTreeMap<u8, BTreeMap<String, f64>>,
    #[serde(default)]
    pub missing_cells: BTreeMap<u8, BTreeMap<String, Injection>>,
}

/// A judgment file: either a bare list or one or more session exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JudgmentDocument {
    List(Vec<Judgment>),
    Export(ConsensusExport),
    Exports(Vec<ConsensusExport>),
}

impl JudgmentDocument {
    pub fn into_judgments(self) -> Vec<Judgment> {
        match self {
            JudgmentDocument::List(j) => j,
            JudgmentDocument::Export(e) => e.judgments,
            JudgmentDocument::Exports(es) => es.into_iter().flat_map(|e| e.judgments).collect(),
        }
    }
}

/// Groups judgments by criterion id.
pub fn judgments_by_criterion(judgments: Vec<Judgment>) -> BTreeMap<u8, QualitativeInput> {
    let mut grouped: BTreeMap<u8, Vec<Judgment>> = BTreeMap::new();
    for j in judgments {
        grouped.entry(j.criterion_id).or_default().push(j);
    }
    grouped
        .into_iter()
        .map(|(c, js)| (c, QualitativeInput::Judgments(js)))
        .collect()
}

fn priority_column(
    table: &PerformanceTable,
    criterion_id: u8,
    given: &BTreeMap<String, f64>,
) -> Result<ScoreColumn, PipelineError> {
    let bad = |problem: String| PipelineError::BadPriorityColumn {
        criterion: criterion_id,
        problem,
    };
    if let Some(extra) = given.keys().find(|k| !table.technologies().contains(k)) {
        return Err(bad(format!("names unknown technology `{extra}`")));
    }
    let raw = table
        .technologies()
        .iter()
        .map(|t| {
            given
                .get(t)
                .copied()
                .ok_or_else(|| bad(format!("has no value for `{t}`")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let pv = PriorityVector::from_unnormalized(table.technologies().to_vec(), raw)
        .map_err(|e| bad(e.to_string()))?;
    Ok(ScoreColumn::from_priority(
        criterion_id,
        &pv,
        CellFlag::Given,
    ))
}

pub fn run_pipeline(
    table: &PerformanceTable,
    qualitative: &BTreeMap<u8, QualitativeInput>,
    options: &PipelineOptions,
) -> Result<StudyResults, PipelineError> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(PipelineError::Alpha(options.alpha));
    }
    let mut columns = Vec::new();
    let mut reports = Vec::new();
    let mut gate = Vec::new();
    let mut warnings = Vec::new();

    for criterion in Criterion::all() {
        if !criterion.is_qualitative() {
            let vector = build_criterion_vector(table, criterion)?;
            let column = normalize_direct(&vector, &options.policy_for(criterion.id))?;
            for (t, flag) in column.technologies.iter().zip(&column.flags) {
                if *flag == CellFlag::Excluded {
                    warnings.push(format!(
                        "criterion {}: `{t}` has no data and was excluded",
                        criterion.id
                    ));
                }
            }
            columns.push(column);
            continue;
        }
        match qualitative.get(&criterion.id) {
            None => return Err(PipelineError::MissingQualitative(criterion.id)),
            Some(QualitativeInput::Priorities(given)) => {
                columns.push(priority_column(table, criterion.id, given)?);
            }
            Some(QualitativeInput::Judgments(judgments)) => {
                if let Some(j) = judgments.iter().find(|j| j.criterion_id != criterion.id) {
                    return Err(PipelineError::JudgmentCriterion {
                        criterion: criterion.id,
                        found: j.criterion_id,
                    });
                }
                if judgments.iter().any(|j| !j.consensus) {
                    warnings.push(format!(
                        "criterion {}: judgments come from a session that ended without consensus",
                        criterion.id
                    ));
                }
                let matrix = matrix_from_ratings(table.technologies(), judgments)?;
                let report = consistency(&matrix)?;
                if !report.acceptable {
                    gate.push(GateFailure {
                        criterion_id: criterion.id,
                        cr: report.cr,
                    });
                }
                let priorities = priority_from_matrix(&matrix);
                columns.push(ScoreColumn::from_priority(
                    criterion.id,
                    &priorities,
                    CellFlag::Priority,
                ));
                reports.push(CriterionConsistency {
                    criterion_id: criterion.id,
                    report,
                });
            }
        }
    }

    if !gate.is_empty() {
        if options.allow_inconsistent {
            warnings.push(format!(
                "consistency gate overridden for {}",
                describe_gate(&gate)
            ));
        } else {
            return Err(PipelineError::ConsistencyGate(gate));
        }
    }

    let scores = assemble_score_matrix(columns, STRICT_COLUMN_TOLERANCE)?;
    let weights = options
        .weights
        .clone()
        .unwrap_or_else(|| equal_weights(scores.criteria.len()));
    let tns = aggregate_tns(&scores, &weights)?;
    let anova = anova_two_factor_no_rep(&scores.scores)?;
    let decision = decide(&anova, options.alpha)?;

    Ok(StudyResults {
        scores,
        tns,
        anova,
        decision,
        consistency: reports,
        warnings,
    })
}
