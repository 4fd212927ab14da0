//! Self-describing result document shared by the CLI and the service.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ahp::CellFlag;
use crate::anova::{AnovaDecision, AnovaTable};
use crate::domain::Criterion;
use crate::pipeline::{CriterionConsistency, PipelineOptions, StudyResults};

pub const REPORT_FORMAT: &str = "dewat-mca-report/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An input file as echoed into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEcho {
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub sha256: String,
}

impl SourceEcho {
    pub fn new(role: &str, path: Option<&str>, contents: &[u8]) -> Self {
        SourceEcho {
            role: role.to_string(),
            path: path.map(String::from),
            sha256: sha256_hex(contents),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputsEcho {
    pub sources: Vec<SourceEcho>,
    pub options: PipelineOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub technology: String,
    pub score: f64,
    pub flag: CellFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub qualitative: bool,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub technology: String,
    pub tns: f64,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format: String,
    pub inputs: InputsEcho,
    pub criteria: Vec<CriterionReport>,
    pub weights: Vec<f64>,
    pub ranking: Vec<RankingEntry>,
    pub anova: AnovaTable,
    pub decision: AnovaDecision,
    pub consistency: Vec<CriterionConsistency>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn build(inputs: InputsEcho, results: &StudyResults) -> ReportDocument {
        let scores = &results.scores;
        let criteria = scores
            .criteria
            .iter()
            .enumerate()
            .map(|(j, &id)| {
                let c = Criterion::by_id(id).expect("assembled criteria are known");
                CriterionReport {
                    id,
                    name: c.name.to_string(),
                    qualitative: c.is_qualitative(),
                    cells: scores
                        .technologies
                        .iter()
                        .enumerate()
                        .map(|(i, t)| CellReport {
                            technology: t.clone(),
                            score: scores.scores[i][j],
                            flag: scores.flags[i][j],
                        })
                        .collect(),
                }
            })
            .collect();
        let tns = &results.tns;
        let mut ranking: Vec<RankingEntry> = tns
            .technologies
            .iter()
            .enumerate()
            .map(|(i, t)| RankingEntry {
                rank: tns.rank[i],
                technology: t.clone(),
                tns: tns.tns[i],
                tied: tns.tied[i],
            })
            .collect();
        ranking.sort_by_key(|e| e.rank);

        ReportDocument {
            format: REPORT_FORMAT.to_string(),
            inputs,
            criteria,
            weights: tns.weights_used.clone(),
            ranking,
            anova: results.anova.clone(),
            decision: results.decision.clone(),
            consistency: results.consistency.clone(),
            warnings: results.warnings.clone(),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
