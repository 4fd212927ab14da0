//! Multi-round Delphi elicitation of pairwise cost judgments.
//!
//! Experts rate each [`RatingItem`] on the 1..5 scale. Each closed round
//! produces an anonymous [`RoundSummary`] (median and IQR per item) that is
//! fed back before the next round. Sessions end `Converged` once every item
//! sits within the IQR bound and nobody revised, or `Exhausted` at the
//! round limit.
//!
//! Ratings are aggregated on a signed position scale so panel members may
//! disagree about which pair member is costlier: `worse = A` with value `v`
//! maps to `v - 1`, `worse = B` to `-(v - 1)`. When every expert shares the
//! item's orientation the summary equals the plain 1..5 statistics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::Judgment;
use crate::domain::Criterion;

pub const MIN_EXPERTS: usize = 2;
pub const MAX_EXPERTS: usize = 32;
pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 5;

/// Descriptions of the five scale points, with `{criterion}`, `{i}` and
/// `{j}` as substitution slots.
pub const SCALE_DESCRIPTIONS: [&str; 5] = [
    "{criterion} of {i} is equal to that of {j}, but they are almost the same",
    "{criterion} of {i} is more than that of {j}, but they are almost the same",
    "{criterion} of {i} is slightly more than that of {j}",
    "{criterion} of {i} is moderately more than that of {j}",
    "{criterion} of {i} is exceedingly more than that of {j}",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelphiError {
    #[error("a panel needs between {MIN_EXPERTS} and {MAX_EXPERTS} experts, got {0}")]
    PanelSize(usize),
    #[error("duplicate expert id `{0}`")]
    DuplicateExpert(String),
    #[error("session has no items")]
    NoItems,
    #[error("item {0} is not on a qualitative criterion")]
    NotQualitative(usize),
    #[error("item {0} pairs a technology with itself")]
    SelfPair(usize),
    #[error("item {0} duplicates an earlier item")]
    DuplicateItem(usize),
    #[error("invalid session config: {0}")]
    Config(&'static str),
    #[error("unknown expert `{0}`")]
    UnknownExpert(String),
    #[error("item is not part of this session")]
    UnknownItem,
    #[error("rating {0} is outside the 1..5 scale")]
    OutOfScale(u8),
    #[error("operation not allowed while session is {0:?}")]
    WrongState(SessionState),
    #[error("round {round} is missing {missing} ratings")]
    IncompleteRound { round: u32, missing: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertId(pub String);

impl From<&str> for ExpertId {
    fn from(s: &str) -> Self {
        ExpertId(s.to_string())
    }
}

/// Pair member judged costlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    A,
    B,
}

/// One pair on one qualitative criterion; `tech_a` is rated against `tech_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingItem {
    pub criterion_id: u8,
    pub tech_a: String,
    pub tech_b: String,
}

impl RatingItem {
    pub fn new(criterion_id: u8, tech_a: impl Into<String>, tech_b: impl Into<String>) -> Self {
        RatingItem {
            criterion_id,
            tech_a: tech_a.into(),
            tech_b: tech_b.into(),
        }
    }

    /// Every unordered pair of `technologies` on every criterion, in order.
    pub fn all_pairs(technologies: &[String], criteria: &[u8]) -> Vec<RatingItem> {
        let mut items = Vec::new();
        for &c in criteria {
            for (i, a) in technologies.iter().enumerate() {
                for b in &technologies[i + 1..] {
                    items.push(RatingItem::new(c, a.clone(), b.clone()));
                }
            }
        }
        items
    }

    fn same_pair(&self, other: &RatingItem) -> bool {
        self.criterion_id == other.criterion_id
            && ((self.tech_a == other.tech_a && self.tech_b == other.tech_b)
                || (self.tech_a == other.tech_b && self.tech_b == other.tech_a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelphiConfig {
    pub consensus_iqr_max: f64,
    pub max_rounds: u32,
    pub aggregate: Aggregate,
}

impl Default for DelphiConfig {
    fn default() -> Self {
        DelphiConfig {
            consensus_iqr_max: 1.0,
            max_rounds: 5,
            aggregate: Aggregate::Median,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Collecting,
    Feedback,
    Converged,
    Exhausted,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Converged | SessionState::Exhausted)
    }
}

/// A rating as submitted by an expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub expert: ExpertId,
    pub item: RatingItem,
    pub value: u8,
    /// Defaults to the item's own orientation.
    #[serde(default)]
    pub worse: Side,
    #[serde(default)]
    pub justification: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Cell {
    value: u8,
    worse: Side,
    /// Defaulted from the previous round rather than submitted.
    carried: bool,
    justification: Option<String>,
}

impl Cell {
    fn position(&self) -> f64 {
        let magnitude = f64::from(self.value - 1);
        match self.worse {
            Side::A => magnitude,
            Side::B => -magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acknowledgement {
    pub round: u32,
    pub item_index: usize,
    pub replaced_previous: bool,
}

/// Anonymous aggregate for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub item: RatingItem,
    /// Median on the 1..5 scale, oriented by `worse`.
    pub median: f64,
    pub worse: Side,
    /// Median of the signed positions (`worse = B` is negative).
    pub median_position: f64,
    /// Informational only.
    pub mean_position: f64,
    pub iqr: f64,
    pub count: usize,
    pub changed_from_previous: usize,
    pub unanimous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub items: Vec<ItemSummary>,
}

impl RoundSummary {
    pub fn max_iqr(&self) -> f64 {
        self.items.iter().map(|i| i.iqr).fold(0.0, f64::max)
    }

    pub fn total_changed(&self) -> usize {
        self.items.iter().map(|i| i.changed_from_previous).sum()
    }
}

/// Result of [`DelphiSession::export_consensus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusExport {
    pub session_id: String,
    pub converged: bool,
    pub rounds: u32,
    pub judgments: Vec<Judgment>,
}

/// Quantile by linear interpolation between order statistics (inclusive method).
pub fn quantile_inclusive(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median_and_iqr(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_inclusive(&sorted, 0.5);
    let iqr = quantile_inclusive(&sorted, 0.75) - quantile_inclusive(&sorted, 0.25);
    (median, iqr)
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelphiSession {
    id: String,
    experts: Vec<ExpertId>,
    items: Vec<RatingItem>,
    state: SessionState,
    round: u32,
    history: Vec<RoundSummary>,
    config: DelphiConfig,
    /// `current[item][expert]` for the open round.
    current: Vec<Vec<Option<Cell>>>,
    /// Ratings of every closed round, same layout.
    closed: Vec<Vec<Vec<Cell>>>,
}

impl DelphiSession {
    pub fn create(
        id: impl Into<String>,
        experts: Vec<ExpertId>,
        items: Vec<RatingItem>,
        config: DelphiConfig,
    ) -> Result<DelphiSession, DelphiError> {
        if !(MIN_EXPERTS..=MAX_EXPERTS).contains(&experts.len()) {
            return Err(DelphiError::PanelSize(experts.len()));
        }
        let mut seen = BTreeSet::new();
        for e in &experts {
            if !seen.insert(e) {
                return Err(DelphiError::DuplicateExpert(e.0.clone()));
            }
        }
        if items.is_empty() {
            return Err(DelphiError::NoItems);
        }
        for (i, item) in items.iter().enumerate() {
            match Criterion::by_id(item.criterion_id) {
                Some(c) if c.is_qualitative() => {}
                _ => return Err(DelphiError::NotQualitative(i)),
            }
            if item.tech_a == item.tech_b {
                return Err(DelphiError::SelfPair(i));
            }
            if items[..i].iter().any(|prev| prev.same_pair(item)) {
                return Err(DelphiError::DuplicateItem(i));
            }
        }
        if !(config.consensus_iqr_max.is_finite() && config.consensus_iqr_max > 0.0) {
            return Err(DelphiError::Config("consensus_iqr_max must be positive"));
        }
        if config.max_rounds == 0 {
            return Err(DelphiError::Config("max_rounds must be positive"));
        }
        let current = vec![vec![None; experts.len()]; items.len()];
        Ok(DelphiSession {
            id: id.into(),
            experts,
            items,
            state: SessionState::Collecting,
            round: 1,
            history: Vec::new(),
            config,
            current,
            closed: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn history(&self) -> &[RoundSummary] {
        &self.history
    }

    pub fn items(&self) -> &[RatingItem] {
        &self.items
    }

    pub fn experts(&self) -> &[ExpertId] {
        &self.experts
    }

    pub fn config(&self) -> &DelphiConfig {
        &self.config
    }

    /// Criteria covered by this session's items.
    pub fn criteria(&self) -> BTreeSet<u8> {
        self.items.iter().map(|i| i.criterion_id).collect()
    }

    /// Cells of the open round with neither a submission nor a carried default.
    pub fn pending(&self) -> usize {
        self.current
            .iter()
            .flatten()
            .filter(|c| c.is_none())
            .count()
    }

    fn expert_index(&self, expert: &ExpertId) -> Result<usize, DelphiError> {
        self.experts
            .iter()
            .position(|e| e == expert)
            .ok_or_else(|| DelphiError::UnknownExpert(expert.0.clone()))
    }

    fn item_index(&self, item: &RatingItem) -> Result<usize, DelphiError> {
        self.items
            .iter()
            .position(|i| i.same_pair(item))
            .ok_or(DelphiError::UnknownItem)
    }

    /// The expert's own ratings in the open round, by item index.
    pub fn own_ratings(&self, expert: &ExpertId) -> Result<Vec<Option<(u8, Side)>>, DelphiError> {
        let e = self.expert_index(expert)?;
        Ok(self
            .current
            .iter()
            .map(|row| row[e].as_ref().map(|c| (c.value, c.worse)))
            .collect())
    }

    pub fn submit_rating(&mut self, rating: Rating) -> Result<Acknowledgement, DelphiError> {
        if self.state != SessionState::Collecting {
            return Err(DelphiError::WrongState(self.state));
        }
        let e = self.expert_index(&rating.expert)?;
        let i = self.item_index(&rating.item)?;
        if !(SCALE_MIN..=SCALE_MAX).contains(&rating.value) {
            return Err(DelphiError::OutOfScale(rating.value));
        }
        // The submitted orientation is relative to the submitter's item
        // spelling; flip it if they named the pair the other way round.
        let flipped = self.items[i].tech_a != rating.item.tech_a;
        let worse = match (rating.worse, flipped) {
            (side, false) => side,
            (Side::A, true) => Side::B,
            (Side::B, true) => Side::A,
        };
        let replaced_previous = self.current[i][e]
            .as_ref()
            .map(|c| !c.carried)
            .unwrap_or(false);
        self.current[i][e] = Some(Cell {
            value: rating.value,
            worse,
            carried: false,
            justification: rating.justification,
        });
        Ok(Acknowledgement {
            round: self.round,
            item_index: i,
            replaced_previous,
        })
    }

    pub fn close_round(&mut self) -> Result<RoundSummary, DelphiError> {
        if self.state != SessionState::Collecting {
            return Err(DelphiError::WrongState(self.state));
        }
        let missing = self.pending();
        if missing > 0 {
            return Err(DelphiError::IncompleteRound {
                round: self.round,
                missing,
            });
        }
        let cells: Vec<Vec<Cell>> = self
            .current
            .iter()
            .map(|row| row.iter().map(|c| c.clone().expect("complete")).collect())
            .collect();
        let previous = self.closed.last();

        let items = self
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let positions: Vec<f64> = cells[i].iter().map(Cell::position).collect();
                let (median_position, iqr) = median_and_iqr(&positions);
                let mean_position = positions.iter().sum::<f64>() / positions.len() as f64;
                let changed_from_previous = previous
                    .map(|prev| {
                        prev[i]
                            .iter()
                            .zip(&cells[i])
                            .filter(|(p, c)| p.position() != c.position())
                            .count()
                    })
                    .unwrap_or(0);
                let unanimous = positions.iter().all(|p| *p == positions[0]);
                ItemSummary {
                    item: item.clone(),
                    median: 1.0 + median_position.abs(),
                    worse: if median_position < 0.0 {
                        Side::B
                    } else {
                        Side::A
                    },
                    median_position,
                    mean_position,
                    iqr,
                    count: positions.len(),
                    changed_from_previous,
                    unanimous,
                }
            })
            .collect();

        let summary = RoundSummary {
            round: self.round,
            items,
        };
        self.closed.push(cells);
        self.history.push(summary.clone());
        self.state = SessionState::Feedback;
        Ok(summary)
    }

    /// Moves out of feedback: converge, exhaust, or open the next round with
    /// every expert's previous rating carried forward as a default.
    ///
    /// Consensus requires every item's IQR within the bound and no revisions
    /// in the latest round. A first round has nothing to compare against, so
    /// it only converges when every item is unanimous.
    pub fn advance(&mut self) -> Result<SessionState, DelphiError> {
        if self.state != SessionState::Feedback {
            return Err(DelphiError::WrongState(self.state));
        }
        let summary = self
            .history
            .last()
            .expect("feedback implies a closed round");
        let within = summary
            .items
            .iter()
            .all(|i| i.iqr <= self.config.consensus_iqr_max);
        let settled = if self.round == 1 {
            summary.items.iter().all(|i| i.unanimous)
        } else {
            summary.total_changed() == 0
        };

        self.state = if within && settled {
            SessionState::Converged
        } else if self.round >= self.config.max_rounds {
            SessionState::Exhausted
        } else {
            let last = self.closed.last().expect("closed round");
            self.current = last
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| {
                            Some(Cell {
                                carried: true,
                                justification: None,
                                ..c.clone()
                            })
                        })
                        .collect()
                })
                .collect();
            self.round += 1;
            SessionState::Collecting
        };
        Ok(self.state)
    }

    /// Final-round medians rounded half-up onto the integer scale.
    pub fn export_consensus(&self) -> Result<ConsensusExport, DelphiError> {
        if !self.state.is_terminal() {
            return Err(DelphiError::WrongState(self.state));
        }
        let converged = self.state == SessionState::Converged;
        let summary = self
            .history
            .last()
            .expect("terminal implies a closed round");
        let judgments = summary
            .items
            .iter()
            .map(|s| {
                let magnitude = round_half_up(s.median_position.abs()).min(4.0) as u8;
                let worse = if s.median_position < 0.0 {
                    &s.item.tech_b
                } else {
                    &s.item.tech_a
                };
                Judgment {
                    criterion_id: s.item.criterion_id,
                    tech_a: s.item.tech_a.clone(),
                    tech_b: s.item.tech_b.clone(),
                    worse: worse.clone(),
                    value: magnitude + 1,
                    consensus: converged,
                }
            })
            .collect();
        Ok(ConsensusExport {
            session_id: self.id.clone(),
            converged,
            rounds: self.round,
            judgments,
        })
    }
}
