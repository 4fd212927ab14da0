//! Dataset vocabulary and performance-table ingestion.
//!
//! A [`PerformanceTable`] holds the min/max range reported for each
//! (technology, parameter) pair. Quantitative criteria are reduced to one
//! point estimate per technology with the mid-range rule.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of technologies a table may hold.
pub const MAX_TECHNOLOGIES: usize = 64;

/// Short codes and display names of the seven technologies in the bundled fixture.
pub const TECHNOLOGY_REGISTRY: [(&str, &str); 7] = [
    ("CW", "Constructed wetlands"),
    ("Septic", "Septic tanks"),
    ("MSL", "Multi-soil-layering"),
    ("Sand", "Sand filter"),
    ("RBC", "Rotating biological contactors"),
    ("MBBR", "Moving bed biofilm reactors"),
    ("DHS", "Downflow hanging sponge filter"),
];

/// Bundled Min-Max rows for the seven reference technologies.
pub const CASE_STUDY_CSV: &str = include_str!("../../../fixtures/paper_tables.csv");

/// Display name for a registered short code.
pub fn technology_display_name(code: &str) -> Option<&'static str> {
    TECHNOLOGY_REGISTRY
        .iter()
        .find(|(c, _)| *c == code)
        .map(|(_, name)| *name)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("row {row}: expected 4 columns, found {found}")]
    ColumnCount { row: usize, found: usize },
    #[error("row {row}: invalid header, expected `technology,parameter,min,max`")]
    Header { row: usize },
    #[error("row {row}: unknown parameter `{value}`")]
    UnknownParameter { row: usize, value: String },
    #[error("row {row}: `{value}` is not a valid {field} value")]
    NotNumeric {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: negative or non-finite {field} value {value}")]
    OutOfDomain {
        row: usize,
        field: &'static str,
        value: f64,
    },
    #[error("row {row}: min {min} exceeds max {max}")]
    MinAboveMax { row: usize, min: f64, max: f64 },
    #[error("row {row}: min and max must both be present or both absent")]
    HalfAbsent { row: usize },
    #[error("row {row}: duplicate record for ({technology}, {parameter})")]
    Duplicate {
        row: usize,
        technology: String,
        parameter: ParameterCode,
    },
    #[error("row {row}: empty technology name")]
    EmptyTechnology { row: usize },
    #[error("table lists {0} technologies, expected between 2 and {MAX_TECHNOLOGIES}")]
    TechnologyCount(usize),
    #[error("technology `{technology}` has no record for {parameter}")]
    MissingRecord {
        technology: String,
        parameter: ParameterCode,
    },
    #[error("no value for ({technology}, {parameter})")]
    Absent {
        technology: String,
        parameter: ParameterCode,
    },
    #[error("criterion {0} is qualitative and has no measured parameter")]
    QualitativeCriterion(u8),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Measured effluent or operating parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParameterCode {
    #[serde(rename = "COD_t")]
    CodT,
    #[serde(rename = "BOD5")]
    Bod5,
    #[serde(rename = "TSS")]
    Tss,
    #[serde(rename = "NH4N")]
    Nh4n,
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "HRT")]
    Hrt,
    #[serde(rename = "TEMP")]
    Temp,
    #[serde(rename = "PH")]
    Ph,
    #[serde(rename = "Q")]
    Q,
    #[serde(rename = "HLR")]
    Hlr,
}

impl ParameterCode {
    pub const ALL: [ParameterCode; 10] = [
        ParameterCode::CodT,
        ParameterCode::Bod5,
        ParameterCode::Tss,
        ParameterCode::Nh4n,
        ParameterCode::Tp,
        ParameterCode::Hrt,
        ParameterCode::Temp,
        ParameterCode::Ph,
        ParameterCode::Q,
        ParameterCode::Hlr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParameterCode::CodT => "COD_t",
            ParameterCode::Bod5 => "BOD5",
            ParameterCode::Tss => "TSS",
            ParameterCode::Nh4n => "NH4N",
            ParameterCode::Tp => "TP",
            ParameterCode::Hrt => "HRT",
            ParameterCode::Temp => "TEMP",
            ParameterCode::Ph => "PH",
            ParameterCode::Q => "Q",
            ParameterCode::Hlr => "HLR",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ParameterCode::CodT
            | ParameterCode::Bod5
            | ParameterCode::Tss
            | ParameterCode::Nh4n
            | ParameterCode::Tp => "mg/L",
            ParameterCode::Hrt => "day",
            ParameterCode::Temp => "°C",
            ParameterCode::Ph => "",
            ParameterCode::Q => "m³/day",
            ParameterCode::Hlr => "m³/m²/day",
        }
    }
}

impl fmt::Display for ParameterCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParameterCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParameterCode::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Qualitative,
    Quantitative(ParameterCode),
}

/// Lower raw values are better for a cost criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub kind: CriterionKind,
    pub direction: Direction,
}

const CRITERIA: [Criterion; 10] = [
    Criterion::qualitative(1, "capital investment"),
    Criterion::qualitative(2, "capital replacement"),
    Criterion::qualitative(3, "electricity"),
    Criterion::qualitative(4, "operation and maintenance"),
    Criterion::quantitative(5, "COD_t", ParameterCode::CodT),
    Criterion::quantitative(6, "BOD5", ParameterCode::Bod5),
    Criterion::quantitative(7, "TSS", ParameterCode::Tss),
    Criterion::quantitative(8, "NH4-N", ParameterCode::Nh4n),
    Criterion::quantitative(9, "TP", ParameterCode::Tp),
    Criterion::quantitative(10, "HRT", ParameterCode::Hrt),
];

impl Criterion {
    const fn qualitative(id: u8, name: &'static str) -> Self {
        Criterion {
            id,
            name,
            kind: CriterionKind::Qualitative,
            direction: Direction::Cost,
        }
    }

    const fn quantitative(id: u8, name: &'static str, parameter: ParameterCode) -> Self {
        Criterion {
            id,
            name,
            kind: CriterionKind::Quantitative(parameter),
            direction: Direction::Cost,
        }
    }

    /// The ten criteria in id order.
    pub fn all() -> &'static [Criterion; 10] {
        &CRITERIA
    }

    pub fn by_id(id: u8) -> Option<Criterion> {
        CRITERIA.iter().copied().find(|c| c.id == id)
    }

    /// Resolves a criterion from its id (`"10"`), its parameter code (`"HRT"`,
    /// `"NH4N"`) or its display name (`"NH4-N"`, `"electricity"`).
    pub fn lookup(key: &str) -> Result<Criterion, DataError> {
        let key = key.trim();
        if let Ok(id) = key.parse::<u8>() {
            return Criterion::by_id(id).ok_or_else(|| DataError::UnknownCriterion(key.into()));
        }
        CRITERIA
            .iter()
            .copied()
            .find(|c| {
                c.name.eq_ignore_ascii_case(key)
                    || matches!(c.kind, CriterionKind::Quantitative(p) if p.as_str().eq_ignore_ascii_case(key))
            })
            .ok_or_else(|| DataError::UnknownCriterion(key.into()))
    }

    pub fn parameter(&self) -> Option<ParameterCode> {
        match self.kind {
            CriterionKind::Quantitative(p) => Some(p),
            CriterionKind::Qualitative => None,
        }
    }

    pub fn is_qualitative(&self) -> bool {
        self.kind == CriterionKind::Qualitative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

/// One Min-Max cell. `range` is `None` where the source shows a dash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRecord {
    pub technology: String,
    pub parameter: ParameterCode,
    pub range: Option<MinMax>,
}

impl RangeRecord {
    pub fn present(&self) -> bool {
        self.range.is_some()
    }
}

/// Arithmetic mean of the range endpoints.
pub fn midrange(record: &RangeRecord) -> Result<f64, DataError> {
    match record.range {
        Some(MinMax { min, max }) => Ok((min + max) / 2.0),
        None => Err(DataError::Absent {
            technology: record.technology.clone(),
            parameter: record.parameter,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    technologies: Vec<String>,
    records: BTreeMap<String, BTreeMap<ParameterCode, RangeRecord>>,
}

impl PerformanceTable {
    /// The bundled reference table.
    pub fn case_study() -> PerformanceTable {
        parse_performance_table(CASE_STUDY_CSV).expect("bundled fixture is valid")
    }

    pub fn technologies(&self) -> &[String] {
        &self.technologies
    }

    pub fn record(&self, technology: &str, parameter: ParameterCode) -> Option<&RangeRecord> {
        self.records.get(technology)?.get(&parameter)
    }

    /// Records in technology order, then parameter order.
    pub fn records(&self) -> impl Iterator<Item = &RangeRecord> {
        self.technologies
            .iter()
            .flat_map(move |t| self.records[t].values())
    }

    /// Serializes back to the CSV schema accepted by [`parse_performance_table`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("technology,parameter,min,max\n");
        for r in self.records() {
            let (min, max) = match r.range {
                Some(MinMax { min, max }) => (min.to_string(), max.to_string()),
                None => ("-".to_string(), "-".to_string()),
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.technology, r.parameter, min, max
            ));
        }
        out
    }
}

fn parse_cell(row: usize, field: &'static str, raw: &str) -> Result<Option<f64>, DataError> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "-" {
        return Ok(None);
    }
    let value: f64 = raw.parse().map_err(|_| DataError::NotNumeric {
        row,
        field,
        value: raw.to_string(),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(DataError::OutOfDomain { row, field, value });
    }
    Ok(Some(value))
}

/// Parses the `technology,parameter,min,max` CSV format. Lines starting with
/// `#` are comments. Row numbers in errors are 1-based source lines.
pub fn parse_performance_table(source: &str) -> Result<PerformanceTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());

    let mut technologies: Vec<String> = Vec::new();
    let mut records: BTreeMap<String, BTreeMap<ParameterCode, RangeRecord>> = BTreeMap::new();
    let mut seen_header = false;

    for result in reader.records() {
        let rec = result.map_err(|e| DataError::Csv(e.to_string()))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 4 {
            return Err(DataError::ColumnCount {
                row,
                found: rec.len(),
            });
        }
        if !seen_header {
            let header: Vec<&str> = rec.iter().collect();
            if header != ["technology", "parameter", "min", "max"] {
                return Err(DataError::Header { row });
            }
            seen_header = true;
            continue;
        }

        let technology = rec[0].to_string();
        if technology.is_empty() {
            return Err(DataError::EmptyTechnology { row });
        }
        let parameter: ParameterCode = rec[1]
            .parse()
            .map_err(|value| DataError::UnknownParameter { row, value })?;
        let min = parse_cell(row, "min", &rec[2])?;
        let max = parse_cell(row, "max", &rec[3])?;
        let range = match (min, max) {
            (Some(min), Some(max)) if min > max => {
                return Err(DataError::MinAboveMax { row, min, max })
            }
            (Some(min), Some(max)) => Some(MinMax { min, max }),
            (None, None) => None,
            _ => return Err(DataError::HalfAbsent { row }),
        };

        let per_tech = records.entry(technology.clone()).or_insert_with(|| {
            technologies.push(technology.clone());
            BTreeMap::new()
        });
        if per_tech.contains_key(&parameter) {
            return Err(DataError::Duplicate {
                row,
                technology,
                parameter,
            });
        }
        per_tech.insert(
            parameter,
            RangeRecord {
                technology,
                parameter,
                range,
            },
        );
    }

    if !seen_header {
        return Err(DataError::Header { row: 1 });
    }
    if !(2..=MAX_TECHNOLOGIES).contains(&technologies.len()) {
        return Err(DataError::TechnologyCount(technologies.len()));
    }
    for technology in &technologies {
        for criterion in Criterion::all() {
            if let Some(parameter) = criterion.parameter() {
                if !records[technology].contains_key(&parameter) {
                    return Err(DataError::MissingRecord {
                        technology: technology.clone(),
                        parameter,
                    });
                }
            }
        }
    }

    Ok(PerformanceTable {
        technologies,
        records,
    })
}

/// Per-technology mid-range values for one quantitative criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantVector {
    pub criterion_id: u8,
    pub technologies: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl QuantVector {
    pub fn new(criterion_id: u8, technologies: Vec<String>, values: Vec<Option<f64>>) -> Self {
        assert_eq!(technologies.len(), values.len());
        QuantVector {
            criterion_id,
            technologies,
            values,
        }
    }

    pub fn missing(&self) -> Vec<&str> {
        self.technologies
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_none())
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn get(&self, technology: &str) -> Option<f64> {
        let idx = self.technologies.iter().position(|t| t == technology)?;
        self.values[idx]
    }
}

pub fn build_criterion_vector(
    table: &PerformanceTable,
    criterion: &Criterion,
) -> Result<QuantVector, DataError> {
    let parameter = criterion
        .parameter()
        .ok_or(DataError::QualitativeCriterion(criterion.id))?;
    let values = table
        .technologies()
        .iter()
        .map(|t| {
            let record = table
                .record(t, parameter)
                .ok_or_else(|| DataError::MissingRecord {
                    technology: t.clone(),
                    parameter,
                })?;
            Ok(midrange(record).ok())
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(QuantVector::new(
        criterion.id,
        table.technologies().to_vec(),
        values,
    ))
}
