//! Multi-criteria selection of decentralized wastewater treatment technologies.
//!
//! The crate covers the whole scoring pipeline: mid-range extraction from
//! reported effluent ranges ([`domain`]), AHP normalization, priorities and
//! consistency checking ([`ahp`]), Delphi rounds for the qualitative
//! criteria ([`delphi`]), two-factor ANOVA without replication ([`anova`],
//! backed by [`special`]), and the [`pipeline`] that ties them together into
//! a [`report::ReportDocument`].

pub mod ahp;
pub mod anova;
pub mod delphi;
pub mod domain;
pub mod grid;
pub mod pipeline;
pub mod report;
pub mod special;

pub use ahp::AhpError;
pub use anova::AnovaError;
pub use delphi::DelphiError;
pub use domain::DataError;
pub use pipeline::PipelineError;
