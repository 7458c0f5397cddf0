//! Pure building blocks of the fairprobe pipeline.
//!
//! Everything in this crate is free of IO: registry bookkeeping, OAI-PMH
//! format selection, Datacite record model and image-of-interest test, the
//! three metadata predicates, the sans-IO retrievability probe, the score
//! arithmetic and the CSV/text rendering of report tables. The `fairprobe`
//! crate wires these to HTTP, XML and the on-disk catalogue.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assessor;
pub mod datacite;
pub mod media;
pub mod oaipmh;
pub mod probe;
pub mod registry;
pub mod report;
pub mod schedule;
pub mod scoring;

#[cfg(test)]
mod testgen;

pub use assessor::{AssessmentResult, GeoPolicy};
pub use datacite::{DataciteRecord, DateEntry, GeoLocation, RightsEntry};
pub use probe::{ProbeOutcome, ProbePolicy, ProbeTrace};
pub use registry::{ApiEndpoint, ApiKind, DataciteSupport, RepositoryDescriptor};
pub use scoring::{Criterion, CorpusStats, CriterionStats, Predicates, RepositoryScore};
