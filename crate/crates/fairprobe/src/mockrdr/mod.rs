//! Scripted mock of a repository landscape: OAI-PMH endpoints, a registry
//! stub and a DOI resolver, served over loopback HTTP, plus the oracle
//! that computes the scores a correct pipeline must report.

pub mod generate;
pub mod oracle;
pub mod payload;
pub mod script;
pub mod server;

pub use generate::{random_scenario, GenOptions};
pub use oracle::{expected_scores, EmptyCorpus, ExpectedRepository, ExpectedScores, OracleOptions};
pub use script::{Fault, MockRecord, MockRepository, ResolverRoute, ScenarioScript, ScriptedResponse, Truth};
pub use server::{LoggedRequest, MockServer, ServeError};
