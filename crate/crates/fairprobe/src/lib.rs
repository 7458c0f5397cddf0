pub mod config;
pub mod datacite;
pub mod http;
pub mod mockrdr;
pub mod oaipmh;
pub mod pipeline;
pub mod pool;
pub mod probe;
pub mod registry;
pub mod report;
pub mod store;
pub mod xml;
