//! Drives the retrievability probe over real HTTP.

use std::time::Instant;

use fairprobe_core::probe::{Next, ProbeReply, ProbeSession, TransportFailure};

use crate::http::{host_key, BodyMode, HostGate, Http, HttpError};

pub use fairprobe_core::probe::{doi_url, FailureReason, ProbeOutcome, ProbePolicy, ProbeTrace};

pub struct Prober {
    http: Http,
    gate: HostGate,
    policy: ProbePolicy,
    resolver: String,
    resolver_host: Option<String>,
}

impl Prober {
    /// Requests to the resolver's own host skip the per-host gate: every
    /// probe starts there, so gating it would serialize the whole pool.
    pub fn new(policy: ProbePolicy, resolver: &str) -> Prober {
        Prober {
            http: Http::new(policy.request_timeout),
            gate: HostGate::new(policy.per_host_delay),
            resolver_host: host_key(resolver),
            resolver: resolver.to_string(),
            policy,
        }
    }

    pub fn probe(&self, doi: &str, formats: &[String]) -> ProbeTrace {
        let started = Instant::now();
        let url = doi_url(&self.resolver, doi).unwrap_or_else(|| doi.to_string());
        let (mut session, mut next) = ProbeSession::start(&url, formats, &self.policy);
        let body = match self.policy.max_body_bytes {
            0 => BodyMode::Skip,
            n => BodyMode::Discard(n),
        };
        while let Next::Fetch(req) = next {
            let key = host_key(&req.url);
            let _permit = match &key {
                Some(k) if Some(k) != self.resolver_host.as_ref() => Some(self.gate.acquire(k)),
                _ => None,
            };
            next = match self.http.get(&req.url, Some(&req.accept), body) {
                Ok(r) => session.on_reply(ProbeReply {
                    status: r.status,
                    content_type: r.content_type,
                    location: r.location,
                    link: r.link,
                }),
                Err(HttpError::Timeout) => session.on_failure(TransportFailure::Timeout),
                Err(HttpError::Transport(e)) => {
                    log::debug!("{}: {e}", req.url);
                    session.on_failure(TransportFailure::Other)
                }
            };
        }
        session.into_trace(started.elapsed().as_millis() as u64)
    }
}
