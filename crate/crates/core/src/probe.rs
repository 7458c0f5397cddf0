//! Machine retrievability of a record's image through its DOI.
//!
//! [`ProbeSession`] is a sans-IO state machine: it says which URL to fetch
//! next and consumes the replies, leaving the transport to the caller.
//!
//! Client phase: `GET` the DOI URL with `Accept: image/*`, following every
//! 3xx up to `max_redirects`. A final `200` with an `image/*` content type
//! is a success.
//!
//! Link phase: if the client phase failed on a received reply that carries
//! a `Link` header, the first link-value whose `type` equals one of the
//! record's annotated formats is fetched (redirects again followed). A
//! final `200` serving exactly that media type is a success.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::media::{bare_media_type, is_image_media_type, parse_link_header};

pub const CLIENT_ACCEPT: &str = "image/*";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbePolicy {
    pub max_redirects: u32,
    pub request_timeout: Duration,
    /// Body bytes read before the connection is dropped; 0 reads headers only.
    pub max_body_bytes: u64,
    pub per_host_delay: Duration,
}

impl Default for ProbePolicy {
    fn default() -> Self {
        ProbePolicy {
            max_redirects: 10,
            request_timeout: Duration::from_secs(20),
            max_body_bytes: 0,
            per_host_delay: Duration::from_millis(1000),
        }
    }
}

impl ProbePolicy {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.max_redirects == 0 {
            return Err("max_redirects must be at least 1");
        }
        if self.request_timeout.is_zero() {
            return Err("request_timeout must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoImageContentType,
    RedirectLimit,
    Timeout,
    NoLinkMatch,
    Transport,
    Non200,
}

impl FailureReason {
    pub fn token(self) -> &'static str {
        match self {
            FailureReason::NoImageContentType => "no-image-content-type",
            FailureReason::RedirectLimit => "redirect-limit",
            FailureReason::Timeout => "timeout",
            FailureReason::NoLinkMatch => "no-link-match",
            FailureReason::Transport => "transport",
            FailureReason::Non200 => "non-200",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "result", content = "reason", rename_all = "snake_case")]
pub enum ProbeOutcome {
    ClientNegotiated,
    LinkNegotiated,
    Failed(FailureReason),
}

impl ProbeOutcome {
    pub fn is_success(self) -> bool {
        !matches!(self, ProbeOutcome::Failed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbePhase {
    Client,
    Link,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStep {
    pub phase: ProbePhase,
    pub url: String,
    pub method: String,
    pub request_accept: String,
    /// Absent when no reply arrived (timeout or transport failure).
    pub status: Option<u16>,
    pub content_type: Option<String>,
    pub link_header: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeTrace {
    pub steps: Vec<ProbeStep>,
    pub outcome: ProbeOutcome,
    pub elapsed_ms: u64,
}

/// What the transport must fetch next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeRequest {
    pub url: String,
    pub accept: String,
}

/// The parts of an HTTP reply the probe looks at.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeReply {
    pub status: u16,
    pub content_type: Option<String>,
    pub location: Option<String>,
    pub link: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next {
    Fetch(ProbeRequest),
    Done(ProbeOutcome),
}

/// Builds `{resolver}/{doi}`, percent-encoding each DOI path segment.
pub fn doi_url(resolver_base: &str, doi: &str) -> Option<String> {
    let mut url = Url::parse(resolver_base).ok()?;
    {
        let mut segs = url.path_segments_mut().ok()?;
        segs.pop_if_empty();
        segs.extend(doi.trim().split('/'));
    }
    Some(url.into())
}

#[derive(Debug)]
pub struct ProbeSession {
    max_redirects: u32,
    formats: Vec<String>,
    phase: ProbePhase,
    current: Option<Url>,
    accept: String,
    redirects: u32,
    /// Media type chosen from the `Link` header in the link phase.
    link_type: Option<String>,
    steps: Vec<ProbeStep>,
    outcome: Option<ProbeOutcome>,
}

impl ProbeSession {
    /// Starts a probe of `doi_url` for a record annotated with `formats`.
    pub fn start(doi_url: &str, formats: &[String], policy: &ProbePolicy) -> (ProbeSession, Next) {
        let mut s = ProbeSession {
            max_redirects: policy.max_redirects.max(1),
            formats: formats.iter().map(|f| bare_media_type(f).to_owned()).collect(),
            phase: ProbePhase::Client,
            current: None,
            accept: CLIENT_ACCEPT.to_string(),
            redirects: 0,
            link_type: None,
            steps: Vec::new(),
            outcome: None,
        };
        let next = match Url::parse(doi_url) {
            Ok(u) => {
                s.current = Some(u);
                s.fetch()
            }
            Err(_) => {
                s.push_step(doi_url.to_string(), None);
                s.finish(ProbeOutcome::Failed(FailureReason::Transport))
            }
        };
        (s, next)
    }

    pub fn outcome(&self) -> Option<ProbeOutcome> {
        self.outcome
    }

    pub fn steps(&self) -> &[ProbeStep] {
        &self.steps
    }

    pub fn into_trace(self, elapsed_ms: u64) -> ProbeTrace {
        ProbeTrace {
            steps: self.steps,
            outcome: self.outcome.unwrap_or(ProbeOutcome::Failed(FailureReason::Transport)),
            elapsed_ms,
        }
    }

    fn fetch(&self) -> Next {
        Next::Fetch(ProbeRequest {
            url: self.current.as_ref().map(|u| u.to_string()).unwrap_or_default(),
            accept: self.accept.clone(),
        })
    }

    fn finish(&mut self, outcome: ProbeOutcome) -> Next {
        self.outcome = Some(outcome);
        Next::Done(outcome)
    }

    fn push_step(&mut self, url: String, reply: Option<&ProbeReply>) {
        self.steps.push(ProbeStep {
            phase: self.phase,
            url,
            method: "GET".to_string(),
            request_accept: self.accept.clone(),
            status: reply.map(|r| r.status),
            content_type: reply.and_then(|r| r.content_type.clone()),
            link_header: reply.and_then(|r| r.link.clone()),
        });
    }

    fn current_url(&self) -> String {
        self.current.as_ref().map(|u| u.to_string()).unwrap_or_default()
    }

    /// Feeds the reply to the last requested URL.
    pub fn on_reply(&mut self, reply: ProbeReply) -> Next {
        if let Some(o) = self.outcome {
            return Next::Done(o);
        }
        let url = self.current_url();
        self.push_step(url, Some(&reply));

        if (300..400).contains(&reply.status) {
            if let Some(loc) = reply.location.as_deref() {
                let target = self.current.as_ref().and_then(|base| base.join(loc.trim()).ok());
                match target {
                    Some(t) => {
                        self.redirects += 1;
                        if self.redirects > self.max_redirects {
                            return self.phase_failed(FailureReason::RedirectLimit, &reply);
                        }
                        self.current = Some(t);
                        return self.fetch();
                    }
                    None => return self.phase_failed(FailureReason::Non200, &reply),
                }
            }
        }

        let served = reply.content_type.as_deref().unwrap_or("");
        match self.phase {
            ProbePhase::Client => {
                if reply.status == 200 && is_image_media_type(served) {
                    self.finish(ProbeOutcome::ClientNegotiated)
                } else if reply.status == 200 {
                    self.phase_failed(FailureReason::NoImageContentType, &reply)
                } else {
                    self.phase_failed(FailureReason::Non200, &reply)
                }
            }
            ProbePhase::Link => {
                let wanted = self.link_type.as_deref().unwrap_or("");
                if reply.status == 200 && bare_media_type(served).eq_ignore_ascii_case(wanted) {
                    self.finish(ProbeOutcome::LinkNegotiated)
                } else if reply.status == 200 {
                    self.phase_failed(FailureReason::NoImageContentType, &reply)
                } else {
                    self.phase_failed(FailureReason::Non200, &reply)
                }
            }
        }
    }

    /// Records that the last request produced no reply.
    pub fn on_failure(&mut self, failure: TransportFailure) -> Next {
        if let Some(o) = self.outcome {
            return Next::Done(o);
        }
        let url = self.current_url();
        self.push_step(url, None);
        let reason = match failure {
            TransportFailure::Timeout => FailureReason::Timeout,
            TransportFailure::Other => FailureReason::Transport,
        };
        self.finish(ProbeOutcome::Failed(reason))
    }

    fn phase_failed(&mut self, reason: FailureReason, reply: &ProbeReply) -> Next {
        if self.phase == ProbePhase::Link {
            return self.finish(ProbeOutcome::Failed(reason));
        }
        let Some(link) = reply.link.as_deref() else {
            return self.finish(ProbeOutcome::Failed(reason));
        };
        let chosen = parse_link_header(link).into_iter().find_map(|lv| {
            let t = bare_media_type(lv.param("type")?).to_owned();
            self.formats.contains(&t).then_some((lv.target, t))
        });
        let Some((target, media_type)) = chosen else {
            return self.finish(ProbeOutcome::Failed(FailureReason::NoLinkMatch));
        };
        let Some(resolved) = self.current.as_ref().and_then(|b| b.join(&target).ok()) else {
            return self.finish(ProbeOutcome::Failed(FailureReason::NoLinkMatch));
        };
        self.phase = ProbePhase::Link;
        self.redirects = 0;
        self.accept = media_type.clone();
        self.link_type = Some(media_type);
        self.current = Some(resolved);
        self.fetch()
    }
}
