//! Blocking HTTP GET with redirects disabled, plus a per-host gate.

use std::collections::HashMap;
use std::io::Read;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("timeout")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
}

impl From<ureq::Error> for HttpError {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::Timeout(_) => HttpError::Timeout,
            ureq::Error::Io(io) => io.into(),
            other => HttpError::Transport(other.to_string()),
        }
    }
}

impl From<std::io::Error> for HttpError {
    fn from(e: std::io::Error) -> Self {
        use std::io::ErrorKind::*;
        match e.kind() {
            TimedOut | WouldBlock => HttpError::Timeout,
            _ => {
                // ureq wraps its own timeouts in io errors while streaming bodies
                match e.into_inner() {
                    Some(inner) => match inner.downcast::<ureq::Error>() {
                        Ok(u) => HttpError::from(*u),
                        Err(other) => HttpError::Transport(other.to_string()),
                    },
                    None => HttpError::Transport("io error".into()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyMode {
    /// Headers only; the connection is dropped without reading the body.
    Skip,
    /// Read at most this many bytes and discard them.
    Discard(u64),
    /// Read the whole body as text; exceeding the limit is an error.
    Text(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: Option<String>,
    pub location: Option<String>,
    /// All Link header lines joined with ", ".
    pub link: Option<String>,
    pub retry_after: Option<String>,
    pub body: String,
}

#[derive(Clone)]
pub struct Http {
    agent: ureq::Agent,
}

impl Http {
    pub fn new(timeout: Duration) -> Http {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(concat!("fairprobe/", env!("CARGO_PKG_VERSION")))
            .build();
        Http { agent: config.into() }
    }

    pub fn get(&self, url: &str, accept: Option<&str>, mode: BodyMode) -> Result<Response, HttpError> {
        let mut req = self.agent.get(url);
        if let Some(a) = accept {
            req = req.header("Accept", a);
        }
        let mut resp = req.call()?;
        let headers = resp.headers();
        let one = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
        let links: Vec<&str> = headers.get_all("link").iter().filter_map(|v| v.to_str().ok()).collect();
        let mut out = Response {
            status: resp.status().as_u16(),
            content_type: one("content-type"),
            location: one("location"),
            link: (!links.is_empty()).then(|| links.join(", ")),
            retry_after: one("retry-after"),
            body: String::new(),
        };
        match mode {
            BodyMode::Skip => {}
            BodyMode::Discard(n) => {
                let mut reader = resp.body_mut().as_reader().take(n);
                std::io::copy(&mut reader, &mut std::io::sink())?;
            }
            BodyMode::Text(limit) => {
                let bytes = resp.body_mut().with_config().limit(limit).read_to_vec()?;
                out.body = String::from_utf8_lossy(&bytes).into_owned();
            }
        }
        Ok(out)
    }
}

/// `host:port` of an absolute URL, used to key politeness state.
pub fn host_key(url: &str) -> Option<String> {
    let u = url::Url::parse(url).ok()?;
    Some(format!("{}:{}", u.host_str()?, u.port_or_known_default()?))
}

#[derive(Default)]
struct Slot {
    busy: bool,
    last_start: Option<Instant>,
}

/// At most one request in flight per host, and request starts to one
/// host spaced at least `delay` apart.
pub struct HostGate {
    delay: Duration,
    slots: Mutex<HashMap<String, Slot>>,
    freed: Condvar,
}

pub struct HostPermit<'a> {
    gate: &'a HostGate,
    key: String,
}

impl HostGate {
    pub fn new(delay: Duration) -> HostGate {
        HostGate { delay, slots: Mutex::new(HashMap::new()), freed: Condvar::new() }
    }

    pub fn acquire(&self, key: &str) -> HostPermit<'_> {
        let mut slots = self.slots.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            let slot = slots.entry(key.to_string()).or_default();
            if !slot.busy {
                let now = Instant::now();
                match slot.last_start.map(|t| t + self.delay) {
                    Some(ready) if ready > now => {
                        slots = self
                            .freed
                            .wait_timeout(slots, ready - now)
                            .unwrap_or_else(|p| p.into_inner())
                            .0;
                        continue;
                    }
                    _ => {
                        slot.busy = true;
                        slot.last_start = Some(now);
                        return HostPermit { gate: self, key: key.to_string() };
                    }
                }
            }
            slots = self.freed.wait(slots).unwrap_or_else(|p| p.into_inner());
        }
    }
}

impl Drop for HostPermit<'_> {
    fn drop(&mut self) {
        let mut slots = self.gate.slots.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(slot) = slots.get_mut(&self.key) {
            slot.busy = false;
        }
        drop(slots);
        self.gate.freed.notify_all();
    }
}
