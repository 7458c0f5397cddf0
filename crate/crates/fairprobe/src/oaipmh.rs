//! OAI-PMH 2.0 client: `ListMetadataFormats` and `ListRecords` with
//! resumption tokens, retries and 503 flow control.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use quick_xml::events::Event;
use quick_xml::Reader;

use fairprobe_core::oaipmh::{HarvestPolicy, HarvestSummary, MetadataFormatInfo, RawRecord};

use crate::http::{BodyMode, Http, HttpError};
use crate::xml::{append_text, attribute, local_name, XmlError};

pub use fairprobe_core::oaipmh::select_datacite_prefix;

/// Upper bound on one OAI page body.
pub const MAX_PAGE_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OaiError {
    #[error("endpoint unresponsive after {attempts} attempts: {last}")]
    Unresponsive { attempts: u32, last: String },
    #[error("OAI error {code}: {message}")]
    Protocol { code: String, message: String },
    #[error(transparent)]
    Malformed(#[from] XmlError),
}

impl OaiError {
    pub fn token(&self) -> String {
        match self {
            OaiError::Unresponsive { .. } => "endpoint-unresponsive".into(),
            OaiError::Protocol { code, .. } => format!("protocol-error({code})"),
            OaiError::Malformed(_) => "malformed-xml".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageRecord {
    pub oai_identifier: String,
    pub datestamp: String,
    pub deleted: bool,
    pub payload: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub records: Vec<PageRecord>,
    /// Non-empty resumption token, if the list continues.
    pub token: Option<String>,
    pub complete_list_size: Option<u64>,
    pub error: Option<(String, String)>,
}

/// Parses a `ListRecords` response.
pub fn parse_list_records(xml: &str) -> Result<Page, XmlError> {
    let mut reader = Reader::from_str(xml);
    let mut page = Page::default();
    let mut stack: Vec<String> = Vec::new();
    let mut text = String::new();
    let mut current: Option<PageRecord> = None;
    let mut error_code: Option<String> = None;
    let mut saw_root = false;

    loop {
        let event = reader.read_event()?;
        match &event {
            Event::Eof => break,
            Event::Start(e) | Event::Empty(e) => {
                let name = local_name(e);
                let empty = matches!(event, Event::Empty(_));
                saw_root |= name == "OAI-PMH";
                text.clear();
                match name.as_str() {
                    "record" => current = Some(PageRecord::default()),
                    "header" => {
                        if let Some(r) = current.as_mut() {
                            r.deleted = attribute(e, "status")?.as_deref() == Some("deleted");
                        }
                    }
                    "metadata" if current.is_some() && !empty => {
                        let span = reader.read_to_end(e.name())?;
                        let inner = &xml[span.start as usize..span.end as usize];
                        if let Some(r) = current.as_mut() {
                            r.payload = inner.trim().to_string();
                        }
                        continue;
                    }
                    "error" => error_code = Some(attribute(e, "code")?.unwrap_or_default()),
                    "resumptionToken" => {
                        page.complete_list_size =
                            attribute(e, "completeListSize")?.and_then(|v| v.trim().parse().ok());
                    }
                    _ => {}
                }
                if empty {
                    end_element(&name, &stack, "", &mut current, &mut page, &mut error_code);
                } else {
                    stack.push(name);
                }
            }
            Event::End(_) => {
                let name = stack.pop().unwrap_or_default();
                let t = std::mem::take(&mut text);
                end_element(&name, &stack, &t, &mut current, &mut page, &mut error_code);
            }
            other => {
                append_text(other, &mut text)?;
            }
        }
    }
    if !saw_root {
        return Err(XmlError("not an OAI-PMH response".into()));
    }
    if !stack.is_empty() {
        return Err(XmlError("unexpected end of document".into()));
    }
    Ok(page)
}

fn end_element(
    name: &str,
    stack: &[String],
    text: &str,
    current: &mut Option<PageRecord>,
    page: &mut Page,
    error_code: &mut Option<String>,
) {
    let parent = stack.last().map(String::as_str).unwrap_or("");
    match (parent, name) {
        ("header", "identifier") => {
            if let Some(r) = current.as_mut() {
                r.oai_identifier = text.trim().to_string();
            }
        }
        ("header", "datestamp") => {
            if let Some(r) = current.as_mut() {
                r.datestamp = text.trim().to_string();
            }
        }
        (_, "record") => {
            if let Some(r) = current.take() {
                page.records.push(r);
            }
        }
        (_, "resumptionToken") => {
            let t = text.trim();
            page.token = (!t.is_empty()).then(|| t.to_string());
        }
        (_, "error") => {
            if let Some(code) = error_code.take() {
                if page.error.is_none() {
                    page.error = Some((code, text.trim().to_string()));
                }
            }
        }
        _ => {}
    }
}

/// Parses a `ListMetadataFormats` response; duplicate prefixes keep the
/// first entry.
pub fn parse_metadata_formats(xml: &str) -> Result<Result<Vec<MetadataFormatInfo>, (String, String)>, XmlError> {
    let mut reader = Reader::from_str(xml);
    let mut formats: Vec<MetadataFormatInfo> = Vec::new();
    let mut current: Option<MetadataFormatInfo> = None;
    let mut text = String::new();
    let mut error: Option<(String, String)> = None;
    let mut error_code: Option<String> = None;
    let mut saw_root = false;
    loop {
        match reader.read_event()? {
            Event::Eof => break,
            Event::Start(e) => {
                let name = local_name(&e);
                saw_root |= name == "OAI-PMH";
                text.clear();
                match name.as_str() {
                    "metadataFormat" => {
                        current = Some(MetadataFormatInfo {
                            prefix: String::new(),
                            schema_url: String::new(),
                            namespace: String::new(),
                        })
                    }
                    "error" => error_code = Some(attribute(&e, "code")?.unwrap_or_default()),
                    _ => {}
                }
            }
            Event::Empty(e) => {
                let name = local_name(&e);
                saw_root |= name == "OAI-PMH";
                if name == "error" && error.is_none() {
                    error = Some((attribute(&e, "code")?.unwrap_or_default(), String::new()));
                }
            }
            Event::End(e) => {
                let name = e.local_name().into_inner().to_string();
                let t = text.trim().to_string();
                match (name.as_str(), current.as_mut()) {
                    ("metadataPrefix", Some(f)) => f.prefix = t,
                    ("schema", Some(f)) => f.schema_url = t,
                    ("metadataNamespace", Some(f)) => f.namespace = t,
                    ("metadataFormat", _) => {
                        if let Some(f) = current.take() {
                            if !f.prefix.is_empty() && !formats.iter().any(|g| g.prefix == f.prefix) {
                                formats.push(f);
                            }
                        }
                    }
                    ("error", _) => {
                        if let (Some(code), None) = (error_code.take(), &error) {
                            error = Some((code, t));
                        }
                    }
                    _ => {}
                }
                text.clear();
            }
            other => {
                append_text(&other, &mut text)?;
            }
        }
    }
    if !saw_root {
        return Err(XmlError("not an OAI-PMH response".into()));
    }
    Ok(match error {
        Some(e) => Err(e),
        None => Ok(formats),
    })
}

fn with_query(endpoint: &str, pairs: &[(&str, &str)]) -> String {
    match url::Url::parse(endpoint) {
        Ok(mut u) => {
            u.query_pairs_mut().extend_pairs(pairs);
            u.into()
        }
        Err(_) => {
            let q: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{endpoint}?{}", q.join("&"))
        }
    }
}

/// Result of one harvest: the summary plus why it stopped early, if it did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harvest {
    pub summary: HarvestSummary,
    pub failure: Option<String>,
}

/// Client bound to one endpoint. Requests are issued sequentially and
/// spaced by the policy's politeness delay.
pub struct OaiClient<'a> {
    http: &'a Http,
    endpoint: String,
    policy: HarvestPolicy,
    last_request: Option<Instant>,
}

impl<'a> OaiClient<'a> {
    pub fn new(http: &'a Http, endpoint: &str, policy: HarvestPolicy) -> OaiClient<'a> {
        OaiClient { http, endpoint: endpoint.to_string(), policy, last_request: None }
    }

    fn pace(&mut self) {
        if let Some(t) = self.last_request {
            let ready = t + self.policy.politeness_delay;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        self.last_request = Some(Instant::now());
    }

    /// GET with the retry rules: timeouts, transport errors and non-200
    /// replies are retried `retries_after_timeout` times; `503` with a
    /// `Retry-After` no longer than the request timeout is waited out
    /// without consuming a retry, up to `flow_control_waits` times.
    fn fetch(&mut self, url: &str) -> Result<String, OaiError> {
        let mut failures = 0u32;
        let mut waits = 0u32;
        loop {
            self.pace();
            let last = match self.http.get(url, None, BodyMode::Text(MAX_PAGE_BYTES)) {
                Ok(r) if r.status == 200 => return Ok(r.body),
                Ok(r) if r.status == 503 => {
                    let wait = r
                        .retry_after
                        .as_deref()
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs);
                    match wait {
                        Some(w) if w <= self.policy.request_timeout && waits < self.policy.flow_control_waits => {
                            waits += 1;
                            log::debug!("{url}: 503, retrying after {w:?}");
                            std::thread::sleep(w);
                            continue;
                        }
                        _ => "HTTP 503".to_string(),
                    }
                }
                Ok(r) => format!("HTTP {}", r.status),
                Err(HttpError::Timeout) => "timeout".to_string(),
                Err(HttpError::Transport(e)) => e,
            };
            failures += 1;
            log::debug!("{url}: attempt {failures} failed: {last}");
            if failures > self.policy.retries_after_timeout {
                return Err(OaiError::Unresponsive { attempts: failures, last });
            }
        }
    }

    pub fn list_metadata_formats(&mut self) -> Result<Vec<MetadataFormatInfo>, OaiError> {
        let url = with_query(&self.endpoint, &[("verb", "ListMetadataFormats")]);
        let body = self.fetch(&url)?;
        parse_metadata_formats(&body)?.map_err(|(code, message)| OaiError::Protocol { code, message })
    }

    /// Requests the first `ListRecords` page only. Used for size estimates.
    pub fn first_page(&mut self, prefix: &str) -> Result<Page, OaiError> {
        let url = with_query(&self.endpoint, &[("verb", "ListRecords"), ("metadataPrefix", prefix)]);
        let body = self.fetch(&url)?;
        let page = parse_list_records(&body)?;
        match &page.error {
            Some((code, _)) if code == "noRecordsMatch" => Ok(Page::default()),
            Some((code, message)) => Err(OaiError::Protocol { code: code.clone(), message: message.clone() }),
            None => Ok(page),
        }
    }

    /// Harvests the whole list for `prefix`, delivering each identifier
    /// at most once. A sink error stops the harvest as partial.
    pub fn harvest_records<F>(&mut self, prefix: &str, mut sink: F) -> Harvest
    where
        F: FnMut(RawRecord) -> std::io::Result<()>,
    {
        let mut summary = HarvestSummary::default();
        let mut seen: HashSet<String> = HashSet::new();
        let mut token: Option<String> = None;
        let failure = loop {
            if let (Some(max), Some(_)) = (self.policy.max_pages, &token) {
                if summary.pages >= max {
                    summary.truncated = true;
                    break Some(format!("stopped after max_pages={max}"));
                }
            }
            let url = match &token {
                None => with_query(&self.endpoint, &[("verb", "ListRecords"), ("metadataPrefix", prefix)]),
                Some(t) => with_query(&self.endpoint, &[("verb", "ListRecords"), ("resumptionToken", t)]),
            };
            let page = match self.fetch(&url).and_then(|b| Ok(parse_list_records(&b)?)) {
                Ok(p) => p,
                Err(e) => break Some(e.token() + ": " + &e.to_string()),
            };
            if let Some((code, message)) = &page.error {
                match code.as_str() {
                    "noRecordsMatch" => {
                        summary.completed = true;
                        break None;
                    }
                    "badResumptionToken" if token.is_some() && summary.restarts == 0 => {
                        log::info!("{}: resumption token rejected, restarting chain", self.endpoint);
                        summary.restarts += 1;
                        token = None;
                        continue;
                    }
                    _ => break Some(format!("protocol-error({code}): {message}")),
                }
            }
            summary.pages += 1;
            let mut sink_error = None;
            for r in page.records {
                if r.oai_identifier.is_empty() || !seen.insert(r.oai_identifier.clone()) {
                    continue;
                }
                if r.deleted {
                    summary.deleted += 1;
                    continue;
                }
                let raw = RawRecord {
                    oai_identifier: r.oai_identifier,
                    datestamp: r.datestamp,
                    deleted: false,
                    payload: r.payload,
                    source_endpoint: self.endpoint.clone(),
                };
                if let Err(e) = sink(raw) {
                    sink_error = Some(format!("storage: {e}"));
                    break;
                }
                summary.records += 1;
            }
            if sink_error.is_some() {
                break sink_error;
            }
            match page.token {
                Some(t) => token = Some(t),
                None => {
                    summary.completed = true;
                    break None;
                }
            }
        };
        Harvest { summary, failure }
    }
}
