//! Loopback HTTP/1.1 server answering OAI-PMH, registry and resolver
//! requests from a scenario script.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use fairprobe_core::datacite::escape_xml;
use percent_encoding::percent_decode_str;
use serde::Serialize;

use super::payload;
use super::script::{Fault, InvalidScript, MockRepository, ResolverRoute, ScenarioScript, ScriptedResponse};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port unavailable: {0}")]
    PortUnavailable(std::io::Error),
    #[error(transparent)]
    InvalidScript(#[from] InvalidScript),
}

/// One request as seen by the mock.
#[derive(Debug, Clone, Serialize)]
pub struct LoggedRequest {
    /// Arrival time in milliseconds since the server started.
    pub at_ms: f64,
    pub listener: u16,
    pub target: String,
    pub accept: Option<String>,
    pub status: u16,
    pub body_len: usize,
    pub bytes_sent: usize,
    /// Whether the whole body was written before the client went away.
    pub complete: bool,
}

struct State {
    script: ScenarioScript,
    started: Instant,
    bases: Vec<String>,
    /// Remaining hits per (repository index, fault index).
    faults: Mutex<HashMap<(usize, usize), u32>>,
    log: Mutex<Vec<LoggedRequest>>,
    shutdown: AtomicBool,
}

pub struct MockServer {
    state: Arc<State>,
    ports: Vec<u16>,
    acceptors: Vec<JoinHandle<()>>,
}

struct Reply {
    status: u16,
    headers: Vec<(&'static str, String)>,
    body: Vec<u8>,
    /// Body of this many filler bytes instead of `body`.
    filler: usize,
    stall: Duration,
    close: bool,
}

impl Reply {
    fn new(status: u16) -> Reply {
        Reply { status, headers: Vec::new(), body: Vec::new(), filler: 0, stall: Duration::ZERO, close: false }
    }

    fn xml(body: String) -> Reply {
        let mut r = Reply::new(200);
        r.headers.push(("Content-Type", "text/xml; charset=utf-8".into()));
        r.body = body.into_bytes();
        r
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        303 => "See Other",
        307 => "Temporary Redirect",
        308 => "Permanent Redirect",
        404 => "Not Found",
        406 => "Not Acceptable",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

impl MockServer {
    /// Validates the script and binds listener 0 plus `script.hosts`
    /// extra listeners on 127.0.0.1.
    pub fn serve(script: ScenarioScript) -> Result<MockServer, ServeError> {
        script.validate()?;
        let mut listeners = Vec::new();
        for _ in 0..=script.hosts {
            let l = TcpListener::bind("127.0.0.1:0").map_err(ServeError::PortUnavailable)?;
            listeners.push(l);
        }
        let ports: Vec<u16> = listeners
            .iter()
            .map(|l| l.local_addr().map(|a| a.port()))
            .collect::<Result<_, _>>()
            .map_err(ServeError::PortUnavailable)?;
        let mut faults = HashMap::new();
        for (ri, repo) in script.repositories.iter().enumerate() {
            for (fi, f) in repo.faults.iter().enumerate() {
                let times = match f {
                    Fault::Timeout { times, .. }
                    | Fault::Unavailable { times, .. }
                    | Fault::ServerError { times, .. }
                    | Fault::InvalidateToken { times, .. }
                    | Fault::Malformed { times, .. }
                    | Fault::OaiError { times, .. }
                    | Fault::FormatsTimeout { times } => *times,
                };
                faults.insert((ri, fi), times);
            }
        }
        let state = Arc::new(State {
            bases: ports.iter().map(|p| format!("http://127.0.0.1:{p}")).collect(),
            script,
            started: Instant::now(),
            faults: Mutex::new(faults),
            log: Mutex::new(Vec::new()),
            shutdown: AtomicBool::new(false),
        });
        let acceptors = listeners
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let state = state.clone();
                std::thread::spawn(move || accept_loop(l, i as u16, state))
            })
            .collect();
        Ok(MockServer { state, ports, acceptors })
    }

    pub fn base_url(&self, listener: u16) -> String {
        self.state.bases[listener as usize].clone()
    }

    pub fn oai_url(&self, repo_id: &str) -> String {
        format!("{}/oai/{repo_id}", self.state.bases[0])
    }

    pub fn resolver_base(&self) -> String {
        format!("{}/doi/", self.state.bases[0])
    }

    pub fn registry_url(&self) -> String {
        format!("{}/registry", self.state.bases[0])
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.state.script
    }

    pub fn request_log(&self) -> Vec<LoggedRequest> {
        let mut log = self.state.log.lock().unwrap_or_else(|p| p.into_inner()).clone();
        log.sort_by(|a, b| a.at_ms.total_cmp(&b.at_ms));
        log
    }

    pub fn clear_log(&self) {
        self.state.log.lock().unwrap_or_else(|p| p.into_inner()).clear();
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.state.shutdown.store(true, Ordering::SeqCst);
        for p in &self.ports {
            let _ = TcpStream::connect(("127.0.0.1", *p));
        }
        for a in self.acceptors.drain(..) {
            let _ = a.join();
        }
    }
}

fn accept_loop(listener: TcpListener, index: u16, state: Arc<State>) {
    for stream in listener.incoming() {
        if state.shutdown.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let state = state.clone();
        std::thread::spawn(move || {
            let _ = serve_connection(stream, index, &state);
        });
    }
}

struct Request {
    target: String,
    accept: Option<String>,
}

/// Reads one request head. `Ok(None)` means the peer closed or the
/// server is shutting down.
fn read_request(reader: &mut BufReader<TcpStream>, state: &State) -> std::io::Result<Option<Request>> {
    let mut lines: Vec<String> = Vec::new();
    let mut buf = String::new();
    loop {
        match reader.read_line(&mut buf) {
            Ok(0) => return Ok(None),
            Ok(_) => {
                if !buf.ends_with('\n') {
                    continue;
                }
                let line = buf.trim_end_matches(['\r', '\n']).to_string();
                buf.clear();
                if line.is_empty() {
                    if lines.is_empty() {
                        continue;
                    }
                    break;
                }
                lines.push(line);
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if state.shutdown.load(Ordering::SeqCst) {
                    return Ok(None);
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mut parts = lines[0].split_whitespace();
    let _method = parts.next();
    let target = parts.next().unwrap_or("/").to_string();
    let accept = lines[1..].iter().find_map(|l| {
        let (k, v) = l.split_once(':')?;
        k.trim().eq_ignore_ascii_case("accept").then(|| v.trim().to_string())
    });
    Ok(Some(Request { target, accept }))
}

fn serve_connection(stream: TcpStream, listener: u16, state: &State) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(200)))?;
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    while let Some(req) = read_request(&mut reader, state)? {
        let at_ms = state.started.elapsed().as_secs_f64() * 1000.0;
        let reply = route(state, &req);
        let slot = {
            let mut log = state.log.lock().unwrap_or_else(|p| p.into_inner());
            log.push(LoggedRequest {
                at_ms,
                listener,
                target: req.target.clone(),
                accept: req.accept.clone(),
                status: reply.status,
                body_len: reply.filler.max(reply.body.len()),
                bytes_sent: 0,
                complete: false,
            });
            log.len() - 1
        };
        if !reply.stall.is_zero() {
            std::thread::sleep(reply.stall);
        }
        let (sent, complete) = write_reply(&mut writer, &reply);
        {
            let mut log = state.log.lock().unwrap_or_else(|p| p.into_inner());
            if let Some(entry) = log.get_mut(slot) {
                entry.bytes_sent = sent;
                entry.complete = complete;
            }
        }
        if reply.close || !complete {
            let _ = writer.shutdown(Shutdown::Both);
            break;
        }
    }
    Ok(())
}

fn write_reply(w: &mut TcpStream, reply: &Reply) -> (usize, bool) {
    let len = if reply.filler > 0 { reply.filler } else { reply.body.len() };
    let mut head = format!("HTTP/1.1 {} {}\r\nContent-Length: {len}\r\n", reply.status, reason(reply.status));
    for (k, v) in &reply.headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    if reply.close {
        head.push_str("Connection: close\r\n");
    }
    head.push_str("\r\n");
    if w.write_all(head.as_bytes()).is_err() {
        return (0, false);
    }
    let mut sent = 0;
    if reply.filler > 0 {
        let chunk = vec![b'x'; 64 * 1024];
        while sent < reply.filler {
            let n = chunk.len().min(reply.filler - sent);
            if w.write_all(&chunk[..n]).is_err() {
                return (sent, false);
            }
            sent += n;
        }
    } else {
        if w.write_all(&reply.body).is_err() {
            return (0, false);
        }
        sent = reply.body.len();
    }
    (sent, w.flush().is_ok())
}

fn route(state: &State, req: &Request) -> Reply {
    let (path, query) = req.target.split_once('?').unwrap_or((&req.target, ""));
    let params: HashMap<String, String> = url::form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    if let Some(id) = path.strip_prefix("/oai/") {
        return match state.script.repositories.iter().position(|r| r.id == id) {
            Some(i) => oai(state, i, &params),
            None => Reply::new(404),
        };
    }
    if path == "/registry/repositories" {
        return registry_list(state);
    }
    if let Some(id) = path.strip_prefix("/registry/repository/") {
        return registry_detail(state, id);
    }
    if let Some(rest) = path.strip_prefix("/doi/") {
        return resolver(state, rest, req.accept.as_deref());
    }
    Reply::new(404)
}

const OAI_HEAD: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://www.openarchives.org/OAI/2.0/ http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd"><responseDate>2018-06-01T00:00:00Z</responseDate>"#;

fn oai_error(code: &str, message: &str) -> Reply {
    Reply::xml(format!("{OAI_HEAD}<request>mock</request><error code=\"{code}\">{message}</error></OAI-PMH>"))
}

/// Consumes one hit of the first live fault matching `pred`.
fn take_fault(state: &State, repo: usize, pred: impl Fn(&Fault) -> bool) -> Option<&Fault> {
    let r = &state.script.repositories[repo];
    let mut left = state.faults.lock().unwrap_or_else(|p| p.into_inner());
    for (fi, f) in r.faults.iter().enumerate() {
        if pred(f) {
            if let Some(n) = left.get_mut(&(repo, fi)) {
                if *n > 0 {
                    *n -= 1;
                    return Some(f);
                }
            }
        }
    }
    None
}

fn stall_reply(state: &State, normal: Reply) -> Reply {
    Reply { stall: Duration::from_millis(state.script.timing.stall_ms), close: true, ..normal }
}

fn oai(state: &State, ri: usize, params: &HashMap<String, String>) -> Reply {
    let repo = &state.script.repositories[ri];
    match params.get("verb").map(String::as_str) {
        Some("ListMetadataFormats") if repo.prefixes.is_empty() => oai_error("noMetadataFormats", "none"),
        Some("ListMetadataFormats") => {
            let mut x = format!("{OAI_HEAD}<request verb=\"ListMetadataFormats\">mock</request><ListMetadataFormats>");
            for p in &repo.prefixes {
                let ns = if p.contains("datacite") {
                    "http://datacite.org/schema/kernel-4"
                } else {
                    "http://www.openarchives.org/OAI/2.0/oai_dc/"
                };
                x.push_str(&format!(
                    "<metadataFormat><metadataPrefix>{p}</metadataPrefix><schema>{ns}/schema.xsd</schema><metadataNamespace>{ns}</metadataNamespace></metadataFormat>"
                ));
            }
            x.push_str("</ListMetadataFormats></OAI-PMH>");
            let reply = Reply::xml(x);
            match take_fault(state, ri, |f| matches!(f, Fault::FormatsTimeout { .. })) {
                Some(_) => stall_reply(state, reply),
                None => reply,
            }
        }
        Some("ListRecords") => list_records(state, ri, repo, params),
        _ => oai_error("badVerb", "unsupported verb"),
    }
}

fn list_records(state: &State, ri: usize, repo: &MockRepository, params: &HashMap<String, String>) -> Reply {
    let page = match params.get("resumptionToken") {
        Some(t) => {
            let parsed = t
                .strip_prefix(&format!("{}.", repo.id))
                .and_then(|p| p.parse::<usize>().ok())
                .filter(|p| *p >= 1 && *p < repo.pages());
            let Some(page) = parsed else {
                return oai_error("badResumptionToken", "unknown token");
            };
            if take_fault(state, ri, |f| matches!(f, Fault::InvalidateToken { after_page, .. } if after_page + 1 == page))
                .is_some()
            {
                return oai_error("badResumptionToken", "token expired");
            }
            page
        }
        None => {
            match params.get("metadataPrefix") {
                Some(p) if repo.prefixes.contains(p) => {}
                _ => return oai_error("cannotDisseminateFormat", "prefix not offered"),
            }
            0
        }
    };
    if repo.records.is_empty() {
        return oai_error("noRecordsMatch", "empty");
    }
    let body = render_page(repo, page);
    let fault = take_fault(state, ri, |f| match f {
        Fault::Timeout { page: p, .. }
        | Fault::Unavailable { page: p, .. }
        | Fault::ServerError { page: p, .. }
        | Fault::Malformed { page: p, .. }
        | Fault::OaiError { page: p, .. } => *p == page,
        _ => false,
    });
    match fault {
        Some(Fault::Timeout { .. }) => stall_reply(state, Reply::xml(body)),
        Some(Fault::Unavailable { retry_after, .. }) => {
            let mut r = Reply::new(503);
            r.headers.push(("Retry-After", retry_after.to_string()));
            r
        }
        Some(Fault::ServerError { .. }) => Reply::new(500),
        Some(Fault::Malformed { .. }) => {
            let cut = body.len() / 2;
            let mut end = cut;
            while !body.is_char_boundary(end) {
                end -= 1;
            }
            Reply::xml(body[..end].to_string())
        }
        Some(Fault::OaiError { code, .. }) => oai_error(code, "scripted"),
        _ => Reply::xml(body),
    }
}

fn render_page(repo: &MockRepository, page: usize) -> String {
    let start = page * repo.page_size;
    let end = (start + repo.page_size).min(repo.records.len());
    let mut x = format!("{OAI_HEAD}<request verb=\"ListRecords\">mock</request><ListRecords>");
    for rec in &repo.records[start..end] {
        let mut id = String::new();
        escape_xml(&rec.oai_identifier, &mut id);
        if rec.deleted {
            x.push_str(&format!(
                "<record><header status=\"deleted\"><identifier>{id}</identifier><datestamp>2018-06-01</datestamp></header></record>"
            ));
        } else {
            x.push_str(&format!(
                "<record><header><identifier>{id}</identifier><datestamp>2018-06-01</datestamp></header><metadata>{}</metadata></record>",
                payload::render(rec)
            ));
        }
    }
    let pages = repo.pages();
    let total = repo.records.len();
    if page + 1 < pages {
        x.push_str(&format!(
            "<resumptionToken completeListSize=\"{total}\" cursor=\"{start}\">{}.{}</resumptionToken>",
            repo.id,
            page + 1
        ));
    } else if pages > 1 {
        x.push_str(&format!("<resumptionToken completeListSize=\"{total}\" cursor=\"{start}\"/>"));
    }
    x.push_str("</ListRecords></OAI-PMH>");
    x
}

fn registry_list(state: &State) -> Reply {
    let mut x = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?><list>");
    let ids = state
        .script
        .repositories
        .iter()
        .map(|r| (&r.id, &r.name))
        .chain(state.script.registry_only.iter().map(|r| (&r.id, &r.name)));
    for (id, name) in ids {
        let (mut id_e, mut name_e) = (String::new(), String::new());
        escape_xml(id, &mut id_e);
        escape_xml(name, &mut name_e);
        x.push_str(&format!("<repository><id>{id_e}</id><name>{name_e}</name></repository>"));
    }
    x.push_str("</list>");
    Reply::xml(x)
}

fn registry_detail(state: &State, id: &str) -> Reply {
    let id = percent_decode_str(id).decode_utf8_lossy().into_owned();
    let entry: Option<(String, Vec<(String, String)>)> = state
        .script
        .repositories
        .iter()
        .find(|r| r.id == id)
        .map(|r| (r.name.clone(), vec![("OAI-PMH".to_string(), format!("{}/oai/{}", state.bases[0], r.id))]))
        .or_else(|| {
            state.script.registry_only.iter().find(|r| r.id == id).map(|r| (r.name.clone(), r.apis.clone()))
        });
    let Some((name, apis)) = entry else { return Reply::new(404) };
    let esc = |s: &str| {
        let mut o = String::new();
        escape_xml(s, &mut o);
        o
    };
    let mut x = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?><r3d:re3data xmlns:r3d=\"http://www.re3data.org/schema/2-2\"><r3d:repository><r3d:re3data.orgIdentifier>{}</r3d:re3data.orgIdentifier><r3d:repositoryName language=\"eng\">{}</r3d:repositoryName>",
        esc(&id),
        esc(&name)
    );
    for (kind, url) in apis {
        x.push_str(&format!("<r3d:api apiType=\"{}\">{}</r3d:api>", esc(&kind), esc(&url)));
    }
    x.push_str("<r3d:certificate>CoreTrustSeal</r3d:certificate></r3d:repository></r3d:re3data>");
    Reply::xml(x)
}

/// Absolute URL of `hop` for `doi` on the listener that hop names.
fn hop_url(state: &State, doi: &str, route: &ResolverRoute, hop: usize) -> String {
    let host = route.hops.get(hop).map(|h| h.host).unwrap_or(0) as usize;
    let mut u = url::Url::parse(&state.bases[host]).expect("loopback base parses");
    {
        let mut segs = u.path_segments_mut().expect("http base");
        segs.pop_if_empty().push("doi").extend(doi.split('/'));
        if hop > 0 {
            segs.push(&format!("~{hop}"));
        }
    }
    u.into()
}

fn expand(state: &State, doi: &str, route: &ResolverRoute, template: &str) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let Some(close) = tail.find('}') else { break };
        let token = &tail[1..close];
        let replaced = match token.split_once(':') {
            Some(("hop", n)) => n.parse().ok().map(|n| hop_url(state, doi, route, n)),
            Some(("host", n)) => n.parse::<usize>().ok().and_then(|n| state.bases.get(n).cloned()),
            _ => None,
        };
        match replaced {
            Some(r) => out.push_str(&r),
            None => out.push_str(&tail[..=close]),
        }
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    out
}

fn resolver(state: &State, rest: &str, accept: Option<&str>) -> Reply {
    let (doi_path, hop) = match rest.rsplit_once("/~") {
        Some((d, n)) if n.parse::<usize>().is_ok() => (d, n.parse::<usize>().unwrap_or(0)),
        _ => (rest, 0),
    };
    let doi = percent_decode_str(doi_path).decode_utf8_lossy().into_owned();
    let Some(route) = state.script.resolver_routes.get(&doi) else { return Reply::new(404) };
    let Some(step): Option<&ScriptedResponse> = route.hops.get(hop) else { return Reply::new(404) };
    if let Some(required) = &step.require_accept {
        if accept != Some(required.as_str()) {
            let mut r = Reply::new(406);
            r.headers.push(("Content-Type", "text/plain".into()));
            return r;
        }
    }
    let mut r = Reply::new(step.status);
    if let Some(ct) = &step.content_type {
        r.headers.push(("Content-Type", ct.clone()));
    }
    if let Some(loc) = &step.location {
        r.headers.push(("Location", expand(state, &doi, route, loc)));
    }
    if let Some(link) = &step.link {
        r.headers.push(("Link", expand(state, &doi, route, link)));
    }
    r.filler = step.body_len;
    r.stall = Duration::from_millis(step.stall_ms);
    if step.stall_ms > 0 {
        r.close = true;
    }
    r
}
