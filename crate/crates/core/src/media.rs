//! Media-type matching and `Link` header parsing.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Strips parameters and surrounding whitespace from a media type:
/// `" IMAGE/JPEG; charset=binary"` becomes `"IMAGE/JPEG"`.
pub fn bare_media_type(value: &str) -> &str {
    value.split(';').next().unwrap_or("").trim()
}

/// True when `value` is an `image/<subtype>` media type, ignoring case and
/// parameters. The literal wildcard `image/*` counts as a match.
pub fn is_image_media_type(value: &str) -> bool {
    let bare = bare_media_type(value);
    match bare.split_once('/') {
        Some((top, sub)) => {
            top.trim().eq_ignore_ascii_case("image")
                && !sub.trim().is_empty()
                && !sub.contains(char::is_whitespace)
        }
        None => false,
    }
}

/// True when `value` is literally the `image/*` wildcard.
pub fn is_image_wildcard(value: &str) -> bool {
    bare_media_type(value).eq_ignore_ascii_case("image/*")
}

/// One `<target>; param=value; ...` element of a `Link` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkValue {
    pub target: String,
    /// Parameter names are lowercased; values are unquoted.
    pub params: Vec<(String, String)>,
}

impl LinkValue {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Parses a `Link` header field value into its link-values.
///
/// Lenient: elements that do not start with `<...>` are skipped, so a
/// garbled header yields fewer links rather than an error.
pub fn parse_link_header(header: &str) -> Vec<LinkValue> {
    let mut out = Vec::new();
    let mut rest = header;
    loop {
        rest = rest.trim_start_matches(|c: char| c == ',' || c.is_whitespace());
        if rest.is_empty() {
            break;
        }
        if !rest.starts_with('<') {
            rest = skip_element(rest);
            continue;
        }
        let Some(end) = rest.find('>') else { break };
        let target = rest[1..end].trim().to_string();
        rest = &rest[end + 1..];
        let mut params = Vec::new();
        loop {
            rest = rest.trim_start();
            if !rest.starts_with(';') {
                break;
            }
            rest = rest[1..].trim_start();
            let name_end = rest
                .find(['=', ';', ','])
                .unwrap_or(rest.len());
            let name = rest[..name_end].trim().to_ascii_lowercase();
            rest = &rest[name_end..];
            let mut value = String::new();
            if let Some(after_eq) = rest.strip_prefix('=') {
                let after_eq = after_eq.trim_start();
                if let Some(quoted) = after_eq.strip_prefix('"') {
                    let mut chars = quoted.char_indices();
                    let mut consumed = quoted.len();
                    while let Some((i, c)) = chars.next() {
                        match c {
                            '\\' => {
                                if let Some((_, n)) = chars.next() {
                                    value.push(n);
                                }
                            }
                            '"' => {
                                consumed = i + 1;
                                break;
                            }
                            _ => value.push(c),
                        }
                    }
                    rest = &quoted[consumed..];
                } else {
                    let v_end = after_eq
                        .find([';', ','])
                        .unwrap_or(after_eq.len());
                    value = after_eq[..v_end].trim().to_string();
                    rest = &after_eq[v_end..];
                }
            }
            if !name.is_empty() {
                params.push((name, value));
            }
        }
        out.push(LinkValue { target, params });
        rest = skip_element(rest);
    }
    out
}

// Advances past the current element up to (not including) the next
// top-level comma, honouring quoted strings and angle brackets.
fn skip_element(s: &str) -> &str {
    let mut in_quotes = false;
    let mut in_angle = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_quotes => escaped = true,
            '"' if !in_angle => in_quotes = !in_quotes,
            '<' if !in_quotes => in_angle = true,
            '>' if !in_quotes => in_angle = false,
            ',' if !in_quotes && !in_angle => return &s[i..],
            _ => {}
        }
    }
    ""
}
