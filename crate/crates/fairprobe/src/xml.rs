//! Small helpers over quick-xml shared by the Datacite, OAI-PMH and
//! registry parsers. Everything matches on local names so namespace
//! prefixes never matter.

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesRef, BytesStart, Event};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed XML: {0}")]
pub struct XmlError(pub String);

impl From<quick_xml::Error> for XmlError {
    fn from(e: quick_xml::Error) -> Self {
        XmlError(e.to_string())
    }
}

impl From<quick_xml::events::attributes::AttrError> for XmlError {
    fn from(e: quick_xml::events::attributes::AttrError) -> Self {
        XmlError(e.to_string())
    }
}

pub fn local_name(e: &BytesStart<'_>) -> String {
    e.local_name().into_inner().to_string()
}

/// Unescaped value of the attribute with the given local name.
pub fn attribute(e: &BytesStart<'_>, name: &str) -> Result<Option<String>, XmlError> {
    for a in e.attributes() {
        let a = a?;
        if a.key.local_name().into_inner() == name {
            let v = a.normalized_value(quick_xml::XmlVersion::Implicit1_0)?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn resolve_ref(r: &BytesRef<'_>) -> Result<String, XmlError> {
    if let Some(c) = r.resolve_char_ref()? {
        return Ok(c.to_string());
    }
    let name: &str = r;
    resolve_predefined_entity(name)
        .map(str::to_string)
        .ok_or_else(|| XmlError(format!("unknown entity &{name};")))
}

/// Appends the character data carried by `event` (text, CDATA or an
/// entity reference) to `buf`. Returns false for non-text events.
pub fn append_text(event: &Event<'_>, buf: &mut String) -> Result<bool, XmlError> {
    match event {
        Event::Text(t) => buf.push_str(&t.xml10_content()),
        Event::CData(c) => buf.push_str(&c.xml10_content()),
        Event::GeneralRef(r) => buf.push_str(&resolve_ref(r)?),
        _ => return Ok(false),
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quick_xml::Reader;

    #[test]
    fn text_with_entities_and_cdata() {
        let mut r = Reader::from_str("<a x='1&amp;2'>a&amp;b&#x41;<![CDATA[<c>]]></a>");
        let mut buf = String::new();
        let mut attr = None;
        loop {
            let ev = r.read_event().unwrap();
            if let Event::Start(s) = &ev {
                attr = attribute(s, "x").unwrap();
            }
            if matches!(ev, Event::Eof) {
                break;
            }
            append_text(&ev, &mut buf).unwrap();
        }
        assert_eq!(buf, "a&bA<c>");
        assert_eq!(attr.as_deref(), Some("1&2"));
    }
}
