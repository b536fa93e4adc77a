//! Shared helpers for the quick-xml based report parsers.

use quick_xml::events::BytesStart;

use super::MalformedReport;

fn malformed(reason: impl Into<String>) -> MalformedReport {
    MalformedReport::new("xml", reason)
}

/// Open-element bookkeeping: one root, no unclosed elements at EOF.
#[derive(Default)]
pub(crate) struct ElementStack {
    names: Vec<String>,
    root_seen: bool,
}

impl ElementStack {
    pub fn open(&mut self, e: &BytesStart<'_>) -> Result<String, MalformedReport> {
        if self.names.is_empty() {
            if self.root_seen {
                return Err(malformed("more than one root element"));
            }
            self.root_seen = true;
        }
        let name = std::str::from_utf8(e.local_name().as_ref())
            .map_err(|_| malformed("element name is not UTF-8"))?
            .to_string();
        self.names.push(name.clone());
        Ok(name)
    }

    pub fn close_empty(&mut self) {
        self.names.pop();
    }

    pub fn close(&mut self) -> Result<String, MalformedReport> {
        self.names.pop().ok_or_else(|| malformed("unbalanced end tag"))
    }

    pub fn depth(&self) -> usize {
        self.names.len()
    }

    pub fn parent(&self) -> Option<&str> {
        self.names.iter().rev().nth(1).map(String::as_str)
    }

    pub fn finish(&self) -> Result<(), MalformedReport> {
        if !self.root_seen {
            return Err(malformed("no root element"));
        }
        if let Some(open) = self.names.last() {
            return Err(malformed(format!("unexpected end of input inside `{open}`")));
        }
        Ok(())
    }
}

pub(crate) fn attr(e: &BytesStart<'_>, key: &str) -> Result<Option<String>, MalformedReport> {
    for a in e.attributes() {
        let a = a.map_err(|err| malformed(err.to_string()))?;
        if a.key.local_name().as_ref() == key.as_bytes() {
            let value = a.unescape_value().map_err(|err| malformed(err.to_string()))?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

pub(crate) fn attr_u64(e: &BytesStart<'_>, key: &str) -> Result<Option<u64>, MalformedReport> {
    attr(e, key)?
        .map(|v| v.trim().parse::<u64>().map_err(|_| malformed(format!("attribute `{key}` is not a count: `{v}`"))))
        .transpose()
}
