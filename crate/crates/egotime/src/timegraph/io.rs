//! Delimited text formats for edges, node registrations and recommendation
//! impressions.
//!
//! All three readers accept comma- or tab-separated input (sniffed from the
//! first non-empty line) with an optional header row. A first row whose
//! timestamp column does not parse as an integer is treated as a header.

use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::{EdgeRecord, NodeMeta, Origin, Timestamp};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn malformed(line: u64, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

/// Opens a CSV reader after sniffing the delimiter.
fn sniff<'a, R: Read + 'a>(reader: R) -> Result<csv::Reader<Box<dyn Read + 'a>>, ParseError> {
    let mut buf = BufReader::new(reader);
    let mut head = Vec::new();
    // Peek the first non-empty line without losing it.
    loop {
        let mut line = Vec::new();
        let n = buf.read_until(b'\n', &mut line)?;
        head.extend_from_slice(&line);
        if n == 0 || line.iter().any(|b| !b.is_ascii_whitespace()) {
            break;
        }
    }
    let delimiter = if head.contains(&b'\t') { b'\t' } else { b',' };
    let chained: Box<dyn Read + 'a> = Box::new(std::io::Cursor::new(head).chain(buf));
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(delimiter)
        .from_reader(chained))
}

/// Iterates non-empty rows with their 1-based line numbers, skipping a header.
fn rows<'a, R: Read + 'a>(
    reader: R,
    time_column: usize,
) -> Result<impl Iterator<Item = Result<(u64, csv::StringRecord), ParseError>> + 'a, ParseError> {
    let rdr = sniff(reader)?;
    let mut first = true;
    Ok(rdr.into_records().filter_map(move |r| {
        let rec = match r {
            Ok(rec) => rec,
            Err(e) => return Some(Err(e.into())),
        };
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            return None;
        }
        if std::mem::take(&mut first)
            && rec
                .get(time_column)
                .is_some_and(|v| v.parse::<Timestamp>().is_err())
        {
            return None;
        }
        Some(Ok((line, rec)))
    }))
}

fn parse_time(line: u64, field: Option<&str>, what: &str) -> Result<Timestamp, ParseError> {
    let raw = field.ok_or_else(|| malformed(line, format!("missing {what}")))?;
    let t: Timestamp = raw
        .parse()
        .map_err(|_| malformed(line, format!("{what} {raw:?} is not an integer")))?;
    if t < 0 {
        return Err(malformed(line, format!("{what} {t} is negative")));
    }
    Ok(t)
}

fn parse_node(line: u64, field: Option<&str>, what: &str) -> Result<String, ParseError> {
    match field {
        Some(v) if !v.is_empty() => Ok(v.to_owned()),
        _ => Err(malformed(line, format!("missing {what}"))),
    }
}

/// Reads `src,dst,created_at[,origin]` rows. `origin` is `s`, `r` or empty.
pub fn read_edges<R: Read>(reader: R) -> Result<Vec<EdgeRecord>, ParseError> {
    let mut out = Vec::new();
    for row in rows(reader, 2)? {
        let (line, rec) = row?;
        if rec.len() < 3 || rec.len() > 4 {
            return Err(malformed(line, format!("expected 3 or 4 columns, found {}", rec.len())));
        }
        let origin = match rec.get(3) {
            None => Origin::Unknown,
            Some(code) => Origin::parse(code)
                .ok_or_else(|| malformed(line, format!("unknown origin {code:?}")))?,
        };
        out.push(EdgeRecord {
            src: parse_node(line, rec.get(0), "src")?,
            dst: parse_node(line, rec.get(1), "dst")?,
            created_at: parse_time(line, rec.get(2), "created_at")?,
            origin,
            seq: out.len() as u64,
        });
    }
    Ok(out)
}

/// Reads `node,registered_at` rows.
pub fn read_nodes<R: Read>(reader: R) -> Result<Vec<NodeMeta>, ParseError> {
    let mut out = Vec::new();
    for row in rows(reader, 1)? {
        let (line, rec) = row?;
        if rec.len() != 2 {
            return Err(malformed(line, format!("expected 2 columns, found {}", rec.len())));
        }
        out.push(NodeMeta {
            node: parse_node(line, rec.get(0), "node")?,
            registered_at: parse_time(line, rec.get(1), "registered_at")?,
        });
    }
    Ok(out)
}

/// A recommendation shown to `user` suggesting `candidate`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Impression {
    pub user: String,
    pub candidate: String,
    pub shown_at: Timestamp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ImpressionRead {
    pub impressions: Vec<Impression>,
    /// Line numbers of rows that could not be parsed.
    pub skipped_lines: Vec<u64>,
}

/// Reads `user,candidate,shown_at` rows. Malformed rows are skipped and
/// reported rather than failing the read.
pub fn read_impressions<R: Read>(reader: R) -> Result<ImpressionRead, ParseError> {
    let mut out = ImpressionRead::default();
    for row in rows(reader, 2)? {
        let (line, rec) = match row {
            Ok(r) => r,
            Err(ParseError::Csv(e)) => {
                out.skipped_lines
                    .push(e.position().map_or(0, |p| p.line()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let parsed = (|| {
            if rec.len() != 3 {
                return None;
            }
            Some(Impression {
                user: parse_node(line, rec.get(0), "user").ok()?,
                candidate: parse_node(line, rec.get(1), "candidate").ok()?,
                shown_at: parse_time(line, rec.get(2), "shown_at").ok()?,
            })
        })();
        match parsed {
            Some(imp) => out.impressions.push(imp),
            None => out.skipped_lines.push(line),
        }
    }
    Ok(out)
}

/// Writes edges with a header, in the given order.
pub fn write_edges<'a, W: Write>(
    writer: W,
    edges: impl IntoIterator<Item = &'a EdgeRecord>,
) -> Result<(), ParseError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst", "created_at", "origin"])?;
    for e in edges {
        w.write_record([
            e.src.as_str(),
            e.dst.as_str(),
            &e.created_at.to_string(),
            e.origin.code(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_nodes<'a, W: Write>(
    writer: W,
    nodes: impl IntoIterator<Item = &'a NodeMeta>,
) -> Result<(), ParseError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "registered_at"])?;
    for n in nodes {
        w.write_record([n.node.as_str(), &n.registered_at.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
