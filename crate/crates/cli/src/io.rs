//! Plain-text channel and interferogram files.
//!
//! Values are written with 17 significant digits, so reading a file back
//! reproduces every sample bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fbd_core::model::pairs;
use fbd_core::{ChannelSet, InterferogramSet, Sequence, SourceAutocorr};

use crate::error::CliError;

const CHANNEL_TAG: &str = "fbd-channelset";
const INTERFEROGRAM_TAG: &str = "fbd-interferograms";

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads `key=value` fields from a `# tag k=v ...` header line.
fn header_fields<'a>(line: &'a str, tag: &str) -> Result<Vec<(&'a str, &'a str)>, CliError> {
    let rest = line
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|l| l.strip_prefix(tag))
        .ok_or_else(|| CliError::Format(format!("expected header `# {tag} ...`, found {line:?}")))?;
    rest.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| CliError::Format(format!("malformed header field {kv:?}")))
        })
        .collect()
}

fn field<T: std::str::FromStr>(fields: &[(&str, &str)], key: &str) -> Result<T, CliError> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| CliError::Format(format!("header lacks `{key}=`")))?;
    raw.parse()
        .map_err(|_| CliError::Format(format!("bad header value {key}={raw}")))
}

fn parse_value(s: &str, line: usize) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Format(format!("line {line}: cannot parse {s:?} as a number")))
}

/// Data lines with their 1-based line numbers, skipping blanks.
fn body(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn format_channels(c: &ChannelSet) -> String {
    let mut out = format!("# {CHANNEL_TAG} nr={} origin={} len={}\n", c.nr(), c.origin(), c.span());
    for t in 0..c.span() {
        let row: Vec<String> = c.channels().iter().map(|s| fmt_value(s.samples()[t])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_channels(text: &str) -> Result<ChannelSet, CliError> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| CliError::Format("empty channel file".into()))?;
    let fields = header_fields(header, CHANNEL_TAG)?;
    let nr: usize = field(&fields, "nr")?;
    let origin: isize = field(&fields, "origin")?;
    let len: usize = field(&fields, "len")?;
    let mut columns = vec![Vec::with_capacity(len); nr];
    let mut rows = 0;
    for (line, l) in body(text) {
        let values: Vec<&str> = l.split(',').collect();
        if values.len() != nr {
            return Err(CliError::Format(format!(
                "line {line}: expected {nr} columns, found {}",
                values.len()
            )));
        }
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(parse_value(v, line)?);
        }
        rows += 1;
    }
    if rows != len {
        return Err(CliError::Format(format!(
            "header says len={len} but the file has {rows} rows"
        )));
    }
    let signals = columns
        .into_iter()
        .map(|c| Sequence::new(origin, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ChannelSet::new(signals)?)
}

pub fn format_interferograms(g: &InterferogramSet) -> String {
    let m = g.maxlag() as isize;
    let mut out = format!("# {INTERFEROGRAM_TAG} nr={} maxlag={}\n", g.nr(), g.maxlag());
    for ((i, j), e) in pairs(g.nr()).zip(g.entries()) {
        writeln!(out, "# pair {i} {j}").unwrap();
        for t in -m..=m {
            writeln!(out, "{t},{}", fmt_value(e.at(t))).unwrap();
        }
    }
    out
}

pub fn parse_interferograms(text: &str) -> Result<InterferogramSet, CliError> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| CliError::Format("empty interferogram file".into()))?;
    let fields = header_fields(header, INTERFEROGRAM_TAG)?;
    let nr: usize = field(&fields, "nr")?;
    let maxlag: usize = field(&fields, "maxlag")?;
    let m = maxlag as isize;
    let mut expected = pairs(nr);
    let mut entries: Vec<Vec<f64>> = Vec::new();
    for (line, l) in body(text) {
        if let Some(rest) = l.strip_prefix('#') {
            let ij: Vec<usize> = rest
                .trim()
                .strip_prefix("pair")
                .map(|p| p.split_whitespace().filter_map(|v| v.parse().ok()).collect())
                .unwrap_or_default();
            let want = expected
                .next()
                .ok_or_else(|| CliError::Format(format!("line {line}: more pairs than nr={nr} allows")))?;
            if ij != [want.0, want.1] {
                return Err(CliError::Format(format!(
                    "line {line}: expected `# pair {} {}`",
                    want.0, want.1
                )));
            }
            entries.push(Vec::with_capacity(2 * maxlag + 1));
            continue;
        }
        let current = entries
            .last_mut()
            .ok_or_else(|| CliError::Format(format!("line {line}: value before the first `# pair` line")))?;
        let (lag, v) = l
            .split_once(',')
            .ok_or_else(|| CliError::Format(format!("line {line}: expected `lag,value`")))?;
        let lag: isize = lag
            .trim()
            .parse()
            .map_err(|_| CliError::Format(format!("line {line}: bad lag {lag:?}")))?;
        if lag != -m + current.len() as isize {
            return Err(CliError::Format(format!("line {line}: lag {lag} out of order")));
        }
        current.push(parse_value(v, line)?);
    }
    if entries.len() != nr * (nr + 1) / 2 || entries.iter().any(|e| e.len() != 2 * maxlag + 1) {
        return Err(CliError::Format(format!(
            "expected {} pairs of {} lags each",
            nr * (nr + 1) / 2,
            2 * maxlag + 1
        )));
    }
    let entries = entries
        .into_iter()
        .map(|e| Sequence::new(-m, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InterferogramSet::new(nr, maxlag, entries)?)
}

/// A source auto-correlation as a one-channel file on `{-maxlag..maxlag}`.
pub fn format_autocorr(sa: &SourceAutocorr) -> String {
    format_channels(&ChannelSet::new(vec![sa.to_sequence()]).expect("one channel"))
}

pub fn read_channels(path: &Path) -> Result<ChannelSet, CliError> {
    parse_channels(&read(path)?).map_err(|e| e.in_file(path))
}

pub fn read_interferograms(path: &Path) -> Result<InterferogramSet, CliError> {
    parse_interferograms(&read(path)?).map_err(|e| e.in_file(path))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
