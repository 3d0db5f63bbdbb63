//! Time-tag file formats.
//!
//! Binary layout (little-endian), bit-exact:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TTAG"
//! 4       2     format version (u16) = 1
//! 6       2     channel count (u16)
//! 8       8     duration in ps (u64)
//! 16      9·N   records: channel (u8) + timestamp in ps (u64)
//! ```
//!
//! The CSV alternative is `channel,timestamp_ps` with a header line.

use super::{TimeTag, TimeTagStream};
use crate::error::{Error, Result};
use std::io::{BufRead, Read, Write};

pub const MAGIC: [u8; 4] = *b"TTAG";
pub const FORMAT_VERSION: u16 = 1;

pub fn write_binary<W: Write>(stream: &TimeTagStream, mut out: W) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(stream.channel_count() as u16).to_le_bytes())?;
    let duration_ps = (stream.duration_s * 1e12).round() as u64;
    out.write_all(&duration_ps.to_le_bytes())?;
    let mut buf = Vec::with_capacity(9 * stream.len().min(1 << 20));
    for e in stream.events() {
        buf.push(e.channel);
        buf.extend_from_slice(&e.timestamp_ps.to_le_bytes());
        if buf.len() >= 9 << 20 {
            out.write_all(&buf)?;
            buf.clear();
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<TimeTagStream> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(|_| {
        Error::TimeTagFormat("file shorter than the 16-byte header".into())
    })?;
    if header[0..4] != MAGIC {
        return Err(Error::TimeTagFormat("bad magic, expected TTAG".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::TimeTagFormat(format!(
            "unsupported version {version}"
        )));
    }
    let channels = u16::from_le_bytes([header[6], header[7]]) as usize;
    if channels == 0 || channels > 255 {
        return Err(Error::TimeTagFormat(format!(
            "channel count {channels} out of range"
        )));
    }
    let duration_ps = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() % 9 != 0 {
        return Err(Error::TimeTagFormat(format!(
            "record section of {} bytes is not a multiple of 9",
            body.len()
        )));
    }
    let mut events = Vec::with_capacity(body.len() / 9);
    for rec in body.chunks_exact(9) {
        events.push(TimeTag {
            channel: rec[0],
            timestamp_ps: u64::from_le_bytes(rec[1..9].try_into().unwrap()),
        });
    }
    TimeTagStream::new(
        events,
        duration_ps as f64 * 1e-12,
        (0..channels).map(|i| format!("ch{i}")).collect(),
    )
}

pub fn write_csv<W: Write>(stream: &TimeTagStream, mut out: W) -> Result<()> {
    out.write_all(b"channel,timestamp_ps\n")?;
    for e in stream.events() {
        writeln!(out, "{},{}", e.channel, e.timestamp_ps)?;
    }
    Ok(())
}

/// Read the CSV form; the header line is optional, the duration is taken as
/// the last timestamp unless supplied.
pub fn read_csv<R: BufRead>(input: R, duration_s: Option<f64>) -> Result<TimeTagStream> {
    let mut events = Vec::new();
    let mut max_channel = 0u8;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("channel") {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(ch), Some(ts)) = (parts.next(), parts.next()) else {
            return Err(Error::TimeTagFormat(format!(
                "line {}: expected channel,timestamp_ps",
                lineno + 1
            )));
        };
        let channel: u8 = ch.trim().parse().map_err(|_| {
            Error::TimeTagFormat(format!("line {}: bad channel '{ch}'", lineno + 1))
        })?;
        let timestamp_ps: u64 = ts.trim().parse().map_err(|_| {
            Error::TimeTagFormat(format!("line {}: bad timestamp '{ts}'", lineno + 1))
        })?;
        max_channel = max_channel.max(channel);
        events.push(TimeTag {
            channel,
            timestamp_ps,
        });
    }
    let duration =
        duration_s.unwrap_or_else(|| events.last().map_or(0.0, |e| e.timestamp_ps as f64 * 1e-12));
    TimeTagStream::new(
        events,
        duration,
        (0..=max_channel).map(|i| format!("ch{i}")).collect(),
    )
}
