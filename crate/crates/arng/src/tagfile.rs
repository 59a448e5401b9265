//! Binary tag-stream codec and plain-text export.
//!
//! Layout: a 16-byte header (8-byte magic `ARNGTS01`, then the clock tick
//! in femtoseconds as u64 little-endian), followed by one 9-byte record
//! per event: channel as u8 (0 = blue, 1 = red) and the tick count as u64
//! little-endian.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::error::{ArngError, Result};
use crate::stream::{Channel, Origin, TagEvent, TagStream};

pub const MAGIC: &[u8; 8] = b"ARNGTS01";
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 9;

pub fn encode(stream: &TagStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.events.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&stream.clock_tick_fs.to_le_bytes());
    for e in &stream.events {
        out.push(e.channel.as_u8());
        out.extend_from_slice(&e.tick.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TagStream> {
    if bytes.len() < HEADER_LEN {
        return Err(ArngError::Format(format!(
            "truncated header: {} bytes, need {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(ArngError::Format("bad magic; not a tag-stream file".into()));
    }
    let clock_tick_fs = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if clock_tick_fs == 0 {
        return Err(ArngError::Format("clock tick of zero".into()));
    }
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(RECORD_LEN) {
        return Err(ArngError::Format(format!(
            "body length {} is not a multiple of the {RECORD_LEN}-byte record",
            body.len()
        )));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    let mut prev: Option<u64> = None;
    for rec in body.chunks_exact(RECORD_LEN) {
        let channel = Channel::from_u8(rec[0])?;
        let tick = u64::from_le_bytes(rec[1..9].try_into().unwrap());
        if let Some(p) = prev {
            if tick < p {
                return Err(ArngError::Format(format!(
                    "ticks not sorted: {tick} after {p}"
                )));
            }
        }
        prev = Some(tick);
        events.push(TagEvent {
            channel,
            tick,
            // origin labels are simulator-internal and not serialized
            origin: Origin::Astronomical,
        });
    }
    Ok(TagStream {
        events,
        clock_tick_fs,
        config: None,
    })
}

pub fn write_stream(path: &Path, stream: &TagStream) -> Result<()> {
    fs::write(path, encode(stream))?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<TagStream> {
    decode(&fs::read(path)?)
}

/// Two-column text dump: channel digit and time in seconds per line.
pub fn write_text(path: &Path, stream: &TagStream) -> Result<()> {
    let tick_s = stream.clock_tick_s();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# channel time_s (clock tick {} fs)", stream.clock_tick_fs)?;
    for e in &stream.events {
        writeln!(w, "{} {:.12}", e.channel.as_u8(), e.tick as f64 * tick_s)?;
    }
    w.flush()?;
    Ok(())
}
