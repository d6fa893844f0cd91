//! Detector time tags and their on-disk formats.
//!
//! Binary layout (little endian): magic `TTAG`, `u8` version (1), `u32`
//! record count (0 when unknown), then 9-byte records `u8 channel`,
//! `u64 time_ps`.

use std::io::{self, BufRead, Read, Seek, SeekFrom, Write};

use crate::error::{Error, Result};

/// One detection event. Ordering is by time, then channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    /// Picoseconds since the start of the run.
    pub time: u64,
    pub channel: u8,
}

impl TimeTag {
    pub fn new(channel: u8, time: u64) -> Self {
        Self { time, channel }
    }
}

pub const TTAG_MAGIC: [u8; 4] = *b"TTAG";
pub const TTAG_VERSION: u8 = 1;
const HEADER_LEN: usize = 9;
const RECORD_LEN: usize = 9;

/// Index of the first tag that is earlier than its predecessor.
pub fn first_unsorted(tags: &[TimeTag]) -> Option<usize> {
    tags.windows(2).position(|w| w[1].time < w[0].time).map(|i| i + 1)
}

pub(crate) fn ensure_sorted(tags: &[TimeTag], stream: &'static str) -> Result<()> {
    match first_unsorted(tags) {
        Some(index) => Err(Error::Unsorted { stream, index }),
        None => Ok(()),
    }
}

/// Incremental TTAG writer. The record count is written as 0 and patched by
/// [`TtagWriter::finish_seekable`] when the sink can seek.
pub struct TtagWriter<W: Write> {
    inner: W,
    count: u64,
}

impl<W: Write> TtagWriter<W> {
    pub fn new(mut inner: W) -> Result<Self> {
        inner.write_all(&TTAG_MAGIC)?;
        inner.write_all(&[TTAG_VERSION])?;
        inner.write_all(&0u32.to_le_bytes())?;
        Ok(Self { inner, count: 0 })
    }

    pub fn write(&mut self, tags: &[TimeTag]) -> Result<()> {
        let mut buf = Vec::with_capacity(tags.len() * RECORD_LEN);
        for t in tags {
            buf.push(t.channel);
            buf.extend_from_slice(&t.time.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.count += tags.len() as u64;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Flushes and returns the sink, leaving the count field at 0.
    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

impl<W: Write + Seek> TtagWriter<W> {
    /// Flushes and patches the record count (left at 0 above `u32::MAX`).
    pub fn finish_seekable(mut self) -> Result<W> {
        if let Ok(n) = u32::try_from(self.count) {
            let end = self.inner.stream_position()?;
            self.inner.seek(SeekFrom::Start(5))?;
            self.inner.write_all(&n.to_le_bytes())?;
            self.inner.seek(SeekFrom::Start(end))?;
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Writes a complete TTAG image with the record count filled in.
pub fn write_ttag<W: Write>(mut w: W, tags: &[TimeTag]) -> Result<()> {
    let count = u32::try_from(tags.len()).unwrap_or(0);
    w.write_all(&TTAG_MAGIC)?;
    w.write_all(&[TTAG_VERSION])?;
    w.write_all(&count.to_le_bytes())?;
    let mut writer = TtagWriter { inner: w, count: 0 };
    writer.write(tags)?;
    writer.finish()?;
    Ok(())
}

/// Header of a TTAG stream: the declared record count (`None` when 0).
pub fn read_ttag_header<R: Read>(r: &mut R) -> Result<Option<u32>> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format("TTAG header truncated".into()),
        _ => Error::Io(e),
    })?;
    if head[..4] != TTAG_MAGIC {
        return Err(Error::Format("missing TTAG magic".into()));
    }
    if head[4] != TTAG_VERSION {
        return Err(Error::Format(format!("unsupported TTAG version {} (expected {TTAG_VERSION})", head[4])));
    }
    let n = u32::from_le_bytes(head[5..9].try_into().expect("4 bytes"));
    Ok((n != 0).then_some(n))
}

pub fn read_ttag<R: Read>(mut r: R) -> Result<Vec<TimeTag>> {
    let declared = read_ttag_header(&mut r)?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::Format(format!("TTAG body of {} bytes is not a whole number of records", body.len())));
    }
    let n = body.len() / RECORD_LEN;
    if let Some(d) = declared {
        if d as usize != n {
            return Err(Error::Format(format!("TTAG header declares {d} records, found {n}")));
        }
    }
    Ok(body
        .chunks_exact(RECORD_LEN)
        .map(|c| TimeTag {
            channel: c[0],
            time: u64::from_le_bytes(c[1..9].try_into().expect("8 bytes")),
        })
        .collect())
}

pub fn write_tags_csv<W: Write>(mut w: W, tags: &[TimeTag]) -> Result<()> {
    writeln!(w, "channel,time_ps")?;
    for t in tags {
        writeln!(w, "{},{}", t.channel, t.time)?;
    }
    Ok(())
}

pub fn read_tags_csv<R: BufRead>(r: R) -> Result<Vec<TimeTag>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["channel", "time_ps"] {
        return Err(Error::Format("expected header `channel,time_ps`".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Format(format!("row {}: malformed tag", row + 2));
        let channel = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let time = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        out.push(TimeTag { time, channel });
    }
    Ok(out)
}
