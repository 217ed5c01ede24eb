//! File formats: binary and CSV time tags, and the CSV tables emitted for
//! scans, histograms, offset series and stability curves.
//!
//! Binary time tags: the 8-byte magic `QTAGS001`, a little-endian `u16`
//! channel id, then little-endian `i64` timestamps in picoseconds.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

use crate::coexistence::CarPoint;
use crate::coincidence::CoincidenceHistogram;
use crate::sim::{SimError, TimeTagStream};
use crate::stability::StabilityCurve;
use crate::twtt::{OffsetSample, OffsetSeries};

pub const TIMETAG_MAGIC: &[u8; 8] = b"QTAGS001";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("not a time-tag file (bad magic)")]
    BadMagic,
    #[error(transparent)]
    Stream(#[from] SimError),
}

/// CSV number formatting: shortest round-trip form, `inf` for unbounded.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_timetags_binary<W: Write>(mut w: W, stream: &TimeTagStream) -> Result<(), FormatError> {
    w.write_all(TIMETAG_MAGIC)?;
    w.write_all(&stream.channel_id.to_le_bytes())?;
    let mut buf = Vec::with_capacity(stream.len() * 8);
    for t in stream.tags() {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a binary stream; its span runs from 0 to the last tag.
pub fn read_timetags_binary<R: Read>(mut r: R) -> Result<TimeTagStream, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 10 || &bytes[..8] != TIMETAG_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let channel = u16::from_le_bytes([bytes[8], bytes[9]]);
    let body = &bytes[10..];
    if body.len() % 8 != 0 {
        return Err(FormatError::Malformed {
            line: 0,
            msg: format!("{} trailing bytes", body.len() % 8),
        });
    }
    let tags: Vec<i64> = body
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(TimeTagStream::from_tags(channel, tags)?)
}

/// `channel,timestamp_ps`, streams in the given order.
pub fn write_timetags_csv<W: Write>(mut w: W, streams: &[&TimeTagStream]) -> Result<(), FormatError> {
    writeln!(w, "channel,timestamp_ps")?;
    for s in streams {
        for t in s.tags() {
            writeln!(w, "{},{}", s.channel_id, t)?;
        }
    }
    Ok(())
}

/// One stream per channel, in channel order.
pub fn read_timetags_csv<R: BufRead>(r: R) -> Result<Vec<TimeTagStream>, FormatError> {
    let mut by_channel: BTreeMap<u16, Vec<i64>> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("channel")) {
            continue;
        }
        let bad = |msg: String| FormatError::Malformed { line: i + 1, msg };
        let (c, t) = line.split_once(',').ok_or_else(|| bad(format!("expected two fields, got `{line}`")))?;
        let c: u16 = c.trim().parse().map_err(|_| bad(format!("bad channel `{c}`")))?;
        let t: i64 = t.trim().parse().map_err(|_| bad(format!("bad timestamp `{t}`")))?;
        by_channel.entry(c).or_default().push(t);
    }
    by_channel
        .into_iter()
        .map(|(c, tags)| Ok(TimeTagStream::from_tags(c, tags)?))
        .collect()
}

/// `length_km,power_mw,car`.
pub fn write_car_csv<W: Write>(mut w: W, points: &[CarPoint]) -> Result<(), FormatError> {
    writeln!(w, "length_km,power_mw,car")?;
    for p in points {
        writeln!(w, "{},{},{}", fmt_f64(p.length_km), fmt_f64(p.power_mw), fmt_f64(p.car))?;
    }
    Ok(())
}

/// `bin_center_ps,counts`.
pub fn write_histogram_csv<W: Write>(mut w: W, h: &CoincidenceHistogram) -> Result<(), FormatError> {
    writeln!(w, "bin_center_ps,counts")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(h.bin_center_ps(k)), c)?;
    }
    Ok(())
}

/// Comment header of an offset CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OffsetHeader {
    pub scenario_hash: String,
    pub seed: u64,
    /// Unix seconds; omitted when `None`.
    pub created_unix_s: Option<u64>,
}

pub const SIGN_CONVENTION: &str = "offset_ps > 0 means the site-B clock is ahead of site A";

/// `epoch_s,offset_ps,stderr_ps` below a `#` header.
pub fn write_offsets_csv<W: Write>(mut w: W, series: &OffsetSeries, header: &OffsetHeader) -> Result<(), FormatError> {
    writeln!(w, "# scenario_sha256 = {}", header.scenario_hash)?;
    writeln!(w, "# seed = {}", header.seed)?;
    writeln!(w, "# interval_s = {}", fmt_f64(series.interval_s))?;
    writeln!(w, "# sign: {SIGN_CONVENTION}")?;
    if let Some(t) = header.created_unix_s {
        writeln!(w, "# created_unix_s = {t}")?;
    }
    writeln!(w, "epoch_s,offset_ps,stderr_ps")?;
    for s in &series.samples {
        writeln!(w, "{},{},{}", fmt_f64(s.epoch_s), fmt_f64(s.offset_ps), fmt_f64(s.stderr_ps))?;
    }
    Ok(())
}

fn parse_field(raw: &str, line: usize, name: &str) -> Result<f64, FormatError> {
    raw.trim().parse().map_err(|_| FormatError::Malformed {
        line,
        msg: format!("bad {name} `{}`", raw.trim()),
    })
}

/// Reads an offset CSV. The interval comes from the `# interval_s` header
/// line if present, otherwise from the median epoch spacing.
pub fn read_offsets_csv<R: BufRead>(r: R) -> Result<OffsetSeries, FormatError> {
    let mut samples = Vec::new();
    let mut interval = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let n = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("interval_s") {
                let v = v.trim_start().trim_start_matches('=');
                interval = Some(parse_field(v, n, "interval")?);
            }
            continue;
        }
        if line.is_empty() || line.starts_with("epoch_s") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(FormatError::Malformed {
                line: n,
                msg: format!("expected 3 fields, got {}", f.len()),
            });
        }
        samples.push(OffsetSample {
            epoch_s: parse_field(f[0], n, "epoch")?,
            offset_ps: parse_field(f[1], n, "offset")?,
            stderr_ps: parse_field(f[2], n, "stderr")?,
            delay_ps: f64::NAN,
            truth_ps: None,
        });
    }
    let interval_s = match interval {
        Some(v) => v,
        None => {
            let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].epoch_s - w[0].epoch_s).collect();
            if gaps.is_empty() {
                return Err(FormatError::Malformed {
                    line: 0,
                    msg: "cannot infer the sample interval from fewer than two rows".into(),
                });
            }
            gaps.sort_by(f64::total_cmp);
            gaps[gaps.len() / 2]
        }
    };
    Ok(OffsetSeries {
        interval_s,
        samples,
        ground_truth: None,
    })
}

/// `tau_s,deviation,ci_lo,ci_hi,n`.
pub fn write_stability_csv<W: Write>(mut w: W, curve: &StabilityCurve) -> Result<(), FormatError> {
    writeln!(w, "tau_s,deviation,ci_lo,ci_hi,n")?;
    for p in &curve.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(p.tau_s),
            fmt_f64(p.deviation),
            fmt_f64(p.ci_lo),
            fmt_f64(p.ci_hi),
            p.n
        )?;
    }
    Ok(())
}
