//! Raw sensor CSV ingestion and the hourly clean-up chain: median bucketing,
//! rolling-MAD despiking and short-gap interpolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Channel, ChannelId, TimeSeriesFrame, Timestamp, SECONDS_PER_HOUR};

/// Floor applied to the rolling MAD so flat stretches do not divide by zero.
pub const MAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReading {
    pub timestamp: Timestamp,
    pub channel: ChannelId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowIssueKind {
    UnknownChannel,
    UnparsableTimestamp,
    BadValue,
    WrongFieldCount,
}

/// A row that could not be turned into a reading. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    pub line: usize,
    pub kind: RowIssueKind,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedReadings {
    pub readings: Vec<RawReading>,
    pub issues: Vec<RowIssue>,
}

/// Parses `timestamp,channel,value` CSV. Malformed rows are reported, not fatal.
pub fn parse_sensor_csv(bytes: &[u8]) -> Result<ParsedReadings> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Csv(format!("not UTF-8: {e}")))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    if cols != ["timestamp", "channel", "value"] {
        return Err(Error::Csv(format!("expected header `timestamp,channel,value`, found `{header}`")));
    }
    let mut out = ParsedReadings::default();
    for (idx, line) in lines {
        let issue = |kind| RowIssue { line: idx + 1, kind, text: line.to_string() };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            out.issues.push(issue(RowIssueKind::WrongFieldCount));
            continue;
        }
        let Some(timestamp) = Timestamp::parse(fields[0]) else {
            out.issues.push(issue(RowIssueKind::UnparsableTimestamp));
            continue;
        };
        let Ok(channel) = fields[1].parse::<ChannelId>() else {
            out.issues.push(issue(RowIssueKind::UnknownChannel));
            continue;
        };
        match fields[2].parse::<f64>() {
            Ok(value) if value.is_finite() => out.readings.push(RawReading { timestamp, channel, value }),
            _ => out.issues.push(issue(RowIssueKind::BadValue)),
        }
    }
    Ok(out)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Buckets readings into hours on one shared grid; each bucket takes the median.
pub fn resample_hourly(readings: &[RawReading]) -> Result<TimeSeriesFrame> {
    let (Some(first), Some(last)) = (
        readings.iter().map(|r| r.timestamp.hour_floor()).min(),
        readings.iter().map(|r| r.timestamp.hour_floor()).max(),
    ) else {
        return Err(Error::SpanTooShort);
    };
    let len = ((last.0 - first.0) / SECONDS_PER_HOUR + 1) as usize;
    if len < 2 {
        return Err(Error::SpanTooShort);
    }
    let mut buckets: BTreeMap<ChannelId, Vec<Vec<f64>>> = BTreeMap::new();
    for r in readings {
        let slot = ((r.timestamp.hour_floor().0 - first.0) / SECONDS_PER_HOUR) as usize;
        buckets.entry(r.channel).or_insert_with(|| vec![Vec::new(); len])[slot].push(r.value);
    }
    let mut frame = TimeSeriesFrame::hourly(first, len);
    for (id, mut cells) in buckets {
        let values = cells.iter_mut().map(|b| if b.is_empty() { f64::NAN } else { median(b) }).collect();
        frame.insert(id, Channel::from_values(values))?;
    }
    Ok(frame)
}

/// Masks outliers against a centred rolling median/MAD, repeating until no
/// new point trips. Returns the count masked.
pub fn despike(frame: &mut TimeSeriesFrame, window: usize, k_mad: f64) -> usize {
    let half = window / 2;
    let mut total = 0;
    for id in frame.channel_ids() {
        let ch = frame.channel_mut(id).expect("listed channel");
        loop {
            let flagged = spike_positions(ch, half, k_mad);
            if flagged.is_empty() {
                break;
            }
            total += flagged.len();
            for i in flagged {
                ch.mask(i);
            }
        }
    }
    total
}

fn spike_positions(ch: &Channel, half: usize, k_mad: f64) -> Vec<usize> {
    let n = ch.len();
    let mut flagged = Vec::new();
    let mut buf = Vec::with_capacity(2 * half + 1);
    for i in 0..n {
        if ch.missing[i] {
            continue;
        }
        buf.clear();
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        buf.extend((lo..hi).filter(|&j| !ch.missing[j]).map(|j| ch.values[j]));
        let med = median(&mut buf);
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median(&mut buf).max(MAD_FLOOR);
        if (ch.values[i] - med).abs() > k_mad * mad {
            flagged.push(i);
        }
    }
    flagged
}

/// Linearly interpolates masked runs of at most `max_gap` steps that have an
/// unmasked value on both sides. Returns the number of points filled.
pub fn fill_short_gaps(frame: &mut TimeSeriesFrame, max_gap: usize) -> usize {
    let mut filled = 0;
    for id in frame.channel_ids() {
        let ch = frame.channel_mut(id).expect("listed channel");
        let n = ch.len();
        let mut i = 0;
        while i < n {
            if !ch.missing[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && ch.missing[i] {
                i += 1;
            }
            let run = i - start;
            if start == 0 || i == n || run > max_gap {
                continue;
            }
            let (a, b) = (ch.values[start - 1], ch.values[i]);
            let span = (run + 1) as f64;
            for (step, j) in (start..i).enumerate() {
                let w = (step + 1) as f64 / span;
                ch.set(j, a + (b - a) * w);
            }
            filled += run;
        }
    }
    filled
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessParams {
    #[serde(default = "default_window")]
    pub despike_window: usize,
    #[serde(default = "default_k")]
    pub k_mad: f64,
    #[serde(default = "default_gap")]
    pub max_gap: usize,
}

fn default_window() -> usize {
    24
}
fn default_k() -> f64 {
    6.0
}
fn default_gap() -> usize {
    3
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams { despike_window: 24, k_mad: 6.0, max_gap: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub schema: String,
    pub parsed: usize,
    pub malformed: usize,
    pub masked_spikes: usize,
    pub filled_gaps: usize,
    pub hours: usize,
    pub issues: Vec<RowIssue>,
}

/// parse → resample → despike → fill.
pub fn preprocess(bytes: &[u8], params: &PreprocessParams) -> Result<(TimeSeriesFrame, PreprocessReport)> {
    let parsed = parse_sensor_csv(bytes)?;
    let mut frame = resample_hourly(&parsed.readings)?;
    let masked_spikes = despike(&mut frame, params.despike_window, params.k_mad);
    let filled_gaps = fill_short_gaps(&mut frame, params.max_gap);
    let report = PreprocessReport {
        schema: "scour.preprocess-report/1".into(),
        parsed: parsed.readings.len(),
        malformed: parsed.issues.len(),
        masked_spikes,
        filled_gaps,
        hours: frame.len(),
        issues: parsed.issues,
    };
    Ok((frame, report))
}
