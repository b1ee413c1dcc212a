//! Text formats for frames: wide `timestamp,<channel>...` tables and the long
//! `timestamp,channel,value` sensor format.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a write/read cycle is lossless. Missing cells are empty.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::timeseries::{Channel, ChannelId, TimeSeriesFrame, Timestamp};

/// Wide CSV with one column per channel, named by channel name.
pub fn write_frame_csv(frame: &TimeSeriesFrame) -> String {
    let ids = frame.channel_ids();
    let mut out = String::from("timestamp");
    for id in &ids {
        out.push(',');
        out.push_str(id.name());
    }
    out.push('\n');
    let chans: Vec<&Channel> = ids.iter().map(|id| frame.channel(*id).expect("listed channel")).collect();
    for (i, ts) in frame.timestamps().iter().enumerate() {
        out.push_str(&ts.to_iso());
        for c in &chans {
            out.push(',');
            if !c.missing[i] {
                write!(out, "{}", c.values[i]).expect("string write");
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_frame_csv(text: &str) -> Result<TimeSeriesFrame> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first().map(|c| c.to_ascii_lowercase()) != Some("timestamp".into()) {
        return Err(Error::Csv(format!("first column must be `timestamp`, found `{header}`")));
    }
    let ids: Vec<ChannelId> = cols[1..].iter().map(|c| c.parse()).collect::<Result<_>>()?;
    let mut timestamps = Vec::new();
    let mut columns: Vec<Channel> = ids.iter().map(|_| Channel::from_values(Vec::new())).collect();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Csv(format!(
                "line {}: expected {} fields, found {}",
                idx + 1,
                cols.len(),
                fields.len()
            )));
        }
        let ts = Timestamp::parse(fields[0])
            .ok_or_else(|| Error::Csv(format!("line {}: bad timestamp `{}`", idx + 1, fields[0])))?;
        timestamps.push(ts);
        for (c, f) in columns.iter_mut().zip(&fields[1..]) {
            if f.is_empty() {
                c.values.push(f64::NAN);
                c.missing.push(true);
            } else {
                let v: f64 = f.parse().map_err(|_| Error::Csv(format!("line {}: bad value `{f}`", idx + 1)))?;
                c.values.push(v);
                c.missing.push(!v.is_finite());
            }
        }
    }
    let channels: BTreeMap<ChannelId, Channel> = ids.into_iter().zip(columns).collect();
    TimeSeriesFrame::new(timestamps, channels)
}

/// Long-format readings, one row per unmasked value, channels by name.
pub fn write_sensor_csv(frame: &TimeSeriesFrame) -> String {
    let mut out = String::from("timestamp,channel,value\n");
    for (i, ts) in frame.timestamps().iter().enumerate() {
        for (id, c) in frame.channels() {
            if !c.missing[i] {
                writeln!(out, "{},{},{}", ts.to_iso(), id.name(), c.values[i]).expect("string write");
            }
        }
    }
    out
}
