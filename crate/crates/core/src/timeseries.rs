//! Timestamps, channels, hourly frames and the supervised window types built on them.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_HOUR: i64 = 3600;
pub const FEET_TO_METERS: f64 = 0.3048;

/// Seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_hours(hours: i64) -> Self {
        Timestamp(hours * SECONDS_PER_HOUR)
    }

    pub fn seconds(self) -> i64 {
        self.0
    }

    pub fn is_hour_aligned(self) -> bool {
        self.0.rem_euclid(SECONDS_PER_HOUR) == 0
    }

    /// Floor to the start of the containing hour.
    pub fn hour_floor(self) -> Self {
        Timestamp(self.0.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR)
    }

    pub fn add_hours(self, h: i64) -> Self {
        Timestamp(self.0 + h * SECONDS_PER_HOUR)
    }

    /// Parses RFC 3339 (`2021-07-01T00:00:00Z`) or a naive `YYYY-MM-DD HH:MM:SS`
    /// / `YYYY-MM-DDTHH:MM:SS` stamp, which is taken as UTC.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Some(Timestamp(dt.timestamp()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
            if let Ok(n) = NaiveDateTime::parse_from_str(text, fmt) {
                return Some(Timestamp(n.and_utc().timestamp()));
            }
        }
        None
    }

    pub fn to_iso(self) -> String {
        match DateTime::<Utc>::from_timestamp(self.0, 0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

/// Sensor and derived channels. Each has a two-letter code used in feature-set strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelId {
    Sonar,
    Stage,
    Discharge,
    EVelocity,
    YearSin,
    YearCos,
}

impl ChannelId {
    pub const ALL: [ChannelId; 6] = [
        ChannelId::Sonar,
        ChannelId::Stage,
        ChannelId::Discharge,
        ChannelId::EVelocity,
        ChannelId::YearSin,
        ChannelId::YearCos,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ChannelId::Sonar => "sN",
            ChannelId::Stage => "sT",
            ChannelId::Discharge => "dC",
            ChannelId::EVelocity => "dV",
            ChannelId::YearSin => "y(sin)",
            ChannelId::YearCos => "y(cos)",
        }
    }

    /// Column name used in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Sonar => "sonar",
            ChannelId::Stage => "stage",
            ChannelId::Discharge => "discharge",
            ChannelId::EVelocity => "evelocity",
            ChannelId::YearSin => "year_sin",
            ChannelId::YearCos => "year_cos",
        }
    }

    /// Elevation channels are the ones reported in feet and metres.
    pub fn is_elevation(self) -> bool {
        matches!(self, ChannelId::Sonar | ChannelId::Stage)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        ChannelId::ALL
            .into_iter()
            .find(|c| t.eq_ignore_ascii_case(c.name()) || t == c.code())
            .or(match t.to_ascii_lowercase().as_str() {
                "e_velocity" | "equivalent_velocity" => Some(ChannelId::EVelocity),
                "year-sin" => Some(ChannelId::YearSin),
                "year-cos" => Some(ChannelId::YearCos),
                _ => None,
            })
            .ok_or_else(|| Error::MissingChannel(t.to_string()))
    }
}

/// One channel's values with its missing mask. Masked positions hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl Channel {
    pub fn from_values(values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| !v.is_finite()).collect::<Vec<_>>();
        let values = values.into_iter().map(|v| if v.is_finite() { v } else { f64::NAN }).collect();
        Channel { values, missing }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mask(&mut self, i: usize) {
        self.missing[i] = true;
        self.values[i] = f64::NAN;
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
        self.missing[i] = false;
    }

    pub fn masked_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }
}

/// Synchronised hourly multichannel record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    timestamps: Vec<Timestamp>,
    channels: BTreeMap<ChannelId, Channel>,
}

impl TimeSeriesFrame {
    pub fn new(timestamps: Vec<Timestamp>, channels: BTreeMap<ChannelId, Channel>) -> Result<Self> {
        let frame = TimeSeriesFrame { timestamps, channels };
        frame.validate()?;
        Ok(frame)
    }

    /// Hourly frame starting at `start` with `len` steps and no channels.
    pub fn hourly(start: Timestamp, len: usize) -> Self {
        let start = start.hour_floor();
        TimeSeriesFrame { timestamps: (0..len as i64).map(|h| start.add_hours(h)).collect(), channels: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFrame("timestamps not strictly increasing".into()));
        }
        for (id, ch) in &self.channels {
            if ch.values.len() != self.timestamps.len() || ch.missing.len() != self.timestamps.len() {
                return Err(Error::InvalidFrame(format!("channel {id} length mismatch")));
            }
            if ch.values.iter().zip(&ch.missing).any(|(v, m)| !m && !v.is_finite()) {
                return Err(Error::InvalidFrame(format!("channel {id} has non-finite unmasked value")));
            }
        }
        Ok(())
    }

    pub fn is_hourly(&self) -> bool {
        self.timestamps.iter().all(|t| t.is_hour_aligned())
            && self.timestamps.windows(2).all(|w| w[1].0 - w[0].0 == SECONDS_PER_HOUR)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn channel_ids(&self) -> Vec<ChannelId> {
        self.channels.keys().copied().collect()
    }

    pub fn has(&self, id: ChannelId) -> bool {
        self.channels.contains_key(&id)
    }

    pub fn channel(&self, id: ChannelId) -> Result<&Channel> {
        self.channels.get(&id).ok_or_else(|| Error::MissingChannel(id.name().into()))
    }

    pub fn channel_mut(&mut self, id: ChannelId) -> Result<&mut Channel> {
        self.channels.get_mut(&id).ok_or_else(|| Error::MissingChannel(id.name().into()))
    }

    pub fn insert(&mut self, id: ChannelId, channel: Channel) -> Result<()> {
        if channel.len() != self.len() {
            return Err(Error::InvalidFrame(format!(
                "channel {id} has {} values for {} timestamps",
                channel.len(),
                self.len()
            )));
        }
        self.channels.insert(id, channel);
        Ok(())
    }

    pub fn channels(&self) -> impl Iterator<Item = (ChannelId, &Channel)> {
        self.channels.iter().map(|(k, v)| (*k, v))
    }

    /// True when any of `ids` is masked at index `i`.
    pub fn any_missing(&self, ids: &[ChannelId], i: usize) -> bool {
        ids.iter().any(|id| self.channels.get(id).is_none_or(|c| c.missing[i]))
    }

    /// Sub-frame over a range of steps.
    pub fn slice(&self, range: Range<usize>) -> TimeSeriesFrame {
        TimeSeriesFrame {
            timestamps: self.timestamps[range.clone()].to_vec(),
            channels: self
                .channels
                .iter()
                .map(|(k, c)| {
                    (
                        *k,
                        Channel {
                            values: c.values[range.clone()].to_vec(),
                            missing: c.missing[range.clone()].to_vec(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        self.timestamps.binary_search(&ts).ok()
    }
}

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub channels: Vec<ChannelId>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn identity(channels: &[ChannelId]) -> Self {
        NormalizationStats {
            channels: channels.to_vec(),
            mean: vec![0.0; channels.len()],
            std: vec![1.0; channels.len()],
        }
    }

    /// Fits mean/std of each channel over the unmasked values in `range`.
    /// A channel with zero spread gets std 1.
    pub fn fit(frame: &TimeSeriesFrame, channels: &[ChannelId], range: Range<usize>) -> Result<Self> {
        let mut mean = Vec::with_capacity(channels.len());
        let mut std = Vec::with_capacity(channels.len());
        for id in channels {
            let ch = frame.channel(*id)?;
            let vals: Vec<f64> = range.clone().filter(|&i| !ch.missing[i]).map(|i| ch.values[i]).collect();
            if vals.is_empty() {
                return Err(Error::EmptyPartition("normalization range"));
            }
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 1e-12 { s } else { 1.0 });
        }
        Ok(NormalizationStats { channels: channels.to_vec(), mean, std })
    }

    pub fn position(&self, id: ChannelId) -> Option<usize> {
        self.channels.iter().position(|c| *c == id)
    }

    pub fn normalize(&self, id: ChannelId, v: f64) -> f64 {
        match self.position(id) {
            Some(p) => (v - self.mean[p]) / self.std[p],
            None => v,
        }
    }

    pub fn denormalize(&self, id: ChannelId, v: f64) -> f64 {
        match self.position(id) {
            Some(p) => v * self.std[p] + self.mean[p],
            None => v,
        }
    }
}

/// One supervised pair. Matrices are row-major, one row per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub origin: Timestamp,
    /// Frame index of `origin`.
    pub origin_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowShape {
    pub w_in: usize,
    pub w_out: usize,
    pub n_in: usize,
    pub n_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub samples: Vec<WindowSample>,
    pub input_channels: Vec<ChannelId>,
    pub target_channels: Vec<ChannelId>,
    pub norm_stats: NormalizationStats,
    pub shape: WindowShape,
}

/// Parameters of the windowing step.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub w_in: usize,
    pub w_out: usize,
    pub input_channels: Vec<ChannelId>,
    pub target_channels: Vec<ChannelId>,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(w_in: usize, w_out: usize, input_channels: Vec<ChannelId>, target_channels: Vec<ChannelId>) -> Self {
        WindowSpec { w_in, w_out, input_channels, target_channels, stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    fn check(&self) -> Result<()> {
        if self.w_in < 2 {
            return Err(Error::InvalidWindow(format!("w_in = {} must be at least 2", self.w_in)));
        }
        if self.w_out < 1 {
            return Err(Error::InvalidWindow("w_out must be at least 1".into()));
        }
        if self.stride < 1 {
            return Err(Error::InvalidWindow("stride must be at least 1".into()));
        }
        if self.input_channels.is_empty() || self.target_channels.is_empty() {
            return Err(Error::InvalidWindow("channel lists must be non-empty".into()));
        }
        Ok(())
    }

    pub fn span(&self) -> usize {
        self.w_in + self.w_out
    }
}

/// Slides a window over the whole frame.
pub fn make_windows(frame: &TimeSeriesFrame, spec: &WindowSpec) -> Result<WindowedDataset> {
    make_windows_in(frame, spec, 0..frame.len())
}

/// Windows whose target rows fall inside `targets`; input rows may reach back
/// before the range start (they are history, not supervision).
pub fn make_windows_in(frame: &TimeSeriesFrame, spec: &WindowSpec, targets: Range<usize>) -> Result<WindowedDataset> {
    spec.check()?;
    if !frame.is_hourly() {
        return Err(Error::InvalidFrame("frame is not on a gap-free hourly grid".into()));
    }
    let len = frame.len();
    if len < spec.span() {
        return Err(Error::FrameTooShort { len, needed: spec.span() });
    }
    for id in spec.input_channels.iter().chain(&spec.target_channels) {
        frame.channel(*id)?;
    }
    let first = targets.start.max(spec.w_in);
    let end = targets.end.min(len);
    let mut all: Vec<ChannelId> = spec.input_channels.clone();
    for t in &spec.target_channels {
        if !all.contains(t) {
            all.push(*t);
        }
    }
    let ins: Vec<&Channel> = spec.input_channels.iter().map(|c| frame.channel(*c)).collect::<Result<_>>()?;
    let outs: Vec<&Channel> = spec.target_channels.iter().map(|c| frame.channel(*c)).collect::<Result<_>>()?;

    let mut samples = Vec::new();
    let mut origin = first;
    while origin + spec.w_out <= end {
        let lo = origin - spec.w_in;
        let hi = origin + spec.w_out;
        let gap = (lo..origin).any(|i| ins.iter().any(|c| c.missing[i]))
            || (origin..hi).any(|i| outs.iter().any(|c| c.missing[i]));
        if !gap {
            let mut input = Vec::with_capacity(spec.w_in * ins.len());
            for i in lo..origin {
                input.extend(ins.iter().map(|c| c.values[i]));
            }
            let mut target = Vec::with_capacity(spec.w_out * outs.len());
            for i in origin..hi {
                target.extend(outs.iter().map(|c| c.values[i]));
            }
            samples.push(WindowSample { input, target, origin: frame.timestamps()[origin], origin_index: origin });
        }
        origin += spec.stride;
    }
    Ok(WindowedDataset {
        samples,
        input_channels: spec.input_channels.clone(),
        target_channels: spec.target_channels.clone(),
        norm_stats: NormalizationStats::identity(&all),
        shape: WindowShape {
            w_in: spec.w_in,
            w_out: spec.w_out,
            n_in: spec.input_channels.len(),
            n_out: spec.target_channels.len(),
        },
    })
}

/// Chronological train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    #[serde(default)]
    pub final_test_frac: Option<f64>,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let s = SplitSpec { train_frac, val_frac, test_frac, final_test_frac: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train_frac), ("val", self.val_frac), ("test", self.test_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidSplit(format!("{name} fraction {f} outside (0, 1)")));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        if let Some(f) = self.final_test_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidSplit(format!("final_test fraction {f} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Partition sizes for `n` samples: train and val rounded, test takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64) * self.train_frac).round() as usize;
        let val = ((n as f64) * self.val_frac).round() as usize;
        let train = train.min(n);
        let val = val.min(n - train);
        (train, val, n - train - val)
    }
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<WindowSample>) -> WindowedDataset {
        WindowedDataset {
            samples,
            input_channels: self.input_channels.clone(),
            target_channels: self.target_channels.clone(),
            norm_stats: self.norm_stats.clone(),
            shape: self.shape,
        }
    }

    /// Frame index range touched by the samples (first input row to last target row).
    pub fn frame_span(&self) -> Option<Range<usize>> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        Some(first.origin_index - self.shape.w_in..last.origin_index + self.shape.w_out)
    }

    /// Re-expresses every sample under `stats`. Raw values are recovered from the
    /// current stats first; the input may already be normalised.
    pub fn normalized(&self, stats: &NormalizationStats) -> WindowedDataset {
        let old = &self.norm_stats;
        let conv = |ids: &[ChannelId], data: &[f64]| -> Vec<f64> {
            data.iter()
                .enumerate()
                .map(|(j, v)| {
                    let id = ids[j % ids.len()];
                    stats.normalize(id, old.denormalize(id, *v))
                })
                .collect()
        };
        let samples = self
            .samples
            .iter()
            .map(|s| WindowSample {
                input: conv(&self.input_channels, &s.input),
                target: conv(&self.target_channels, &s.target),
                origin: s.origin,
                origin_index: s.origin_index,
            })
            .collect();
        let mut out = self.with_samples(samples);
        out.norm_stats = stats.clone();
        out
    }

    /// Concatenates sample lists of datasets with identical layout.
    pub fn concat(&self, other: &WindowedDataset) -> Result<WindowedDataset> {
        if self.shape != other.shape
            || self.input_channels != other.input_channels
            || self.norm_stats != other.norm_stats
        {
            return Err(Error::ShapeMismatch("datasets differ in layout".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(self.with_samples(samples))
    }

    pub fn subset(&self, range: Range<usize>) -> WindowedDataset {
        self.with_samples(self.samples[range].to_vec())
    }
}

/// Splits samples in origin order into train, validation and test sets.
pub fn chronological_split(
    dataset: &WindowedDataset,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset)> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyPartition("dataset"));
    }
    let (tr, va, te) = spec.sizes(dataset.len());
    if tr == 0 {
        return Err(Error::EmptyPartition("train"));
    }
    if va == 0 {
        return Err(Error::EmptyPartition("val"));
    }
    if te == 0 {
        return Err(Error::EmptyPartition("test"));
    }
    Ok((dataset.subset(0..tr), dataset.subset(tr..tr + va), dataset.subset(tr + va..dataset.len())))
}

/// Splits, then fits normalisation on the frame span covered by the training
/// samples and applies it to all three partitions.
pub fn split_and_normalize(
    frame: &TimeSeriesFrame,
    dataset: &WindowedDataset,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset)> {
    let (train, val, test) = chronological_split(dataset, spec)?;
    let stats = fit_on(frame, &train)?;
    Ok((train.normalized(&stats), val.normalized(&stats), test.normalized(&stats)))
}

/// Normalisation fitted on the frame rows spanned by `train`.
pub fn fit_on(frame: &TimeSeriesFrame, train: &WindowedDataset) -> Result<NormalizationStats> {
    let span = train.frame_span().ok_or(Error::EmptyPartition("train"))?;
    let mut all = train.input_channels.clone();
    for t in &train.target_channels {
        if !all.contains(t) {
            all.push(*t);
        }
    }
    NormalizationStats::fit(frame, &all, span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_frame(len: usize) -> TimeSeriesFrame {
        let mut f = TimeSeriesFrame::hourly(Timestamp::from_hours(1000), len);
        f.insert(ChannelId::Sonar, Channel::from_values((0..len).map(|i| i as f64).collect())).unwrap();
        f.insert(ChannelId::Stage, Channel::from_values((0..len).map(|i| 2.0 * i as f64).collect())).unwrap();
        f
    }

    fn spec(w_in: usize, w_out: usize) -> WindowSpec {
        WindowSpec::new(w_in, w_out, vec![ChannelId::Sonar, ChannelId::Stage], vec![ChannelId::Sonar])
    }

    /// Counts valid (input, target) offsets by enumeration.
    fn enumerate_offsets(len: usize, w_in: usize, w_out: usize, stride: usize) -> usize {
        let mut n = 0;
        let mut start = 0;
        while start + w_in + w_out <= len {
            n += 1;
            start += stride;
        }
        n
    }

    #[test]
    fn window_counts() {
        assert_eq!(enumerate_offsets(10, 3, 2, 1), 6);
        assert_eq!(make_windows(&ramp_frame(10), &spec(3, 2)).unwrap().len(), 6);
        assert_eq!(make_windows(&ramp_frame(5), &spec(3, 2)).unwrap().len(), 1);
        assert_eq!(make_windows(&ramp_frame(504), &spec(336, 168)).unwrap().len(), 1);
        for stride in 1..5 {
            let ds = make_windows(&ramp_frame(40), &spec(6, 4).with_stride(stride)).unwrap();
            assert_eq!(ds.len(), (40 - 6 - 4) / stride + 1);
            assert_eq!(ds.len(), enumerate_offsets(40, 6, 4, stride));
        }
    }

    #[test]
    fn window_contents_are_contiguous() {
        let ds = make_windows(&ramp_frame(10), &spec(3, 2)).unwrap();
        let s = &ds.samples[2];
        // input rows are (sonar, stage) at indices 2,3,4; target sonar at 5,6
        assert_eq!(s.input, vec![2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        assert_eq!(s.target, vec![5.0, 6.0]);
        assert_eq!(s.origin, Timestamp::from_hours(1005));
    }

    #[test]
    fn too_short_and_bad_windows() {
        assert!(matches!(make_windows(&ramp_frame(4), &spec(3, 2)), Err(Error::FrameTooShort { .. })));
        assert!(matches!(make_windows(&ramp_frame(10), &spec(1, 2)), Err(Error::InvalidWindow(_))));
        assert!(matches!(make_windows(&ramp_frame(10), &spec(3, 2).with_stride(0)), Err(Error::InvalidWindow(_))));
    }

    #[test]
    fn gaps_are_skipped() {
        let mut f = ramp_frame(10);
        f.channel_mut(ChannelId::Stage).unwrap().mask(4);
        let ds = make_windows(&f, &spec(3, 2)).unwrap();
        // origins 3..=8; stage is only an input, so windows whose input covers 4 drop: origins 5,6,7
        let origins: Vec<usize> = ds.samples.iter().map(|s| s.origin_index).collect();
        assert_eq!(origins, vec![3, 4, 8]);
    }

    #[test]
    fn split_sizes() {
        let ds = make_windows(&ramp_frame(104), &spec(3, 2)).unwrap();
        assert_eq!(ds.len(), 100);
        let (a, b, c) = chronological_split(&ds, &SplitSpec::new(0.7, 0.2, 0.1).unwrap()).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 20, 10));
        let ds10 = ds.subset(0..10);
        let (a, b, c) = chronological_split(&ds10, &SplitSpec::new(0.6, 0.2, 0.2).unwrap()).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        let one = ds.subset(0..1);
        assert!(matches!(
            chronological_split(&one, &SplitSpec::new(0.6, 0.2, 0.2).unwrap()),
            Err(Error::EmptyPartition(_))
        ));
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.7, 0.2, 0.2).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0).is_err());
        assert!(SplitSpec::new(0.7, 0.2, 0.1).is_ok());
    }

    #[test]
    fn timestamp_parsing() {
        let t = Timestamp::parse("2021-07-01T00:00:00Z").unwrap();
        assert!(t.is_hour_aligned());
        assert_eq!(t.to_iso(), "2021-07-01T00:00:00Z");
        assert_eq!(Timestamp::parse("2021-07-01 00:20:00").unwrap().0, t.0 + 1200);
        assert!(Timestamp::parse("yesterday").is_none());
    }

    #[test]
    fn channel_names_round_trip() {
        for c in ChannelId::ALL {
            assert_eq!(c.name().parse::<ChannelId>().unwrap(), c);
            assert_eq!(c.code().parse::<ChannelId>().unwrap(), c);
        }
    }
}
