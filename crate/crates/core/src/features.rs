//! Derived channels (equivalent velocity, annual phase) and feature-set codes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Channel, ChannelId, TimeSeriesFrame};

/// Gregorian mean year in seconds.
pub const YEAR_SECONDS: f64 = 365.2425 * 24.0 * 3600.0;

/// Depth below which equivalent velocity is left masked.
pub const MIN_DEPTH: f64 = 1e-6;

/// Which difference is taken as flow depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConvention {
    /// depth = sonar − stage
    #[default]
    SonarMinusStage,
    /// depth = stage − sonar
    StageMinusSonar,
}

/// Adds the EVelocity channel: discharge / depth.
pub fn equivalent_velocity(frame: &mut TimeSeriesFrame, convention: DepthConvention) -> Result<()> {
    let sonar = frame.channel(ChannelId::Sonar)?;
    let stage = frame.channel(ChannelId::Stage)?;
    let discharge = frame.channel(ChannelId::Discharge)?;
    let values = (0..frame.len())
        .map(|i| {
            if sonar.missing[i] || stage.missing[i] || discharge.missing[i] {
                return f64::NAN;
            }
            let depth = match convention {
                DepthConvention::SonarMinusStage => sonar.values[i] - stage.values[i],
                DepthConvention::StageMinusSonar => stage.values[i] - sonar.values[i],
            };
            if depth.abs() < MIN_DEPTH {
                f64::NAN
            } else {
                discharge.values[i] / depth
            }
        })
        .collect();
    frame.insert(ChannelId::EVelocity, Channel::from_values(values))
}

/// Adds YearSin / YearCos from the timestamps.
pub fn time_features(frame: &mut TimeSeriesFrame) -> Result<()> {
    let (s, c): (Vec<f64>, Vec<f64>) = frame
        .timestamps()
        .iter()
        .map(|t| {
            let phase = t.0 as f64 * std::f64::consts::TAU / YEAR_SECONDS;
            (phase.sin(), phase.cos())
        })
        .unzip();
    frame.insert(ChannelId::YearSin, Channel::from_values(s))?;
    frame.insert(ChannelId::YearCos, Channel::from_values(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureToken {
    Sonar,
    Stage,
    Discharge,
    EVelocity,
    Year,
}

impl FeatureToken {
    fn text(self) -> &'static str {
        match self {
            FeatureToken::Sonar => "sN",
            FeatureToken::Stage => "sT",
            FeatureToken::Discharge => "dC",
            FeatureToken::EVelocity => "dV",
            FeatureToken::Year => "y",
        }
    }

    fn channels(self) -> &'static [ChannelId] {
        match self {
            FeatureToken::Sonar => &[ChannelId::Sonar],
            FeatureToken::Stage => &[ChannelId::Stage],
            FeatureToken::Discharge => &[ChannelId::Discharge],
            FeatureToken::EVelocity => &[ChannelId::EVelocity],
            FeatureToken::Year => &[ChannelId::YearSin, ChannelId::YearCos],
        }
    }
}

/// A feature-set code such as `sNsTdV` or `sNy`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSetCode {
    tokens: Vec<FeatureToken>,
}

impl FeatureSetCode {
    pub fn tokens(&self) -> &[FeatureToken] {
        &self.tokens
    }

    pub fn contains(&self, t: FeatureToken) -> bool {
        self.tokens.contains(&t)
    }

    /// The eleven codes of the feature-combination experiment.
    pub fn experiment_codes() -> Vec<FeatureSetCode> {
        ["sN", "sT", "dV", "dC", "sNsT", "sNdC", "sNdV", "sTdV", "sTdC", "sNsTdV", "sNsTdC"]
            .iter()
            .map(|c| c.parse().expect("known code"))
            .collect()
    }
}

impl FromStr for FeatureSetCode {
    type Err = Error;

    fn from_str(code: &str) -> Result<Self> {
        let mut rest = code.trim();
        if rest.is_empty() {
            return Err(Error::InvalidCode(code.into()));
        }
        let mut tokens = Vec::new();
        while !rest.is_empty() {
            let (tok, len) = match rest.as_bytes() {
                [b's', b'N', ..] => (FeatureToken::Sonar, 2),
                [b's', b'T', ..] => (FeatureToken::Stage, 2),
                [b'd', b'C', ..] => (FeatureToken::Discharge, 2),
                [b'd', b'V', ..] => (FeatureToken::EVelocity, 2),
                [b'y', ..] => (FeatureToken::Year, 1),
                _ => return Err(Error::InvalidCode(code.into())),
            };
            if tokens.contains(&tok) {
                return Err(Error::DuplicateToken { code: code.into(), token: tok.text().into() });
            }
            tokens.push(tok);
            rest = &rest[len..];
        }
        if tokens.contains(&FeatureToken::Discharge) && tokens.contains(&FeatureToken::EVelocity) {
            return Err(Error::InvalidCode(code.into()));
        }
        Ok(FeatureSetCode { tokens })
    }
}

impl fmt::Display for FeatureSetCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            f.write_str(t.text())?;
        }
        Ok(())
    }
}

impl Serialize for FeatureSetCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureSetCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedFeatures {
    pub inputs: Vec<ChannelId>,
    pub targets: Vec<ChannelId>,
    /// Channel the MAE metric is reported on.
    pub metric: ChannelId,
}

impl ResolvedFeatures {
    pub fn metric_is_sonar(&self) -> bool {
        self.metric == ChannelId::Sonar
    }
}

/// Maps a code to input channels (in token order), targets and metric channel.
///
/// Targets are the elevation channels among the inputs; a code without any
/// (`dC`, `dV`) forecasts its first input channel.
pub fn resolve_feature_set(code: &FeatureSetCode) -> ResolvedFeatures {
    let inputs: Vec<ChannelId> = code.tokens.iter().flat_map(|t| t.channels().iter().copied()).collect();
    let mut targets: Vec<ChannelId> =
        [ChannelId::Sonar, ChannelId::Stage].into_iter().filter(|c| inputs.contains(c)).collect();
    if targets.is_empty() {
        targets.push(inputs[0]);
    }
    let metric = if inputs.contains(&ChannelId::Sonar) { ChannelId::Sonar } else { inputs[0] };
    ResolvedFeatures { inputs, targets, metric }
}
