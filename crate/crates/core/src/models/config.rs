//! Model nomenclature: `fam-(w_in,w_out)-units-dropout` for LSTM families and
//! `fam-k1-F1-k2-F2-dropout` for convolutional ones.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// single-shot, one LSTM layer
    Ss,
    /// single-shot, two stacked LSTM layers
    Ss2,
    /// autoregressive feedback LSTM
    Fb,
    /// vanilla convolutions
    Vcn,
    /// dilated causal convolutions
    Dcn,
    /// padded (fully) convolutional
    Fcn,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Ss => "ss",
            Family::Ss2 => "ss2",
            Family::Fb => "fb",
            Family::Vcn => "vcn",
            Family::Dcn => "dcn",
            Family::Fcn => "fcn",
        }
    }

    pub fn is_lstm(self) -> bool {
        matches!(self, Family::Ss | Family::Ss2 | Family::Fb)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ss" => Family::Ss,
            "ss2" => Family::Ss2,
            "fb" => Family::Fb,
            "vcn" => Family::Vcn,
            "dcn" => Family::Dcn,
            "fcn" => Family::Fcn,
            other => return Err(Error::UnknownFamily(other.to_string())),
        })
    }
}

/// Dropout rate that remembers how many decimals it was written with, so
/// `0` and `0.0` both survive a format round trip.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DropoutRate {
    pub value: f64,
    pub decimals: u8,
}

impl DropoutRate {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::BadRate(value));
        }
        let text = format!("{value}");
        let decimals = text.split_once('.').map_or(0, |(_, d)| d.len()) as u8;
        Ok(DropoutRate { value, decimals })
    }

    pub fn zero() -> Self {
        DropoutRate { value: 0.0, decimals: 0 }
    }

    fn parse(text: &str, whole: &str) -> Result<Self> {
        let syntax = || Error::SyntaxError(whole.to_string());
        if text.is_empty() || !text.chars().all(|c| c.is_ascii_digit() || c == '.') {
            return Err(syntax());
        }
        let value: f64 = text.parse().map_err(|_| syntax())?;
        if !(0.0..1.0).contains(&value) {
            return Err(Error::BadRate(value));
        }
        let decimals = text.split_once('.').map_or(0, |(_, d)| d.len()) as u8;
        Ok(DropoutRate { value, decimals })
    }
}

impl PartialEq for DropoutRate {
    fn eq(&self, other: &Self) -> bool {
        self.value.to_bits() == other.value.to_bits() && self.decimals == other.decimals
    }
}

impl Eq for DropoutRate {}

impl Hash for DropoutRate {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.value.to_bits().hash(state);
        self.decimals.hash(state);
    }
}

impl fmt::Display for DropoutRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.*}", self.decimals as usize, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    Lstm { w_in: usize, w_out: usize, units: usize },
    Cnn { k1: usize, f1: usize, k2: usize, f2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub family: Family,
    pub arch: Architecture,
    pub dropout: DropoutRate,
}

impl ModelConfig {
    pub fn lstm(family: Family, w_in: usize, w_out: usize, units: usize, dropout: f64) -> Result<Self> {
        let cfg = ModelConfig {
            family,
            arch: Architecture::Lstm { w_in, w_out, units },
            dropout: DropoutRate::new(dropout)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cnn(family: Family, k1: usize, f1: usize, k2: usize, f2: usize, dropout: f64) -> Result<Self> {
        let cfg =
            ModelConfig { family, arch: Architecture::Cnn { k1, f1, k2, f2 }, dropout: DropoutRate::new(dropout)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dims: Vec<usize> = match (self.family.is_lstm(), self.arch) {
            (true, Architecture::Lstm { w_in, w_out, units }) => vec![w_in, w_out, units],
            (false, Architecture::Cnn { k1, f1, k2, f2 }) => vec![k1, f1, k2, f2],
            _ => return Err(Error::ConfigMismatch(format!("{} with wrong architecture", self.family.tag()))),
        };
        if dims.contains(&0) {
            return Err(Error::NonPositiveDimension(self.to_string()));
        }
        Ok(())
    }

    /// `(w_in, w_out)` for LSTM families; convolutional configs carry no window.
    pub fn window(&self) -> Option<(usize, usize)> {
        match self.arch {
            Architecture::Lstm { w_in, w_out, .. } => Some((w_in, w_out)),
            Architecture::Cnn { .. } => None,
        }
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.value
    }
}

/// Parses a nomenclature string.
pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let text = text.trim();
    let syntax = || Error::SyntaxError(text.to_string());
    let (fam, rest) = text.split_once('-').ok_or_else(syntax)?;
    let family: Family = fam.parse()?;
    let num = |s: &str| -> Result<usize> {
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit()) {
            return Err(syntax());
        }
        s.parse().map_err(|_| syntax())
    };
    let cfg = if family.is_lstm() {
        let rest = rest.strip_prefix('(').ok_or_else(syntax)?;
        let (win, rest) = rest.split_once(')').ok_or_else(syntax)?;
        let (w_in, w_out) = win.split_once(',').ok_or_else(syntax)?;
        let rest = rest.strip_prefix('-').ok_or_else(syntax)?;
        let (units, drop) = rest.split_once('-').ok_or_else(syntax)?;
        ModelConfig {
            family,
            arch: Architecture::Lstm { w_in: num(w_in.trim())?, w_out: num(w_out.trim())?, units: num(units)? },
            dropout: DropoutRate::parse(drop, text)?,
        }
    } else {
        let parts: Vec<&str> = rest.split('-').collect();
        if parts.len() != 5 {
            return Err(syntax());
        }
        ModelConfig {
            family,
            arch: Architecture::Cnn { k1: num(parts[0])?, f1: num(parts[1])?, k2: num(parts[2])?, f2: num(parts[3])? },
            dropout: DropoutRate::parse(parts[4], text)?,
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_config(cfg: &ModelConfig) -> String {
    cfg.to_string()
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arch {
            Architecture::Lstm { w_in, w_out, units } => {
                write!(f, "{}-({},{})-{}-{}", self.family.tag(), w_in, w_out, units, self.dropout)
            }
            Architecture::Cnn { k1, f1, k2, f2 } => {
                write!(f, "{}-{}-{}-{}-{}-{}", self.family.tag(), k1, f1, k2, f2, self.dropout)
            }
        }
    }
}

impl FromStr for ModelConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

impl PartialOrd for ModelConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic by nomenclature string.
impl Ord for ModelConfig {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl Serialize for ModelConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ModelConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_config(&s).map_err(serde::de::Error::custom)
    }
}
