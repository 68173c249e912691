//! Small parsers for CLI range expressions (`start:stop:step`) and sweep
//! variable specifications (`name=start:stop:step`).

use std::str::FromStr;

use thiserror::Error;

use super::ScenarioConfig;

/// Hard cap on expanded range length; protects against hostile specs.
const MAX_RANGE_VALUES: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum RangeError {
    #[error("range must be start:stop:step, got {0:?}")]
    BadFormat(String),
    #[error("range values must be finite numbers")]
    NonFinite,
    #[error("range step must be positive")]
    NonPositiveStep,
    #[error("range start must not exceed stop")]
    Reversed,
    #[error("range expands to more than {MAX_RANGE_VALUES} values")]
    TooManyValues,
    #[error("unknown sweep parameter {0:?}")]
    UnknownParam(String),
    #[error("sweep must be name=start:stop:step, got {0:?}")]
    BadSweepFormat(String),
    #[error("sweep value {value} is not valid for {param}")]
    BadSweepValue { param: &'static str, value: f64 },
}

/// Inclusive arithmetic range `start, start+step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for RangeSpec {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, RangeError> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(RangeError::BadFormat(s.to_string()));
        }
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| RangeError::BadFormat(s.to_string()))
        };
        let spec = RangeSpec {
            start: parse(parts[0])?,
            stop: parse(parts[1])?,
            step: parse(parts[2])?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl RangeSpec {
    fn validate(&self) -> Result<(), RangeError> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(RangeError::NonFinite);
        }
        if self.step <= 0.0 {
            return Err(RangeError::NonPositiveStep);
        }
        if self.start > self.stop {
            return Err(RangeError::Reversed);
        }
        if (self.stop - self.start) / self.step > MAX_RANGE_VALUES as f64 {
            return Err(RangeError::TooManyValues);
        }
        Ok(())
    }

    /// Expands to concrete values; each value is `start + i·step` so no
    /// rounding drift accumulates. The stop is included when it lands within
    /// a 1e-9 relative tolerance of a grid point.
    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let count = (span / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Config fields that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    CommRange,
    NAgents,
    NAnchors,
    LMax,
    NoiseStd,
}

impl SweepParam {
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::CommRange => "comm_range",
            SweepParam::NAgents => "n_agents",
            SweepParam::NAnchors => "n_anchors",
            SweepParam::LMax => "l_max",
            SweepParam::NoiseStd => "noise_std",
        }
    }

    /// Applies one sweep value to a config. Count-valued parameters must be
    /// nonnegative integers.
    pub fn apply(self, config: &mut ScenarioConfig, value: f64) -> Result<(), RangeError> {
        let as_count = |v: f64| -> Result<usize, RangeError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(RangeError::BadSweepValue {
                    param: self.label(),
                    value: v,
                })
            }
        };
        match self {
            SweepParam::CommRange => config.comm_range = value,
            SweepParam::NAgents => config.n_agents = as_count(value)?,
            SweepParam::NAnchors => config.n_anchors = as_count(value)?,
            SweepParam::LMax => config.l_max = as_count(value)?,
            SweepParam::NoiseStd => config.noise_std = value,
        }
        Ok(())
    }
}

impl FromStr for SweepParam {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, RangeError> {
        match s.trim() {
            "comm_range" => Ok(SweepParam::CommRange),
            "n_agents" => Ok(SweepParam::NAgents),
            "n_anchors" => Ok(SweepParam::NAnchors),
            "l_max" => Ok(SweepParam::LMax),
            "noise_std" => Ok(SweepParam::NoiseStd),
            other => Err(RangeError::UnknownParam(other.to_string())),
        }
    }
}

/// Parses `name=start:stop:step`.
pub fn parse_sweep(s: &str) -> Result<(SweepParam, RangeSpec), RangeError> {
    let (name, range) = s
        .split_once('=')
        .ok_or_else(|| RangeError::BadSweepFormat(s.to_string()))?;
    Ok((name.parse()?, range.parse()?))
}
