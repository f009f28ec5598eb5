//! Run configuration and its textual forms.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use ecalp::daemon::Mode;
use ecalp::parser::parse_term;
use ecalp::term::{Term, TimePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockSpec {
    Real,
    Simulated { start: TimePoint, step_ms: u64 },
}

impl FromStr for ClockSpec {
    type Err = String;

    /// `real` or `sim:START:STEP_MS`, START being epoch seconds or
    /// `YYYY-MM-DDTHH:MM:SS`.
    fn from_str(s: &str) -> Result<ClockSpec, String> {
        if s == "real" {
            return Ok(ClockSpec::Real);
        }
        let rest = s
            .strip_prefix("sim:")
            .ok_or_else(|| format!("clock `{s}` is neither `real` nor `sim:START:STEP_MS`"))?;
        let (start, step) = rest
            .rsplit_once(':')
            .ok_or_else(|| format!("clock `{s}` lacks a step"))?;
        let step_ms: u64 = step.parse().map_err(|_| format!("bad clock step `{step}`"))?;
        if step_ms == 0 {
            return Err("clock step must be at least 1 ms".into());
        }
        let start = match start.parse::<i64>() {
            Ok(secs) => TimePoint::from_epoch_seconds(secs),
            Err(_) => {
                let dt = NaiveDateTime::parse_from_str(start, "%Y-%m-%dT%H:%M:%S")
                    .map_err(|e| format!("bad clock start `{start}`: {e}"))?;
                TimePoint::from_epoch_seconds(dt.and_utc().timestamp())
            }
        };
        Ok(ClockSpec::Simulated { start, step_ms })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceLevel {
    #[default]
    Off,
    /// One line per called stage and per outcome.
    Rules,
    /// Rule lines plus committed updates.
    Solver,
}

impl FromStr for TraceLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<TraceLevel, String> {
        match s {
            "off" => Ok(TraceLevel::Off),
            "rules" => Ok(TraceLevel::Rules),
            "solver" => Ok(TraceLevel::Solver),
            _ => Err(format!("trace level `{s}` is not off, rules or solver")),
        }
    }
}

/// An event to record, `term@seconds`.
#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub event: Term,
    pub seconds: i64,
}

impl FromStr for Injection {
    type Err = String;

    fn from_str(s: &str) -> Result<Injection, String> {
        let (term, secs) = s
            .rsplit_once('@')
            .ok_or_else(|| format!("injection `{s}` is not of the form term@seconds"))?;
        let seconds = secs.trim().parse().map_err(|_| format!("bad injection time `{secs}`"))?;
        let event = parse_term(term).map_err(|e| format!("injection `{term}`: {e}"))?;
        if !event.is_ground() {
            return Err(format!("injected event `{term}` is not ground"));
        }
        Ok(Injection { event, seconds })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub scripts: Vec<String>,
    pub mode: Mode,
    pub tick_ms: u64,
    pub max_cycles: Option<u64>,
    pub clock: ClockSpec,
    pub trace_level: TraceLevel,
    pub inject: Vec<Injection>,
    pub query: Option<String>,
}

#[derive(Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl CliConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tick_ms < 1 {
            return Err(ConfigError("tick must be at least 1 ms".into()));
        }
        if matches!(self.clock, ClockSpec::Simulated { .. }) && self.mode == Mode::Parallel {
            return Err(ConfigError("a simulated clock needs deterministic mode".into()));
        }
        Ok(())
    }

    /// Cycle period: the simulated step, else the tick.
    pub fn period_ms(&self) -> u64 {
        match self.clock {
            ClockSpec::Simulated { step_ms, .. } => step_ms,
            ClockSpec::Real => self.tick_ms,
        }
    }
}
