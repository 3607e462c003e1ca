//! Run configuration: a flat TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::particle_dynamics::IntegratorConfig;
use crate::tolerances::{DEFAULT_ABS_TOL, DEFAULT_MAX_STEP, DEFAULT_REL_TOL};
use crate::wave_model::WaveParameters;

/// Current strength: either equal to the computed wave speed, or explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C0Mode {
    Equal,
    Value(f64),
}

impl fmt::Display for C0Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            C0Mode::Equal => f.write_str("equal"),
            C0Mode::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for C0Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("equal") {
            return Ok(C0Mode::Equal);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Configuration(format!("c0 must be a number or \"equal\", got {s:?}")))?;
        if !v.is_finite() {
            return Err(Error::Configuration(format!("c0 must be finite, got {v}")));
        }
        Ok(C0Mode::Value(v))
    }
}

impl Serialize for C0Mode {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            C0Mode::Equal => ser.serialize_str("equal"),
            C0Mode::Value(v) => ser.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for C0Mode {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct C0Visitor;
        impl Visitor<'_> for C0Visitor {
            type Value = C0Mode;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"equal\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<C0Mode, E> {
                Ok(C0Mode::Value(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<C0Mode, E> {
                Ok(C0Mode::Value(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<C0Mode, E> {
                Ok(C0Mode::Value(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<C0Mode, E> {
                v.parse().map_err(E::custom)
            }
        }
        de.deserialize_any(C0Visitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Numeric,
    Both,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "numeric" => Ok(Method::Numeric),
            "both" => Ok(Method::Both),
            other => Err(Error::Configuration(format!(
                "method must be exact, numeric or both, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Configuration(format!(
                "format must be csv or json, got {other:?}"
            ))),
        }
    }
}

/// Everything a trajectory run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delta: f64,
    pub weber: f64,
    pub c0: C0Mode,
    pub x0: f64,
    pub z0: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Accept numerically integrated components under `method = exact`.
    pub allow_fallback: bool,
    /// Also write whitespace-separated `x z` files for plotting.
    pub plot_data: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            weber: 0.0,
            c0: C0Mode::Equal,
            x0: 0.0,
            z0: 0.5,
            t_end: 1.0,
            dt_out: 0.01,
            method: Method::Both,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_step: DEFAULT_MAX_STEP,
            format: OutputFormat::Csv,
            out: None,
            allow_fallback: false,
            plot_data: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Configuration(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Configuration(msg)) };
        check(
            self.delta.is_finite() && self.delta > 0.0,
            format!("delta must be > 0, got {}", self.delta),
        )?;
        check(
            self.weber.is_finite() && self.weber >= 0.0,
            format!("weber must be >= 0, got {}", self.weber),
        )?;
        if let C0Mode::Value(v) = self.c0 {
            check(v.is_finite(), format!("c0 must be finite, got {v}"))?;
        }
        check(self.x0.is_finite(), format!("x0 must be finite, got {}", self.x0))?;
        check(
            (0.0..=1.0).contains(&self.z0),
            format!("z0 must lie in [0, 1], got {}", self.z0),
        )?;
        check(
            self.t_end.is_finite() && self.t_end > 0.0,
            format!("t_end must be > 0, got {}", self.t_end),
        )?;
        check(
            self.dt_out.is_finite() && self.dt_out > 0.0,
            format!("dt_out must be > 0, got {}", self.dt_out),
        )?;
        check(
            self.t_end / self.dt_out <= 1e7,
            format!("t_end / dt_out = {} exceeds 1e7 output rows", self.t_end / self.dt_out),
        )?;
        self.integrator().validate()
    }

    pub fn wave_parameters(&self) -> Result<WaveParameters> {
        match self.c0 {
            C0Mode::Equal => WaveParameters::co_moving(self.delta, self.weber),
            C0Mode::Value(v) => WaveParameters::new(self.delta, self.weber, v),
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            max_step: self.max_step,
            ..IntegratorConfig::with_tolerances(self.rel_tol, self.abs_tol)
        }
    }

    /// Output times `i dt_out`, `i = 0..=floor(t_end / dt_out)`.
    pub fn output_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.dt_out + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.dt_out).collect()
    }
}
