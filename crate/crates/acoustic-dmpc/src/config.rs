//! Run configuration: a TOML file plus `key.path=value` overrides.
//!
//! The file maps one to one onto [`SimSetup`]; every section can be omitted
//! and falls back to the stock shallow-survey defaults. Unknown keys are
//! rejected rather than ignored, so a typo fails loudly instead of silently
//! running something else. Overrides are applied to the parsed document
//! before it is interpreted, which means they obey exactly the same schema
//! checks as the file itself.

use serde::{Deserialize, Serialize};

use crate::codec::QuantScheme;
use crate::dmpc::MpcParams;
use crate::error::{Error, Result};
use crate::mac::{MacConfig, MacScheme};
use crate::metrics::MetricsConfig;
use crate::scenario::{FormationSpec, PathKind};
use crate::sim::{SimSetup, VehicleParams};

/// Channel section: what the planner does not already determine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub scheme: MacScheme,
    pub iters_per_step: usize,
    pub prop_delay: f64,
    pub overhead: f64,
    pub loss_prob: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            scheme: MacScheme::Tdma,
            iters_per_step: 3,
            prop_delay: 0.05,
            overhead: 0.3,
            loss_prob: 0.0,
        }
    }
}

/// Formation section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormationConfig {
    Line {
        count: usize,
        half_width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_offsets: Option<Vec<f64>>,
    },
    Octahedron {
        edge: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_offsets: Option<Vec<f64>>,
    },
    Custom {
        slots: Vec<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_offsets: Option<Vec<f64>>,
    },
}

impl Default for FormationConfig {
    fn default() -> Self {
        FormationConfig::Line { count: 4, half_width: 10.0, sigma_offsets: None }
    }
}

impl FormationConfig {
    pub fn build(&self) -> Result<FormationSpec> {
        let (mut spec, offsets) = match self {
            FormationConfig::Line { count, half_width, sigma_offsets } => {
                (FormationSpec::line(*count, *half_width)?, sigma_offsets)
            }
            FormationConfig::Octahedron { edge, sigma_offsets } => {
                (FormationSpec::octahedron(*edge)?, sigma_offsets)
            }
            FormationConfig::Custom { slots, sigma_offsets } => (
                FormationSpec {
                    slots: slots.clone(),
                    sigma_offsets: vec![0.0; slots.len()],
                },
                sigma_offsets,
            ),
        };
        if let Some(offs) = offsets {
            spec.sigma_offsets = offs.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Quantization section. `enabled = false` exchanges exact coefficient
/// vectors out of band instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantConfig {
    pub enabled: bool,
    pub i_bits: u32,
    pub f_bits: u32,
    pub w1_bits: u32,
    pub m_lsb: f64,
    /// Residual scale; derived from the planner when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_ref: Option<f64>,
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            i_bits: 3,
            f_bits: 7,
            w1_bits: 32,
            m_lsb: 1e-4,
            k_ref: None,
        }
    }
}

/// The whole run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub duration: f64,
    pub seed: u64,
    pub planner: MpcParams,
    pub channel: ChannelConfig,
    pub vehicle: VehicleParams,
    pub path: PathKind,
    pub formation: FormationConfig,
    pub quantization: QuantConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration: 500.0,
            seed: 1,
            planner: MpcParams::default(),
            channel: ChannelConfig::default(),
            vehicle: VehicleParams::default(),
            path: PathKind::Lawnmower { leg: 75.0, turn_radius: 15.0 },
            formation: FormationConfig::default(),
            quantization: QuantConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document, applying dotted-path overrides first.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e| Error::Parse(format!("config is not valid TOML: {e}")))?;
        for (key, raw) in overrides {
            set_dotted(&mut doc, key, raw)?;
        }
        let text = toml::to_string(&doc)
            .map_err(|e| Error::Parse(format!("config did not re-serialize: {e}")))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("bad config: {e}")))
    }

    /// Assembles the runtime setup, deriving the channel sizing and the
    /// message quantization scale from the other sections.
    pub fn to_setup(&self) -> Result<SimSetup> {
        let formation = self.formation.build()?;
        let mac = MacConfig {
            scheme: self.channel.scheme,
            fleet_size: formation.fleet_size(),
            step_period: self.planner.step_period,
            iters_per_step: self.channel.iters_per_step,
            prop_delay: self.channel.prop_delay,
            overhead: self.channel.overhead,
            loss_prob: self.channel.loss_prob,
        };
        let quant = if self.quantization.enabled {
            let derived = (2.0 * self.planner.rho - 1.0)
                * self.planner.v_target
                * self.planner.step_period;
            let k_ref = self.quantization.k_ref.unwrap_or(derived);
            if !(k_ref.is_finite() && k_ref > 0.0) {
                return Err(Error::Config(format!(
                    "message residual scale {k_ref} is not positive; raise rho above \
                     0.5 or set quantization.k_ref explicitly"
                )));
            }
            Some(QuantScheme::new(
                self.quantization.i_bits,
                self.quantization.f_bits,
                self.quantization.w1_bits,
                k_ref,
                self.quantization.m_lsb,
            )?)
        } else {
            None
        };
        let setup = SimSetup {
            params: self.planner,
            mac,
            vehicle: self.vehicle,
            path: self.path,
            formation,
            metrics: self.metrics,
            quant,
            duration: self.duration,
            seed: self.seed,
        };
        setup.validate()?;
        Ok(setup)
    }
}

/// Replaces the value at `a.b.c` inside a TOML table, creating intermediate
/// tables as needed. The raw value is parsed as a TOML literal; if that
/// fails it is taken as a bare string.
pub fn set_dotted(doc: &mut toml::Table, dotted: &str, raw: &str) -> Result<()> {
    let segments: Vec<&str> = dotted.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Key(format!("override key '{dotted}' has an empty segment")));
    }
    let value = parse_literal(raw);
    let mut cur = doc;
    for seg in &segments[..segments.len() - 1] {
        let entry = cur
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::Key(format!(
                "override key '{dotted}' descends into non-table segment '{seg}'"
            ))
        })?;
    }
    cur.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let quoted = format!("v = {raw}");
    match quoted.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits a `key=value` override argument.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => Err(Error::Key(format!(
            "override '{arg}' is not of the form key.path=value"
        ))),
    }
}
