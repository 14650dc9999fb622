//! TOML channel descriptions and the shipped figure presets.
//!
//! ```toml
//! L = 2
//! rho = 0.5
//! sigma_G = 0.8     # or sigma_G2 = 0.64
//! Er_dB = 10.0      # or Er_watts = 10.0, or mu_G = 0.5
//! ```

use serde::Deserialize;

use crate::asymptotics::db_to_watts;
use crate::channel::{ChannelSpec, PowerAnchor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    #[serde(rename = "L")]
    pub l: usize,
    pub rho: f64,
    #[serde(rename = "sigma_G")]
    pub sigma_g: Option<f64>,
    #[serde(rename = "sigma_G2")]
    pub sigma_g2: Option<f64>,
    #[serde(rename = "mu_G")]
    pub mu_g: Option<f64>,
    #[serde(rename = "Er_watts")]
    pub er_watts: Option<f64>,
    #[serde(rename = "Er_dB")]
    pub er_db: Option<f64>,
}

impl ChannelEntry {
    pub fn sigma(&self) -> Result<f64> {
        match (self.sigma_g, self.sigma_g2) {
            (Some(s), None) => Ok(s),
            (None, Some(v)) if v > 0.0 => Ok(v.sqrt()),
            (None, Some(v)) => Err(Error::Config(format!("sigma_G2 must be > 0, got {v}"))),
            _ => Err(Error::Config("give exactly one of sigma_G, sigma_G2".into())),
        }
    }

    /// The power anchor, if one was given.
    pub fn anchor(&self) -> Result<Option<PowerAnchor>> {
        match (self.mu_g, self.er_watts, self.er_db) {
            (None, None, None) => Ok(None),
            (Some(m), None, None) => Ok(Some(PowerAnchor::MuG(m))),
            (None, Some(w), None) => Ok(Some(PowerAnchor::ErWatts(w))),
            (None, None, Some(db)) => Ok(Some(PowerAnchor::ErWatts(db_to_watts(db)))),
            _ => Err(Error::Config("give at most one of mu_G, Er_watts, Er_dB".into())),
        }
    }

    pub fn to_spec(&self) -> Result<ChannelSpec> {
        let anchor = self.anchor()?.ok_or_else(|| Error::Config("one of mu_G, Er_watts, Er_dB is required".into()))?;
        ChannelSpec::new(self.l, self.rho, self.sigma()?, anchor)
    }
}

fn toml_error(e: toml::de::Error) -> Error {
    Error::Config(e.to_string())
}

/// Parses a single channel description.
pub fn parse_channel(text: &str) -> Result<ChannelSpec> {
    let entry: ChannelEntry = toml::from_str(text).map_err(toml_error)?;
    entry.to_spec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Outage,
    Sumcdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdfMethod {
    Asym,
    Fw,
    Quadrature,
}

impl CdfMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CdfMethod::Asym => "asym",
            CdfMethod::Fw => "fw",
            CdfMethod::Quadrature => "quadrature",
        }
    }
}

impl std::str::FromStr for CdfMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asym" => Ok(CdfMethod::Asym),
            "fw" => Ok(CdfMethod::Fw),
            "quadrature" => Ok(CdfMethod::Quadrature),
            _ => Err(Error::Config(format!("unknown method `{s}` (asym, fw, quadrature)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub kind: PresetKind,
    pub gamma_th: Option<f64>,
    /// `start:stop:step` in dB re 1 W.
    pub er_db: Option<String>,
    /// `start:stop:step` for CDF curves.
    pub y: Option<String>,
    pub samples: Option<usize>,
    #[serde(default)]
    pub single_branch: bool,
    #[serde(default)]
    pub methods: Vec<CdfMethod>,
    pub channel: Vec<ChannelEntry>,
}

pub const PRESET_NAMES: [&str; 4] = ["fig4", "fig5", "fig6", "fig7"];

/// Shipped preset by name.
pub fn preset(name: &str) -> Result<Preset> {
    let text = match name {
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig5" => include_str!("../presets/fig5.toml"),
        "fig6" => include_str!("../presets/fig6.toml"),
        "fig7" => include_str!("../presets/fig7.toml"),
        _ => return Err(Error::Config(format!("unknown preset `{name}` (fig4, fig5, fig6, fig7)"))),
    };
    parse_preset(text)
}

pub fn parse_preset(text: &str) -> Result<Preset> {
    let p: Preset = toml::from_str(text).map_err(toml_error)?;
    if p.channel.is_empty() {
        return Err(Error::Config(format!("preset `{}` lists no channels", p.name)));
    }
    for c in &p.channel {
        c.sigma()?;
        c.anchor()?;
    }
    match p.kind {
        PresetKind::Outage if p.gamma_th.is_none() || p.er_db.is_none() => {
            Err(Error::Config(format!("outage preset `{}` needs gamma_th and er_db", p.name)))
        }
        PresetKind::Sumcdf if p.y.is_none() || p.methods.is_empty() => {
            Err(Error::Config(format!("CDF preset `{}` needs y and methods", p.name)))
        }
        _ => Ok(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_anchors() {
        let s = parse_channel("L = 2\nrho = 0.5\nsigma_G = 0.8\nEr_dB = 10.0\n").unwrap();
        assert_eq!(s.anchor, PowerAnchor::ErWatts(10.0));
        let s = parse_channel("L = 3\nrho = 0.0\nsigma_G2 = 0.36\nmu_G = -0.5\n").unwrap();
        assert!((s.sigma_g - 0.6).abs() < 1e-15);
        assert_eq!(s.anchor, PowerAnchor::MuG(-0.5));
    }

    #[test]
    fn channel_errors_name_the_problem() {
        let e = parse_channel("L = 2\nrho = 0.5\nsigma_G = 0.8\n").unwrap_err();
        assert!(e.to_string().contains("required"), "{e}");
        let e = parse_channel("L = 2\nrho = 0.5\nsigma_G = 0.8\nmu_G = 0\nEr_dB = 1\n").unwrap_err();
        assert!(e.to_string().contains("at most one"), "{e}");
        let e = parse_channel("L = 2\nrho = 0.5\nsigma = 0.8\nmu_G = 0\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(parse_channel("L = 2\nrho = 1.0\nsigma_G = 0.8\nmu_G = 0\n").is_err());
    }

    #[test]
    fn shipped_presets_parse() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
        }
        let f4 = preset("fig4").unwrap();
        assert_eq!(f4.channel.len(), 3);
        assert!(f4.single_branch);
        assert_eq!(preset("fig6").unwrap().channel.iter().map(|c| c.l).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(preset("fig7").unwrap().methods.len(), 3);
        assert!(preset("fig9").is_err());
    }
}
