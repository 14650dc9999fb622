//! Data series and their comma-separated text form.
//!
//! A file is a block of `# key: value` metadata lines, one header row and
//! one record per point. Numbers are written as `{:.12e}`; absent values
//! are empty fields.

use std::fmt::Write as _;
use std::io;
use std::str::FromStr;

use serde::Serialize;

use crate::asymptotics::SchemeKind;
use crate::error::{domain, Error, Result};

pub const HEADER: &str = "curve,scheme,source,L,rho,sigma_g,mu_g,gamma_th,x,value,stderr,hits,trials,flag";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Asymptotic,
    Simulation,
    Exact,
    Baseline,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Asymptotic => "asymptotic",
            Source::Simulation => "simulation",
            Source::Exact => "exact",
            Source::Baseline => "baseline",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Source::Asymptotic, Source::Simulation, Source::Exact, Source::Baseline]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown source `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Er in dB re 1 W for outage curves, `y` for CDF curves.
    pub x: f64,
    /// `None` when the method has no value here (see `flag`).
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub hits: Option<u64>,
    pub trials: Option<u64>,
    pub flag: Option<String>,
}

impl CurvePoint {
    pub fn value(x: f64, value: f64) -> Self {
        Self { x, value: Some(value), stderr: None, hits: None, trials: None, flag: None }
    }

    pub fn missing(x: f64, flag: impl Into<String>) -> Self {
        Self { x, value: None, stderr: None, hits: None, trials: None, flag: Some(flag.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub scheme: Option<SchemeKind>,
    pub source: Source,
    pub l: usize,
    pub rho: f64,
    pub sigma_g: f64,
    pub mu_g: Option<f64>,
    pub gamma_th: Option<f64>,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(name: impl Into<String>, source: Source, l: usize, rho: f64, sigma_g: f64) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains([',', '\n', '\r', '#']) {
            return Err(domain(format!("curve name `{name}` must be non-empty without ',', '#' or newlines")));
        }
        Ok(Self { name, scheme: None, source, l, rho, sigma_g, mu_g: None, gamma_th: None, points: Vec::new() })
    }

    pub fn with_scheme(mut self, scheme: SchemeKind) -> Self {
        self.scheme = Some(scheme);
        self
    }

    pub fn with_gamma_th(mut self, gamma_th: f64) -> Self {
        self.gamma_th = Some(gamma_th);
        self
    }

    pub fn with_mu_g(mut self, mu_g: f64) -> Self {
        self.mu_g = Some(mu_g);
        self
    }

    /// Appends a point; `x` must exceed the previous one.
    pub fn push(&mut self, p: CurvePoint) -> Result<()> {
        if !p.x.is_finite() {
            return Err(domain("curve abscissa must be finite"));
        }
        if let Some(last) = self.points.last() {
            if p.x <= last.x {
                return Err(domain(format!("curve `{}` abscissae must increase: {} after {}", self.name, p.x, last.x)));
            }
        }
        if let Some(f) = &p.flag {
            if f.contains([',', '\n', '\r']) {
                return Err(domain("flag text must not contain ',' or newlines"));
            }
        }
        self.points.push(p);
        Ok(())
    }
}

/// Curves with their run metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CurveSet {
    pub metadata: Vec<(String, String)>,
    pub curves: Vec<Curve>,
}

impl CurveSet {
    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(HEADER);
        out.push('\n');
        for c in &self.curves {
            for p in &c.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    c.name,
                    c.scheme.map(|s| s.to_string()).unwrap_or_default(),
                    c.source.as_str(),
                    c.l,
                    num(c.rho),
                    num(c.sigma_g),
                    opt_num(c.mu_g),
                    opt_num(c.gamma_th),
                    num(p.x),
                    opt_num(p.value),
                    opt_num(p.stderr),
                    p.hits.map(|v| v.to_string()).unwrap_or_default(),
                    p.trials.map(|v| v.to_string()).unwrap_or_default(),
                    p.flag.as_deref().unwrap_or(""),
                );
            }
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Parses text produced by [`CurveSet::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut set = CurveSet::default();
        let mut lines = text.lines().enumerate();
        let mut header_seen = false;
        for (i, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| Error::Config(format!("line {}: malformed metadata", i + 1)))?;
                set.metadata.push((k.to_string(), v.to_string()));
            } else if line == HEADER {
                header_seen = true;
                break;
            } else {
                return Err(Error::Config(format!("line {}: expected metadata or header", i + 1)));
            }
        }
        if !header_seen {
            return Err(Error::Config("missing header row".into()));
        }
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            let at = |what: &str| Error::Config(format!("line {}: bad {what}", i + 1));
            if f.len() != 14 {
                return Err(Error::Config(format!("line {}: expected 14 fields, got {}", i + 1, f.len())));
            }
            let scheme = if f[1].is_empty() { None } else { Some(f[1].parse::<SchemeKind>().map_err(|_| at("scheme"))?) };
            let source: Source = f[2].parse()?;
            let l: usize = f[3].parse().map_err(|_| at("L"))?;
            let rho = parse_num(f[4]).ok_or_else(|| at("rho"))?;
            let sigma_g = parse_num(f[5]).ok_or_else(|| at("sigma_g"))?;
            let mu_g = parse_opt(f[6]).map_err(|_| at("mu_g"))?;
            let gamma_th = parse_opt(f[7]).map_err(|_| at("gamma_th"))?;
            let point = CurvePoint {
                x: parse_num(f[8]).ok_or_else(|| at("x"))?,
                value: parse_opt(f[9]).map_err(|_| at("value"))?,
                stderr: parse_opt(f[10]).map_err(|_| at("stderr"))?,
                hits: if f[11].is_empty() { None } else { Some(f[11].parse().map_err(|_| at("hits"))?) },
                trials: if f[12].is_empty() { None } else { Some(f[12].parse().map_err(|_| at("trials"))?) },
                flag: if f[13].is_empty() { None } else { Some(f[13].to_string()) },
            };
            let same = set.curves.last().is_some_and(|c: &Curve| c.name == f[0]);
            if !same {
                let mut c = Curve::new(f[0], source, l, rho, sigma_g)?;
                c.scheme = scheme;
                c.mu_g = mu_g;
                c.gamma_th = gamma_th;
                set.curves.push(c);
            }
            set.curves.last_mut().expect("curve exists").push(point)?;
        }
        Ok(set)
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn parse_num(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, ()> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| ())
    }
}

/// Parses `start:stop:step` into an increasing grid that includes `stop`
/// when it lies on the lattice.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid `{spec}` must be start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(Error::Config(format!("grid `{spec}` needs finite values and step > 0")));
    }
    if stop < start {
        return Err(Error::Config(format!("grid `{spec}` is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
