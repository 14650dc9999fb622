//! `lndiv`: outage curves, CDF approximations and verification checks as
//! comma-separated series.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lndiv::asymptotics::{
    db_to_watts, ln_outage_asym, ln_sum_lognormal_cdf_asym, single_branch_outage, watts_to_db, OutageQuery,
    SchemeKind,
};
use lndiv::baselines::fenton_wilkinson_cdf;
use lndiv::channel::{derive_params, mu_g_from_er, ChannelSpec, DerivedParams, PowerAnchor};
use lndiv::config::{preset, CdfMethod, ChannelEntry, Preset, PresetKind};
use lndiv::curve::{parse_grid, Curve, CurvePoint, CurveSet, Source};
use lndiv::montecarlo::{sweep_all, EstimateFlag, SimConfig, SimEstimate};
use lndiv::oracles::exact::sum2_cdf_quadrature;
use lndiv::oracles::{verify, VerifyConfig, VerifyReport};
use lndiv::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "lndiv", version, about = "Outage of SC/EGC/MRC receivers over equally correlated lognormal fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form high-power outage over an Er grid.
    Asymptotic(OutageArgs),
    /// Monte Carlo outage over an Er grid.
    Simulate(SimulateArgs),
    /// CDF of the sum of L lognormals.
    Sumcdf(SumcdfArgs),
    /// Numerical checks of the supporting geometry.
    Verify(VerifyArgs),
    /// Curves of a shipped parameter preset.
    Figure(FigureArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Channel description in TOML (L, rho, sigma_G or sigma_G2); overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of branches.
    #[arg(long = "L", default_value_t = 2)]
    l: usize,
    /// Pairwise correlation of the Gaussian exponents.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Standard deviation of each Gaussian exponent.
    #[arg(long = "sigma-g", default_value_t = 0.8)]
    sigma_g: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// Write here (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct OutageArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Outage threshold in watts.
    #[arg(long = "gamma-th", default_value_t = 0.1)]
    gamma_th: f64,
    /// Received-power grid `start:stop:step` in dB re 1 W.
    #[arg(long = "er-db", default_value = "0:40:2", allow_hyphen_values = true)]
    er_db: String,
    #[arg(long, value_enum, default_value_t = SchemeArg::All)]
    scheme: SchemeArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    outage: OutageArgs,
    /// Trials per grid point.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, env = "LNDIV_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SumcdfArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Mean of each Gaussian exponent, unless the config file sets one.
    #[arg(long = "mu-g", default_value_t = 0.0, allow_hyphen_values = true)]
    mu_g: f64,
    /// Grid `start:stop:step` of sum values.
    #[arg(long, default_value = "0.05:3:0.05", allow_hyphen_values = true)]
    y: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Asym)]
    method: MethodArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// `all` or one of lemma, kkt, subset, derivatives, limits.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, env = "LNDIV_SEED", default_value_t = 1)]
    seed: u64,
    /// Uniform draws for the subset suite.
    #[arg(long = "subset-samples", default_value_t = VerifyConfig::default().subset_samples)]
    subset_samples: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(value_parser = ["fig4", "fig5", "fig6", "fig7"])]
    name: String,
    /// Add Monte Carlo curves to outage presets.
    #[arg(long)]
    simulate: bool,
    /// Trials per point, overriding the preset.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, env = "LNDIV_SEED", default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Obj,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Sc,
    Egc,
    Mrc,
    All,
}

impl SchemeArg {
    fn schemes(self) -> Vec<SchemeKind> {
        match self {
            SchemeArg::Sc => vec![SchemeKind::Sc],
            SchemeArg::Egc => vec![SchemeKind::Egc],
            SchemeArg::Mrc => vec![SchemeKind::Mrc],
            SchemeArg::All => SchemeKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Asym,
    Fw,
    Quadrature,
}

impl From<MethodArg> for CdfMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Asym => CdfMethod::Asym,
            MethodArg::Fw => CdfMethod::Fw,
            MethodArg::Quadrature => CdfMethod::Quadrature,
        }
    }
}

enum Failure {
    Lib(Error),
    Io(io::Error),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DOMAIN,
            })
        }
    }
}

fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Asymptotic(a) => {
            let (spec, _) = channel_spec(&a.channel)?;
            let grid = parse_grid(&a.er_db)?;
            let mut set = CurveSet::default();
            set.meta("command", "asymptotic");
            set.meta("x", "Er_dB");
            set.curves = asymptotic_curves(&spec, &a.scheme.schemes(), a.gamma_th, &grid)?;
            emit_curves(&set, &a.output)
        }
        Command::Simulate(s) => {
            let a = &s.outage;
            let (spec, _) = channel_spec(&a.channel)?;
            let grid = parse_grid(&a.er_db)?;
            let cfg = SimConfig::new(s.samples, s.seed)?;
            let mut set = CurveSet::default();
            set.meta("command", "simulate");
            set.meta("x", "Er_dB");
            set.meta("seed", s.seed);
            set.meta("samples", s.samples);
            set.curves = simulation_curves(&spec, &a.scheme.schemes(), a.gamma_th, &grid, &cfg)?;
            emit_curves(&set, &a.output)
        }
        Command::Sumcdf(s) => {
            let (spec, config_mu_g) = channel_spec(&s.channel)?;
            let mu_g = config_mu_g.unwrap_or(s.mu_g);
            let grid = parse_grid(&s.y)?;
            let mut set = CurveSet::default();
            set.meta("command", "sumcdf");
            set.meta("x", "y");
            set.curves = vec![cdf_curve(spec.l, spec.rho, mu_g, spec.sigma_g, &grid, s.method.into())?];
            emit_curves(&set, &s.output)
        }
        Command::Verify(v) => {
            let suites = lndiv::oracles::suite::parse_suites(&v.suite)?;
            let report = verify(&suites, &VerifyConfig { seed: v.seed, subset_samples: v.subset_samples });
            let text = match v.output.format {
                Format::Csv => verify_text(&report),
                Format::Obj => to_json(&report)?,
            };
            write_output(&text, v.output.out.as_deref())?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Verify)
            }
        }
        Command::Figure(f) => {
            let p = preset(&f.name)?;
            let set = figure(&p, &f)?;
            emit_curves(&set, &f.output)
        }
    }
}

/// The channel and, when the config file gives one, its exponent mean.
fn channel_spec(c: &ChannelArgs) -> Outcome<(ChannelSpec, Option<f64>)> {
    match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let at = |e: String| Error::Config(format!("{}: {e}", path.display()));
            let entry: ChannelEntry = toml::from_str(&text).map_err(|e| at(e.to_string()))?;
            let spec = entry_spec(&entry).map_err(|f| match f {
                Failure::Lib(e) => Failure::Lib(at(e.to_string())),
                other => other,
            })?;
            let mu_g = match entry.anchor().map_err(|e| at(e.to_string()))? {
                Some(PowerAnchor::MuG(m)) => Some(m),
                Some(PowerAnchor::ErWatts(w)) => Some(mu_g_from_er(w, spec.sigma_g)),
                None => None,
            };
            Ok((spec, mu_g))
        }
        // The level is set per grid point, so any anchor serves.
        None => Ok((ChannelSpec::new(c.l, c.rho, c.sigma_g, PowerAnchor::MuG(0.0))?, None)),
    }
}

fn channel_label(spec: &ChannelSpec) -> String {
    format!("L={} rho={} sigma_G={}", spec.l, spec.rho, spec.sigma_g)
}

fn asymptotic_curves(spec: &ChannelSpec, schemes: &[SchemeKind], gamma_th: f64, grid: &[f64]) -> Outcome<Vec<Curve>> {
    let params = derive_params(spec)?;
    let mut curves = Vec::new();
    for &scheme in schemes {
        let name = format!("{scheme} asymptotic {}", channel_label(spec));
        let mut c = Curve::new(name, Source::Asymptotic, spec.l, spec.rho, spec.sigma_g)?
            .with_scheme(scheme)
            .with_gamma_th(gamma_th);
        for &db in grid {
            let q = OutageQuery::from_db(gamma_th, db)?;
            let point = match ln_outage_asym(&params, scheme, &q) {
                Ok(ln_p) => CurvePoint::value(db, ln_p.exp()),
                Err(Error::BelowAsymptoticRegime { min_er_watts }) => {
                    CurvePoint::missing(db, format!("below_regime:min_er_db={:.4}", watts_to_db(min_er_watts)))
                }
                Err(e) => return Err(e.into()),
            };
            c.push(point)?;
        }
        curves.push(c);
    }
    Ok(curves)
}

fn estimate_flag(e: &SimEstimate) -> Option<String> {
    let ci = e.interval.map(|(lo, hi)| format!(":ci={lo:.4e}..{hi:.4e}")).unwrap_or_default();
    e.flag.map(|f| match f {
        EstimateFlag::LowCount => format!("low_count{ci}"),
        EstimateFlag::ResolutionExhausted { upper_bound } => {
            format!("resolution_exhausted:upper_bound={upper_bound:.4e}{ci}")
        }
    })
}

fn simulation_curves(
    spec: &ChannelSpec,
    schemes: &[SchemeKind],
    gamma_th: f64,
    grid: &[f64],
    cfg: &SimConfig,
) -> Outcome<Vec<Curve>> {
    let params: DerivedParams = derive_params(spec)?;
    let points = sweep_all(&params, gamma_th, grid, cfg)?;
    let mut curves = Vec::new();
    for (i, scheme) in SchemeKind::ALL.into_iter().enumerate() {
        if !schemes.contains(&scheme) {
            continue;
        }
        let name = format!("{scheme} simulation {}", channel_label(spec));
        let mut c = Curve::new(name, Source::Simulation, spec.l, spec.rho, spec.sigma_g)?
            .with_scheme(scheme)
            .with_gamma_th(gamma_th);
        for p in &points {
            let e = &p[i].estimate;
            c.push(CurvePoint {
                x: p[i].er_db,
                value: Some(e.p_hat),
                stderr: Some(e.stderr),
                hits: Some(e.hits),
                trials: Some(e.n),
                flag: estimate_flag(e),
            })?;
        }
        curves.push(c);
    }
    Ok(curves)
}

fn single_branch_curve(sigma_g: f64, gamma_th: f64, grid: &[f64]) -> Outcome<Curve> {
    let mut c = Curve::new(format!("single-branch sigma_G={sigma_g}"), Source::Baseline, 1, 0.0, sigma_g)?
        .with_gamma_th(gamma_th);
    for &db in grid {
        let q = OutageQuery::new(gamma_th, db_to_watts(db))?;
        c.push(CurvePoint::value(db, single_branch_outage(sigma_g, &q)?))?;
    }
    Ok(c)
}

fn cdf_curve(l: usize, rho: f64, mu_g: f64, sigma_g: f64, grid: &[f64], method: CdfMethod) -> Outcome<Curve> {
    if method == CdfMethod::Quadrature && l != 2 {
        return Err(Error::Capability(format!("quadrature CDF is implemented for L = 2 only, got L = {l}")).into());
    }
    let source = match method {
        CdfMethod::Asym => Source::Asymptotic,
        CdfMethod::Fw => Source::Baseline,
        CdfMethod::Quadrature => Source::Exact,
    };
    let name = format!("{} L={l} rho={rho} sigma_G2={:.6}", method.as_str(), sigma_g * sigma_g);
    let mut c = Curve::new(name, source, l, rho, sigma_g)?.with_mu_g(mu_g);
    for &y in grid {
        let point = match method {
            CdfMethod::Asym => match ln_sum_lognormal_cdf_asym(l, rho, mu_g, sigma_g, y) {
                Ok(ln_p) => CurvePoint::value(y, ln_p.exp()),
                Err(Error::Domain(_)) if y > 0.0 => CurvePoint::missing(y, "beyond_tail"),
                Err(e) => return Err(e.into()),
            },
            CdfMethod::Fw => CurvePoint::value(y, fenton_wilkinson_cdf(l, rho, mu_g, sigma_g, y)?),
            CdfMethod::Quadrature => CurvePoint::value(y, sum2_cdf_quadrature(mu_g, sigma_g, rho, y)?),
        };
        c.push(point)?;
    }
    Ok(c)
}

fn entry_spec(e: &ChannelEntry) -> Outcome<ChannelSpec> {
    Ok(ChannelSpec::new(e.l, e.rho, e.sigma()?, PowerAnchor::MuG(e.mu_g.unwrap_or(0.0)))?)
}

fn figure(p: &Preset, f: &FigureArgs) -> Outcome<CurveSet> {
    let mut set = CurveSet::default();
    set.meta("command", "figure");
    set.meta("preset", &p.name);
    match p.kind {
        PresetKind::Outage => {
            let gamma_th = p.gamma_th.expect("validated preset");
            let grid = parse_grid(p.er_db.as_deref().expect("validated preset"))?;
            set.meta("x", "Er_dB");
            let cfg = if f.simulate {
                let samples = f.samples.or(p.samples).unwrap_or(1_000_000);
                set.meta("seed", f.seed);
                set.meta("samples", samples);
                Some(SimConfig::new(samples, f.seed)?)
            } else {
                None
            };
            for e in &p.channel {
                let spec = entry_spec(e)?;
                set.curves.extend(asymptotic_curves(&spec, &SchemeKind::ALL, gamma_th, &grid)?);
                if let Some(cfg) = &cfg {
                    set.curves.extend(simulation_curves(&spec, &SchemeKind::ALL, gamma_th, &grid, cfg)?);
                }
            }
            if p.single_branch {
                let mut sigmas: Vec<f64> = Vec::new();
                for e in &p.channel {
                    let s = e.sigma()?;
                    if !sigmas.contains(&s) {
                        sigmas.push(s);
                    }
                }
                for s in sigmas {
                    set.curves.push(single_branch_curve(s, gamma_th, &grid)?);
                }
            }
        }
        PresetKind::Sumcdf => {
            let grid = parse_grid(p.y.as_deref().expect("validated preset"))?;
            set.meta("x", "y");
            for e in &p.channel {
                let spec = entry_spec(e)?;
                let mu_g = e.mu_g.unwrap_or(0.0);
                for &m in &p.methods {
                    set.curves.push(cdf_curve(spec.l, spec.rho, mu_g, spec.sigma_g, &grid, m)?);
                }
            }
        }
    }
    Ok(set)
}

fn to_json<T: serde::Serialize>(v: &T) -> Outcome<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

fn emit_curves(set: &CurveSet, out: &OutputArgs) -> Outcome<()> {
    let text = match out.format {
        Format::Csv => set.to_csv(),
        Format::Obj => to_json(set)?,
    };
    write_output(&text, out.out.as_deref())
}

fn verify_text(r: &VerifyReport) -> String {
    let mut s = format!("# command: verify\n# seed: {}\nsuite,check,pass,value,threshold,detail\n", r.seed);
    for c in &r.checks {
        s.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{}\n",
            c.suite,
            c.name.replace(',', ";"),
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.threshold,
            c.detail.replace(',', ";")
        ));
    }
    s.push_str(&format!("# overall: {}\n", if r.pass { "PASS" } else { "FAIL" }));
    s
}

/// Writes to a sibling temporary file and renames it over `path`.
fn write_output(text: &str, path: Option<&Path>) -> Outcome<()> {
    let Some(path) = path else {
        io::stdout().lock().write_all(text.as_bytes())?;
        return Ok(());
    };
    let name = path.file_name().ok_or_else(|| io::Error::other(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::write(&tmp, text).and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
