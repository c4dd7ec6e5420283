//! TOML experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{
    BeamformingGains, ChannelParams, KFactor, LosModelParams, PathLossParams, PowerLaw,
    RicianKModel,
};
use crate::coverage::Quantity;
use crate::error::{Error, Result};
use crate::mcsim::McConfig;
use crate::model::{MobilityScheme, MobilityState};
use crate::params::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Analytic,
    Mc,
    Both,
}

impl EngineKind {
    pub fn analytic(self) -> bool {
        matches!(self, EngineKind::Analytic | EngineKind::Both)
    }

    pub fn mc(self) -> bool {
        matches!(self, EngineKind::Mc | EngineKind::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Analytic => "analytic",
            EngineKind::Mc => "mc",
            EngineKind::Both => "both",
        }
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(EngineKind::Analytic),
            "mc" => Ok(EngineKind::Mc),
            "both" => Ok(EngineKind::Both),
            other => Err(Error::invalid(
                "engine",
                format!("expected analytic, mc or both, got `{other}`"),
            )),
        }
    }
}

/// Parameters a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    /// SINR threshold, reported in dB.
    Beta,
    /// Elapsed time [s].
    T,
    /// Elapsed time in units of the expected travel time.
    TOverTbar,
    HR,
    LambdaR,
    LambdaT,
    V,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Beta => "beta",
            AxisName::T => "t",
            AxisName::TOverTbar => "t_over_tbar",
            AxisName::HR => "h_r",
            AxisName::LambdaR => "lambda_r",
            AxisName::LambdaT => "lambda_t",
            AxisName::V => "v",
        }
    }
}

/// How grid points are spaced between `min` and `max`.
///
/// `db` reads the endpoints (or explicit values) in decibels and spaces them
/// evenly in dB. The threshold axis defaults to `db`, the others to `linear`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
    Db,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: AxisName,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub scale: Option<AxisScale>,
    /// Explicit grid, in the unit implied by `scale`.
    pub values: Option<Vec<f64>>,
}

impl AxisSpec {
    pub fn scale(&self) -> AxisScale {
        self.scale.unwrap_or(match self.name {
            AxisName::Beta => AxisScale::Db,
            _ => AxisScale::Linear,
        })
    }

    /// Grid points in physical units; the threshold axis is returned in dB.
    pub fn grid(&self, path: &str) -> Result<Vec<f64>> {
        let scale = self.scale();
        let raw = match (&self.values, self.min, self.max, self.points) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err(Error::invalid(
                        format!("{path}.values"),
                        "must not be empty",
                    ));
                }
                v.clone()
            }
            (Some(_), ..) => {
                return Err(Error::invalid(
                    path,
                    "give either `values` or `min`/`max`/`points`",
                ));
            }
            (None, Some(lo), Some(hi), Some(n)) => {
                if n == 0 {
                    return Err(Error::invalid(format!("{path}.points"), "must be >= 1"));
                }
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::invalid(path, "min and max must be finite"));
                }
                if scale == AxisScale::Log && !(lo > 0.0 && hi > 0.0) {
                    return Err(Error::invalid(path, "log scale needs min, max > 0"));
                }
                (0..n)
                    .map(|i| {
                        let f = if n == 1 {
                            0.0
                        } else {
                            i as f64 / (n - 1) as f64
                        };
                        match scale {
                            AxisScale::Log => lo * (hi / lo).powf(f),
                            AxisScale::Linear | AxisScale::Db => lo + (hi - lo) * f,
                        }
                    })
                    .collect()
            }
            _ => {
                return Err(Error::invalid(
                    path,
                    "needs `values` or all of `min`, `max`, `points`",
                ));
            }
        };
        let grid: Vec<f64> = match (self.name, scale) {
            (AxisName::Beta, AxisScale::Db) => raw,
            (AxisName::Beta, _) => {
                if raw.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::invalid(path, "linear thresholds must be > 0"));
                }
                raw.iter().map(|x| 10.0 * x.log10()).collect()
            }
            (_, AxisScale::Db) => raw.iter().map(|x| 10f64.powf(x / 10.0)).collect(),
            _ => raw,
        };
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(path, "grid values must be finite"));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerLawConfig {
    intercept: f64,
    exponent: f64,
}

impl From<PowerLawConfig> for PowerLaw {
    fn from(c: PowerLawConfig) -> Self {
        PowerLaw {
            intercept: c.intercept,
            exponent: c.exponent,
        }
    }
}

impl From<PowerLaw> for PowerLawConfig {
    fn from(p: PowerLaw) -> Self {
        PowerLawConfig {
            intercept: p.intercept,
            exponent: p.exponent,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PathLossConfig {
    g2g_los: PowerLawConfig,
    g2g_nlos: PowerLawConfig,
    a2g_los: PowerLawConfig,
    a2g_nlos: PowerLawConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GainsConfig {
    tbs_main: f64,
    tbs_side: f64,
    rn_main: f64,
    rn_side: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LosConfig {
    d1: f64,
    d2: f64,
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct KFactorConfig {
    g2g_los: f64,
    g2g_nlos: f64,
    a2g_los: f64,
    a2g_nlos: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NetworkConfig {
    lambda_t: f64,
    lambda_r: f64,
    h_r: f64,
    p_t: f64,
    p_r: f64,
    sigma2: f64,
    gains: GainsConfig,
    path_loss: PathLossConfig,
    los: LosConfig,
    k_factor: KFactorConfig,
}

fn constant_k(k: &KFactor) -> f64 {
    match k {
        KFactor::Constant(v) => *v,
        KFactor::Distance(f) => f(0.0),
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let p = NetworkParams::default();
        let pl = p.channel.path_loss;
        let k = &p.channel.k_factor;
        NetworkConfig {
            lambda_t: p.lambda_t,
            lambda_r: p.lambda_r,
            h_r: p.h_r,
            p_t: p.p_t,
            p_r: p.p_r,
            sigma2: p.sigma2,
            gains: GainsConfig {
                tbs_main: p.gains.tbs_main,
                tbs_side: p.gains.tbs_side,
                rn_main: p.gains.rn_main,
                rn_side: p.gains.rn_side,
            },
            path_loss: PathLossConfig {
                g2g_los: pl.g2g_los.into(),
                g2g_nlos: pl.g2g_nlos.into(),
                a2g_los: pl.a2g_los.into(),
                a2g_nlos: pl.a2g_nlos.into(),
            },
            los: LosConfig {
                d1: p.channel.los.d1,
                d2: p.channel.los.d2,
                a: p.channel.los.a,
                b: p.channel.los.b,
            },
            k_factor: KFactorConfig {
                g2g_los: constant_k(&k.g2g_los),
                g2g_nlos: constant_k(&k.g2g_nlos),
                a2g_los: constant_k(&k.a2g_los),
                a2g_nlos: constant_k(&k.a2g_nlos),
            },
        }
    }
}

impl Default for PathLossConfig {
    fn default() -> Self {
        NetworkConfig::default().path_loss
    }
}

impl Default for GainsConfig {
    fn default() -> Self {
        NetworkConfig::default().gains
    }
}

impl Default for LosConfig {
    fn default() -> Self {
        NetworkConfig::default().los
    }
}

impl Default for KFactorConfig {
    fn default() -> Self {
        NetworkConfig::default().k_factor
    }
}

impl From<NetworkConfig> for NetworkParams {
    fn from(c: NetworkConfig) -> Self {
        NetworkParams {
            lambda_t: c.lambda_t,
            lambda_r: c.lambda_r,
            h_r: c.h_r,
            p_t: c.p_t,
            p_r: c.p_r,
            sigma2: c.sigma2,
            gains: BeamformingGains {
                tbs_main: c.gains.tbs_main,
                tbs_side: c.gains.tbs_side,
                rn_main: c.gains.rn_main,
                rn_side: c.gains.rn_side,
            },
            channel: ChannelParams {
                path_loss: PathLossParams {
                    g2g_los: c.path_loss.g2g_los.into(),
                    g2g_nlos: c.path_loss.g2g_nlos.into(),
                    a2g_los: c.path_loss.a2g_los.into(),
                    a2g_nlos: c.path_loss.a2g_nlos.into(),
                },
                los: LosModelParams {
                    d1: c.los.d1,
                    d2: c.los.d2,
                    a: c.los.a,
                    b: c.los.b,
                },
                k_factor: RicianKModel {
                    g2g_los: KFactor::Constant(c.k_factor.g2g_los),
                    g2g_nlos: KFactor::Constant(c.k_factor.g2g_nlos),
                    a2g_los: KFactor::Constant(c.k_factor.a2g_los),
                    a2g_nlos: KFactor::Constant(c.k_factor.a2g_nlos),
                },
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MobilityConfig {
    scheme: String,
    v: f64,
    t: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            scheme: "toward_user".into(),
            v: 40.0,
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct McSection {
    n_drops: usize,
    seed: u64,
    disk_radius: f64,
}

impl Default for McSection {
    fn default() -> Self {
        let c = McConfig::default();
        McSection {
            n_drops: c.n_drops,
            seed: c.seed,
            disk_radius: c.disk_radius,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: PathBuf,
    csv: String,
    plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            csv: "results.csv".into(),
            plots: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    #[serde(default = "default_engine")]
    engine: EngineKind,
    #[serde(default = "default_quantities")]
    quantities: Vec<String>,
    /// Threshold used when no `beta` axis is swept.
    #[serde(default)]
    beta_db: f64,
    /// Scales every analytic tolerance.
    #[serde(default = "default_tolerance_scale")]
    tolerance_scale: f64,
    #[serde(default)]
    network: NetworkConfig,
    #[serde(default)]
    mobility: MobilityConfig,
    #[serde(default)]
    mc: McSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    axis: Vec<AxisSpec>,
}

fn default_engine() -> EngineKind {
    EngineKind::Both
}

fn default_quantities() -> Vec<String> {
    vec!["total".into()]
}

fn default_tolerance_scale() -> f64 {
    1.0
}

/// A validated experiment: base scenario, sweep axes and engine settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub engine: EngineKind,
    pub quantities: Vec<Quantity>,
    pub beta_db: f64,
    pub tolerance_scale: f64,
    pub network: NetworkParams,
    pub mobility: MobilityState,
    pub mc: McConfig,
    pub out_dir: PathBuf,
    pub csv_name: String,
    pub plots: bool,
    pub axes: Vec<AxisSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(cfg)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let network: NetworkParams = raw.network.into();
        network.validate().map_err(|e| prefix(e, "network"))?;

        let scheme = MobilityScheme::from_str(&raw.mobility.scheme)?;
        let mobility = MobilityState {
            scheme,
            v: raw.mobility.v,
            t: raw.mobility.t,
        };
        mobility.validate()?;

        let mc = McConfig {
            n_drops: raw.mc.n_drops,
            seed: raw.mc.seed,
            disk_radius: raw.mc.disk_radius,
        };
        mc.validate()?;

        if raw.quantities.is_empty() {
            return Err(Error::invalid(
                "quantities",
                "must list at least one quantity",
            ));
        }
        let quantities = raw
            .quantities
            .iter()
            .map(|q| {
                Quantity::from_str(q)
                    .map_err(|_| Error::invalid("quantities", format!("unknown quantity `{q}`")))
            })
            .collect::<Result<Vec<_>>>()?;

        if !raw.beta_db.is_finite() {
            return Err(Error::invalid("beta_db", "must be finite"));
        }
        if !(raw.tolerance_scale > 0.0 && raw.tolerance_scale.is_finite()) {
            return Err(Error::invalid("tolerance_scale", "must be > 0"));
        }

        let mut seen = Vec::new();
        for (i, axis) in raw.axis.iter().enumerate() {
            let path = format!("axis[{i}]");
            if seen.contains(&axis.name) {
                return Err(Error::invalid(
                    path,
                    format!("duplicate axis `{}`", axis.name.as_str()),
                ));
            }
            if axis.name == AxisName::T && seen.contains(&AxisName::TOverTbar)
                || axis.name == AxisName::TOverTbar && seen.contains(&AxisName::T)
            {
                return Err(Error::invalid(
                    path,
                    "`t` and `t_over_tbar` are mutually exclusive",
                ));
            }
            seen.push(axis.name);
            let grid = axis.grid(&path)?;
            let nonneg = !matches!(axis.name, AxisName::Beta);
            if nonneg && grid.iter().any(|&x| x < 0.0) {
                return Err(Error::invalid(
                    path,
                    format!("`{}` values must be >= 0", axis.name.as_str()),
                ));
            }
        }
        if seen.contains(&AxisName::TOverTbar)
            && !(mobility.v > 0.0)
            && !seen.contains(&AxisName::V)
        {
            return Err(Error::invalid("mobility.v", "t_over_tbar needs v > 0"));
        }

        Ok(ExperimentConfig {
            name: raw.name.unwrap_or_default(),
            engine: raw.engine,
            quantities,
            beta_db: raw.beta_db,
            tolerance_scale: raw.tolerance_scale,
            network,
            mobility,
            mc,
            out_dir: raw.output.dir,
            csv_name: raw.output.csv,
            plots: raw.output.plots,
            axes: raw.axis,
        })
    }
}

fn prefix(e: Error, section: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}
