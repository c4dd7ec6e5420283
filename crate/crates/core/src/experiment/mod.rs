//! Parameter sweeps over the analytic engine and the simulator, with CSV,
//! SVG and comparison-report output.

pub mod config;
pub mod plot;
pub mod report;
pub mod table;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{AxisName, AxisScale, AxisSpec, EngineKind, ExperimentConfig};
pub use table::{read_csv, write_csv, ResultRow};

use crate::coverage::{CoverageEngine, CoverageQuery, EngineTolerances, Quantity, Threshold};
use crate::error::{Error, Result};
use crate::mcsim::{run_drops, McRun};
use crate::model::{expected_travel_time, same_tbs_diagnostic, MobilityState};
use crate::params::NetworkParams;

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub no_plots: bool,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = self.engine {
            cfg.engine = e;
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if self.no_plots {
            cfg.plots = false;
        }
    }
}

/// One point of the sweep without the threshold.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: NetworkParams,
    pub mobility: MobilityState,
    pub t_over_tbar: Option<f64>,
}

/// Per-row wall times, kept out of the results so those stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowTiming {
    pub index: usize,
    pub analytic_seconds: f64,
    /// Time of the scenario's simulation batch, shared by its rows.
    pub mc_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<RowTiming>,
}

impl RunOutput {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub timings: PathBuf,
    pub plots: Vec<PathBuf>,
    pub failures: usize,
}

/// Expands the non-threshold axes into scenarios, in axis order with the
/// last axis varying fastest.
pub fn scenarios(cfg: &ExperimentConfig) -> Result<Vec<Scenario>> {
    let axes: Vec<(AxisName, Vec<f64>)> = cfg
        .axes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.name != AxisName::Beta)
        .map(|(i, a)| Ok((a.name, a.grid(&format!("axis[{i}]"))?)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut counter = vec![0usize; axes.len()];
    loop {
        let mut network = cfg.network.clone();
        let mut mobility = cfg.mobility;
        let mut time = Time::Seconds(mobility.t);
        for ((name, grid), &i) in axes.iter().zip(&counter) {
            let x = grid[i];
            match name {
                AxisName::HR => network.h_r = x,
                AxisName::LambdaR => network.lambda_r = x,
                AxisName::LambdaT => network.lambda_t = x,
                AxisName::V => mobility.v = x,
                AxisName::T => time = Time::Seconds(x),
                AxisName::TOverTbar => time = Time::Relative(x),
                AxisName::Beta => unreachable!(),
            }
        }
        network.validate()?;
        let tbar = (mobility.v > 0.0)
            .then(|| expected_travel_time(&network, mobility.v))
            .transpose()?;
        let (t, t_over_tbar) = match (time, tbar) {
            (Time::Seconds(t), tbar) => (t, tbar.map(|tb| t / tb)),
            (Time::Relative(x), Some(tb)) => (x * tb, Some(x)),
            (Time::Relative(_), None) => {
                return Err(Error::invalid("mobility.v", "t_over_tbar needs v > 0"));
            }
        };
        mobility.t = t;
        mobility.validate()?;
        out.push(Scenario {
            network,
            mobility,
            t_over_tbar,
        });

        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            counter[k] += 1;
            if counter[k] < axes[k].1.len() {
                break;
            }
            counter[k] = 0;
        }
    }
}

#[derive(Clone, Copy)]
enum Time {
    Seconds(f64),
    Relative(f64),
}

fn thresholds(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    match cfg.axes.iter().position(|a| a.name == AxisName::Beta) {
        Some(i) => cfg.axes[i].grid(&format!("axis[{i}]")),
        None => Ok(vec![cfg.beta_db]),
    }
}

type EngineKey = (u64, u64, u64);

fn engine_key(p: &NetworkParams) -> EngineKey {
    (p.h_r.to_bits(), p.lambda_r.to_bits(), p.lambda_t.to_bits())
}

/// Evaluates every sweep row. Rows come out in sweep order (scenarios, then
/// thresholds, then quantities) whatever the scheduling; association rows
/// are threshold-free and appear once per scenario.
pub fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RunOutput> {
    let scenarios = scenarios(cfg)?;
    let betas = thresholds(cfg)?;
    let tol = EngineTolerances::default().scaled(cfg.tolerance_scale);

    // Engines are shared by scenarios with the same network so their
    // memoized conditional coverages are reused across times and speeds.
    let mut engines: BTreeMap<EngineKey, CoverageEngine> = BTreeMap::new();
    if cfg.engine.analytic() {
        for s in &scenarios {
            if let std::collections::btree_map::Entry::Vacant(e) =
                engines.entry(engine_key(&s.network))
            {
                e.insert(CoverageEngine::with_tolerances(s.network.clone(), tol)?);
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let per_scenario: Vec<(Vec<ResultRow>, Vec<RowTiming>)> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let engine = engines.get(&engine_key(&s.network));
                evaluate_scenario(cfg, s, &betas, engine)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (r, t) in per_scenario {
        rows.extend(r);
        timings.extend(t);
    }
    for (i, (row, timing)) in rows.iter_mut().zip(timings.iter_mut()).enumerate() {
        row.index = i;
        timing.index = i;
    }
    Ok(RunOutput { rows, timings })
}

fn evaluate_scenario(
    cfg: &ExperimentConfig,
    s: &Scenario,
    betas: &[f64],
    engine: Option<&CoverageEngine>,
) -> (Vec<ResultRow>, Vec<RowTiming>) {
    let mc_start = Instant::now();
    let mc: Option<std::result::Result<McRun, String>> = cfg
        .engine
        .mc()
        .then(|| run_drops(&s.network, &s.mobility, &cfg.mc).map_err(|e| e.to_string()));
    let mc_seconds = mc_start.elapsed().as_secs_f64();

    let same_tbs_model =
        engine.map(|e| same_tbs_diagnostic(&s.network, &s.mobility, &e.tolerances().outer));
    let same_tbs_mc = match &mc {
        Some(Ok(run)) => {
            let r = run.same_tbs_rate_associated();
            (r.n > 0).then_some(r.value)
        }
        _ => None,
    };

    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (bi, &beta_db) in betas.iter().enumerate() {
        for &quantity in &cfg.quantities {
            if quantity == Quantity::Association && bi > 0 {
                continue;
            }
            let mut errors = Vec::new();
            let beta = match Threshold::from_db(beta_db) {
                Ok(b) => b,
                Err(e) => {
                    errors.push(e.to_string());
                    Threshold::vanishing()
                }
            };
            let a_start = Instant::now();
            let mut regions = None;
            let analytic = engine.and_then(|e| {
                let value = if quantity == Quantity::Total {
                    e.region_terms(beta, &s.mobility).map(|r| {
                        regions = Some(r);
                        r.total().min(1.0)
                    })
                } else {
                    e.evaluate(&CoverageQuery { beta, quantity }, &s.mobility)
                };
                value
                    .map_err(|err| errors.push(format!("analytic: {err}")))
                    .ok()
            });
            let analytic_seconds = a_start.elapsed().as_secs_f64();
            let estimate = match &mc {
                Some(Ok(run)) => Some(run.estimate(quantity, beta)),
                Some(Err(err)) => {
                    errors.push(format!("mc: {err}"));
                    None
                }
                None => None,
            };
            let same_model = match &same_tbs_model {
                Some(Ok(v)) => Some(*v),
                Some(Err(err)) => {
                    errors.push(format!("same-TBS diagnostic: {err}"));
                    None
                }
                None => None,
            };
            rows.push(ResultRow {
                index: 0,
                scheme: s.mobility.scheme,
                v: s.mobility.v,
                t: s.mobility.t,
                t_over_tbar: s.t_over_tbar,
                h_r: s.network.h_r,
                lambda_r: s.network.lambda_r,
                lambda_t: s.network.lambda_t,
                beta_db: (quantity != Quantity::Association).then_some(beta_db),
                quantity,
                analytic,
                mc: estimate.map(|e| e.value),
                mc_half_width: estimate.map(|e| e.half_width),
                mc_drops: estimate.map(|e| e.n),
                seed: estimate.map(|e| e.seed),
                regions,
                same_tbs_model: same_model,
                same_tbs_mc,
                error: (!errors.is_empty()).then(|| errors.join("; ")),
            });
            timings.push(RowTiming {
                index: 0,
                analytic_seconds,
                mc_seconds,
            });
        }
    }
    (rows, timings)
}

pub fn write_timings(path: &Path, timings: &[RowTiming]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(["index", "analytic_seconds", "mc_seconds"])?;
    for t in timings {
        w.write_record([
            t.index.to_string(),
            format!("{:.3}", t.analytic_seconds),
            format!("{:.3}", t.mc_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes the CSV, the timing sidecar and, when
/// enabled, the plots derived from the CSV.
pub fn run_to_dir(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Artifacts> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let output = run(cfg, jobs)?;
    let csv = cfg.out_dir.join(&cfg.csv_name);
    write_csv(&csv, &output.rows)?;
    let stem = Path::new(&cfg.csv_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    let timings = cfg.out_dir.join(format!("{stem}.timings.csv"));
    write_timings(&timings, &output.timings)?;
    let plots = if cfg.plots {
        plot::render_from_csv(&csv, &cfg.out_dir)?
    } else {
        Vec::new()
    };
    Ok(Artifacts {
        csv,
        timings,
        plots,
        failures: output.failures(),
    })
}
