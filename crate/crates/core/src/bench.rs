//! Reproduction suites for the reference images.
//!
//! Every run is keyed by `(cell, seed index)`. Noise and random
//! initializations draw from streams of the master seed derived from that
//! key only, so the Algorithm 1 and Algorithm 2 suites see the same noisy
//! images and the same starting angles.

use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::DEFAULT_NU;
use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::hessian::HessianConfig;
use crate::metrics::{evaluate, ErrorReport};
use crate::pipeline::{detect, Algorithm, DetectConfig, InitStrategy};
use crate::synth::{self, corrupt, BlurGain, ClampPolicy, CorruptionSpec, Scene};

pub const SCHEMA_VERSION: u32 = 1;

/// Seeds per noisy cell.
pub const DEFAULT_SEEDS: usize = 10;

pub const SUITES: [&str; 5] = ["r1", "r2", "r3-table1", "r3-table2", "r3-hessian"];

/// One `(σ_n, κ)` column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub sigma_n: f64,
    pub kappa: f64,
}

impl Cell {
    pub const fn new(sigma_n: f64, kappa: f64) -> Self {
        Self { sigma_n, kappa }
    }

    pub fn is_clean(&self) -> bool {
        self.sigma_n == 0.0 && self.kappa == 0.0
    }

    /// Column label, e.g. `(150,3)`.
    pub fn label(&self) -> String {
        format!("({},{})", self.sigma_n, self.kappa)
    }
}

pub const PAPER_GRID: [Cell; 4] = [Cell::new(0.0, 0.0), Cell::new(50.0, 3.0), Cell::new(100.0, 3.0), Cell::new(150.0, 3.0)];

/// How blurred images are scaled and whether noise is clipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseRegime {
    pub clamp: ClampPolicy,
    pub gain: BlurGain,
}

impl Default for NoiseRegime {
    fn default() -> Self {
        Self {
            clamp: ClampPolicy::None,
            gain: BlurGain::AsPrinted,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub id: String,
    pub scene: Scene,
    pub algorithm: Algorithm,
    pub init: InitStrategy,
    pub cells: Vec<Cell>,
    /// Seeds per noisy cell; clean cells use one.
    pub seeds: usize,
    pub em: EmConfig<f64>,
    pub nu: f64,
    pub hessian: HessianConfig,
    pub regime: NoiseRegime,
}

impl SuiteSpec {
    /// Preset suite by id.
    pub fn preset(id: &str) -> Result<Self> {
        let half = std::f64::consts::FRAC_PI_2;
        let base = |scene: Scene, algorithm, init, cells: &[Cell]| SuiteSpec {
            id: id.to_string(),
            scene,
            algorithm,
            init,
            cells: cells.to_vec(),
            seeds: DEFAULT_SEEDS,
            em: EmConfig::default(),
            nu: DEFAULT_NU,
            hessian: HessianConfig::default(),
            regime: NoiseRegime::default(),
        };
        let clean = [Cell::new(0.0, 0.0)];
        Ok(match id {
            "r1" => base(
                synth::r1(),
                Algorithm::Em,
                InitStrategy::Manual {
                    angles: vec![half],
                    rho: Some(vec![5.0]),
                },
                &clean,
            ),
            "r2" => base(
                synth::r2(),
                Algorithm::Em,
                InitStrategy::Manual {
                    angles: vec![half, half],
                    rho: Some(vec![5.0, 65.0]),
                },
                &clean,
            ),
            "r3-table1" => base(synth::r3(), Algorithm::Em, InitStrategy::Random { m: 3 }, &PAPER_GRID),
            "r3-table2" => base(synth::r3(), Algorithm::EmBs, InitStrategy::Random { m: 3 }, &PAPER_GRID),
            "r3-hessian" => base(synth::r3(), Algorithm::EmBs, InitStrategy::Hessian { m: None }, &[Cell::new(150.0, 3.0)]),
            _ => {
                return Err(Error::invalid(format!("unknown suite '{id}' ({})", SUITES.join("|"))));
            }
        })
    }

    fn runs_in(&self, cell: &Cell) -> usize {
        if cell.is_clean() {
            1
        } else {
            self.seeds
        }
    }
}

const NOISE_STREAM: u64 = 1 << 32;
const INIT_STREAM: u64 = 2 << 32;

fn run_key(cell: usize, seed_index: usize) -> u64 {
    ((cell as u64) << 16) | seed_index as u64
}

/// One seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed_index: usize,
    pub iterations: usize,
    pub converged: bool,
    pub polish_from: Option<usize>,
    /// Number of components the run was fitted with.
    pub m: usize,
    /// Starting angles in degrees.
    pub initial_theta_deg: Vec<f64>,
    pub errors: ErrorReport,
    #[serde(skip)]
    pub runtime: Duration,
}

impl RunRecord {
    /// Whether every true structure has an estimate.
    pub fn complete(&self) -> bool {
        self.errors.unmatched_truth.is_empty()
    }
}

/// Medians over the runs of a cell; `None` where the median falls on a
/// run that missed a structure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMedians {
    /// Per true component.
    pub pi: Vec<Option<f64>>,
    pub theta_deg: Vec<Option<f64>>,
    pub rho: Vec<Option<f64>>,
    pub sigma: Vec<Option<f64>>,
    pub width: Vec<Option<f64>>,
    pub rel_width: Vec<Option<f64>>,
    /// RMSE over components, then median over runs.
    pub sum_pi: Option<f64>,
    pub sum_theta_deg: Option<f64>,
    pub sum_rho: Option<f64>,
    pub sum_sigma: Option<f64>,
    pub sum_width: Option<f64>,
    pub sum_rel_width: Option<f64>,
    pub iterations: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub runs: Vec<RunRecord>,
    pub median: CellMedians,
}

impl CellResult {
    pub fn runtime(&self) -> Duration {
        let total: Duration = self.runs.iter().map(|r| r.runtime).sum();
        total / self.runs.len().max(1) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub schema_version: u32,
    pub suite: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub regime: NoiseRegime,
    pub truth_m: usize,
    pub cells: Vec<CellResult>,
}

/// `None` sorts above every number.
fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<Option<f64>> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        Some(v[n / 2 - 1]? * 0.5 + v[n / 2]? * 0.5)
    }
}

fn medians(runs: &[RunRecord], truth_m: usize) -> CellMedians {
    let per = |f: fn(&crate::metrics::ComponentError) -> f64| -> Vec<Option<f64>> {
        (0..truth_m)
            .map(|i| median(runs.iter().map(|r| r.errors.components.iter().find(|c| c.truth == i).map(f))))
            .collect()
    };
    let sum = |f: fn(&crate::metrics::ParamRmse) -> f64| -> Option<f64> {
        median(runs.iter().map(|r| r.complete().then(|| f(&r.errors.rmse))))
    };
    let mut it: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
    it.sort_by(f64::total_cmp);
    CellMedians {
        pi: per(|c| c.pi),
        theta_deg: per(|c| c.theta_deg),
        rho: per(|c| c.rho),
        sigma: per(|c| c.sigma),
        width: per(|c| c.width),
        rel_width: per(|c| c.rel_width),
        sum_pi: sum(|r| r.pi),
        sum_theta_deg: sum(|r| r.theta_deg),
        sum_rho: sum(|r| r.rho),
        sum_sigma: sum(|r| r.sigma),
        sum_width: sum(|r| r.width),
        sum_rel_width: sum(|r| r.rel_width),
        iterations: median(it.into_iter().map(Some)).unwrap_or(0.0),
    }
}

/// Image of run `(cell, seed_index)` under `seed`.
pub fn corrupted_image(spec: &SuiteSpec, seed: u64, cell: usize, seed_index: usize) -> Result<crate::image::GrayImage<f64>> {
    let (img, _) = spec.scene.render()?;
    let c = spec.cells[cell];
    if c.is_clean() {
        return Ok(img);
    }
    let mut cs = CorruptionSpec::new(c.sigma_n, c.kappa, seed);
    cs.stream = NOISE_STREAM | run_key(cell, seed_index);
    cs.clamp = spec.regime.clamp;
    cs.gain = spec.regime.gain;
    corrupt(&img, &cs)
}

/// Detection settings of run `(cell, seed_index)` under `seed`.
pub fn run_config(spec: &SuiteSpec, seed: u64, cell: usize, seed_index: usize) -> DetectConfig {
    DetectConfig {
        algorithm: spec.algorithm,
        init: spec.init.clone(),
        em: spec.em,
        nu: spec.nu,
        hessian: spec.hessian.clone(),
        seed,
        stream: INIT_STREAM | run_key(cell, seed_index),
    }
}

fn run_one(spec: &SuiteSpec, seed: u64, cell: usize, seed_index: usize) -> Result<RunRecord> {
    let (_, truth) = spec.scene.render()?;
    let img = corrupted_image(spec, seed, cell, seed_index)?;
    let d = detect(&img, &run_config(spec, seed, cell, seed_index))?;
    let errors = evaluate(&truth, &d.outcome.state, img.domain().diagonal());
    Ok(RunRecord {
        seed_index,
        iterations: d.outcome.iterations,
        converged: d.outcome.converged(),
        polish_from: d.outcome.flags.polish_from,
        m: d.outcome.state.len(),
        initial_theta_deg: d.initial.components.iter().map(|c| c.line.theta.to_degrees()).collect(),
        errors,
        runtime: d.outcome.runtime,
    })
}

/// Runs every cell and seed of `spec` in parallel; results are in grid order.
pub fn run_suite(spec: &SuiteSpec, seed: u64) -> Result<SuiteResult> {
    if spec.cells.is_empty() || spec.seeds == 0 {
        return Err(Error::invalid("a suite needs at least one cell and one seed"));
    }
    let jobs: Vec<(usize, usize)> = spec
        .cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..spec.runs_in(cell)).map(move |s| (c, s)))
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(c, s)| run_one(spec, seed, c, s))
        .collect::<Result<_>>()?;
    let truth_m = spec.scene.bars.len();
    let mut records = records.into_iter();
    let cells = spec
        .cells
        .iter()
        .map(|cell| {
            let runs: Vec<RunRecord> = records.by_ref().take(spec.runs_in(cell)).collect();
            CellResult {
                cell: *cell,
                median: medians(&runs, truth_m),
                runs,
            }
        })
        .collect();
    Ok(SuiteResult {
        schema_version: SCHEMA_VERSION,
        suite: spec.id.clone(),
        seed,
        algorithm: spec.algorithm,
        regime: spec.regime,
        truth_m,
        cells,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.4}"))
}

fn fmt_vec(v: &[Option<f64>]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_opt(*x)).collect();
    format!("[{}]", parts.join(" "))
}

impl SuiteResult {
    /// Metric rows by cell columns, medians over seeds. Includes the mean
    /// runtime per run, which the JSON leaves out.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for c in &self.cells {
            let _ = write!(out, ",\"{}\"", c.cell.label());
        }
        out.push('\n');
        type Row = (&'static str, fn(&CellResult) -> String);
        let rows: [Row; 15] = [
            ("d_pi", |c| fmt_vec(&c.median.pi)),
            ("d_theta_deg", |c| fmt_vec(&c.median.theta_deg)),
            ("d_rho", |c| fmt_vec(&c.median.rho)),
            ("d_sigma", |c| fmt_vec(&c.median.sigma)),
            ("d_w", |c| fmt_vec(&c.median.width)),
            ("d_rel_w", |c| fmt_vec(&c.median.rel_width)),
            ("sum_pi", |c| fmt_opt(c.median.sum_pi)),
            ("sum_theta_deg", |c| fmt_opt(c.median.sum_theta_deg)),
            ("sum_rho", |c| fmt_opt(c.median.sum_rho)),
            ("sum_sigma", |c| fmt_opt(c.median.sum_sigma)),
            ("sum_w", |c| fmt_opt(c.median.sum_width)),
            ("sum_rel_w", |c| fmt_opt(c.median.sum_rel_width)),
            ("iterations", |c| format!("{}", c.median.iterations)),
            ("converged", |c| {
                format!("{}/{}", c.runs.iter().filter(|r| r.converged).count(), c.runs.len())
            }),
            ("runtime_s", |c| format!("{:.3}", c.runtime().as_secs_f64())),
        ];
        for (name, f) in rows {
            out.push_str(name);
            for c in &self.cells {
                let _ = write!(out, ",{}", f(c));
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, sigma_n: f64, kappa: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.sigma_n == sigma_n && c.cell.kappa == kappa)
    }
}
