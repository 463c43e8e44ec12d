//! `thickline` command-line tool: `detect`, `bench` and `gen`.

pub mod error;
pub mod io;
pub mod overlay;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thickline::bench::{run_suite, Cell, SuiteResult, SuiteSpec};
use thickline::synth::{corrupt, preset, Scene};
use thickline::{
    detect, Algorithm, BlurGain, ClampPolicy, CorruptionSpec, DetectConfig, EmConfig, HessianConfig, InitStrategy, MStepKind,
    Polarity,
};

pub use error::{code, CliError, Result};
use report::{DetectionReport, RunSettings, TruthReport, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "thickline", version, about = "Detect thick linear structures in grayscale images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to an image and report each structure.
    Detect(DetectArgs),
    /// Run a reproduction suite on the reference images.
    Bench(BenchArgs),
    /// Write a synthetic scene and its ground truth.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Manual,
    Random,
    Hessian,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Convergence threshold on the normalized Q.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// closed-form | volume-aware | polished
    #[arg(long, default_value = "polished")]
    pub m_step: MStepKind,
}

impl EngineArgs {
    fn config(&self) -> EmConfig<f64> {
        EmConfig {
            eps: self.eps,
            max_iter: self.max_iter,
            m_step: self.m_step,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// PGM or PNG input.
    pub image: PathBuf,
    /// em | em-bs
    #[arg(long, default_value = "em")]
    pub algo: Algorithm,
    #[arg(long, value_enum, default_value_t = InitKind::Hessian)]
    pub init: InitKind,
    /// Initial angles in degrees, comma separated (manual init).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub angles: Vec<f64>,
    /// Initial radii in pixels, one per angle (manual init).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rho: Vec<f64>,
    /// Number of structures; inferred from the angles or the Hessian otherwise.
    #[arg(long = "M", short = 'M')]
    pub m: Option<usize>,
    /// Band half-width in units of σ (em-bs).
    #[arg(long, default_value_t = thickline::band::DEFAULT_NU)]
    pub nu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// bright | dark structures for the Hessian init.
    #[arg(long, default_value = "bright")]
    pub polarity: Polarity,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// PNG with centerlines and borders drawn.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Noise standard deviation in gray levels.
    #[arg(long)]
    pub sigma_n: Option<f64>,
    /// Blur spread in pixels.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// none | zero | byte
    #[arg(long)]
    pub clamp: Option<ClampPolicy>,
    /// unit | as-printed
    #[arg(long)]
    pub gain: Option<BlurGain>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// r1 | r2 | r3-table1 | r3-table2 | r3-hessian
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seeds per noisy cell.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Replaces the grid with the single cell `(--sigma-n, --kappa)`.
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Directory for `<suite>.json` and `<suite>.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// r1 | r2 | r3 | fan5
    #[arg(long, conflicts_with = "config")]
    pub scene: Option<String>,
    /// Scene JSON (see SCHEMA.md).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image path (.pgm or .png); the truth goes to the same stem with
    /// `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect(a) => {
            let rep = cmd_detect(&a)?;
            let json = to_json(&rep)?;
            match &a.out {
                Some(p) => write_file(p, &json)?,
                None => println!("{json}"),
            }
            eprint!("{}", rep.summary());
            Ok(())
        }
        Command::Bench(a) => {
            let res = cmd_bench(&a)?;
            fs::create_dir_all(&a.out).map_err(|e| CliError::output(&a.out, e))?;
            write_file(&a.out.join(format!("{}.json", res.suite)), &to_json(&res)?)?;
            let csv = res.to_csv();
            write_file(&a.out.join(format!("{}.csv", res.suite)), &csv)?;
            print!("{csv}");
            Ok(())
        }
        Command::Gen(a) => {
            let truth = cmd_gen(&a)?;
            eprintln!("wrote {} ({}-bit, {} clipped)", truth.image, truth.bits, truth.clipped_pixels);
            Ok(())
        }
    }
}

pub fn detect_config(a: &DetectArgs) -> Result<DetectConfig> {
    let init = match a.init {
        InitKind::Manual => {
            if a.angles.is_empty() {
                return Err(CliError::config("manual init needs --angles"));
            }
            if let Some(m) = a.m {
                if m != a.angles.len() {
                    return Err(CliError::config(format!("--M {m} but {} angles given", a.angles.len())));
                }
            }
            if !a.rho.is_empty() && a.rho.len() != a.angles.len() {
                return Err(CliError::config("--rho needs one value per angle"));
            }
            InitStrategy::Manual {
                angles: a.angles.iter().map(|d| d.to_radians()).collect(),
                rho: (!a.rho.is_empty()).then(|| a.rho.clone()),
            }
        }
        InitKind::Random => {
            let m = a.m.ok_or_else(|| CliError::config("random init needs --M; automatic M needs --init hessian"))?;
            InitStrategy::Random { m }
        }
        InitKind::Hessian => InitStrategy::Hessian { m: a.m },
    };
    if a.init != InitKind::Manual && !(a.angles.is_empty() && a.rho.is_empty()) {
        return Err(CliError::config("--angles and --rho need --init manual"));
    }
    Ok(DetectConfig {
        algorithm: a.algo,
        init,
        em: a.engine.config(),
        nu: a.nu,
        hessian: HessianConfig {
            polarity: a.polarity,
            ..HessianConfig::default()
        },
        seed: a.seed,
        stream: 0,
    })
}

pub fn cmd_detect(a: &DetectArgs) -> Result<DetectionReport> {
    let cfg = detect_config(a)?;
    let img = io::read_image(&a.image)?;
    let d = detect(&img, &cfg)?;
    if let Some(p) = &a.overlay {
        io::write_rgb(&overlay::render(&img, &d.outcome.state), p)?;
    }
    let settings = RunSettings {
        algorithm: cfg.algorithm,
        init: cfg.init.clone(),
        m_step: cfg.em.m_step,
        eps: cfg.em.eps,
        max_iter: cfg.em.max_iter,
        nu: (cfg.algorithm == Algorithm::EmBs).then_some(cfg.nu),
    };
    Ok(DetectionReport::new(
        Some(a.image.display().to_string()),
        img.width(),
        img.height(),
        a.seed,
        settings,
        &d,
    ))
}

pub fn cmd_bench(a: &BenchArgs) -> Result<SuiteResult> {
    let mut spec = SuiteSpec::preset(&a.suite).map_err(|e| CliError::config(e.to_string()))?;
    match (a.noise.sigma_n, a.noise.kappa) {
        (None, None) => {}
        (s, k) => spec.cells = vec![Cell::new(s.unwrap_or(0.0), k.unwrap_or(0.0))],
    }
    if let Some(n) = a.seeds {
        spec.seeds = n;
    }
    if let Some(c) = a.noise.clamp {
        spec.regime.clamp = c;
    }
    if let Some(g) = a.noise.gain {
        spec.regime.gain = g;
    }
    if let Some(nu) = a.nu {
        spec.nu = nu;
    }
    if let Some(eps) = a.eps {
        spec.em.eps = eps;
    }
    if let Some(n) = a.max_iter {
        spec.em.max_iter = n;
    }
    Ok(run_suite(&spec, a.seed)?)
}

pub fn gen_corruption(noise: &NoiseArgs, seed: u64) -> Option<CorruptionSpec> {
    let mut c = CorruptionSpec::new(noise.sigma_n.unwrap_or(0.0), noise.kappa.unwrap_or(0.0), seed);
    c.clamp = noise.clamp.unwrap_or(ClampPolicy::Zero);
    c.gain = noise.gain.unwrap_or_default();
    (!c.is_identity()).then_some(c)
}

pub fn cmd_gen(a: &GenArgs) -> Result<TruthReport> {
    let scene: Scene = match (&a.scene, &a.config) {
        (Some(name), None) => preset(name).ok_or_else(|| CliError::config(format!("unknown scene '{name}' (r1|r2|r3|fan5)")))?,
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::input(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::input(p, e))?
        }
        _ => return Err(CliError::config("gen needs exactly one of --scene or --config")),
    };
    let (clean, truth) = scene.render()?;
    let corruption = gen_corruption(&a.noise, a.seed);
    let img = match &corruption {
        Some(c) => corrupt(&clean, c)?,
        None => clean,
    };
    let q = io::write_gray(&img, &a.out)?;
    let rep = TruthReport {
        schema_version: SCHEMA_VERSION,
        scene,
        corruption,
        image: a.out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        bits: q.bits,
        clipped_pixels: q.clipped,
        components: report::components(&truth),
    };
    write_file(&a.out.with_extension("json"), &to_json(&rep)?)?;
    Ok(rep)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::config(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut body = text.to_string();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| CliError::output(path, e))
}
