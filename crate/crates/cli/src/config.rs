//! Experiment description files and their validation.
//!
//! A config is a TOML file with a `[model]` section, a `[data]` section, and
//! optional `[guide]`, `[vi]`, `[mvn]`, and `[sweep]` sections. Unknown keys
//! are rejected, constraint violations name the offending key and its line,
//! and any default the loader fills in is reported back so a run log records
//! the complete effective configuration. Learning rates deliberately have no
//! defaults: they must be tuned per scenario and stated explicitly.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use maxvi_core::vi::VIConfig;
use maxvi_core::{io, DistanceKind, EpaParams, ModelParams, MvnConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    Config(String),
    /// Every replication of a sweep failed; exit code 3.
    AllFailed,
    Core(maxvi_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {}", msg),
            CliError::AllFailed => write!(f, "all replications failed"),
            CliError::Core(e) => write!(f, "{}", e),
            CliError::Io(e) => write!(f, "{}", e),
        }
    }
}

impl From<maxvi_core::Error> for CliError {
    fn from(e: maxvi_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Config(_) => 2,
        CliError::AllFailed => 3,
        _ => 1,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    label: Option<String>,
    model: RawModel,
    data: RawData,
    guide: Option<RawGuide>,
    vi: Option<RawVi>,
    mvn: Option<RawMvn>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    theta: Option<f64>,
    theta_init: Option<f64>,
    lambda: Option<f64>,
    nu: Option<f64>,
    lambda_init: Option<f64>,
    nu_init: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    d: Option<usize>,
    n: Option<usize>,
    sites: Option<Vec<[f64; 2]>>,
    sites_file: Option<PathBuf>,
    observations_file: Option<PathBuf>,
    write_partitions: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGuide {
    alpha: Option<f64>,
    delta: Option<f64>,
    rho: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVi {
    m: Option<usize>,
    iters: Option<usize>,
    batch: Option<usize>,
    lr_model: Option<f64>,
    lr_guide: Option<f64>,
    momentum: Option<f64>,
    distance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMvn {
    accuracy: Option<f64>,
    max_points: Option<usize>,
    shifts: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    replications: Option<usize>,
    m_list: Option<Vec<usize>>,
    estimators: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Mle,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Mle => "mle",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub enum DataPlan {
    /// Read an existing dataset.
    Files {
        sites: PathBuf,
        observations: PathBuf,
    },
    /// Draw synthetic data from the truth parameters.
    Synthetic { d: usize, n: usize },
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub replications: usize,
    pub m_list: Vec<usize>,
    pub with_vi: bool,
    pub with_mle: bool,
}

/// A validated, fully resolved run. Everything the runner needs, nothing it
/// has to second guess.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub label: String,
    pub truth: Option<ModelParams>,
    pub init: Option<ModelParams>,
    pub guide: EpaParams,
    pub vicfg: Option<VIConfig>,
    pub mvn: MvnConfig,
    pub data: DataPlan,
    pub sweep: Option<SweepPlan>,
    pub write_partitions: bool,
    /// Single comment line stamped on every output file.
    pub provenance: String,
    /// One entry per default the loader filled in.
    pub defaults_applied: Vec<String>,
}

/// Locate the line a key is set on, for error messages. Scans for the first
/// `key =` assignment; good enough for flat TOML sections.
fn key_line(raw: &str, key: &str) -> Option<usize> {
    raw.lines().position(|l| {
        let t = l.trim_start();
        t.starts_with(key) && t[key.len()..].trim_start().starts_with('=')
    })
}

fn err_at(raw: &str, key: &str, msg: impl fmt::Display) -> CliError {
    match key_line(raw, key) {
        Some(i) => CliError::Config(format!("{} (key `{}`, line {})", msg, key, i + 1)),
        None => CliError::Config(format!("{} (key `{}`, not set)", msg, key)),
    }
}

fn require<T>(v: Option<T>, raw: &str, key: &str, why: &str) -> Result<T, CliError> {
    v.ok_or_else(|| err_at(raw, key, format_args!("{} requires `{}`", why, key)))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub struct Overrides {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Read, parse, and validate a config file, applying command line overrides.
pub fn load_plan(path: &Path, over: &Overrides) -> Result<RunPlan, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let cfg: RawConfig = toml::from_str(&raw).map_err(|e| CliError::Config(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut defaults = Vec::new();

    let command = over.command;
    if let Some(c) = &cfg.command {
        if c != command.name() {
            return Err(err_at(
                &raw,
                "command",
                format_args!("config says `{}` but `{}` was invoked", c, command.name()),
            ));
        }
    }

    let seed = match over.seed.or(cfg.seed) {
        Some(s) => s,
        None => return Err(err_at(&raw, "seed", "a seed is required")),
    };

    let out = over
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|p| resolve(&base, p)))
        .unwrap_or_else(|| {
            defaults.push("out = \".\"".into());
            PathBuf::from(".")
        });

    let label = cfg.label.clone().unwrap_or_else(|| {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        defaults.push(format!("label = {:?}", stem));
        stem
    });

    // sites, wherever they come from, resolved up front so every referenced
    // file is checked while we can still exit with a config error
    let sites: Option<Vec<[f64; 2]>> = match (&cfg.data.sites, &cfg.data.sites_file) {
        (Some(_), Some(_)) => {
            return Err(err_at(
                &raw,
                "sites_file",
                "give either inline `sites` or `sites_file`, not both",
            ))
        }
        (Some(v), None) => Some(v.clone()),
        (None, Some(f)) => Some(
            io::read_sites(resolve(&base, f))
                .map_err(|e| err_at(&raw, "sites_file", e))?,
        ),
        (None, None) => None,
    };

    let needs_truth = matches!(command, Command::Simulate | Command::Sweep);
    let needs_init = matches!(command, Command::Fit | Command::Mle | Command::Sweep);

    let (truth, init, fixed_d) = match cfg.model.kind.as_str() {
        "logistic" => {
            for (key, set) in [
                ("lambda", cfg.model.lambda.is_some()),
                ("nu", cfg.model.nu.is_some()),
                ("lambda_init", cfg.model.lambda_init.is_some()),
                ("nu_init", cfg.model.nu_init.is_some()),
            ] {
                if set {
                    return Err(err_at(&raw, key, "not a logistic parameter"));
                }
            }
            let truth = if needs_truth {
                let theta = require(cfg.model.theta, &raw, "theta", command.name())?;
                Some(ModelParams::logistic(theta).map_err(|e| err_at(&raw, "theta", e))?)
            } else {
                None
            };
            let init = if needs_init {
                let theta = require(cfg.model.theta_init, &raw, "theta_init", command.name())?;
                Some(ModelParams::logistic(theta).map_err(|e| err_at(&raw, "theta_init", e))?)
            } else {
                None
            };
            (truth, init, None)
        }
        "brown_resnick" => {
            if cfg.model.theta.is_some() || cfg.model.theta_init.is_some() {
                return Err(err_at(&raw, "theta", "not a brown_resnick parameter"));
            }
            // model construction needs site coordinates; for file-backed
            // runs they come from the dataset's sites file
            let model_sites = match (&sites, &cfg.data.observations_file, command) {
                (Some(s), _, _) => s.clone(),
                (None, Some(_), Command::Fit | Command::Mle) => {
                    let f = require(
                        cfg.data.sites_file.clone(),
                        &raw,
                        "sites_file",
                        "brown_resnick on files",
                    )?;
                    io::read_sites(resolve(&base, &f))
                        .map_err(|e| err_at(&raw, "sites_file", e))?
                }
                _ => {
                    return Err(err_at(
                        &raw,
                        "sites",
                        "brown_resnick requires site coordinates",
                    ))
                }
            };
            // name the key whose constraint actually failed
            let br_key = |lambda: f64, nu: f64, base: [&'static str; 3]| {
                if !(lambda.is_finite() && lambda > 0.0) {
                    base[0]
                } else if !(nu.is_finite() && nu > 0.0 && nu <= 2.0) {
                    base[1]
                } else {
                    base[2]
                }
            };
            let truth = if needs_truth {
                let lambda = require(cfg.model.lambda, &raw, "lambda", command.name())?;
                let nu = require(cfg.model.nu, &raw, "nu", command.name())?;
                Some(
                    ModelParams::brown_resnick(lambda, nu, model_sites.clone()).map_err(|e| {
                        err_at(&raw, br_key(lambda, nu, ["lambda", "nu", "sites"]), e)
                    })?,
                )
            } else {
                None
            };
            let init = if needs_init {
                let lambda = require(cfg.model.lambda_init, &raw, "lambda_init", command.name())?;
                let nu = require(cfg.model.nu_init, &raw, "nu_init", command.name())?;
                Some(
                    ModelParams::brown_resnick(lambda, nu, model_sites.clone()).map_err(|e| {
                        err_at(&raw, br_key(lambda, nu, ["lambda_init", "nu_init", "sites"]), e)
                    })?,
                )
            } else {
                None
            };
            (truth, init, Some(model_sites.len()))
        }
        other => {
            return Err(err_at(
                &raw,
                "kind",
                format_args!("unknown model kind {:?}", other),
            ))
        }
    };

    let data = match command {
        Command::Simulate | Command::Sweep => {
            if cfg.data.observations_file.is_some() {
                return Err(err_at(
                    &raw,
                    "observations_file",
                    format_args!("{} generates its own data", command.name()),
                ));
            }
            let d = match (fixed_d, cfg.data.d, &sites) {
                (Some(ds), Some(d), _) if d != ds => {
                    return Err(err_at(
                        &raw,
                        "d",
                        format_args!("d = {} but {} sites were given", d, ds),
                    ))
                }
                (Some(ds), _, _) => ds,
                (None, Some(d), Some(s)) if s.len() != d => {
                    return Err(err_at(
                        &raw,
                        "d",
                        format_args!("d = {} but {} sites were given", d, s.len()),
                    ))
                }
                (None, Some(d), _) => d,
                (None, None, Some(s)) => s.len(),
                (None, None, None) => return Err(err_at(&raw, "d", "the dimension is required")),
            };
            if d == 0 {
                return Err(err_at(&raw, "d", "the dimension must be positive"));
            }
            let n = require(cfg.data.n, &raw, "n", command.name())?;
            if n == 0 {
                return Err(err_at(&raw, "n", "need at least one replicate"));
            }
            DataPlan::Synthetic { d, n }
        }
        Command::Fit | Command::Mle => {
            let sites_file = require(
                cfg.data.sites_file.clone(),
                &raw,
                "sites_file",
                command.name(),
            )?;
            let observations_file = require(
                cfg.data.observations_file.clone(),
                &raw,
                "observations_file",
                command.name(),
            )?;
            DataPlan::Files {
                sites: resolve(&base, &sites_file),
                observations: resolve(&base, &observations_file),
            }
        }
    };

    let write_partitions = cfg.data.write_partitions.unwrap_or(false);
    if write_partitions {
        if command != Command::Simulate {
            return Err(err_at(
                &raw,
                "write_partitions",
                "only simulate records partitions",
            ));
        }
        if cfg.model.kind == "logistic" {
            return Err(err_at(
                &raw,
                "write_partitions",
                "the logistic sampler has no per-site event bookkeeping; only brown_resnick records partitions",
            ));
        }
    }

    let sweep = if command == Command::Sweep {
        let s = cfg
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("sweep requires a [sweep] section".into()))?;
        let replications = require(s.replications, &raw, "replications", "[sweep]")?;
        if replications == 0 {
            return Err(err_at(&raw, "replications", "must be positive"));
        }
        let estimators = s.estimators.clone().unwrap_or_else(|| {
            defaults.push("sweep.estimators = [\"vi\", \"mle\"]".into());
            vec!["vi".into(), "mle".into()]
        });
        for e in &estimators {
            if e != "vi" && e != "mle" {
                return Err(err_at(
                    &raw,
                    "estimators",
                    format_args!("unknown estimator {:?}", e),
                ));
            }
        }
        let with_vi = estimators.iter().any(|e| e == "vi");
        let m_list = if with_vi {
            let m_list = require(s.m_list.clone(), &raw, "m_list", "[sweep]")?;
            if m_list.is_empty() || m_list.contains(&0) {
                return Err(err_at(&raw, "m_list", "need positive draw counts"));
            }
            m_list
        } else {
            if s.m_list.is_some() {
                return Err(err_at(&raw, "m_list", "only the vi estimator takes draw counts"));
            }
            Vec::new()
        };
        Some(SweepPlan {
            replications,
            m_list,
            with_vi,
            with_mle: estimators.iter().any(|e| e == "mle"),
        })
    } else {
        if cfg.sweep.is_some() {
            return Err(CliError::Config(format!(
                "a [sweep] section makes no sense for {}",
                command.name()
            )));
        }
        None
    };

    // guide params drive the variational fits; mvn settings drive every
    // Brown-Resnick likelihood. Sections a command cannot use are rejected,
    // and defaults are echoed only where the value matters.
    let needs_vi = command == Command::Fit
        || sweep.as_ref().is_some_and(|s| s.with_vi);
    let uses_guide = needs_vi;
    let uses_mvn = matches!(command, Command::Fit | Command::Mle | Command::Sweep);
    if cfg.guide.is_some() && !uses_guide {
        return Err(err_at(&raw, "guide", "only variational fits use a guide"));
    }
    if cfg.mvn.is_some() && !uses_mvn {
        return Err(err_at(&raw, "mvn", "simulate does not evaluate likelihoods"));
    }

    let guide = {
        let g = cfg.guide.as_ref();
        let mut take = |name: &str, v: Option<f64>, dflt: f64| match v {
            Some(x) => x,
            None => {
                if uses_guide {
                    defaults.push(format!("guide.{} = {}", name, dflt));
                }
                dflt
            }
        };
        let alpha = take("alpha", g.and_then(|g| g.alpha), 1.0);
        let delta = take("delta", g.and_then(|g| g.delta), 0.5);
        let rho = take("rho", g.and_then(|g| g.rho), 1.0);
        EpaParams::new(alpha, delta, rho).map_err(|e| {
            let key = if !(delta.is_finite() && (0.0..1.0).contains(&delta)) {
                "delta"
            } else if !(alpha.is_finite() && alpha > -delta) {
                "alpha"
            } else {
                "rho"
            };
            err_at(&raw, key, e)
        })?
    };

    let mvn = {
        let m = cfg.mvn.as_ref();
        let dflt = MvnConfig::default();
        let mut echo = |name: &str, text: String| {
            if uses_mvn {
                defaults.push(format!("mvn.{} = {}", name, text));
            }
        };
        let accuracy = m.and_then(|m| m.accuracy).unwrap_or_else(|| {
            echo("accuracy", dflt.accuracy.to_string());
            dflt.accuracy
        });
        let max_points = m.and_then(|m| m.max_points).unwrap_or_else(|| {
            echo("max_points", dflt.max_points.to_string());
            dflt.max_points
        });
        let shifts = m.and_then(|m| m.shifts).unwrap_or_else(|| {
            echo("shifts", dflt.shifts.to_string());
            dflt.shifts
        });
        if !(accuracy.is_finite() && accuracy > 0.0) {
            return Err(err_at(&raw, "accuracy", "must be > 0"));
        }
        if max_points == 0 {
            return Err(err_at(&raw, "max_points", "quadrature budget must be positive"));
        }
        if shifts == 0 {
            return Err(err_at(&raw, "shifts", "need at least one randomized shift"));
        }
        MvnConfig {
            accuracy,
            max_points,
            shifts,
        }
    };

    let vicfg = if needs_vi {
        let v = cfg
            .vi
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{} requires a [vi] section", command.name())))?;
        let lr_model = require(v.lr_model, &raw, "lr_model", "[vi]")?;
        let lr_guide = require(v.lr_guide, &raw, "lr_guide", "[vi]")?;
        let iters = require(v.iters, &raw, "iters", "[vi]")?;
        let m_draws = if command == Command::Fit {
            require(v.m, &raw, "m", "fit")?
        } else {
            if v.m.is_some() {
                return Err(err_at(&raw, "m", "sweep takes `m_list`, not a single m"));
            }
            1
        };
        let momentum = v.momentum.unwrap_or_else(|| {
            defaults.push("vi.momentum = 0.9".into());
            0.9
        });
        let distance = match v.distance.as_deref() {
            None => {
                defaults.push("vi.distance = \"observation\"".into());
                DistanceKind::Observation
            }
            Some("observation") => DistanceKind::Observation,
            Some("euclidean") => DistanceKind::Euclidean,
            Some(other) => {
                return Err(err_at(
                    &raw,
                    "distance",
                    format_args!("unknown distance {:?}", other),
                ))
            }
        };
        if !(lr_model.is_finite() && lr_model > 0.0) {
            return Err(err_at(&raw, "lr_model", "must be > 0"));
        }
        if !(lr_guide.is_finite() && lr_guide > 0.0) {
            return Err(err_at(&raw, "lr_guide", "must be > 0"));
        }
        if iters == 0 {
            return Err(err_at(&raw, "iters", "must be positive"));
        }
        if m_draws == 0 {
            return Err(err_at(&raw, "m", "must be positive"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(err_at(&raw, "momentum", "must be in [0, 1)"));
        }
        if v.batch == Some(0) {
            return Err(err_at(&raw, "batch", "must be positive when given"));
        }
        Some(VIConfig {
            m_draws,
            iters,
            batch: v.batch,
            lr_model,
            lr_guide,
            momentum,
            distance,
            mvn,
        })
    } else {
        if cfg.vi.is_some() {
            return Err(CliError::Config(format!(
                "a [vi] section makes no sense for {}",
                command.name()
            )));
        }
        None
    };

    let sha = {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(raw.as_bytes());
        digest
            .iter()
            .take(8)
            .map(|b| format!("{:02x}", b))
            .collect::<String>()
    };
    let provenance = format!(
        "maxvi {} config={} seed={}",
        env!("CARGO_PKG_VERSION"),
        sha,
        seed
    );

    Ok(RunPlan {
        command,
        seed,
        out,
        label,
        truth,
        init,
        guide,
        vicfg,
        mvn,
        data,
        sweep,
        write_partitions,
        provenance,
        defaults_applied: defaults,
    })
}
