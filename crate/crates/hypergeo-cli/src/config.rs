//! Layered run configuration: built-in defaults, then the TOML config
//! file, then command-line flags, merged field by field.
//!
//! The protocol trio (alpha, beta) vs n_plus resolves per layer: a layer
//! that sets n_plus pins the diagonal alpha = beta = n_plus and shadows
//! the pair from lower layers; setting both forms in one layer is an
//! error. Boundaries resolve the same way: an explicit (lambda0, lambda1)
//! pair wins over the symmetric half-width z0.

use clap::Args;
use hypergeo::error::{Error, Result};
use hypergeo::models::{build_model, Constants, Model};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

/// Linearly spaced inclusive grid; count 1 collapses to the lower edge.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn realize(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }

    /// Row-major square grid over the same axis twice.
    pub fn square(&self) -> Vec<(f64, f64)> {
        let axis = self.realize();
        let mut out = Vec::with_capacity(axis.len() * axis.len());
        for &a in &axis {
            for &b in &axis {
                out.push((a, b));
            }
        }
        out
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{name} grid is empty (count 0)")));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::Config(format!(
                "{name} grid needs finite min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count > 1 && self.max == self.min {
            return Err(Error::Config(format!(
                "{name} grid repeats one value {} times; use count 1",
                self.count
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    model: FileModel,
    #[serde(default)]
    protocol: FileProtocol,
    #[serde(default)]
    grids: FileGrids,
    #[serde(default)]
    noise: FileNoise,
    #[serde(default)]
    filter: FileFilter,
    #[serde(default)]
    output: FileOutput,
}

/// Every key other than `name` is a model constant.
#[derive(Deserialize, Default)]
struct FileModel {
    name: Option<String>,
    #[serde(flatten)]
    constants: BTreeMap<String, f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileProtocol {
    alpha: Option<f64>,
    beta: Option<f64>,
    n_plus: Option<f64>,
    state: Option<usize>,
    z0: Option<f64>,
    lambda0: Option<f64>,
    lambda1: Option<f64>,
    samples: Option<usize>,
    tf: Option<f64>,
    k_max: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileGrids {
    tf_min: Option<f64>,
    tf_max: Option<f64>,
    tf_count: Option<usize>,
    ab_min: Option<f64>,
    ab_max: Option<f64>,
    ab_count: Option<usize>,
    np_min: Option<f64>,
    np_max: Option<f64>,
    np_count: Option<usize>,
    fc_min: Option<f64>,
    fc_max: Option<f64>,
    fc_count: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileNoise {
    sigma_x: Option<f64>,
    sigma_z: Option<f64>,
    samples: Option<usize>,
    t2: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileFilter {
    order: Option<usize>,
    f_c: Option<f64>,
    window: Option<f64>,
    threshold_db: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    dir: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
}

/// Flag-level overrides, shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML config file; flags override its sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Built-in model name (landau_zener, lambda_system, shuttling, ...).
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Model constant x (shorthand for --set x=...).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// Extra model constant as key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Exponent sum; sets alpha = beta = n_plus.
    #[arg(long = "n-plus", global = true, allow_negative_numbers = true)]
    pub n_plus: Option<f64>,
    /// Tracked eigenstate index.
    #[arg(long, global = true)]
    pub state: Option<usize>,
    /// Symmetric control window half-width: boundaries (-z0, z0).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub z0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda1: Option<f64>,
    /// Pulse sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Pulse duration for single-duration commands.
    #[arg(long, global = true)]
    pub tf: Option<f64>,
    /// Resonance orders per level pair.
    #[arg(long = "k-max", global = true)]
    pub k_max: Option<usize>,

    /// Dephasing time; omitting it keeps the propagation unitary.
    #[arg(long = "t2", global = true)]
    pub t2: Option<f64>,
    #[arg(long = "sigma-x", global = true)]
    pub sigma_x: Option<f64>,
    #[arg(long = "sigma-z", global = true)]
    pub sigma_z: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long = "noise-samples", global = true)]
    pub noise_samples: Option<usize>,

    /// Low-pass filter order.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Low-pass cutoff frequency.
    #[arg(long = "f-c", global = true)]
    pub f_c: Option<f64>,
    /// Short-time window as a fraction of the pulse duration.
    #[arg(long, global = true)]
    pub window: Option<f64>,
    /// Spectral occupancy threshold in dB below the global peak.
    #[arg(long = "threshold-db", global = true, allow_negative_numbers = true)]
    pub threshold_db: Option<f64>,

    #[arg(long = "tf-min", global = true, allow_negative_numbers = true)]
    pub tf_min: Option<f64>,
    #[arg(long = "tf-max", global = true, allow_negative_numbers = true)]
    pub tf_max: Option<f64>,
    #[arg(long = "tf-count", global = true)]
    pub tf_count: Option<usize>,
    #[arg(long = "ab-min", global = true, allow_negative_numbers = true)]
    pub ab_min: Option<f64>,
    #[arg(long = "ab-max", global = true, allow_negative_numbers = true)]
    pub ab_max: Option<f64>,
    #[arg(long = "ab-count", global = true)]
    pub ab_count: Option<usize>,
    #[arg(long = "np-min", global = true, allow_negative_numbers = true)]
    pub np_min: Option<f64>,
    #[arg(long = "np-max", global = true, allow_negative_numbers = true)]
    pub np_max: Option<f64>,
    #[arg(long = "np-count", global = true)]
    pub np_count: Option<usize>,
    #[arg(long = "fc-min", global = true)]
    pub fc_min: Option<f64>,
    #[arg(long = "fc-max", global = true)]
    pub fc_max: Option<f64>,
    #[arg(long = "fc-count", global = true)]
    pub fc_count: Option<usize>,

    #[arg(long = "output-dir", global = true)]
    pub output_dir: Option<PathBuf>,
    /// Artifact format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Fully resolved configuration; serialized verbatim into the content hash
/// so any edit lands in a fresh artifact name.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub model_name: String,
    pub constants: Constants,
    pub alpha: f64,
    pub beta: f64,
    pub state: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub samples: usize,
    pub tf: Option<f64>,
    pub k_max: usize,
    pub t2: Option<f64>,
    pub sigma_x: f64,
    pub sigma_z: f64,
    pub noise_samples: usize,
    pub filter_order: usize,
    pub f_c: f64,
    pub window: f64,
    pub threshold_db: f64,
    pub tf_grid: Grid,
    pub ab_grid: Grid,
    pub np_grid: Grid,
    pub fc_grid: Grid,
    pub out_dir: PathBuf,
    pub format: Format,
    pub seed: u64,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

/// (alpha, beta) from one layer's trio, or None if the layer is silent.
fn layer_protocol(
    alpha: Option<f64>,
    beta: Option<f64>,
    n_plus: Option<f64>,
) -> Result<Option<(f64, f64)>> {
    match (alpha, beta, n_plus) {
        (None, None, None) => Ok(None),
        (None, None, Some(np)) => Ok(Some((np, np))),
        (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => Err(Error::Config(
            "protocol is over-specified: give alpha and beta, or n_plus, not both".into(),
        )),
        (Some(a), Some(b), None) => Ok(Some((a, b))),
        (Some(_), None, None) | (None, Some(_), None) => Err(Error::Config(
            "alpha and beta come as a pair; the other one is missing".into(),
        )),
    }
}

/// (lambda0, lambda1) from one layer, or None if the layer is silent.
fn layer_bounds(
    z0: Option<f64>,
    lambda0: Option<f64>,
    lambda1: Option<f64>,
) -> Result<Option<(f64, f64)>> {
    match (lambda0, lambda1, z0) {
        (Some(l0), Some(l1), _) => Ok(Some((l0, l1))),
        (None, None, Some(z)) => Ok(Some((-z, z))),
        (None, None, None) => Ok(None),
        _ => Err(Error::Config(
            "lambda0 and lambda1 come as a pair; the other one is missing".into(),
        )),
    }
}

impl RunConfig {
    pub fn load(ov: &Overrides) -> Result<Self> {
        let file: FileConfig = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let mut constants = file.model.constants.clone();
        if let Some(x) = ov.x {
            constants.insert("x".into(), finite("x", x)?);
        }
        for kv in &ov.set {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects key=value, got '{kv}'"))
            })?;
            let value: f64 = value.parse().map_err(|_| {
                Error::Config(format!("--set {key}: '{value}' is not a number"))
            })?;
            constants.insert(key.trim().to_string(), finite(key, value)?);
        }

        let (alpha, beta) = layer_protocol(ov.alpha, ov.beta, ov.n_plus)?
            .or(layer_protocol(
                file.protocol.alpha,
                file.protocol.beta,
                file.protocol.n_plus,
            )?)
            .unwrap_or((2.0, 2.0));
        let (lambda0, lambda1) = layer_bounds(ov.z0, ov.lambda0, ov.lambda1)?
            .or(layer_bounds(
                file.protocol.z0,
                file.protocol.lambda0,
                file.protocol.lambda1,
            )?)
            .unwrap_or((-10.0, 10.0));

        let grid = |fmin: Option<f64>,
                    fmax: Option<f64>,
                    fcount: Option<usize>,
                    dmin: f64,
                    dmax: f64,
                    dcount: usize| Grid {
            min: fmin.unwrap_or(dmin),
            max: fmax.unwrap_or(dmax),
            count: fcount.unwrap_or(dcount),
        };

        let t2 = ov.t2.or(file.noise.t2);
        if let Some(t2) = t2 {
            if !(t2 > 0.0) {
                return Err(Error::Config(format!(
                    "dephasing time must be positive, got {t2}"
                )));
            }
        }

        let cfg = RunConfig {
            model_name: ov
                .model
                .clone()
                .or(file.model.name)
                .unwrap_or_else(|| "qubit_sphere".into()),
            constants,
            alpha: finite("alpha", alpha)?,
            beta: finite("beta", beta)?,
            state: ov.state.or(file.protocol.state).unwrap_or(0),
            lambda0: finite("lambda0", lambda0)?,
            lambda1: finite("lambda1", lambda1)?,
            samples: ov.samples.or(file.protocol.samples).unwrap_or(1024),
            tf: match ov.tf.or(file.protocol.tf) {
                Some(t) => Some(finite("tf", t)?),
                None => None,
            },
            k_max: ov.k_max.or(file.protocol.k_max).unwrap_or(5),
            t2,
            sigma_x: finite("sigma_x", ov.sigma_x.or(file.noise.sigma_x).unwrap_or(0.0))?,
            sigma_z: finite("sigma_z", ov.sigma_z.or(file.noise.sigma_z).unwrap_or(0.1))?,
            noise_samples: ov.noise_samples.or(file.noise.samples).unwrap_or(200),
            filter_order: ov.order.or(file.filter.order).unwrap_or(3),
            f_c: finite("f_c", ov.f_c.or(file.filter.f_c).unwrap_or(1.0))?,
            window: finite("window", ov.window.or(file.filter.window).unwrap_or(0.125))?,
            threshold_db: finite(
                "threshold_db",
                ov.threshold_db.or(file.filter.threshold_db).unwrap_or(-20.0),
            )?,
            tf_grid: grid(
                ov.tf_min.or(file.grids.tf_min),
                ov.tf_max.or(file.grids.tf_max),
                ov.tf_count.or(file.grids.tf_count),
                0.0,
                10.0,
                50,
            ),
            ab_grid: grid(
                ov.ab_min.or(file.grids.ab_min),
                ov.ab_max.or(file.grids.ab_max),
                ov.ab_count.or(file.grids.ab_count),
                -5.0,
                5.0,
                11,
            ),
            np_grid: grid(
                ov.np_min.or(file.grids.np_min),
                ov.np_max.or(file.grids.np_max),
                ov.np_count.or(file.grids.np_count),
                0.0,
                6.0,
                25,
            ),
            fc_grid: grid(
                ov.fc_min.or(file.grids.fc_min),
                ov.fc_max.or(file.grids.fc_max),
                ov.fc_count.or(file.grids.fc_count),
                1.0,
                1.0,
                1,
            ),
            out_dir: ov
                .output_dir
                .clone()
                .or(file.output.dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            format: ov.format.or(file.output.format).unwrap_or(Format::Csv),
            seed: ov.seed.or(file.output.seed).unwrap_or(0),
        };

        cfg.tf_grid.validate("t_f")?;
        cfg.ab_grid.validate("alpha-beta")?;
        cfg.np_grid.validate("n_plus")?;
        cfg.fc_grid.validate("f_c")?;
        std::fs::create_dir_all(&cfg.out_dir).map_err(|e| {
            Error::Config(format!(
                "output directory {} is not writable: {e}",
                cfg.out_dir.display()
            ))
        })?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<Arc<dyn Model>> {
        build_model(&self.model_name, &self.constants)
    }

    /// Exponent sum of the resolved protocol.
    pub fn n_plus(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }

    /// First 8 hex digits of the SHA-256 over the command, the full
    /// resolved config, and any command detail (task, scan, label).
    pub fn content_hash(&self, command: &str, detail: &serde_json::Value) -> String {
        let record = serde_json::json!({
            "command": command,
            "config": self,
            "detail": detail,
        });
        let digest = Sha256::digest(record.to_string().as_bytes());
        digest[..4].iter().map(|b| format!("{b:02x}")).collect()
    }
}
