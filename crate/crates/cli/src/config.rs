//! Experiment configuration: JSON schema, guard validation and hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qcompound_core::channels::{ChannelFamily, ChannelJson, KrausChannel};
use qcompound_core::Error as CoreError;
use qcompound_core::compound::{GridFamily, ParamChannelKind};
use qcompound_core::tol::Guards;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Info,
    Typicality,
    OneShot,
    Net,
    Discriminate,
    Convert,
    Capacity,
    Bsst,
}

/// One channel in a family: a named builtin such as `phase_flip(0.1)` or a
/// JSON channel file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Builtin(String),
    File { file: String },
}

impl ChannelSpec {
    /// Load the channel; IO and syntax problems are malformed-config errors,
    /// failed channel invariants keep their own class.
    pub fn load(&self) -> Result<KrausChannel, CoreError> {
        match self {
            ChannelSpec::Builtin(name) => KrausChannel::builtin(name),
            ChannelSpec::File { file } => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| CoreError::InvalidParameter(format!("reading {file}: {e}")))?;
                let js: ChannelJson = serde_json::from_str(&text)
                    .map_err(|e| CoreError::InvalidParameter(format!("parsing {file}: {e}")))?;
                js.into_channel()
            }
        }
    }
}

/// Family specification: explicit members and/or a parameter grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<ChannelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: ParamChannelKind,
    pub lo: f64,
    pub hi: f64,
}

impl FamilySpec {
    pub fn load_members(&self) -> Result<ChannelFamily, CoreError> {
        let specs = self.members.as_ref().ok_or_else(|| {
            CoreError::InvalidParameter("family.members required for this pipeline".into())
        })?;
        let members = specs
            .iter()
            .map(|s| s.load())
            .collect::<Result<Vec<_>, _>>()?;
        ChannelFamily::new(members)
    }

    pub fn grid_family(&self) -> Result<GridFamily, CoreError> {
        let g = self.grid.as_ref().ok_or_else(|| {
            CoreError::InvalidParameter("family.grid required for this pipeline".into())
        })?;
        Ok(GridFamily {
            kind: g.kind,
            lo: g.lo,
            hi: g.hi,
        })
    }
}

/// Full experiment configuration. The seed is mandatory; every numeric knob
/// that a pipeline needs is checked by `validate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub seed: Option<u64>,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Eigenvalue list of the reference state for typicality/bsst runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_spectrum: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opt_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    /// Output directory; overridable with --out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// SHA-256 of the canonical serialized config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    }
}

/// A validation diagnostic plus rough size estimates.
#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub ok: bool,
    pub messages: Vec<String>,
    pub estimated_peak_dim: usize,
    pub estimated_memory_mb: f64,
    pub estimated_minutes: f64,
}

/// Outcome classes map onto the process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationClass {
    Ok,
    Malformed,
    GuardRejected,
}

pub fn validate(cfg: &ExperimentConfig, guards: &Guards) -> (ValidationClass, Diagnostics) {
    let mut msgs = Vec::new();
    let mut class = ValidationClass::Ok;
    if cfg.seed.is_none() {
        msgs.push("seed is mandatory".into());
        class = ValidationClass::Malformed;
    }
    let mut need = |cond: bool, msg: &str, cls: &mut ValidationClass| {
        if !cond {
            msgs.push(msg.to_string());
            if *cls == ValidationClass::Ok {
                *cls = ValidationClass::Malformed;
            }
        }
    };
    let d_in = cfg
        .family
        .members
        .as_ref()
        .and_then(|m| m.first())
        .and_then(|s| s.load().ok())
        .map(|ch| ch.in_dim())
        .unwrap_or(2);
    let mut peak_dim = d_in;
    match cfg.pipeline {
        Pipeline::Info => {
            need(cfg.family.members.is_some(), "family.members required", &mut class);
        }
        Pipeline::Typicality => {
            need(cfg.rho_spectrum.is_some(), "rho_spectrum required", &mut class);
            need(cfg.l.is_some(), "l required", &mut class);
            need(cfg.delta.is_some(), "delta required", &mut class);
        }
        Pipeline::OneShot => {
            need(cfg.family.members.is_some(), "family.members required", &mut class);
            need(cfg.l.is_some(), "l required", &mut class);
            need(cfg.k.is_some(), "k required", &mut class);
            need(cfg.trials.is_some(), "trials required", &mut class);
            peak_dim = d_in.saturating_pow(cfg.l.unwrap_or(1) as u32);
        }
        Pipeline::Net => {
            need(cfg.family.grid.is_some(), "family.grid required", &mut class);
            need(cfg.tau.is_some(), "tau required", &mut class);
        }
        Pipeline::Discriminate => {
            need(cfg.family.members.is_some(), "family.members required", &mut class);
            need(cfg.m.is_some(), "m required", &mut class);
            peak_dim = d_in.saturating_pow(cfg.m.unwrap_or(1) as u32);
        }
        Pipeline::Convert => {
            need(cfg.family.members.is_some(), "family.members required", &mut class);
            need(cfg.m.is_some(), "m required", &mut class);
            need(cfg.t.is_some(), "t required", &mut class);
            need(cfg.k.is_some(), "k required", &mut class);
            peak_dim = d_in.saturating_pow(cfg.m.unwrap_or(1).max(cfg.t.unwrap_or(1)) as u32);
        }
        Pipeline::Capacity => {
            need(cfg.family.members.is_some(), "family.members required", &mut class);
            peak_dim = d_in.saturating_pow(cfg.l.unwrap_or(1) as u32);
        }
        Pipeline::Bsst => {
            need(cfg.rho_spectrum.is_some(), "rho_spectrum required", &mut class);
            need(cfg.family.members.is_some(), "family.members required", &mut class);
            need(cfg.l_grid.is_some(), "l_grid required", &mut class);
            peak_dim = d_in.saturating_pow(
                cfg.l_grid
                    .as_ref()
                    .and_then(|g| g.iter().max().cloned())
                    .unwrap_or(1) as u32,
            );
        }
    }
    // Guard checks, only meaningful when the shape was well-formed.
    if class == ValidationClass::Ok {
        if let Some(l) = cfg.l {
            if l > guards.max_block_length {
                msgs.push(format!(
                    "block length {l} exceeds the cap {}",
                    guards.max_block_length
                ));
                class = ValidationClass::GuardRejected;
            }
        }
        if let Some(grid) = &cfg.l_grid {
            if grid.iter().any(|&l| l > guards.max_block_length) {
                msgs.push("l_grid entry exceeds the block-length cap".into());
                class = ValidationClass::GuardRejected;
            }
        }
        if peak_dim > guards.max_dense_dim {
            msgs.push(format!(
                "dense dimension {peak_dim} exceeds the cap {}",
                guards.max_dense_dim
            ));
            class = ValidationClass::GuardRejected;
        }
        if let Some(delta) = cfg.delta {
            if !(0.0 < delta && delta < 0.5) {
                msgs.push(format!("delta {delta} outside (0, 1/2)"));
                class = ValidationClass::Malformed;
            }
        }
    }
    let mem_mb = (peak_dim as f64).powi(2) * 16.0 * 8.0 / 1e6;
    let minutes = match cfg.pipeline {
        Pipeline::OneShot => {
            cfg.trials.unwrap_or(0) as f64 * (peak_dim as f64 / 256.0).max(0.1) * 0.01 / 60.0
        }
        _ => 0.1,
    };
    if class == ValidationClass::Ok {
        msgs.push("ok".into());
    }
    (
        class,
        Diagnostics {
            ok: class == ValidationClass::Ok,
            messages: msgs,
            estimated_peak_dim: peak_dim,
            estimated_memory_mb: mem_mb,
            estimated_minutes: minutes,
        },
    )
}
