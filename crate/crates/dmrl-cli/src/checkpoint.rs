//! Checkpoint files: a JSON envelope holding the network spec, the flat
//! parameter values as decimal strings (full round-trip precision, including
//! denormals), and the input-normalization statistics.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dmrl_core::dynamics::MODEL_INPUT_DIM;
use dmrl_core::env::{ACTION_COUNT, OBS_DIM};
use dmrl_core::{DynamicsModel, Head, MlpSpec, Normalizer, ParamVector, Policy};

pub const FORMAT_VERSION: u32 = 1;

/// A trained network ready for evaluation or further use.
#[derive(Debug, Clone)]
pub enum Artifact {
    Policy(Policy),
    Dynamics(DynamicsModel),
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Policy(_) => "policy",
            Artifact::Dynamics(_) => "dynamics",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecDoc {
    input_dim: usize,
    hidden: Vec<usize>,
    output_dim: usize,
    head: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormDoc {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format_version: u32,
    kind: String,
    spec: SpecDoc,
    params: Vec<String>,
    normalization: NormDoc,
}

fn spec_doc(spec: &MlpSpec) -> SpecDoc {
    SpecDoc {
        input_dim: spec.input_dim,
        hidden: spec.hidden.clone(),
        output_dim: spec.output_dim,
        head: match spec.head {
            Head::Linear => "linear".to_string(),
            Head::Softmax => "softmax".to_string(),
        },
    }
}

fn spec_from_doc(doc: &SpecDoc) -> Result<MlpSpec> {
    let head = match doc.head.as_str() {
        "linear" => Head::Linear,
        "softmax" => Head::Softmax,
        other => bail!("checkpoint has unknown head {other:?}"),
    };
    MlpSpec::new(doc.input_dim, doc.hidden.clone(), doc.output_dim, head)
        .map_err(|e| anyhow::anyhow!("checkpoint spec invalid: {e}"))
}

/// `{}` on an f64 prints the shortest decimal string that parses back to the
/// same bits, so text checkpoints are lossless.
fn params_to_strings(params: &ParamVector) -> Vec<String> {
    params.values().iter().map(|v| format!("{v}")).collect()
}

fn params_from_strings(spec: &MlpSpec, strings: &[String]) -> Result<ParamVector> {
    let mut values = Vec::with_capacity(strings.len());
    for s in strings {
        values.push(
            s.parse::<f64>()
                .with_context(|| format!("checkpoint parameter {s:?} is not a number"))?,
        );
    }
    ParamVector::from_values(spec.layout(), values)
        .map_err(|e| anyhow::anyhow!("checkpoint parameters do not fit the spec: {e}"))
}

pub fn save_checkpoint(path: &Path, artifact: &Artifact) -> Result<()> {
    let doc = match artifact {
        Artifact::Policy(policy) => CheckpointDoc {
            format_version: FORMAT_VERSION,
            kind: "policy".to_string(),
            spec: spec_doc(policy.spec()),
            params: params_to_strings(policy.params()),
            normalization: NormDoc {
                mean: vec![0.0; policy.spec().input_dim],
                std: vec![1.0; policy.spec().input_dim],
            },
        },
        Artifact::Dynamics(model) => CheckpointDoc {
            format_version: FORMAT_VERSION,
            kind: "dynamics".to_string(),
            spec: spec_doc(model.spec()),
            params: params_to_strings(model.params()),
            normalization: NormDoc {
                mean: model.normalizer().mean.clone(),
                std: model.normalizer().std.clone(),
            },
        },
    };
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text)
        .with_context(|| format!("cannot write checkpoint {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> Result<Artifact> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    let doc: CheckpointDoc = serde_json::from_str(&text)
        .with_context(|| format!("malformed checkpoint {}", path.display()))?;
    if doc.format_version != FORMAT_VERSION {
        bail!(
            "checkpoint {} has format version {}, expected {FORMAT_VERSION}",
            path.display(),
            doc.format_version
        );
    }
    let spec = spec_from_doc(&doc.spec)?;
    let params = params_from_strings(&spec, &doc.params)?;
    match doc.kind.as_str() {
        "policy" => {
            let policy = Policy::from_parts(spec, params)
                .map_err(|e| anyhow::anyhow!("checkpoint is not a valid policy: {e}"))?;
            Ok(Artifact::Policy(policy))
        }
        "dynamics" => {
            let norm = Normalizer {
                mean: doc.normalization.mean,
                std: doc.normalization.std,
            };
            let model = DynamicsModel::from_parts(spec, params, norm)
                .map_err(|e| anyhow::anyhow!("checkpoint is not a valid dynamics model: {e}"))?;
            Ok(Artifact::Dynamics(model))
        }
        other => bail!("checkpoint has unknown kind {other:?}"),
    }
}

/// Validates that a loaded artifact matches the observation and action
/// spaces this binary evaluates in.
pub fn expect_lander_artifact(artifact: &Artifact) -> Result<()> {
    match artifact {
        Artifact::Policy(policy) => {
            let spec = policy.spec();
            if spec.input_dim != OBS_DIM || spec.output_dim != ACTION_COUNT {
                bail!(
                    "policy checkpoint maps {} -> {}, expected {OBS_DIM} -> {ACTION_COUNT}",
                    spec.input_dim,
                    spec.output_dim
                );
            }
        }
        Artifact::Dynamics(model) => {
            let spec = model.spec();
            if spec.input_dim != MODEL_INPUT_DIM || spec.output_dim != OBS_DIM {
                bail!(
                    "dynamics checkpoint maps {} -> {}, expected {MODEL_INPUT_DIM} -> {OBS_DIM}",
                    spec.input_dim,
                    spec.output_dim
                );
            }
        }
    }
    Ok(())
}
