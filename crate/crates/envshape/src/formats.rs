//! JSON file formats for models, datasets, solutions and envelopes.
//!
//! Every document carries a `format` tag and a `schema_version`. States are
//! numbered inside their layer; `layer_sizes` fixes the layout. Probability
//! and value arrays are flat and row-major, see the field docs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use envshape_core::sample::Step;
use envshape_core::{
    ActionTable, Dataset, DeterministicPolicy, LayeredMdp, MdpGenSpec, OptimalSolution, RewardMode,
    Shape, StateTable, Trajectory, ValueEnvelope,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A document type with a fixed `format` tag.
pub trait Document: Serialize + DeserializeOwned {
    const FORMAT: &'static str;
    fn header(&self) -> (&str, u32);
}

macro_rules! document {
    ($ty:ty, $tag:literal) => {
        impl Document for $ty {
            const FORMAT: &'static str = $tag;
            fn header(&self) -> (&str, u32) {
                (&self.format, self.schema_version)
            }
        }
    };
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, to_json(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn from_json<T: Document>(text: &str) -> Result<T> {
    let doc: T = serde_json::from_str(text)?;
    let (format, version) = doc.header();
    if format != T::FORMAT {
        bail!("expected a `{}` document, found `{format}`", T::FORMAT);
    }
    if version != SCHEMA_VERSION {
        bail!("unsupported schema_version {version} (this build reads {SCHEMA_VERSION})");
    }
    Ok(doc)
}

pub fn read_json<T: Document>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn check_shape(layer_sizes: &[usize], actions: usize) -> Result<Shape> {
    Ok(Shape::new(layer_sizes.to_vec(), actions)?)
}

/// Generator parameters as they appear in files and experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpecFile {
    pub horizon: usize,
    pub states_per_layer: usize,
    pub actions: usize,
    pub terminal_reward_range: [f64; 2],
    /// `"zero"` or `"uniform"`.
    pub intermediate_rewards: String,
    pub concentration: f64,
    pub seed: u64,
}

impl Default for GenSpecFile {
    fn default() -> Self {
        Self::from(&MdpGenSpec::default())
    }
}

impl From<&MdpGenSpec> for GenSpecFile {
    fn from(spec: &MdpGenSpec) -> Self {
        Self {
            horizon: spec.horizon,
            states_per_layer: spec.states_per_layer,
            actions: spec.actions,
            terminal_reward_range: [spec.terminal_reward_range.0, spec.terminal_reward_range.1],
            intermediate_rewards: reward_mode_tag(spec.intermediate_rewards).into(),
            concentration: spec.concentration,
            seed: spec.seed,
        }
    }
}

impl GenSpecFile {
    pub fn to_spec(&self) -> Result<MdpGenSpec> {
        let spec = MdpGenSpec {
            horizon: self.horizon,
            states_per_layer: self.states_per_layer,
            actions: self.actions,
            terminal_reward_range: (self.terminal_reward_range[0], self.terminal_reward_range[1]),
            intermediate_rewards: parse_reward_mode(&self.intermediate_rewards)?,
            concentration: self.concentration,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn reward_mode_tag(mode: RewardMode) -> &'static str {
    match mode {
        RewardMode::Zero => "zero",
        RewardMode::Uniform => "uniform",
    }
}

pub fn parse_reward_mode(tag: &str) -> Result<RewardMode> {
    match tag {
        "zero" => Ok(RewardMode::Zero),
        "uniform" => Ok(RewardMode::Uniform),
        other => bail!("unknown intermediate reward mode `{other}` (expected zero or uniform)"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub format: String,
    pub schema_version: u32,
    pub actions: usize,
    /// Number of states in each non-terminal layer.
    pub layer_sizes: Vec<usize>,
    /// `transitions[h][(s * A + a) * n_{h+1} + s']`; the last step has a
    /// single terminal successor.
    pub transitions: Vec<Vec<f64>>,
    /// `rewards[h][s * A + a]`.
    pub rewards: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    /// The spec the model was drawn from, when it was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenSpecFile>,
}
document!(MdpFile, "envshape-mdp");

impl MdpFile {
    pub fn new(mdp: &LayeredMdp, generator: Option<&MdpGenSpec>) -> Self {
        let shape = mdp.shape();
        Self {
            format: Self::FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            actions: shape.actions(),
            layer_sizes: shape.layer_sizes()[..shape.horizon()].to_vec(),
            transitions: mdp.transitions().to_vec(),
            rewards: mdp.rewards().layers().to_vec(),
            initial: mdp.initial().to_vec(),
            generator: generator.map(GenSpecFile::from),
        }
    }

    /// Rebuilds the model; every row is validated again.
    pub fn to_mdp(&self) -> Result<LayeredMdp> {
        let shape = check_shape(&self.layer_sizes, self.actions)?;
        let rewards = ActionTable::from_layers(&shape, self.rewards.clone())?;
        Ok(LayeredMdp::new(
            shape,
            self.transitions.clone(),
            rewards,
            self.initial.clone(),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub format: String,
    pub schema_version: u32,
    pub behavior: String,
    pub horizon: usize,
    /// One `[state, action, reward]` triple per step.
    pub trajectories: Vec<Vec<(usize, usize, f64)>>,
}
document!(DatasetFile, "envshape-dataset");

impl DatasetFile {
    pub fn new(data: &Dataset, horizon: usize) -> Self {
        Self {
            format: Self::FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            behavior: data.behavior.clone(),
            horizon,
            trajectories: data
                .trajectories
                .iter()
                .map(|t| {
                    t.steps
                        .iter()
                        .map(|s| (s.state, s.action, s.reward))
                        .collect()
                })
                .collect(),
        }
    }

    /// Rebuilds the dataset and checks it against `shape`.
    pub fn to_dataset(&self, shape: &Shape) -> Result<Dataset> {
        if self.horizon != shape.horizon() {
            bail!(
                "dataset horizon {} does not match the model horizon {}",
                self.horizon,
                shape.horizon()
            );
        }
        let data = Dataset {
            behavior: self.behavior.clone(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| Trajectory {
                    steps: t
                        .iter()
                        .map(|&(state, action, reward)| Step {
                            state,
                            action,
                            reward,
                        })
                        .collect(),
                })
                .collect(),
        };
        data.check_shape(shape)?;
        Ok(data)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub format: String,
    pub schema_version: u32,
    pub actions: usize,
    pub layer_sizes: Vec<usize>,
    /// `v[h][s]` for the non-terminal layers.
    pub v: Vec<Vec<f64>>,
    /// `q[h][s * A + a]`.
    pub q: Vec<Vec<f64>>,
    /// Greedy optimal action, lowest index on ties.
    pub policy: Vec<Vec<usize>>,
    /// `max_s V*_h - min_s V*_h`.
    pub ranges: Vec<f64>,
}
document!(SolutionFile, "envshape-solution");

impl SolutionFile {
    pub fn new(shape: &Shape, sol: &OptimalSolution) -> Self {
        let h_max = shape.horizon();
        Self {
            format: Self::FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            actions: shape.actions(),
            layer_sizes: shape.layer_sizes()[..h_max].to_vec(),
            v: sol.v.layers()[..h_max].to_vec(),
            q: sol.q.layers().to_vec(),
            policy: sol.policy.layers().to_vec(),
            ranges: sol.ranges[..h_max].to_vec(),
        }
    }

    pub fn to_solution(&self) -> Result<(Shape, OptimalSolution)> {
        let shape = check_shape(&self.layer_sizes, self.actions)?;
        let q = ActionTable::from_layers(&shape, self.q.clone())?;
        let v = StateTable::from_layers(&shape, self.v.clone())?;
        let policy = DeterministicPolicy::new(&shape, self.policy.clone())?;
        if self.ranges.len() != shape.horizon() {
            bail!(
                "solution has {} ranges for horizon {}",
                self.ranges.len(),
                shape.horizon()
            );
        }
        let ranges = self.ranges.clone();
        Ok((
            shape,
            OptimalSolution {
                q,
                v,
                policy,
                ranges,
            },
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeFile {
    pub format: String,
    pub schema_version: u32,
    pub actions: usize,
    pub layer_sizes: Vec<usize>,
    pub delta: f64,
    /// `low_q[h][s * A + a]`.
    pub low_q: Vec<Vec<f64>>,
    pub high_q: Vec<Vec<f64>>,
    /// Everything below is derived from the Q-tables. It is written for
    /// inspection and recomputed on load.
    #[serde(default)]
    pub low_v: Vec<Vec<f64>>,
    #[serde(default)]
    pub high_v: Vec<Vec<f64>>,
    #[serde(default)]
    pub width: Vec<Vec<f64>>,
    #[serde(default)]
    pub midpoint: Vec<Vec<f64>>,
    #[serde(default)]
    pub ranges: Vec<f64>,
    #[serde(default)]
    pub d_max: f64,
    #[serde(default)]
    pub r_max: f64,
}
document!(EnvelopeFile, "envshape-envelope");

impl EnvelopeFile {
    pub fn new(env: &ValueEnvelope) -> Self {
        let shape = env.shape();
        let h_max = shape.horizon();
        Self {
            format: Self::FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            actions: shape.actions(),
            layer_sizes: shape.layer_sizes()[..h_max].to_vec(),
            delta: env.delta(),
            low_q: env.low_q().layers().to_vec(),
            high_q: env.high_q().layers().to_vec(),
            low_v: env.low_v().layers()[..h_max].to_vec(),
            high_v: env.high_v().layers()[..h_max].to_vec(),
            width: env.width().layers()[..h_max].to_vec(),
            midpoint: env.midpoint().layers()[..h_max].to_vec(),
            ranges: env.ranges()[..h_max].to_vec(),
            d_max: env.d_max(),
            r_max: env.r_max(),
        }
    }

    pub fn to_envelope(&self) -> Result<ValueEnvelope> {
        let shape = check_shape(&self.layer_sizes, self.actions)?;
        let low = ActionTable::from_layers(&shape, self.low_q.clone())?;
        let high = ActionTable::from_layers(&shape, self.high_q.clone())?;
        Ok(ValueEnvelope::from_q_tables(&shape, low, high, self.delta)?)
    }
}

pub fn load_mdp(path: &Path) -> Result<LayeredMdp> {
    read_json::<MdpFile>(path)?.to_mdp()
}

pub fn load_envelope(path: &Path) -> Result<ValueEnvelope> {
    read_json::<EnvelopeFile>(path)?.to_envelope()
}

pub fn load_dataset(path: &Path, shape: &Shape) -> Result<Dataset> {
    read_json::<DatasetFile>(path)?.to_dataset(shape)
}
