//! Experiment configuration read from JSON.

use pss_core::greedy::{Selection, TrainingSet};
use pss_core::interp::WeightNorm;
use pss_core::model::{AffineCoefficientFamily, FemSpace, Load, StiffnessSet};
use pss_core::multiindex::SurrogateWeights;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: Option<ModelConfig>,
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub test: TestConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "unit_interval")]
    pub domain: [f64; 2],
    pub n_h: usize,
    pub family: FamilyConfig,
    #[serde(default)]
    pub f: Load,
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    Disjoint { theta: Vec<f64> },
    Smooth { d: usize, beta: f64, r_target: f64 },
    Constant { theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    Halton,
    Uniform,
}

/// Sample of `[-radius, radius]^J` on which errors are estimated.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    #[serde(default = "halton")]
    pub kind: SampleKind,
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "one")]
    pub radius: f64,
}

fn halton() -> SampleKind {
    SampleKind::Halton
}

fn default_size() -> usize {
    2000
}

fn one() -> f64 {
    1.0
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            kind: SampleKind::Halton,
            size: default_size(),
            radius: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Record wall-clock times; off keeps reruns byte-identical.
    #[serde(default)]
    pub wall_time: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaylorMode {
    Apriori,
    Bulk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InterpMode {
    Apriori,
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SeqKind {
    Leja,
    Rleja,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticSet {
    Diagonal {
        #[serde(default)]
        x: Option<Vec<f64>>,
    },
    Blocks {
        #[serde(default = "one")]
        s: f64,
        #[serde(default = "default_levels")]
        levels: u32,
    },
    File {
        path: String,
    },
}

fn default_levels() -> u32 {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    Taylor {
        mode: TaylorMode,
        /// Cardinalities reported by the a priori mode.
        #[serde(default)]
        sizes: Vec<usize>,
        /// Ranking surrogate; defaults to `rho_j = (1 - r/2) / ||psi_j||`.
        #[serde(default)]
        surrogate: Option<SurrogateWeights>,
        #[serde(default = "half")]
        theta: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        /// Total degree of the reference set used for `sigma_hat`.
        #[serde(default)]
        reference_degree: Option<u32>,
        #[serde(default = "default_steps")]
        max_steps: usize,
    },
    Interp {
        mode: InterpMode,
        #[serde(default)]
        sizes: Vec<usize>,
        #[serde(default = "leja")]
        seq: SeqKind,
        #[serde(default = "inf")]
        p: WeightNorm,
        #[serde(default)]
        surrogate: Option<SurrogateWeights>,
        #[serde(default = "default_probes")]
        lebesgue_probes: usize,
    },
    Legendre {
        dims: usize,
        degree: u32,
        nodes: usize,
        /// Analyticity margin; defaults to `r/2`.
        #[serde(default)]
        eps: Option<f64>,
        /// `C = margin * ||w_0||_V`.
        #[serde(default = "default_margin")]
        c_margin: f64,
    },
    Rb {
        eps: f64,
        train: TrainingSet,
        #[serde(default = "default_rb_n")]
        n_max: usize,
        #[serde(default)]
        strict_covering: bool,
    },
    GreedySynthetic {
        set: SyntheticSet,
        #[serde(default = "one")]
        gamma: f64,
        n: usize,
        #[serde(default = "maximal")]
        selection: Selection,
    },
}

fn half() -> f64 {
    0.5
}
fn default_eps() -> f64 {
    1e-8
}
fn default_steps() -> usize {
    200
}
fn leja() -> SeqKind {
    SeqKind::Leja
}
fn inf() -> WeightNorm {
    WeightNorm::Inf
}
fn default_probes() -> usize {
    1000
}
fn default_margin() -> f64 {
    1.1
}
fn default_rb_n() -> usize {
    50
}
fn maximal() -> Selection {
    Selection::Maximal
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Taylor { .. } => "taylor",
            MethodConfig::Interp { .. } => "interp",
            MethodConfig::Legendre { .. } => "legendre",
            MethodConfig::Rb { .. } => "rb",
            MethodConfig::GreedySynthetic { .. } => "greedy-synthetic",
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> pss_core::Result<StiffnessSet> {
        if self.domain != [0.0, 1.0] {
            return Err(pss_core::PssError::Config(format!(
                "only the domain [0, 1] is supported, got {:?}",
                self.domain
            )));
        }
        let space = FemSpace::new(self.n_h)?;
        let family = match &self.family {
            FamilyConfig::Disjoint { theta } => AffineCoefficientFamily::disjoint(&space, theta)?,
            FamilyConfig::Smooth { d, beta, r_target } => {
                AffineCoefficientFamily::smooth(&space, *d, *beta, *r_target)?
            }
            FamilyConfig::Constant { theta } => AffineCoefficientFamily::constant(&space, *theta)?,
        };
        StiffnessSet::assemble(family, space, &self.f)
    }
}
