//! Experiment configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StoneError};

/// Which set function drives the gradient-based subset selection stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubmodularKind {
    /// `Σ_j g(Σ_{i∈S} |grad_i[j]|)` with `g(x) = ln(1 + x)`.
    #[default]
    FeatureBased,
    /// `Σ_{i∈S} g(μ(grad_i))`, additive over the selection.
    LiteralEq5,
    FacilityLocation,
    MaxCoverage,
}

impl SubmodularKind {
    pub const ALL: [SubmodularKind; 4] = [
        SubmodularKind::FeatureBased,
        SubmodularKind::LiteralEq5,
        SubmodularKind::FacilityLocation,
        SubmodularKind::MaxCoverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubmodularKind::FeatureBased => "feature",
            SubmodularKind::LiteralEq5 => "literal",
            SubmodularKind::FacilityLocation => "facility",
            SubmodularKind::MaxCoverage => "maxcov",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Active stages of the selection pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFlags {
    pub gbsss: bool,
    pub sdmcb_step1: bool,
    pub sdmcb_step2: bool,
}

impl Default for StageFlags {
    fn default() -> Self {
        StageFlags::ALL
    }
}

impl StageFlags {
    pub const ALL: StageFlags = StageFlags {
        gbsss: true,
        sdmcb_step1: true,
        sdmcb_step2: true,
    };
    pub const GBSSS_ONLY: StageFlags = StageFlags {
        gbsss: true,
        sdmcb_step1: false,
        sdmcb_step2: false,
    };
    pub const SDMCB_ONLY: StageFlags = StageFlags {
        gbsss: false,
        sdmcb_step1: true,
        sdmcb_step2: true,
    };

    pub fn any(&self) -> bool {
        self.gbsss || self.sdmcb_step1 || self.sdmcb_step2
    }

    /// Parses a comma list such as `gbsss,step1,step2`.
    pub fn parse_list(list: &str) -> Result<Self> {
        let mut flags = StageFlags {
            gbsss: false,
            sdmcb_step1: false,
            sdmcb_step2: false,
        };
        for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token {
                "gbsss" => flags.gbsss = true,
                "step1" | "sdmcb1" | "sdmcb-step1" => flags.sdmcb_step1 = true,
                "step2" | "sdmcb2" | "sdmcb-step2" => flags.sdmcb_step2 = true,
                "sdmcb" => {
                    flags.sdmcb_step1 = true;
                    flags.sdmcb_step2 = true;
                }
                "all" => flags = StageFlags::ALL,
                other => {
                    return Err(StoneError::InvalidConfig(format!(
                        "unknown stage '{other}' (expected gbsss, step1, step2, sdmcb, all)"
                    )))
                }
            }
        }
        Ok(flags)
    }

    pub fn to_list(&self) -> String {
        let mut parts = Vec::new();
        if self.gbsss {
            parts.push("gbsss");
        }
        if self.sdmcb_step1 {
            parts.push("step1");
        }
        if self.sdmcb_step2 {
            parts.push("step2");
        }
        parts.join(",")
    }
}

/// How per-box loss terms combine into one scene loss before differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientAggregation {
    Mean,
    /// Per-box terms add up, so scenes with more boxes carry more gradient mass.
    #[default]
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Feature dropout probability for the stochastic passes.
    pub dropout_rate: f64,
    /// L2 penalty of the multinomial classifier.
    pub cls_l2: f64,
    /// Ridge penalty of the regression head.
    pub reg_ridge: f64,
    /// Full-batch gradient-descent iterations for the classifier.
    pub cls_iterations: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            dropout_rate: 0.1,
            cls_l2: 1e-3,
            reg_ridge: 1e-2,
            cls_iterations: 300,
        }
    }
}

/// Gradient-embedding options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Class-balanced weights and margins; off gives the plain detection loss.
    pub reweighing: bool,
    pub aggregation: GradientAggregation,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            reweighing: true,
            aggregation: GradientAggregation::Sum,
        }
    }
}

/// Active-learning parameters for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlConfig {
    /// Scenes kept by the gradient-based submodular stage.
    pub gamma1: usize,
    /// Scenes kept by the cumulative-entropy stage.
    pub gamma2: usize,
    /// Scenes kept by the individual-entropy filter; defaults to ⌈(Γ₁+Γ₂)/2⌉.
    #[serde(default)]
    pub k1: Option<usize>,
    pub rounds: usize,
    pub scenes_per_round: usize,
    #[serde(default = "default_mc_passes")]
    pub mc_passes: usize,
    #[serde(default)]
    pub seed: u64,
    pub class_count: usize,
    #[serde(default = "default_initial_labeled")]
    pub initial_labeled: usize,
    #[serde(default)]
    pub submodular_kind: SubmodularKind,
    /// Similarity threshold of the max-coverage function.
    #[serde(default = "default_tau")]
    pub max_coverage_tau: f64,
    #[serde(default)]
    pub stages: StageFlags,
    /// Hard stop on total queried boxes; truncates the round that would exceed it.
    #[serde(default)]
    pub max_boxes: Option<u64>,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
}

fn default_mc_passes() -> usize {
    5
}

fn default_initial_labeled() -> usize {
    20
}

fn default_tau() -> f64 {
    0.9
}

impl AlConfig {
    /// Parameters used for KITTI-scale runs: Γ₁ = 400, Γ₂ = 300, T = 5, 100 scenes per round.
    pub fn kitti_defaults() -> Self {
        AlConfig {
            gamma1: 400,
            gamma2: 300,
            k1: None,
            rounds: 5,
            scenes_per_round: 100,
            mc_passes: 5,
            seed: 0,
            class_count: 3,
            initial_labeled: 100,
            submodular_kind: SubmodularKind::FeatureBased,
            max_coverage_tau: default_tau(),
            stages: StageFlags::ALL,
            max_boxes: None,
            surrogate: SurrogateConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }

    /// Desk-scale reference configuration for a 500-scene synthetic pool.
    pub fn reference() -> Self {
        AlConfig {
            gamma1: 60,
            gamma2: 30,
            k1: Some(45),
            rounds: 5,
            scenes_per_round: 30,
            initial_labeled: 20,
            ..Self::kitti_defaults()
        }
    }

    pub fn effective_k1(&self) -> usize {
        self.k1.unwrap_or((self.gamma1 + self.gamma2).div_ceil(2))
    }

    /// Scenes STONE selects per round.
    pub fn stone_quota(&self) -> usize {
        self.scenes_per_round.min(self.gamma2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(StoneError::InvalidConfig(msg));
        if self.class_count < 2 {
            return bad(format!("class_count must be >= 2, got {}", self.class_count));
        }
        if self.mc_passes == 0 {
            return bad("mc_passes must be >= 1".into());
        }
        let k1 = self.effective_k1();
        if !(self.gamma2 <= k1 && k1 <= self.gamma1) {
            return bad(format!(
                "expected gamma2 <= k1 <= gamma1, got gamma2={}, k1={}, gamma1={}",
                self.gamma2, k1, self.gamma1
            ));
        }
        if !self.stages.any() {
            return bad("no selection stage enabled".into());
        }
        let rate = self.surrogate.dropout_rate;
        if !(0.0..1.0).contains(&rate) {
            return bad(format!("dropout_rate must be in [0, 1), got {rate}"));
        }
        if !(0.0..=1.0).contains(&self.max_coverage_tau) {
            return bad(format!(
                "max_coverage_tau must be in [0, 1], got {}",
                self.max_coverage_tau
            ));
        }
        if self.surrogate.cls_l2 < 0.0 || self.surrogate.reg_ridge <= 0.0 {
            return bad("surrogate penalties must be cls_l2 >= 0 and reg_ridge > 0".into());
        }
        Ok(())
    }
}
