use serde::{Deserialize, Serialize};

pub const FLAG_APPROXIMATE: &str = "APPROXIMATE";
pub const FLAG_NONCONVERGED: &str = "NONCONVERGED";
pub const FLAG_DECOMPOSED: &str = "DECOMPOSED";
pub const FLAG_BRACKET: &str = "BRACKET";
/// The reported stationary policy spends more than the budget; the dual value needs a
/// randomized mix of multiplier-optimal policies.
pub const FLAG_RANDOMIZED: &str = "RANDOMIZED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    FeedbackFinite,
    FeedbackComplete,
    NoFeedback,
    VendingFeedback,
    VendingNoFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub d: usize,
    /// `|Z|` (or `|M|` for vending).
    pub memory_size: usize,
    /// `|N|` for vending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_memory_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gain: f64,
    pub iterations: usize,
    pub final_span: f64,
    pub num_states: usize,
    pub num_actions: usize,
    pub tables_evaluated: u64,
    /// Tables whose inner solve failed to converge or that cannot meet the budget.
    pub tables_skipped: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_action_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_evaluations: Option<usize>,
}

/// Result of one scenario solve. `distortion` is `-gain`, clamped to `[0, Λ_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSolveReport {
    pub scenario: Scenario,
    pub distortion: f64,
    pub flags: Vec<String>,
    /// Change in distortion when the grid resolution is doubled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability_delta: Option<f64>,
    /// Decoder table; empty when the decoder is the Bayes response to the belief.
    pub decoder: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vending_map: Option<Vec<usize>>,
    /// Action index per MDP state.
    pub encoder_policy: Vec<usize>,
    pub parameters: Parameters,
    pub diagnostics: Diagnostics,
}

impl ScenarioSolveReport {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn is_approximate(&self) -> bool {
        self.has_flag(FLAG_APPROXIMATE)
    }

    pub(crate) fn add_flag(&mut self, flag: &str) {
        if !self.has_flag(flag) {
            self.flags.push(flag.to_string());
        }
    }
}

/// `-gain` clamped to `[0, Λ_max]`, with `-0.0` normalized to `0.0`.
pub(crate) fn clamp_distortion(gain: f64, max_loss: f64) -> f64 {
    (-gain).clamp(0.0, max_loss) + 0.0
}
