//! Scenario presets, protocol variants and parameter overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::ByzantineConfig;
use crate::agent::AgentParams;
use crate::env::{GridConfig, RewardTable, StepCapRule};
use crate::error::{config_err, BrnesError, Result};
use crate::protocol::{ExhaustedBudget, GateMode, PrivacyParams, ProtocolConfig, ZoneMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// 5×5, 5 agents, 1 obstacle.
    Small,
    /// 10×10, 10 agents, 3 obstacles.
    Medium,
    /// 30×30, 20 agents, 5 obstacles.
    Large,
    Custom {
        height: usize,
        width: usize,
        n_agents: usize,
        n_obstacles: usize,
    },
}

impl Scale {
    /// `(height, width, agents, obstacles)`
    pub fn dimensions(self) -> (usize, usize, usize, usize) {
        match self {
            Scale::Small => (5, 5, 5, 1),
            Scale::Medium => (10, 10, 10, 3),
            Scale::Large => (30, 30, 20, 5),
            Scale::Custom {
                height,
                width,
                n_agents,
                n_obstacles,
            } => (height, width, n_agents, n_obstacles),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "medium" => Ok(Scale::Medium),
            "large" => Ok(Scale::Large),
            other => Err(config_err(format!("unknown scale {other:?}"))),
        }
    }
}

/// Which defenses are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Neighbour zone, weighted aggregation and LDP.
    Brnes,
    /// Whole-grid advising adopted directly, raw Q-values.
    NoDefense,
    /// Whole-grid advising adopted directly, LDP-perturbed Q-values.
    LdpOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Brnes, Variant::NoDefense, Variant::LdpOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Brnes => "brnes",
            Variant::NoDefense => "no-defense",
            Variant::LdpOnly => "ldp-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| config_err(format!("unknown variant {s:?}")))
    }

    pub fn uses_ldp(self) -> bool {
        matches!(self, Variant::Brnes | Variant::LdpOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    Byzantine,
    Inference,
}

impl AttackKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackKind::None),
            "byzantine" => Ok(AttackKind::Byzantine),
            "inference" => Ok(AttackKind::Inference),
            other => Err(config_err(format!("unknown attack kind {other:?}"))),
        }
    }
}

/// Which advisors an inference attacker tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceTargets {
    /// One honest advisor drawn at random per attacker.
    #[default]
    Single,
    AllAdvisors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub advisee_total: u64,
    pub advisor_total: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            advisee_total: 100_000,
            advisor_total: 10_000,
        }
    }
}

/// Knobs for sensitivity analysis. Defaults follow the literal protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOptions {
    pub gate: GateMode,
    pub exhausted_budget: ExhaustedBudget,
    pub inactive_advisors: bool,
    pub inference_targets: InferenceTargets,
    pub step_cap_rule: StepCapRule,
    /// Overrides the preset goal (defaults to the bottom-right corner).
    pub goal: Option<crate::env::Cell>,
    /// Release raw Q-vectors even when the variant would perturb them.
    pub disable_ldp: bool,
    pub log_advice: bool,
    pub byzantine_noise_center: Option<f64>,
    pub byzantine_noise_spread: Option<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            gate: GateMode::Deterministic,
            exhausted_budget: ExhaustedBudget::Refuse,
            inactive_advisors: true,
            inference_targets: InferenceTargets::Single,
            step_cap_rule: StepCapRule::CellCount,
            goal: None,
            disable_ldp: false,
            log_advice: false,
            byzantine_noise_center: None,
            byzantine_noise_spread: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scale: Scale,
    pub episodes: usize,
    pub variant: Variant,
    pub attacker_fraction: f64,
    pub attacker_kind: AttackKind,
    pub privacy_epsilon: f64,
    pub master_seed: u64,
    pub params: AgentParams,
    pub rewards: RewardTable,
    pub budgets: Budgets,
    #[serde(default)]
    pub options: ScenarioOptions,
}

impl ScenarioConfig {
    pub fn new(scale: Scale, variant: Variant) -> Self {
        Self {
            scale,
            episodes: 1000,
            variant,
            attacker_fraction: 0.0,
            attacker_kind: AttackKind::None,
            privacy_epsilon: 1.0,
            master_seed: 0,
            params: AgentParams::default(),
            rewards: RewardTable::default(),
            budgets: Budgets::default(),
            options: ScenarioOptions::default(),
        }
    }

    pub fn with_attack(mut self, kind: AttackKind, fraction: f64) -> Self {
        self.attacker_kind = kind;
        self.attacker_fraction = fraction;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_episodes(mut self, episodes: usize) -> Self {
        self.episodes = episodes;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.privacy_epsilon = epsilon;
        self
    }

    pub fn grid(&self) -> GridConfig {
        let (h, w, n, o) = self.scale.dimensions();
        let mut g = GridConfig::new(h, w, n, o);
        g.step_cap = self.options.step_cap_rule.cap(h, w);
        g.rewards = self.rewards;
        if let Some(goal) = self.options.goal {
            g.goal = goal;
        }
        g
    }

    pub fn ldp_enabled(&self) -> bool {
        self.variant.uses_ldp() && !self.options.disable_ldp
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let mut byzantine =
            ByzantineConfig::for_goal_reward(self.byzantine_fraction(), self.rewards.phi_goal);
        if let Some(c) = self.options.byzantine_noise_center {
            byzantine.noise_center = c;
        }
        if let Some(s) = self.options.byzantine_noise_spread {
            byzantine.noise_spread = s;
        }
        let (zone, weight) = match self.variant {
            Variant::Brnes => (ZoneMode::Adaptive, self.params.w),
            Variant::NoDefense | Variant::LdpOnly => (ZoneMode::WholeGrid, 0.0),
        };
        let privacy = if self.ldp_enabled() {
            Some(PrivacyParams::new(self.privacy_epsilon)?)
        } else {
            None
        };
        Ok(ProtocolConfig {
            zone,
            weight,
            privacy,
            gate: self.options.gate,
            exhausted_budget: self.options.exhausted_budget,
            inactive_advisors: self.options.inactive_advisors,
            byzantine,
        })
    }

    fn byzantine_fraction(&self) -> f64 {
        match self.attacker_kind {
            AttackKind::Byzantine => self.attacker_fraction,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid().validate()?;
        self.params.validate()?;
        if self.episodes == 0 {
            return Err(config_err("episodes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.attacker_fraction) {
            return Err(config_err(format!(
                "attacker fraction must be in [0, 1], got {}",
                self.attacker_fraction
            )));
        }
        if self.budgets.advisee_total == 0 || self.budgets.advisor_total == 0 {
            return Err(config_err("budget totals must be positive"));
        }
        if self.privacy_epsilon.is_nan() || self.privacy_epsilon <= 0.0 {
            return Err(config_err(format!(
                "privacy epsilon must be > 0, got {}",
                self.privacy_epsilon
            )));
        }
        let p = self.protocol()?;
        p.byzantine.validate()?;
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &ParamOverrides) {
        let p = &mut self.params;
        let r = &mut self.rewards;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = o.$field { $target = v; })*
            };
        }
        set! {
            alpha => p.alpha,
            epsilon_explore => p.epsilon_explore,
            gamma => p.gamma,
            w => p.w,
            kappa => p.kappa,
            tau => p.tau,
            tau_prime => p.tau_prime,
            phi_goal => r.phi_goal,
            phi_freeway => r.phi_freeway,
            phi_obstacle => r.phi_obstacle,
            phi_wall => r.phi_wall,
            privacy_epsilon => self.privacy_epsilon,
            budget_advisee => self.budgets.advisee_total,
            budget_advisor => self.budgets.advisor_total,
        }
    }
}

/// Flat override file for every tunable parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub alpha: Option<f64>,
    pub epsilon_explore: Option<f64>,
    pub gamma: Option<f64>,
    pub w: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<u64>,
    pub tau_prime: Option<u64>,
    pub phi_goal: Option<f64>,
    pub phi_freeway: Option<f64>,
    pub phi_obstacle: Option<f64>,
    pub phi_wall: Option<f64>,
    pub privacy_epsilon: Option<f64>,
    pub budget_advisee: Option<u64>,
    pub budget_advisor: Option<u64>,
}

impl ParamOverrides {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BrnesError::Io {
            path: path.to_owned(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| BrnesError::Format {
            path: path.to_owned(),
            message,
        })
    }
}
