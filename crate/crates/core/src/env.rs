//! H×W grid Markov game shared by all agents.
//!
//! Agents, obstacles and the freeway are scattered at random every episode;
//! the goal stays put. Obstacles jump to fresh random cells on every
//! environment tick and act as hazards rather than walls: an agent may enter
//! an obstacle cell but pays `phi_obstacle` for it.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, BrnesError, Result};

/// A grid coordinate. `x` is the column in `[0, W)`, `y` the row in `[0, H)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Movement directions in canonical order. `Action as usize` is the index
/// into every Q-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

pub const N_ACTIONS: usize = 4;

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, -1),
            Action::Down => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub phi_goal: f64,
    pub phi_freeway: f64,
    pub phi_obstacle: f64,
    pub phi_wall: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        Self {
            phi_goal: 10.0,
            phi_freeway: 0.50,
            phi_obstacle: -1.50,
            phi_wall: -0.50,
        }
    }
}

impl RewardTable {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.phi_goal,
            self.phi_freeway,
            self.phi_obstacle,
            self.phi_wall,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(config_err("reward entries must be finite"));
        }
        if self.phi_goal <= self.phi_freeway {
            return Err(config_err("phi_goal must exceed phi_freeway"));
        }
        if self.phi_obstacle >= 0.0 || self.phi_wall >= 0.0 {
            return Err(config_err("phi_obstacle and phi_wall must be negative"));
        }
        Ok(())
    }
}

/// How the per-episode step cap is derived from the grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCapRule {
    /// `H·W·100`
    #[default]
    CellCount,
    /// `max(H, W)·100`
    LongSide,
}

impl StepCapRule {
    pub fn cap(self, height: usize, width: usize) -> usize {
        match self {
            StepCapRule::CellCount => height * width * 100,
            StepCapRule::LongSide => height.max(width) * 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub height: usize,
    pub width: usize,
    pub n_agents: usize,
    pub n_obstacles: usize,
    pub n_freeways: usize,
    pub goal: Cell,
    pub step_cap: usize,
    pub rewards: RewardTable,
}

impl GridConfig {
    /// Grid with the goal in the bottom-right corner and the default cap rule.
    pub fn new(height: usize, width: usize, n_agents: usize, n_obstacles: usize) -> Self {
        Self {
            height,
            width,
            n_agents,
            n_obstacles,
            n_freeways: 1,
            goal: Cell::new(width.saturating_sub(1), height.saturating_sub(1)),
            step_cap: StepCapRule::CellCount.cap(height, width),
            rewards: RewardTable::default(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(config_err(format!(
                "grid must be at least 2x2, got {}x{}",
                self.height, self.width
            )));
        }
        if !self.contains(self.goal) {
            return Err(config_err(format!("goal {:?} outside grid", self.goal)));
        }
        if self.n_agents == 0 {
            return Err(config_err("at least one agent is required"));
        }
        if self.n_freeways > 1 {
            return Err(config_err("at most one freeway is supported"));
        }
        let occupied = self.n_agents + self.n_obstacles + self.n_freeways + 1;
        if occupied >= self.n_cells() {
            return Err(config_err(format!(
                "{} agents + {} obstacles + {} freeway + goal must be fewer than {} cells",
                self.n_agents,
                self.n_obstacles,
                self.n_freeways,
                self.n_cells()
            )));
        }
        if self.step_cap == 0 {
            return Err(config_err("step_cap must be positive"));
        }
        self.rewards.validate()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Dense state id of a cell (row-major).
    pub fn state_id(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_of(&self, state: usize) -> Cell {
        Cell::new(state % self.width, state / self.width)
    }

    /// Where `action` takes an agent standing at `from`, or `None` if it
    /// would leave the grid.
    pub fn target(&self, from: Cell, action: Action) -> Option<Cell> {
        let (dx, dy) = action.delta();
        let x = from.x.checked_add_signed(dx)?;
        let y = from.y.checked_add_signed(dy)?;
        let c = Cell::new(x, y);
        self.contains(c).then_some(c)
    }

    /// Position after attempting `action`; wall bumps leave the agent in place.
    pub fn resolve(&self, from: Cell, action: Action) -> Cell {
        self.target(from, action).unwrap_or(from)
    }

    fn random_non_goal_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> Cell {
        let goal = self.state_id(self.goal);
        let mut i = rng.random_range(0..self.n_cells() - 1);
        if i >= goal {
            i += 1;
        }
        self.cell_of(i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent_pos: Vec<Cell>,
    pub agent_active: Vec<bool>,
    pub obstacle_pos: Vec<Cell>,
    pub freeway_pos: Option<Cell>,
    pub freeway_collected: Vec<bool>,
    pub step_index: usize,
}

impl EnvState {
    pub fn all_inactive(&self) -> bool {
        self.agent_active.iter().all(|a| !a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_pos: Cell,
    pub reward: f64,
    pub reached_goal: bool,
    pub hit_wall: bool,
    pub hit_obstacle: bool,
    pub collected_freeway: bool,
}

impl StepOutcome {
    /// Reward implied by the outcome flags.
    pub fn reward_from_flags(&self, r: &RewardTable) -> f64 {
        let mut total = 0.0;
        if self.reached_goal {
            total += r.phi_goal;
        }
        if self.collected_freeway {
            total += r.phi_freeway;
        }
        if self.hit_obstacle {
            total += r.phi_obstacle;
        }
        if self.hit_wall {
            total += r.phi_wall;
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Fresh episode: agents, obstacles and the freeway on distinct non-goal
    /// cells drawn uniformly without replacement.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let cfg = &self.config;
        let goal = cfg.state_id(cfg.goal);
        let needed = cfg.n_agents + cfg.n_obstacles + cfg.n_freeways;
        let cells: Vec<Cell> = sample(rng, cfg.n_cells() - 1, needed)
            .into_iter()
            .map(|i| cfg.cell_of(if i >= goal { i + 1 } else { i }))
            .collect();
        let (agents, rest) = cells.split_at(cfg.n_agents);
        let (obstacles, freeway) = rest.split_at(cfg.n_obstacles);
        EnvState {
            agent_pos: agents.to_vec(),
            agent_active: vec![true; cfg.n_agents],
            obstacle_pos: obstacles.to_vec(),
            freeway_pos: freeway.first().copied(),
            freeway_collected: vec![false; cfg.n_agents],
            step_index: 0,
        }
    }

    /// Relocates every obstacle to an independent uniform non-goal cell.
    pub fn move_obstacles<R: Rng + ?Sized>(&self, state: &mut EnvState, rng: &mut R) {
        for obstacle in &mut state.obstacle_pos {
            *obstacle = self.config.random_non_goal_cell(rng);
        }
    }

    /// Moves one agent and scores the transition.
    pub fn step(&self, state: &mut EnvState, agent: usize, action: Action) -> Result<StepOutcome> {
        let cfg = &self.config;
        if agent >= state.agent_pos.len() {
            return Err(BrnesError::Logic(format!("no agent with index {agent}")));
        }
        if !state.agent_active[agent] {
            return Err(BrnesError::Logic(format!(
                "agent {agent} already reached the goal"
            )));
        }
        let here = state.agent_pos[agent];
        let mut out = StepOutcome {
            next_pos: here,
            reward: 0.0,
            reached_goal: false,
            hit_wall: false,
            hit_obstacle: false,
            collected_freeway: false,
        };
        match cfg.target(here, action) {
            None => out.hit_wall = true,
            Some(next) => {
                out.next_pos = next;
                out.hit_obstacle = state.obstacle_pos.contains(&next);
                if state.freeway_pos == Some(next) && !state.freeway_collected[agent] {
                    out.collected_freeway = true;
                    state.freeway_collected[agent] = true;
                }
                if next == cfg.goal {
                    out.reached_goal = true;
                    state.agent_active[agent] = false;
                }
            }
        }
        state.agent_pos[agent] = out.next_pos;
        out.reward = out.reward_from_flags(&cfg.rewards);
        Ok(out)
    }

    /// Advances the episode clock by one environment tick.
    pub fn tick(&self, state: &mut EnvState) {
        state.step_index += 1;
    }

    pub fn episode_done(&self, state: &EnvState) -> bool {
        state.all_inactive() || state.step_index >= self.config.step_cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn world(h: usize, w: usize, agents: usize, obstacles: usize) -> GridWorld {
        GridWorld::new(GridConfig::new(h, w, agents, obstacles)).unwrap()
    }

    fn blank_state(agents: &[Cell]) -> EnvState {
        EnvState {
            agent_pos: agents.to_vec(),
            agent_active: vec![true; agents.len()],
            obstacle_pos: vec![],
            freeway_pos: None,
            freeway_collected: vec![false; agents.len()],
            step_index: 0,
        }
    }

    #[test]
    fn reset_small_scale_places_seven_distinct_non_goal_cells() {
        let w = world(5, 5, 5, 1);
        let s = w.reset(&mut seeded(1));
        let mut occupied: Vec<Cell> = s.agent_pos.clone();
        occupied.extend(&s.obstacle_pos);
        occupied.extend(s.freeway_pos);
        assert_eq!(occupied.len(), 7);
        let distinct: HashSet<_> = occupied.iter().collect();
        assert_eq!(distinct.len(), 7);
        assert!(!occupied.contains(&w.config().goal));
        assert_eq!(s.step_index, 0);
        assert!(s.agent_active.iter().all(|a| *a));
        assert!(s.freeway_collected.iter().all(|c| !c));
    }

    #[test]
    fn reset_is_deterministic_under_seed() {
        let w = world(10, 10, 10, 3);
        assert_eq!(w.reset(&mut seeded(9)), w.reset(&mut seeded(9)));
    }

    #[test]
    fn overcrowded_grid_is_rejected() {
        let err = GridWorld::new(GridConfig::new(2, 2, 4, 1)).unwrap_err();
        assert!(matches!(err, BrnesError::Config(_)));
        // 2 agents + 0 obstacles + freeway + goal = 4 = cells, still too many
        assert!(GridWorld::new(GridConfig::new(2, 2, 2, 0)).is_err());
        assert!(GridWorld::new(GridConfig::new(2, 2, 1, 0)).is_ok());
    }

    #[test]
    fn bad_rewards_are_rejected() {
        let mut cfg = GridConfig::new(5, 5, 2, 1);
        cfg.rewards.phi_freeway = 20.0;
        assert!(GridWorld::new(cfg.clone()).is_err());
        cfg.rewards = RewardTable {
            phi_wall: 0.5,
            ..RewardTable::default()
        };
        assert!(GridWorld::new(cfg).is_err());
    }

    #[test]
    fn no_obstacles_means_move_is_a_no_op() {
        let w = world(5, 5, 2, 0);
        let mut s = w.reset(&mut seeded(3));
        let before = s.clone();
        w.move_obstacles(&mut s, &mut seeded(4));
        assert_eq!(s, before);
    }

    #[test]
    fn obstacle_relocation_is_uniform_over_non_goal_cells() {
        let w = world(10, 10, 1, 1);
        let mut s = w.reset(&mut seeded(5));
        let mut rng = seeded(6);
        let mut counts = vec![0usize; 100];
        let trials = 99_000;
        for _ in 0..trials {
            w.move_obstacles(&mut s, &mut rng);
            counts[w.config().state_id(s.obstacle_pos[0])] += 1;
        }
        assert_eq!(counts[99], 0);
        // expected 1000 per cell, sd ~31.5
        for (i, c) in counts.iter().enumerate().take(99) {
            assert!((*c as f64 - 1000.0).abs() < 160.0, "cell {i}: {c}");
        }
    }

    #[test]
    fn obstacle_trajectory_is_reproducible() {
        let w = world(10, 10, 2, 3);
        let run = || {
            let mut rng = seeded(11);
            let mut s = w.reset(&mut rng);
            (0..20)
                .map(|_| {
                    w.move_obstacles(&mut s, &mut rng);
                    s.obstacle_pos.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn wall_bump_keeps_agent_in_place() {
        let w = world(5, 5, 1, 0);
        let mut s = blank_state(&[Cell::new(0, 0)]);
        let out = w.step(&mut s, 0, Action::Left).unwrap();
        assert_eq!(out.next_pos, Cell::new(0, 0));
        assert!(out.hit_wall);
        assert_eq!(out.reward, -0.50);
    }

    #[test]
    fn entering_goal_pays_and_deactivates() {
        let w = world(5, 5, 1, 0);
        let mut s = blank_state(&[Cell::new(3, 4)]);
        let out = w.step(&mut s, 0, Action::Right).unwrap();
        assert_eq!(out.reward, 10.0);
        assert!(out.reached_goal);
        assert!(!s.agent_active[0]);
        assert_eq!(s.agent_pos[0], w.config().goal);
        assert!(w.episode_done(&s));
        assert!(matches!(
            w.step(&mut s, 0, Action::Left),
            Err(BrnesError::Logic(_))
        ));
    }

    #[test]
    fn freeway_pays_once_per_episode() {
        let w = world(5, 5, 1, 0);
        let mut s = blank_state(&[Cell::new(1, 1)]);
        s.freeway_pos = Some(Cell::new(2, 1));
        let first = w.step(&mut s, 0, Action::Right).unwrap();
        assert_eq!(first.reward, 0.50);
        assert!(first.collected_freeway);
        w.step(&mut s, 0, Action::Left).unwrap();
        let again = w.step(&mut s, 0, Action::Right).unwrap();
        assert_eq!(again.reward, 0.0);
        assert!(!again.collected_freeway);
    }

    #[test]
    fn obstacle_is_a_hazard_not_a_barrier() {
        let w = world(5, 5, 1, 1);
        let mut s = blank_state(&[Cell::new(1, 1)]);
        s.obstacle_pos = vec![Cell::new(1, 2)];
        let out = w.step(&mut s, 0, Action::Down).unwrap();
        assert_eq!(out.reward, -1.50);
        assert!(out.hit_obstacle);
        assert_eq!(s.agent_pos[0], Cell::new(1, 2));
    }

    #[test]
    fn obstacle_on_freeway_combines_components() {
        let w = world(5, 5, 1, 1);
        let mut s = blank_state(&[Cell::new(1, 1)]);
        s.obstacle_pos = vec![Cell::new(2, 1)];
        s.freeway_pos = Some(Cell::new(2, 1));
        let out = w.step(&mut s, 0, Action::Right).unwrap();
        assert!((out.reward - (-1.0)).abs() < 1e-12);
        assert!(out.hit_obstacle && out.collected_freeway);
    }

    #[test]
    fn episode_done_rules() {
        let w = world(10, 10, 5, 3);
        let mut s = w.reset(&mut seeded(2));
        s.step_index = 3;
        assert!(!w.episode_done(&s));
        s.step_index = 10_000;
        assert!(w.episode_done(&s));
        s.step_index = 0;
        s.agent_active.iter_mut().for_each(|a| *a = false);
        assert!(w.episode_done(&s));
        assert_eq!(StepCapRule::LongSide.cap(10, 10), 1000);
    }

    proptest! {
        #[test]
        fn steps_stay_in_grid_and_rewards_decompose(seed in any::<u64>(), moves in prop::collection::vec(0usize..4, 1..200)) {
            let w = world(6, 7, 3, 2);
            let mut rng = seeded(seed);
            let mut s = w.reset(&mut rng);
            let mut freeway_hits = [0; 3];
            for (i, m) in moves.iter().enumerate() {
                w.move_obstacles(&mut s, &mut rng);
                let agent = i % 3;
                if !s.agent_active[agent] {
                    continue;
                }
                let out = w.step(&mut s, agent, Action::ALL[*m]).unwrap();
                prop_assert!(w.config().contains(out.next_pos));
                prop_assert_eq!(out.reward, out.reward_from_flags(&w.config().rewards));
                if out.collected_freeway {
                    freeway_hits[agent] += 1;
                }
                if !s.agent_active[agent] {
                    prop_assert_eq!(s.agent_pos[agent], w.config().goal);
                }
            }
            prop_assert!(freeway_hits.iter().all(|h| *h <= 1));
        }
    }
}
