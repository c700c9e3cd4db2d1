//! The episode loop tying environment, learners, protocol and adversaries
//! together.

use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;

use super::metrics::{AdviceLogRecord, HeatmapRecord, InferenceRecord, MetricsRecord};
use super::scenario::{AttackKind, InferenceTargets, ScenarioConfig};
use crate::adversary::{attack_success_rate, attacker_count, InferenceAttackState, SuccessRate};
use crate::agent::{q_update, QTable};
use crate::env::{EnvState, GridWorld};
use crate::error::Result;
use crate::protocol::{harvest, ExchangeRngs, Participant, ProtocolConfig, Role, WorldView};
use crate::rng::{stream, SimRng, Stream};

/// Everything an inference attacker accumulates over a run.
#[derive(Debug, Clone)]
pub struct InferenceAttacker {
    pub attacker: usize,
    pub targets: Vec<InferenceAttackState>,
}

impl InferenceAttacker {
    pub fn queries(&self) -> u64 {
        self.targets.iter().map(|t| t.queries()).sum()
    }

    pub fn success(&self, agents: &[Participant]) -> SuccessRate {
        let rates: Vec<SuccessRate> = self
            .targets
            .iter()
            .map(|t| attack_success_rate(t, &agents[t.target_advisor].q))
            .collect();
        SuccessRate::pooled(&rates)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub roles: Vec<Role>,
    pub metrics: Vec<MetricsRecord>,
    pub heatmap: Vec<HeatmapRecord>,
    pub inference: Vec<InferenceRecord>,
    pub advice_log: Vec<AdviceLogRecord>,
    pub q_tables: Vec<QTable>,
}

impl RunOutput {
    pub fn total_steps(&self) -> u64 {
        self.heatmap.iter().map(|h| h.visit_count).sum()
    }
}

/// Assigns attacker roles as a pure function of the seed, fraction and
/// population size.
pub fn assign_roles(cfg: &ScenarioConfig) -> Vec<Role> {
    let n = cfg.grid().n_agents;
    let mut roles = vec![Role::Honest; n];
    let role = match cfg.attacker_kind {
        AttackKind::None => return roles,
        AttackKind::Byzantine => Role::Byzantine,
        AttackKind::Inference => Role::Inference,
    };
    let k = attacker_count(cfg.attacker_fraction, n);
    let mut rng = stream(cfg.master_seed, Stream::RoleAssignment);
    for i in sample(&mut rng, n, k) {
        roles[i] = role;
    }
    roles
}

/// A resumable simulation, one episode at a time.
pub struct Simulation {
    cfg: ScenarioConfig,
    world: GridWorld,
    protocol: ProtocolConfig,
    agents: Vec<Participant>,
    attackers: Vec<InferenceAttacker>,
    env_rng: SimRng,
    rngs: ExchangeRngs<SimRng>,
    heat: Vec<u64>,
    episode: usize,
    started: Instant,
    metrics: Vec<MetricsRecord>,
    inference: Vec<InferenceRecord>,
    advice_log: Vec<AdviceLogRecord>,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let world = GridWorld::new(cfg.grid())?;
        let protocol = cfg.protocol()?;
        let n_states = world.config().n_cells();
        let roles = assign_roles(&cfg);
        let agents: Vec<Participant> = roles
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Participant::new(
                    i,
                    *r,
                    n_states,
                    cfg.budgets.advisee_total,
                    cfg.budgets.advisor_total,
                )
            })
            .collect();

        let seed = cfg.master_seed;
        let mut adversary = stream(seed, Stream::Adversary);
        let honest: Vec<usize> = agents
            .iter()
            .filter(|a| a.role == Role::Honest)
            .map(|a| a.id)
            .collect();
        let attackers = agents
            .iter()
            .filter(|a| a.role == Role::Inference)
            .map(|a| {
                let targets = match cfg.options.inference_targets {
                    InferenceTargets::AllAdvisors => honest.clone(),
                    InferenceTargets::Single if honest.is_empty() => vec![],
                    InferenceTargets::Single => {
                        vec![honest[adversary.random_range(0..honest.len())]]
                    }
                };
                InferenceAttacker {
                    attacker: a.id,
                    targets: targets
                        .into_iter()
                        .map(|t| InferenceAttackState::new(t, n_states))
                        .collect(),
                }
            })
            .collect();

        Ok(Self {
            env_rng: stream(seed, Stream::Environment),
            rngs: ExchangeRngs {
                explore: stream(seed, Stream::Exploration),
                perturb: stream(seed, Stream::Perturbation),
                adversary,
                gate: stream(seed, Stream::Gate),
            },
            heat: vec![0; n_states],
            episode: 0,
            started: Instant::now(),
            metrics: Vec::with_capacity(cfg.episodes),
            inference: Vec::new(),
            advice_log: Vec::new(),
            cfg,
            world,
            protocol,
            agents,
            attackers,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn agents(&self) -> &[Participant] {
        &self.agents
    }

    pub fn attackers(&self) -> &[InferenceAttacker] {
        &self.attackers
    }

    pub fn episodes_run(&self) -> usize {
        self.episode
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.cfg.episodes
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    /// Plays one full episode and returns its record.
    pub fn run_episode(&mut self) -> Result<MetricsRecord> {
        let grid = self.world.config().clone();
        let n = grid.n_agents;
        let mut state: EnvState = self.world.reset(&mut self.env_rng);
        let mut steps = vec![0usize; n];
        let mut rewards = vec![0.0f64; n];
        let mut reached = vec![false; n];
        let (mut dq_sum, mut dq_n) = (0.0f64, 0u64);
        let (mut requests, mut responses) = (0u64, 0u64);
        let log_advice = self.cfg.options.log_advice;

        while !self.world.episode_done(&state) {
            self.world.move_obstacles(&mut state, &mut self.env_rng);
            for i in 0..n {
                if !state.agent_active[i] {
                    continue;
                }
                let view = WorldView {
                    grid: &grid,
                    positions: &state.agent_pos,
                    active: &state.agent_active,
                };
                let h = harvest(
                    i,
                    &mut self.agents,
                    view,
                    &self.cfg.params,
                    &self.protocol,
                    &mut self.rngs,
                )?;
                if h.requested {
                    requests += 1;
                }
                for reply in &h.replies {
                    let Some(v) = reply.response.vector() else {
                        continue;
                    };
                    responses += 1;
                    if self.agents[i].role == Role::Inference {
                        for attacker in self.attackers.iter_mut().filter(|a| a.attacker == i) {
                            for t in attacker
                                .targets
                                .iter_mut()
                                .filter(|t| t.target_advisor == reply.advisor)
                            {
                                t.infer_step(v, h.state);
                            }
                        }
                    }
                }
                if log_advice {
                    self.advice_log
                        .extend(h.replies.iter().map(|r| AdviceLogRecord {
                            episode: self.episode,
                            step: state.step_index,
                            advisee: i,
                            advisor: r.advisor,
                            state: h.state,
                            gave_advice: r.response.vector().is_some(),
                            perturbed: r.perturbed,
                        }));
                }

                let outcome = self.world.step(&mut state, i, h.action)?;
                let next = grid.state_id(outcome.next_pos);
                let agent = &mut self.agents[i];
                let after = q_update(
                    &mut agent.q,
                    h.state,
                    h.action,
                    outcome.reward,
                    next,
                    &self.cfg.params,
                )?;
                agent.ledger.record_visit(h.state);

                dq_sum += after - h.q_before[h.action.index()];
                dq_n += 1;
                self.heat[h.state] += 1;
                steps[i] += 1;
                rewards[i] += outcome.reward;
                reached[i] |= outcome.reached_goal;
            }
            self.world.tick(&mut state);
        }

        let sg = (0..n)
            .map(|i| {
                if reached[i] {
                    steps[i] as f64
                } else {
                    grid.step_cap as f64
                }
            })
            .sum::<f64>()
            / n as f64;
        let record = MetricsRecord {
            episode: self.episode,
            sg,
            reward: rewards.iter().sum::<f64>() / n as f64,
            delta_q_mean: if dq_n == 0 { 0.0 } else { dq_sum / dq_n as f64 },
            tg_cumulative: self.started.elapsed().as_secs_f64(),
            advice_requests: requests,
            advice_responses: responses,
        };
        for a in &self.attackers {
            let s = a.success(&self.agents);
            self.inference.push(InferenceRecord {
                episode: self.episode,
                attacker_id: a.attacker,
                queries_issued: a.queries(),
                qualifying_states: s.qualifying,
                success_rate_pct: s.pct,
            });
        }
        self.metrics.push(record.clone());
        self.episode += 1;
        Ok(record)
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn heatmap(&self) -> Vec<HeatmapRecord> {
        let grid = self.world.config();
        self.heat
            .iter()
            .enumerate()
            .map(|(s, c)| {
                let cell = grid.cell_of(s);
                HeatmapRecord {
                    x: cell.x,
                    y: cell.y,
                    visit_count: *c,
                }
            })
            .collect()
    }

    pub fn into_output(self) -> RunOutput {
        let heatmap = self.heatmap();
        RunOutput {
            roles: self.agents.iter().map(|a| a.role).collect(),
            q_tables: self.agents.into_iter().map(|a| a.q).collect(),
            config: self.cfg,
            metrics: self.metrics,
            heatmap,
            inference: self.inference,
            advice_log: self.advice_log,
        }
    }
}

/// Runs every configured episode. Deterministic given the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run_to_end()?;
    Ok(sim.into_output())
}
