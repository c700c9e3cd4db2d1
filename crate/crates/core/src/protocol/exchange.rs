//! Advice exchange between agents: requests, advisor responses, and the
//! advisee-side harvesting step that folds advice into the Q-table before
//! acting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::aggregate::{best_advice, weighted_aggregate};
use super::confidence::{egc, ehc, seeks_advice};
use super::ldp::{grr_perturb, PrivacyParams};
use super::zone::{zone_radius, NeighborZone};
use crate::adversary::{fabricate_advice, ByzantineConfig};
use crate::agent::{select_action, AgentLedger, AgentParams, QTable, QVector};
use crate::env::{Action, Cell, GridConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdviceRequest {
    pub state: usize,
    pub advisee_visits: u64,
    pub advisee_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdviceResponse {
    Advice(QVector),
    NoAdvice,
}

impl AdviceResponse {
    pub fn vector(&self) -> Option<&QVector> {
        match self {
            AdviceResponse::Advice(v) => Some(v),
            AdviceResponse::NoAdvice => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Honest,
    Byzantine,
    /// Behaves like an honest agent but mines the advice it receives.
    Inference,
}

/// Whether confidence values act as hard thresholds or as probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    #[default]
    Deterministic,
    Bernoulli,
}

/// What an advisor with an empty giving budget does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustedBudget {
    #[default]
    Refuse,
    /// Apply the giving-confidence formula as written; at `B = 0` it reaches 1.
    LiteralFormula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneMode {
    Adaptive,
    WholeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub zone: ZoneMode,
    /// Weight on the advisee's own values during aggregation.
    pub weight: f64,
    /// `None` releases raw Q-vectors.
    pub privacy: Option<PrivacyParams>,
    pub gate: GateMode,
    pub exhausted_budget: ExhaustedBudget,
    pub inactive_advisors: bool,
    pub byzantine: ByzantineConfig,
}

#[derive(Debug, Clone)]
pub struct Participant {
    pub id: usize,
    pub role: Role,
    pub q: QTable,
    pub ledger: AgentLedger,
}

impl Participant {
    pub fn new(
        id: usize,
        role: Role,
        n_states: usize,
        advisee_total: u64,
        advisor_total: u64,
    ) -> Self {
        Self {
            id,
            role,
            q: QTable::new(n_states),
            ledger: AgentLedger::new(n_states, advisee_total, advisor_total),
        }
    }

    pub fn seeks_advice(&self) -> bool {
        self.role != Role::Byzantine
    }
}

/// Independent random streams used during one exchange.
pub struct ExchangeRngs<R> {
    pub explore: R,
    pub perturb: R,
    pub adversary: R,
    pub gate: R,
}

/// Honest advisor side: confidence gate, budget, optional perturbation.
pub fn advise<R: Rng + ?Sized>(
    advisor: &mut Participant,
    request: &AdviceRequest,
    cfg: &ProtocolConfig,
    gate_rng: &mut R,
    perturb_rng: &mut R,
) -> AdviceResponse {
    let ledger = &advisor.ledger;
    let p_g = egc(
        ledger.visits(request.state),
        request.advisee_visits,
        ledger.advisor_budget,
        ledger.advisor_budget_total,
    );
    let gives = match cfg.gate {
        GateMode::Deterministic => p_g > 0.0,
        GateMode::Bernoulli => p_g > 0.0 && gate_rng.random::<f64>() < p_g,
    };
    if !gives {
        return AdviceResponse::NoAdvice;
    }
    if !advisor.ledger.spend_advisor() && cfg.exhausted_budget == ExhaustedBudget::Refuse {
        return AdviceResponse::NoAdvice;
    }
    let raw = advisor.q.row(request.state);
    let out = match &cfg.privacy {
        Some(p) => grr_perturb(raw, p, perturb_rng),
        None => *raw,
    };
    AdviceResponse::Advice(out)
}

/// Where each agent stands, as seen by the exchange layer.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub grid: &'a GridConfig,
    pub positions: &'a [Cell],
    pub active: &'a [bool],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedAdvice {
    pub advisor: usize,
    pub response: AdviceResponse,
    pub perturbed: bool,
}

/// Sends `request` to every other eligible agent in `zone`. Returns all
/// replies, refusals included; an empty result means nobody was contacted.
pub fn collect_advice<R: Rng>(
    request: &AdviceRequest,
    zone: &NeighborZone,
    agents: &mut [Participant],
    view: WorldView<'_>,
    cfg: &ProtocolConfig,
    rngs: &mut ExchangeRngs<R>,
) -> Vec<ReceivedAdvice> {
    let advisee_pos = view.positions[request.advisee_id];
    let mut out = Vec::new();
    for advisor in agents.iter_mut() {
        let id = advisor.id;
        if id == request.advisee_id || !zone.contains(view.positions[id]) {
            continue;
        }
        if !view.active[id] && !cfg.inactive_advisors {
            continue;
        }
        let received = match advisor.role {
            Role::Byzantine => ReceivedAdvice {
                advisor: id,
                response: AdviceResponse::Advice(fabricate_advice(
                    advisor.q.row(request.state),
                    advisee_pos,
                    view.grid,
                    &cfg.byzantine,
                    &mut rngs.adversary,
                )),
                perturbed: false,
            },
            Role::Honest | Role::Inference => {
                let response = advise(advisor, request, cfg, &mut rngs.gate, &mut rngs.perturb);
                ReceivedAdvice {
                    advisor: id,
                    perturbed: cfg.privacy.is_some() && response != AdviceResponse::NoAdvice,
                    response,
                }
            }
        };
        out.push(received);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    pub state: usize,
    pub action: Action,
    /// `Q(s, ·)` before any advice was folded in.
    pub q_before: QVector,
    pub requested: bool,
    pub replies: Vec<ReceivedAdvice>,
}

impl Harvest {
    pub fn responses(&self) -> impl Iterator<Item = (usize, &QVector)> {
        self.replies
            .iter()
            .filter_map(|r| r.response.vector().map(|v| (r.advisor, v)))
    }
}

/// Advisee side of one step: decide whether to ask, gather and fold advice
/// into `Q(s, ·)`, then pick the ε-greedy action. The caller executes the
/// action and performs the Q-update.
pub fn harvest<R: Rng>(
    advisee: usize,
    agents: &mut [Participant],
    view: WorldView<'_>,
    params: &AgentParams,
    cfg: &ProtocolConfig,
    rngs: &mut ExchangeRngs<R>,
) -> Result<Harvest> {
    let grid = view.grid;
    let pos = view.positions[advisee];
    let state = grid.state_id(pos);
    let me = &agents[advisee];
    let q_before = *me.q.row(state);
    let visits = me.ledger.visits(state);

    let mut requested = false;
    let mut replies = Vec::new();
    if me.seeks_advice() && me.ledger.advisee_budget > 0 {
        let p_a = ehc(
            visits,
            me.ledger.advisee_budget,
            me.ledger.advisee_budget_total,
            params.tau,
            params.tau_prime,
        );
        let ask = match cfg.gate {
            GateMode::Deterministic => seeks_advice(p_a, params.kappa),
            GateMode::Bernoulli => p_a > 0.0 && rngs.gate.random::<f64>() < p_a,
        };
        if ask {
            let zone = match cfg.zone {
                ZoneMode::Adaptive => NeighborZone::around(
                    pos,
                    zone_radius(grid.height, grid.width, grid.n_agents)?,
                    grid,
                ),
                ZoneMode::WholeGrid => NeighborZone::whole_grid(pos, grid),
            };
            let request = AdviceRequest {
                state,
                advisee_visits: visits,
                advisee_id: advisee,
            };
            replies = collect_advice(&request, &zone, agents, view, cfg, rngs);
            if !replies.is_empty() {
                requested = true;
                agents[advisee].ledger.spend_advisee();
            }
        }
    }

    let me = &mut agents[advisee];
    let advice: Vec<QVector> = replies
        .iter()
        .filter_map(|r| r.response.vector().copied())
        .collect();
    if !advice.is_empty() {
        let xi = best_advice(&advice)?;
        let row = me.q.row_mut(state);
        *row = weighted_aggregate(row, &xi, cfg.weight);
    }
    let action = select_action(me.q.row(state), params.epsilon_explore, &mut rngs.explore);
    Ok(Harvest {
        state,
        action,
        q_before,
        requested,
        replies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, SimRng};

    fn rngs() -> ExchangeRngs<SimRng> {
        ExchangeRngs {
            explore: seeded(1),
            perturb: seeded(2),
            adversary: seeded(3),
            gate: seeded(4),
        }
    }

    fn cfg(privacy: Option<f64>) -> ProtocolConfig {
        ProtocolConfig {
            zone: ZoneMode::Adaptive,
            weight: 0.85,
            privacy: privacy.map(|e| PrivacyParams::new(e).unwrap()),
            gate: GateMode::Deterministic,
            exhausted_budget: ExhaustedBudget::Refuse,
            inactive_advisors: true,
            byzantine: ByzantineConfig::for_goal_reward(0.0, 10.0),
        }
    }

    fn roster(n: usize, grid: &GridConfig) -> Vec<Participant> {
        (0..n)
            .map(|i| Participant::new(i, Role::Honest, grid.n_cells(), 100_000, 10_000))
            .collect()
    }

    fn visit(p: &mut Participant, state: usize, times: u64) {
        for _ in 0..times {
            p.ledger.record_visit(state);
        }
    }

    #[test]
    fn advisor_without_experience_refuses() {
        let grid = GridConfig::new(5, 5, 2, 0);
        let mut agents = roster(2, &grid);
        let req = AdviceRequest {
            state: 3,
            advisee_visits: 0,
            advisee_id: 1,
        };
        let r = advise(
            &mut agents[0],
            &req,
            &cfg(Some(1.0)),
            &mut seeded(0),
            &mut seeded(1),
        );
        assert_eq!(r, AdviceResponse::NoAdvice);
    }

    #[test]
    fn exhausted_advisor_refuses_unless_literal() {
        let grid = GridConfig::new(5, 5, 2, 0);
        let mut agents = roster(2, &grid);
        visit(&mut agents[0], 3, 10);
        agents[0].ledger.advisor_budget = 0;
        let req = AdviceRequest {
            state: 3,
            advisee_visits: 0,
            advisee_id: 1,
        };
        let mut c = cfg(None);
        assert_eq!(
            advise(&mut agents[0], &req, &c, &mut seeded(0), &mut seeded(1)),
            AdviceResponse::NoAdvice
        );
        c.exhausted_budget = ExhaustedBudget::LiteralFormula;
        assert!(
            advise(&mut agents[0], &req, &c, &mut seeded(0), &mut seeded(1))
                .vector()
                .is_some()
        );
        assert_eq!(agents[0].ledger.advisor_budget, 0);
    }

    #[test]
    fn perturbed_advice_stays_within_true_values() {
        let grid = GridConfig::new(5, 5, 2, 0);
        let mut agents = roster(2, &grid);
        visit(&mut agents[0], 3, 10);
        *agents[0].q.row_mut(3) = [0.5, 1.5, -0.5, 2.5];
        let req = AdviceRequest {
            state: 3,
            advisee_visits: 2,
            advisee_id: 1,
        };
        let c = cfg(Some(1.0));
        let (mut g, mut p) = (seeded(0), seeded(1));
        for _ in 0..200 {
            let v = *advise(&mut agents[0], &req, &c, &mut g, &mut p)
                .vector()
                .unwrap();
            assert!(v.iter().all(|x| [0.5, 1.5, -0.5, 2.5].contains(x)));
        }
        assert_eq!(agents[0].ledger.advisor_budget, 10_000 - 200);
    }

    #[test]
    fn lonely_advisee_gets_nothing() {
        let grid = GridConfig::new(10, 10, 2, 0);
        let mut agents = roster(2, &grid);
        let positions = [Cell::new(0, 0), Cell::new(9, 9)];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true, true],
        };
        let zone = NeighborZone::around(positions[0], 2.0, &grid);
        let req = AdviceRequest {
            state: 0,
            advisee_visits: 200,
            advisee_id: 0,
        };
        assert!(collect_advice(&req, &zone, &mut agents, view, &cfg(None), &mut rngs()).is_empty());
    }

    #[test]
    fn three_eligible_neighbours_answer() {
        let grid = GridConfig::new(10, 10, 4, 0);
        let mut agents = roster(4, &grid);
        for a in &mut agents[1..] {
            visit(a, 0, 300);
        }
        let positions = [
            Cell::new(0, 0),
            Cell::new(1, 1),
            Cell::new(2, 0),
            Cell::new(0, 3),
        ];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true; 4],
        };
        let zone = NeighborZone::around(positions[0], 5.0, &grid);
        let req = AdviceRequest {
            state: 0,
            advisee_visits: 200,
            advisee_id: 0,
        };
        let replies = collect_advice(&req, &zone, &mut agents, view, &cfg(None), &mut rngs());
        assert_eq!(replies.len(), 3);
        assert!(replies.iter().all(|r| r.response.vector().is_some()));
    }

    #[test]
    fn plain_q_learning_when_gate_closed() {
        let grid = GridConfig::new(5, 5, 2, 0);
        let mut agents = roster(2, &grid);
        visit(&mut agents[1], 0, 500);
        *agents[1].q.row_mut(0) = [9.0, 0.0, 0.0, 0.0];
        let positions = [Cell::new(0, 0), Cell::new(0, 0)];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true; 2],
        };
        // advisee has 50 visits: below tau
        visit(&mut agents[0], 0, 50);
        let h = harvest(
            0,
            &mut agents,
            view,
            &AgentParams::default(),
            &cfg(None),
            &mut rngs(),
        )
        .unwrap();
        assert!(!h.requested);
        assert_eq!(agents[0].q.row(0), &[0.0; 4]);
        assert_eq!(agents[0].ledger.advisee_budget, 100_000);
    }

    #[test]
    fn zero_responses_leave_table_alone() {
        let grid = GridConfig::new(5, 5, 2, 0);
        let mut agents = roster(2, &grid);
        visit(&mut agents[0], 0, 150);
        visit(&mut agents[1], 0, 20);
        let positions = [Cell::new(0, 0), Cell::new(1, 0)];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true; 2],
        };
        let h = harvest(
            0,
            &mut agents,
            view,
            &AgentParams::default(),
            &cfg(None),
            &mut rngs(),
        )
        .unwrap();
        assert!(h.requested);
        assert_eq!(h.responses().count(), 0);
        assert_eq!(agents[0].q.row(0), &[0.0; 4]);
        assert_eq!(agents[0].ledger.advisee_budget, 99_999);
    }

    #[test]
    fn two_honest_advisors_are_averaged_then_weighted() {
        let grid = GridConfig::new(5, 5, 3, 0);
        let mut agents = roster(3, &grid);
        visit(&mut agents[0], 0, 150);
        *agents[0].q.row_mut(0) = [1.0, 2.0, 0.0, 0.0];
        visit(&mut agents[1], 0, 400);
        *agents[1].q.row_mut(0) = [3.0, 0.0, 1.0, 0.0];
        visit(&mut agents[2], 0, 900);
        *agents[2].q.row_mut(0) = [5.0, 2.0, 0.0, 4.0];
        let positions = [Cell::new(0, 0), Cell::new(1, 1), Cell::new(2, 0)];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true; 3],
        };
        let h = harvest(
            0,
            &mut agents,
            view,
            &AgentParams::default(),
            &cfg(None),
            &mut rngs(),
        )
        .unwrap();
        assert_eq!(h.responses().count(), 2);
        // hand computation: mean = [4, 1, 0.5, 2]; 0.85·own + 0.15·mean
        let expected = [0.85 + 0.6, 1.7 + 0.15, 0.075, 0.3];
        for (got, want) in agents[0].q.row(0).iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(h.q_before, [1.0, 2.0, 0.0, 0.0]);
        assert_eq!(agents[1].ledger.advisor_budget, 9_999);
        assert_eq!(agents[0].ledger.advisee_budget, 99_999);
    }

    #[test]
    fn byzantine_neighbour_always_answers_with_misleading_max() {
        let grid = GridConfig::new(10, 10, 2, 0);
        let mut agents = roster(2, &grid);
        agents[1].role = Role::Byzantine;
        let st = grid.state_id(Cell::new(5, 5));
        visit(&mut agents[0], st, 150);
        let positions = [Cell::new(5, 5), Cell::new(6, 6)];
        let view = WorldView {
            grid: &grid,
            positions: &positions,
            active: &[true; 2],
        };
        let mut r = rngs();
        let zone = NeighborZone::around(positions[0], 3.2, &grid);
        let req = AdviceRequest {
            state: st,
            advisee_visits: 150,
            advisee_id: 0,
        };
        for _ in 0..100 {
            let replies = collect_advice(&req, &zone, &mut agents, view, &cfg(Some(1.0)), &mut r);
            let v = replies[0].response.vector().unwrap();
            let best = crate::agent::unique_argmax(v).unwrap();
            assert!(best == Action::Left.index() || best == Action::Up.index());
            assert!(!replies[0].perturbed);
        }
    }
}
