//! The experience-sharing protocol: confidence gates, neighbour zones,
//! advice aggregation and LDP perturbation of released Q-vectors.

pub mod aggregate;
pub mod confidence;
pub mod exchange;
pub mod ldp;
pub mod zone;

pub use aggregate::{best_advice, weighted_aggregate};
pub use confidence::{egc, ehc, seeks_advice};
pub use exchange::{
    advise, collect_advice, harvest, AdviceRequest, AdviceResponse, ExchangeRngs, ExhaustedBudget,
    GateMode, Harvest, Participant, ProtocolConfig, ReceivedAdvice, Role, WorldView, ZoneMode,
};
pub use ldp::{grr_perturb, PrivacyParams};
pub use zone::{neighbor_zone, zone_radius, NeighborZone};
