//! Scenario execution: builds a world from a parsed scenario, runs it to
//! the horizon, audits invariants, and renders the deterministic
//! artifacts (event log, chain exports, status reports).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chainfile::export_chain;
use crate::ledger::Chain;
use crate::mission::{
    payload_for_phase, ConsortiumConfig, MissionLedger, PhaseRecord,
};
use crate::scenario::{
    NodeKindSpec, NonceArg, Scenario, ScriptOp, ScriptStep,
};
use crate::sim::{
    ChainSelector, MissionAction, NodeKind, NonceSpec, RoleFlags, SimError, SimEvent, World,
    WorldConfig, ZoneFlow,
};
use crate::debris::DebrisObject;
use crate::tdrs::{FollowerState, ImageQuery};
use crate::tokens::{token_transaction, SpaceToken, TokenId};
use crate::types::{KinematicState, NodeId};
use crate::zones::{zone_status, JoinRules};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunnerError {
    #[error("line {line}: {what}")]
    Build { line: usize, what: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn build_err(line: usize, what: impl Into<String>) -> RunnerError {
    RunnerError::Build {
        line,
        what: what.into(),
    }
}

/// Everything a run produces, all deterministic functions of
/// (scenario, seed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub event_log: String,
    /// (artifact name, export text) pairs in fixed order.
    pub chains: Vec<(String, String)>,
    /// (artifact name, report text) pairs in fixed order.
    pub statuses: Vec<(String, String)>,
    pub violations: Vec<String>,
}

impl RunArtifacts {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            0
        } else {
            1
        }
    }
}

fn default_satellite_state(id: NodeId) -> KinematicState {
    // Spread satellites without a configured state deterministically.
    KinematicState::new([7000.0, id.0 as f64 * 25.0, 0.0], [0.0, 7.5, 0.0])
}

/// Builds the world described by a scenario.
pub fn build_world(scenario: &Scenario, seed_override: Option<u64>) -> Result<World, RunnerError> {
    let mut links = crate::link::LinkModel::default();
    for (class, ticks) in &scenario.links {
        links.set_latency(*class, *ticks);
    }
    links.drop_probability = scenario.general.drop_probability;

    let cfg = WorldConfig {
        seed: seed_override.unwrap_or(scenario.general.seed),
        horizon: scenario.general.horizon,
        difficulty: scenario.general.difficulty,
        capacity: scenario.general.capacity,
        mine_interval: scenario.general.mine_interval,
        capture_ticks: scenario.general.capture_ticks,
        links,
    };
    let mut world = World::new(cfg)?;

    for spec in &scenario.nodes {
        let kind = match spec.kind {
            NodeKindSpec::Satellite => NodeKind::Satellite {
                orbit: spec.orbit.expect("validated by Scenario::parse"),
                state: spec.state.unwrap_or_else(|| default_satellite_state(spec.id)),
            },
            NodeKindSpec::Ground => NodeKind::GroundStation,
            NodeKindSpec::User => NodeKind::UserTerminal,
            NodeKindSpec::Tdrs => NodeKind::Tdrs,
        };
        let roles = RoleFlags {
            full_node: spec.full,
            miner: spec.miner,
            reader_only: spec.reader,
        };
        world
            .attach_node(spec.id, kind, roles)
            .map_err(|e| build_err(spec.line, e.to_string()))?;
    }

    for spec in &scenario.zones {
        let rules = JoinRules {
            authorized: spec.roster.iter().copied().collect(),
            scripted_votes: BTreeMap::new(),
        };
        world
            .create_zone(
                spec.id,
                spec.master,
                spec.orbit,
                &spec.members,
                rules,
                spec.difficulty,
            )
            .map_err(|e| build_err(spec.line, e.to_string()))?;
    }

    if let Some(spec) = &scenario.mission {
        let config = ConsortiumConfig {
            members: spec.members.iter().copied().collect(),
            miners: spec.miners.iter().copied().collect(),
            budget: spec.budget,
            fractions: spec.fractions,
            beneficiary: spec.beneficiary,
        };
        let ledger =
            MissionLedger::new(config, 0).map_err(|e| build_err(spec.line, e.to_string()))?;
        world.init_mission(ledger);
    }

    for spec in &scenario.followers {
        world
            .add_follower(
                spec.tdrs,
                spec.gs,
                FollowerState {
                    satellite: spec.sat,
                    track: spec.track,
                    rate_deg_per_tick: spec.rate_deg_per_tick,
                    busy_until: 0,
                },
            )
            .map_err(|e| build_err(spec.line, e.to_string()))?;
    }

    for spec in &scenario.debris {
        let debris = DebrisObject {
            debris_id: spec.debris_id,
            state: spec.state,
            radius_km: spec.radius_km,
        };
        debris
            .validate()
            .map_err(|e| build_err(spec.line, e.to_string()))?;
        world
            .schedule(
                spec.tick,
                SimEvent::DebrisSpawn {
                    zone: spec.zone,
                    debris,
                    threshold_km: spec.threshold_km,
                    base_delta_km_s: spec.base_delta_km_s,
                },
            )
            .map_err(|e| build_err(spec.line, e.to_string()))?;
    }

    for spec in &scenario.queries {
        let query = ImageQuery {
            query_id: spec.query_id,
            requester: spec.user,
            locations: spec.locations.clone(),
            timeframes: spec.timeframes.clone(),
            fee: spec.fee,
        };
        world
            .schedule(spec.tick, SimEvent::QueryArrival {
                via: spec.via,
                query,
            })
            .map_err(|e| build_err(spec.line, e.to_string()))?;
    }

    for step in &scenario.script {
        schedule_script_step(&mut world, step)?;
    }

    Ok(world)
}

fn schedule_script_step(world: &mut World, step: &ScriptStep) -> Result<(), RunnerError> {
    let event = match &step.op {
        ScriptOp::Mfa {
            zone,
            initiator,
            responder,
            nonce,
        } => SimEvent::FlowBegin {
            zone: *zone,
            flow: ZoneFlow::Mfa {
                initiator: *initiator,
                responder: *responder,
                nonce: match nonce {
                    NonceArg::Correct => NonceSpec::Correct,
                    NonceArg::Stale => NonceSpec::Stale,
                    NonceArg::Literal(n) => NonceSpec::Literal(*n),
                },
            },
        },
        ScriptOp::Join {
            zone,
            candidate,
            orbit,
            votes,
        } => SimEvent::FlowBegin {
            zone: *zone,
            flow: ZoneFlow::Join {
                candidate: *candidate,
                orbit: *orbit,
                votes: votes.clone(),
            },
        },
        ScriptOp::SubmitPhase {
            phase,
            submitter,
            fields,
        } => {
            let payload = payload_for_phase(*phase, fields)
                .map_err(|e| build_err(step.line, e.to_string()))?;
            SimEvent::MissionAction {
                action: MissionAction::SubmitPhase(PhaseRecord {
                    phase: *phase,
                    submitter: *submitter,
                    payload,
                }),
            }
        }
        ScriptOp::ReleaseFunds { phase } => SimEvent::MissionAction {
            action: MissionAction::ReleaseFunds(*phase),
        },
        ScriptOp::Tx {
            issuer,
            via,
            fee,
            decision,
        } => {
            let token = SpaceToken::Decision {
                text: decision.clone(),
                source_contract: 0,
            };
            let tx = token_transaction(&token, *issuer, *fee, step.tick)
                .map_err(|e| build_err(step.line, e.to_string()))?;
            return world
                .schedule(step.tick, SimEvent::Deliver {
                    from: *issuer,
                    to: *via,
                    msg: crate::sim::Message::Tx(tx),
                })
                .map_err(|e| build_err(step.line, e.to_string()));
        }
        ScriptOp::Read {
            reader,
            via,
            block,
            token,
        } => {
            let selector = if let Some(index) = block {
                ChainSelector::BlockIndex(*index)
            } else {
                let raw = token.as_deref().expect("validated by Scenario::parse");
                let token_id = TokenId::from_hex(raw)
                    .ok_or_else(|| build_err(step.line, format!("bad token id `{raw}`")))?;
                ChainSelector::Token(token_id)
            };
            SimEvent::ReadRequest {
                reader: *reader,
                via: *via,
                selector,
            }
        }
    };
    world
        .schedule(step.tick, event)
        .map_err(|e| build_err(step.line, e.to_string()))
}

/// The converged main-chain replica to export: the fork-choice winner
/// across full nodes (at quiescence they are identical).
fn main_chain(world: &World) -> Option<Chain> {
    let mut winner: Option<&Chain> = None;
    for node in world.nodes() {
        if let Some(chain) = &node.replica {
            winner = Some(match winner {
                None => chain,
                Some(current) => crate::ledger::resolve_fork(current, chain).unwrap_or(current),
            });
        }
    }
    winner.cloned()
}

/// Runs a parsed scenario to its horizon and collects the artifacts.
pub fn run_scenario(
    scenario: &Scenario,
    seed_override: Option<u64>,
) -> Result<RunArtifacts, RunnerError> {
    let mut world = build_world(scenario, seed_override)?;
    log::debug!(
        "world built: {} nodes, {} zones, horizon {}",
        scenario.nodes.len(),
        scenario.zones.len(),
        world.config().horizon
    );
    world.run();
    world.finalize();
    for violation in world.violations() {
        log::warn!("invariant violation: {violation}");
    }

    let mut chains = Vec::new();
    if let Some(chain) = main_chain(&world) {
        chains.push(("main".to_string(), export_chain(&chain)));
    }
    for zone_id in world.zone_ids() {
        let zone = world.zone(zone_id).expect("listed id");
        chains.push((format!("zone_{zone_id}"), export_chain(&zone.chain)));
    }
    if let Some(mission) = world.mission() {
        chains.push(("mission".to_string(), export_chain(&mission.chain)));
    }

    let mut statuses = Vec::new();
    let mut zone_report = String::new();
    for zone_id in world.zone_ids() {
        let zone = world.zone(zone_id).expect("listed id");
        zone_report.push_str(&zone_status(zone).to_string());
        zone_report.push('\n');
    }
    if !zone_report.is_empty() {
        statuses.push(("zones".to_string(), zone_report));
    }
    if let Some(mission) = world.mission() {
        statuses.push(("mission".to_string(), format!("{}\n", mission.status())));
    }

    Ok(RunArtifacts {
        event_log: world.log.render(),
        chains,
        statuses,
        violations: world.violations().to_vec(),
    })
}
