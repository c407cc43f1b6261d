//! Debris sensing, conjunction assessment, maneuver planning, and the
//! ledger commit/apply cycle that updates member satellite states.
//!
//! Motion is linearized: every state is a straight-line position/velocity
//! pair, which gives the conjunction problem a closed form. For relative
//! position r = sat − debris and relative velocity v = sat_vel −
//! debris_vel, the time of closest approach is t* = max(0, −(r·v)/(v·v))
//! (t* = 0 when v = 0) and the miss distance is |r + v·t*|.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ledger::{Block, Transaction};
use crate::tokens::{token_transaction, AssetKind, SpaceToken, TokenError};
use crate::types::{
    vec_add, vec_dot, vec_norm, vec_scale, vec_sub, KinematicState, NodeId,
};
use crate::zones::{VirtualZone, ZoneError};

/// Default cross-track maneuver magnitude in km/s.
pub const BASE_MANEUVER_KM_S: f64 = 0.01;
/// The planner doubles the maneuver magnitude at most this many times.
pub const MAX_DOUBLINGS: u32 = 4;
/// Repeated reports of one debris id within this many ticks are duplicates.
pub const REPORT_DEDUP_WINDOW: u64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DebrisError {
    #[error("sensor {0} is not a zone member")]
    NotMember(NodeId),
    #[error("invalid debris object: {0}")]
    InvalidDebris(&'static str),
    #[error(
        "maneuver for satellite {satellite} cannot reach {threshold_km} km within {max_doublings} doublings"
    )]
    Unavoidable {
        satellite: NodeId,
        threshold_km: f64,
        max_doublings: u32,
    },
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// A tracked debris object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebrisObject {
    pub debris_id: u64,
    pub state: KinematicState,
    pub radius_km: f64,
}

impl DebrisObject {
    pub fn validate(&self) -> Result<(), DebrisError> {
        if !self.state.is_finite() {
            return Err(DebrisError::InvalidDebris("non-finite kinematic state"));
        }
        if !self.radius_km.is_finite() || self.radius_km <= 0.0 {
            return Err(DebrisError::InvalidDebris("radius must be positive"));
        }
        Ok(())
    }
}

/// Closest-approach solution under straight-line relative motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    /// Seconds from now; clamped at zero for receding geometry.
    pub time_s: f64,
    /// Miss distance in km at that time.
    pub distance_km: f64,
}

/// Closed-form conjunction oracle for two linearized states.
pub fn closest_approach(sat: &KinematicState, debris: &KinematicState) -> ClosestApproach {
    let r = vec_sub(sat.position_km, debris.position_km);
    let v = vec_sub(sat.velocity_km_s, debris.velocity_km_s);
    let v_sq = vec_dot(v, v);
    let time_s = if v_sq == 0.0 {
        0.0
    } else {
        (-(vec_dot(r, v)) / v_sq).max(0.0)
    };
    let miss = vec_add(r, vec_scale(v, time_s));
    ClosestApproach {
        time_s,
        distance_km: vec_norm(miss),
    }
}

/// Velocity corrections per zone member. Members already clear of the
/// threshold carry a zero delta.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverPlan {
    pub deltas: BTreeMap<NodeId, [f64; 3]>,
    pub threshold_km: f64,
    pub planned_at: u64,
}

impl ManeuverPlan {
    pub fn nonzero_count(&self) -> usize {
        self.deltas.values().filter(|dv| **dv != [0.0; 3]).count()
    }

    pub fn to_token(&self) -> SpaceToken {
        SpaceToken::Maneuver {
            deltas: self.deltas.iter().map(|(n, dv)| (*n, *dv)).collect(),
        }
    }
}

/// Escape direction for a threatened satellite: the component of the miss
/// vector orthogonal to the relative velocity, or local +z when that
/// component vanishes (exact collision course, or co-located states).
fn escape_direction(sat: &KinematicState, debris: &KinematicState, time_s: f64) -> [f64; 3] {
    let r = vec_sub(sat.position_km, debris.position_km);
    let v = vec_sub(sat.velocity_km_s, debris.velocity_km_s);
    let miss = vec_add(r, vec_scale(v, time_s));
    let v_sq = vec_dot(v, v);
    let cross_track = if v_sq == 0.0 {
        miss
    } else {
        vec_sub(miss, vec_scale(v, vec_dot(miss, v) / v_sq))
    };
    let norm = vec_norm(cross_track);
    if norm < 1e-12 {
        [0.0, 0.0, 1.0]
    } else {
        vec_scale(cross_track, 1.0 / norm)
    }
}

/// Plans per-member velocity deltas so that every member's predicted
/// closest approach to the debris is at least `threshold_km`. The delta
/// magnitude starts at `base_delta_km_s` and doubles up to
/// [`MAX_DOUBLINGS`] times per member until the re-evaluated closest
/// approach clears the threshold.
pub fn plan_maneuvers(
    debris: &KinematicState,
    members: &BTreeMap<NodeId, KinematicState>,
    threshold_km: f64,
    base_delta_km_s: f64,
    planned_at: u64,
) -> Result<ManeuverPlan, DebrisError> {
    let mut deltas = BTreeMap::new();
    for (sat, state) in members {
        let approach = closest_approach(state, debris);
        if approach.distance_km >= threshold_km {
            deltas.insert(*sat, [0.0; 3]);
            continue;
        }
        let direction = escape_direction(state, debris, approach.time_s);
        let mut chosen = None;
        for doubling in 0..=MAX_DOUBLINGS {
            let magnitude = base_delta_km_s * f64::from(1u32 << doubling);
            let delta = vec_scale(direction, magnitude);
            let candidate = KinematicState::new(
                state.position_km,
                vec_add(state.velocity_km_s, delta),
            );
            if closest_approach(&candidate, debris).distance_km >= threshold_km {
                chosen = Some(delta);
                break;
            }
        }
        match chosen {
            Some(delta) => {
                deltas.insert(*sat, delta);
            }
            None => {
                return Err(DebrisError::Unavoidable {
                    satellite: *sat,
                    threshold_km,
                    max_doublings: MAX_DOUBLINGS,
                })
            }
        }
    }
    Ok(ManeuverPlan {
        deltas,
        threshold_km,
        planned_at,
    })
}

/// Wraps sensed debris data as an orbital-asset transaction addressed to
/// the zone master. Only zone members may report.
pub fn report_debris(
    sensor: NodeId,
    debris: &DebrisObject,
    zone: &VirtualZone,
    timestamp: u64,
) -> Result<Transaction, DebrisError> {
    debris.validate()?;
    if !zone.is_member(sensor) {
        return Err(DebrisError::NotMember(sensor));
    }
    let token = SpaceToken::OrbitalAsset {
        kind: AssetKind::Debris,
        asset_id: debris.debris_id,
        owner: sensor,
        state: debris.state,
    };
    Ok(token_transaction(&token, sensor, 0, timestamp)?)
}

/// Master-side duplicate suppression for repeated reports of one debris
/// object within the dedup window.
#[derive(Debug, Clone, Default)]
pub struct ReportDeduper {
    last_seen: BTreeMap<u64, u64>,
}

impl ReportDeduper {
    pub fn new() -> ReportDeduper {
        ReportDeduper::default()
    }

    /// Returns true when the report is fresh and should trigger planning.
    pub fn observe(&mut self, debris_id: u64, tick: u64) -> bool {
        match self.last_seen.get(&debris_id) {
            Some(last) if tick.saturating_sub(*last) < REPORT_DEDUP_WINDOW => false,
            _ => {
                self.last_seen.insert(debris_id, tick);
                true
            }
        }
    }
}

/// Mines the plan's maneuver token into the zone chain. Application to
/// member states happens when the block is delivered; see [`apply_plan`].
pub fn commit_plan(
    zone: &mut VirtualZone,
    plan: &ManeuverPlan,
    timestamp: u64,
) -> Result<Block, DebrisError> {
    let tx = token_transaction(&plan.to_token(), zone.master, 0, timestamp)?;
    zone.chain.mempool.insert(tx);
    let mined = zone
        .chain
        .mine_next(zone.difficulty, 1, timestamp)
        .map_err(ZoneError::Ledger)?;
    Ok(mined.block)
}

/// Adds each member's delta to its velocity.
pub fn apply_plan(plan: &ManeuverPlan, states: &mut BTreeMap<NodeId, KinematicState>) {
    for (sat, delta) in &plan.deltas {
        if let Some(state) = states.get_mut(sat) {
            state.velocity_km_s = vec_add(state.velocity_km_s, *delta);
        }
    }
}

/// Commit followed by application: the maneuver token lands on the zone
/// chain, then every member updates its velocity.
pub fn commit_and_apply(
    zone: &mut VirtualZone,
    plan: &ManeuverPlan,
    states: &mut BTreeMap<NodeId, KinematicState>,
    timestamp: u64,
) -> Result<Block, DebrisError> {
    let block = commit_plan(zone, plan, timestamp)?;
    apply_plan(plan, states);
    Ok(block)
}
