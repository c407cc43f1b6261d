//! Relay query workflow: image queries entering the ledger, uplink
//! batching to a tracking and data relay satellite, greedy follower
//! reallocation, and downlink feedback tokens.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{ByteReader, ByteWriter};
use crate::tokens::{SpaceToken, TokenError};
use crate::types::{LatLon, NodeId, TickInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TdrsError {
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
    #[error("no followers attached")]
    NoFollowers,
    #[error("query {query} completes at tick {completion}, now is {now}")]
    NotCompleted { query: u64, completion: u64, now: u64 },
    #[error("query {0} is not assigned")]
    NotAssigned(u64),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// An image request from a user terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageQuery {
    pub query_id: u64,
    pub requester: NodeId,
    pub locations: Vec<LatLon>,
    pub timeframes: Vec<TickInterval>,
    pub fee: u64,
}

impl ImageQuery {
    pub fn validate(&self) -> Result<(), TdrsError> {
        if self.locations.is_empty() {
            return Err(TdrsError::InvalidQuery("at least one location required"));
        }
        if self.timeframes.is_empty() {
            return Err(TdrsError::InvalidQuery("at least one timeframe required"));
        }
        if self.locations.iter().any(|l| !l.is_finite()) {
            return Err(TdrsError::InvalidQuery("non-finite location"));
        }
        Ok(())
    }
}

/// A follower satellite as the relay sees it: current ground track, slew
/// rate, and when its current workload ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerState {
    pub satellite: NodeId,
    pub track: LatLon,
    pub rate_deg_per_tick: f64,
    pub busy_until: u64,
}

/// Query-to-follower mapping with estimated capture windows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub assigned: BTreeMap<u64, NodeId>,
    pub start: BTreeMap<u64, u64>,
    pub completion: BTreeMap<u64, u64>,
}

/// Ticks a follower needs to slew from its track to the query's first
/// location, then capture.
pub fn completion_estimate(
    now: u64,
    follower: &FollowerState,
    query: &ImageQuery,
    capture_ticks: u64,
) -> (u64, u64) {
    let start = now.max(follower.busy_until);
    let angle = follower.track.angular_distance_deg(&query.locations[0]);
    let travel = if follower.rate_deg_per_tick > 0.0 {
        (angle / follower.rate_deg_per_tick).ceil() as u64
    } else {
        0
    };
    (start, start + travel + capture_ticks)
}

/// Greedy reallocation: queries in descending fee order (ties toward the
/// smaller query id), each assigned to the follower with the earliest
/// estimated completion (ties toward the smaller satellite id). Assigned
/// followers move their track to the captured location and stay busy until
/// completion.
pub fn reallocate_followers(
    now: u64,
    queries: &[ImageQuery],
    followers: &mut BTreeMap<NodeId, FollowerState>,
    capture_ticks: u64,
) -> Result<Assignment, TdrsError> {
    if followers.is_empty() {
        return Err(TdrsError::NoFollowers);
    }
    let mut ordered: Vec<&ImageQuery> = queries.iter().collect();
    ordered.sort_by(|a, b| b.fee.cmp(&a.fee).then(a.query_id.cmp(&b.query_id)));

    let mut assignment = Assignment::default();
    for query in ordered {
        query.validate()?;
        let mut best: Option<(u64, u64, NodeId)> = None;
        for (id, follower) in followers.iter() {
            let (start, completion) = completion_estimate(now, follower, query, capture_ticks);
            let candidate = (completion, start, *id);
            if best.is_none_or(|(bc, _, bid)| (completion, *id) < (bc, bid)) {
                best = Some(candidate);
            }
        }
        let (completion, start, chosen) = best.expect("followers is nonempty");
        let follower = followers.get_mut(&chosen).expect("chosen from this map");
        follower.busy_until = completion;
        follower.track = query.locations[0];
        assignment.assigned.insert(query.query_id, chosen);
        assignment.start.insert(query.query_id, start);
        assignment.completion.insert(query.query_id, completion);
    }
    Ok(assignment)
}

/// The user-request token for a validated query.
pub fn user_request_token(query: &ImageQuery) -> Result<SpaceToken, TdrsError> {
    query.validate()?;
    Ok(SpaceToken::UserRequest {
        locations: query.locations.clone(),
        timeframes: query.timeframes.clone(),
    })
}

/// Session token recorded alongside a request submission.
pub fn session_token(query: &ImageQuery) -> SpaceToken {
    SpaceToken::TransactionSession {
        session_id: query.query_id,
        uplink_metadata: format!("query:{}", query.query_id),
    }
}

/// Uplink token whose command bytes carry the batched query ids.
pub fn uplink_token(ground_station: NodeId, tdrs: NodeId, query_ids: &[u64]) -> SpaceToken {
    let mut w = ByteWriter::new();
    w.put_count(query_ids.len());
    for id in query_ids {
        w.put_u64(*id);
    }
    SpaceToken::Uplink {
        ground_station,
        tdrs,
        command: w.into_bytes(),
    }
}

/// Decodes the query ids out of an uplink token's command bytes.
pub fn decode_uplink_query_ids(command: &[u8]) -> Result<Vec<u64>, TokenError> {
    let mut r = ByteReader::new(command);
    let n = r.count()?;
    let mut ids = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        ids.push(r.u64()?);
    }
    r.expect_end()?;
    Ok(ids)
}

/// Placeholder image digest: content-derived from the query and the
/// capturing satellite.
pub fn image_digest(query_id: u64, satellite: NodeId) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(query_id.to_be_bytes());
    hasher.update(satellite.0.to_be_bytes());
    hasher.finalize().into()
}

/// Builds the downlink feedback token for a completed query. Errors when
/// the completion tick has not been reached or the query was never
/// assigned.
pub fn downlink_feedback(
    now: u64,
    assignment: &Assignment,
    query_id: u64,
    downlink_latency: u64,
) -> Result<SpaceToken, TdrsError> {
    let satellite = *assignment
        .assigned
        .get(&query_id)
        .ok_or(TdrsError::NotAssigned(query_id))?;
    let start = assignment.start[&query_id];
    let completion = assignment.completion[&query_id];
    if now < completion {
        return Err(TdrsError::NotCompleted {
            query: query_id,
            completion,
            now,
        });
    }
    Ok(SpaceToken::DownlinkFeedback {
        image_digest: image_digest(query_id, satellite),
        downlink_tick: now + downlink_latency,
        start_tick: start,
        completion_tick: completion,
        feedback: format!("query:{query_id} sat:{satellite} ok"),
    })
}
