//! Virtual zones: swarm registration on a per-zone chain, nonce-challenge
//! MFA, join verification with unanimous member approval, and intruder
//! detection.
//!
//! Each zone keeps its own chain, mined by the zone master. The genesis
//! block's sole transaction registers the zone id and the member virtual
//! ids. The MFA challenge value is the nonce of the zone chain's tip
//! block; every established session appends a session block, so the
//! required nonce changes and a replayed value authenticates at most once.
//!
//! Note that a tip nonce is readable by anyone with chain access, so the
//! membership check is the factor carrying the real weight; see the README
//! for the discussion of this weakness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ledger::{Block, Chain, LedgerError, Transaction};
use crate::tokens::{token_transaction, SpaceToken, TokenError};
use crate::types::{NodeId, OrbitClass, VirtualId, ZoneId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZoneError {
    #[error("zone requires at least one satellite")]
    EmptySwarm,
    #[error("satellite {satellite} is {got}, zone is {expected}")]
    OrbitMismatch {
        satellite: NodeId,
        expected: OrbitClass,
        got: OrbitClass,
    },
    #[error("satellite {0} is already a zone member")]
    AlreadyMember(NodeId),
    #[error("satellite {0} is not a zone member")]
    NotMember(NodeId),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// Per-candidate join rules evaluated by every member. The scripted votes
/// let a scenario override individual members' verdicts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinRules {
    /// Satellites authorized to ever join this zone.
    pub authorized: BTreeSet<NodeId>,
    /// (voter, candidate) -> forced verdict, overriding the rule checks.
    pub scripted_votes: BTreeMap<(NodeId, NodeId), bool>,
}

/// A swarm of satellites in one orbit class managed by a ground-station
/// zone master, with its own zone chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualZone {
    pub zone_id: ZoneId,
    pub orbit: OrbitClass,
    pub master: NodeId,
    members: BTreeMap<NodeId, VirtualId>,
    intruders: BTreeSet<NodeId>,
    pub chain: Chain,
    pub rules: JoinRules,
    pub difficulty: u32,
    next_virtual_id: u64,
}

/// Nonce challenge issued by one zone member to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MfaChallenge {
    pub challenger: NodeId,
    pub responder: NodeId,
    /// The nonce of the zone chain's tip block at issue time.
    pub expected_nonce: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MfaRejection {
    #[error("wrong nonce")]
    WrongNonce,
    #[error("not a member")]
    NotMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfaOutcome {
    Established { session_block_index: u64 },
    Rejected(MfaRejection),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinOutcome {
    Admitted { virtual_id: VirtualId },
    Intruder,
}

/// Read-only zone snapshot in fixed report order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneStatus {
    pub zone_id: ZoneId,
    pub members: Vec<(NodeId, VirtualId)>,
    pub intruders: Vec<NodeId>,
    pub chain_height: u64,
    pub tip_nonce: u64,
}

impl fmt::Display for ZoneStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members = self
            .members
            .iter()
            .map(|(n, v)| format!("{n}:{v}"))
            .collect::<Vec<_>>()
            .join(",");
        let intruders = self
            .intruders
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "zone={} members=[{}] intruders=[{}] height={} tip_nonce={}",
            self.zone_id, members, intruders, self.chain_height, self.tip_nonce
        )
    }
}

/// Creates a zone: issues virtual ids for the founding swarm and mines the
/// genesis block registering the zone id and member virtual ids.
pub fn create_zone(
    zone_id: ZoneId,
    master: NodeId,
    orbit: OrbitClass,
    satellites: &[(NodeId, OrbitClass)],
    rules: JoinRules,
    difficulty: u32,
    timestamp: u64,
) -> Result<VirtualZone, ZoneError> {
    if satellites.is_empty() {
        return Err(ZoneError::EmptySwarm);
    }
    for (sat, class) in satellites {
        if *class != orbit {
            return Err(ZoneError::OrbitMismatch {
                satellite: *sat,
                expected: orbit,
                got: *class,
            });
        }
    }
    let mut members = BTreeMap::new();
    let mut next_virtual_id = 1u64;
    let mut sorted: Vec<NodeId> = satellites.iter().map(|(sat, _)| *sat).collect();
    sorted.sort();
    sorted.dedup();
    for sat in sorted {
        members.insert(sat, VirtualId(next_virtual_id));
        next_virtual_id += 1;
    }

    let registration = SpaceToken::ZoneRegistration {
        zone_id,
        members: members.iter().map(|(n, v)| (*n, *v)).collect(),
    };
    let genesis_tx = token_transaction(&registration, master, 0, timestamp)?;
    let chain = Chain::new(vec![genesis_tx], difficulty, timestamp)?;

    Ok(VirtualZone {
        zone_id,
        orbit,
        master,
        members,
        intruders: BTreeSet::new(),
        chain,
        rules,
        difficulty,
        next_virtual_id,
    })
}

impl VirtualZone {
    pub fn is_member(&self, sat: NodeId) -> bool {
        self.members.contains_key(&sat)
    }

    pub fn virtual_id(&self, sat: NodeId) -> Option<VirtualId> {
        self.members.get(&sat).copied()
    }

    pub fn members(&self) -> &BTreeMap<NodeId, VirtualId> {
        &self.members
    }

    pub fn intruders(&self) -> &BTreeSet<NodeId> {
        &self.intruders
    }

    /// The current MFA challenge value: the tip block's nonce.
    pub fn tip_nonce(&self) -> u64 {
        self.chain.tip().header.nonce
    }

    fn roster(&self) -> Vec<(NodeId, VirtualId)> {
        self.members.iter().map(|(n, v)| (*n, *v)).collect()
    }

    fn mine_zone_block(&mut self, tx: Transaction, timestamp: u64) -> Result<Block, ZoneError> {
        self.chain.mempool.insert(tx);
        let mined = self
            .chain
            .mine_next(self.difficulty, 1, timestamp)
            .map_err(ZoneError::Ledger)?;
        Ok(mined.block)
    }
}

/// The responder issues a challenge for the zone chain's current tip
/// nonce.
pub fn issue_challenge(zone: &VirtualZone, challenger: NodeId, responder: NodeId) -> MfaChallenge {
    MfaChallenge {
        challenger,
        responder,
        expected_nonce: zone.tip_nonce(),
    }
}

/// Challenge-response authentication of `initiator` toward `responder`.
///
/// Factor one is knowledge of the tip nonce, factor two is zone
/// membership; a session is established only when both hold. On success a
/// session block is mined so the next authentication requires the new tip
/// nonce. Returns the block to distribute to members alongside the
/// outcome.
pub fn mfa_authenticate(
    zone: &mut VirtualZone,
    initiator: NodeId,
    responder: NodeId,
    presented_nonce: u64,
    timestamp: u64,
) -> Result<(MfaOutcome, Option<Block>), ZoneError> {
    if !zone.is_member(responder) {
        return Err(ZoneError::NotMember(responder));
    }
    let challenge = issue_challenge(zone, responder, initiator);
    if presented_nonce != challenge.expected_nonce {
        return Ok((MfaOutcome::Rejected(MfaRejection::WrongNonce), None));
    }
    if !zone.is_member(initiator) {
        return Ok((MfaOutcome::Rejected(MfaRejection::NotMember), None));
    }
    let session_block_index = zone.chain.height();
    let session = SpaceToken::TransactionSession {
        session_id: session_block_index,
        uplink_metadata: format!("mfa:{initiator}->{responder}"),
    };
    let tx = token_transaction(&session, initiator, 0, timestamp)?;
    let block = zone.mine_zone_block(tx, timestamp)?;
    Ok((
        MfaOutcome::Established {
            session_block_index,
        },
        Some(block),
    ))
}

/// One member's verdict on a join request: a scripted vote when present,
/// otherwise the contract rules (orbit class matches, candidate is on the
/// authorized roster, candidate is not a recorded intruder).
fn member_vote(zone: &VirtualZone, voter: NodeId, candidate: NodeId, orbit: OrbitClass) -> bool {
    if let Some(forced) = zone.rules.scripted_votes.get(&(voter, candidate)) {
        return *forced;
    }
    orbit == zone.orbit
        && zone.rules.authorized.contains(&candidate)
        && !zone.intruders.contains(&candidate)
}

/// Every member's verdict on a candidate, in member order, without
/// changing any zone state.
pub fn poll_votes(
    zone: &VirtualZone,
    candidate: NodeId,
    candidate_orbit: OrbitClass,
) -> Vec<(NodeId, bool)> {
    zone.members
        .keys()
        .map(|voter| (*voter, member_vote(zone, *voter, candidate, candidate_orbit)))
        .collect()
}

/// Votes in member order, the join outcome, and the block mined for it.
pub type JoinDecision = (Vec<(NodeId, bool)>, JoinOutcome, Block);

/// Broadcast join verification: every member evaluates the join rules and
/// admission requires unanimous approval. Admitted candidates get a fresh
/// virtual id recorded in a membership-update block; rejected candidates
/// land on the intruder list with a rejection block.
pub fn request_join(
    zone: &mut VirtualZone,
    candidate: NodeId,
    candidate_orbit: OrbitClass,
    timestamp: u64,
) -> Result<JoinDecision, ZoneError> {
    if zone.is_member(candidate) {
        return Err(ZoneError::AlreadyMember(candidate));
    }
    let votes = poll_votes(zone, candidate, candidate_orbit);
    let unanimous = votes.iter().all(|(_, approve)| *approve);

    if unanimous {
        let virtual_id = VirtualId(zone.next_virtual_id);
        zone.next_virtual_id += 1;
        zone.members.insert(candidate, virtual_id);
        let update = SpaceToken::ZoneRegistration {
            zone_id: zone.zone_id,
            members: zone.roster(),
        };
        let tx = token_transaction(&update, zone.master, 0, timestamp)?;
        let block = zone.mine_zone_block(tx, timestamp)?;
        Ok((votes, JoinOutcome::Admitted { virtual_id }, block))
    } else {
        zone.intruders.insert(candidate);
        let rejection = SpaceToken::Decision {
            text: format!("join-rejected:{candidate}"),
            source_contract: zone.zone_id.0,
        };
        let tx = token_transaction(&rejection, zone.master, 0, timestamp)?;
        let block = zone.mine_zone_block(tx, timestamp)?;
        Ok((votes, JoinOutcome::Intruder, block))
    }
}

/// Read-only snapshot of members, intruders, chain height, and tip nonce.
pub fn zone_status(zone: &VirtualZone) -> ZoneStatus {
    ZoneStatus {
        zone_id: zone.zone_id,
        members: zone.roster(),
        intruders: zone.intruders.iter().copied().collect(),
        chain_height: zone.chain.height(),
        tip_nonce: zone.tip_nonce(),
    }
}
