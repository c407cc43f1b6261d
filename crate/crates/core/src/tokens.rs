//! Space digital tokens: the typed payloads of every ledger transaction.
//!
//! Canonical encoding: a 1-byte kind tag followed by the kind's fields in
//! declared order; integers big-endian, floats as IEEE-754 bit patterns,
//! strings UTF-8 length-prefixed (4 bytes), lists count-prefixed (4 bytes).
//! Token ids are content digests of the canonical encoding.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{ByteReader, ByteWriter, CodecError};
use crate::ledger::Transaction;
use crate::types::{KinematicState, LatLon, NodeId, TickInterval, VirtualId, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("invalid token fields: {0}")]
    InvalidFields(&'static str),
    #[error("{0}")]
    MalformedBytes(#[from] CodecError),
}

/// Content digest identifying a token.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub [u8; 32]);

impl TokenId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<TokenId> {
        let raw = hex::decode(s).ok()?;
        Some(TokenId(raw.try_into().ok()?))
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TokenId({})", self.to_hex())
    }
}

/// Kinds of orbital assets that can be tokenized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssetKind {
    Orbit,
    Satellite,
    Asteroid,
    Debris,
    Spacecraft,
    Astronaut,
}

impl AssetKind {
    fn tag(self) -> u8 {
        match self {
            AssetKind::Orbit => 1,
            AssetKind::Satellite => 2,
            AssetKind::Asteroid => 3,
            AssetKind::Debris => 4,
            AssetKind::Spacecraft => 5,
            AssetKind::Astronaut => 6,
        }
    }

    fn from_tag(tag: u8) -> Option<AssetKind> {
        Some(match tag {
            1 => AssetKind::Orbit,
            2 => AssetKind::Satellite,
            3 => AssetKind::Asteroid,
            4 => AssetKind::Debris,
            5 => AssetKind::Spacecraft,
            6 => AssetKind::Astronaut,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            AssetKind::Orbit => "orbit",
            AssetKind::Satellite => "satellite",
            AssetKind::Asteroid => "asteroid",
            AssetKind::Debris => "debris",
            AssetKind::Spacecraft => "spacecraft",
            AssetKind::Astronaut => "astronaut",
        }
    }

    pub fn parse(s: &str) -> Option<AssetKind> {
        Some(match s.to_ascii_lowercase().as_str() {
            "orbit" => AssetKind::Orbit,
            "satellite" => AssetKind::Satellite,
            "asteroid" => AssetKind::Asteroid,
            "debris" => AssetKind::Debris,
            "spacecraft" => AssetKind::Spacecraft,
            "astronaut" => AssetKind::Astronaut,
            _ => return None,
        })
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const TAG_USER_REQUEST: u8 = 1;
const TAG_TRANSACTION_SESSION: u8 = 2;
const TAG_UPLINK: u8 = 3;
const TAG_DOWNLINK_FEEDBACK: u8 = 4;
const TAG_ORBITAL_ASSET: u8 = 5;
const TAG_MANEUVER: u8 = 6;
const TAG_MISSION_PHASE: u8 = 7;
const TAG_DECISION: u8 = 8;
const TAG_FUNDING: u8 = 9;
const TAG_ZONE_REGISTRATION: u8 = 10;

/// Tagged union of every token kind carried on the ledgers.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceToken {
    /// An image request entered by a user terminal.
    UserRequest {
        locations: Vec<LatLon>,
        timeframes: Vec<TickInterval>,
    },
    /// Session bookkeeping for a recorded connection or uplink.
    TransactionSession {
        session_id: u64,
        uplink_metadata: String,
    },
    /// Ground station to relay uplink carrying command bytes.
    Uplink {
        ground_station: NodeId,
        tdrs: NodeId,
        command: Vec<u8>,
    },
    /// Relay feedback for a completed query.
    DownlinkFeedback {
        image_digest: [u8; 32],
        downlink_tick: u64,
        start_tick: u64,
        completion_tick: u64,
        feedback: String,
    },
    /// A tokenized orbital asset with its kinematic snapshot.
    OrbitalAsset {
        kind: AssetKind,
        asset_id: u64,
        owner: NodeId,
        state: KinematicState,
    },
    /// Per-satellite velocity deltas in km/s.
    Maneuver { deltas: Vec<(NodeId, [f64; 3])> },
    /// One committed step of the six-phase mission lifecycle.
    MissionPhase {
        phase: u8,
        payload_digest: [u8; 32],
        submitter: NodeId,
    },
    /// A decision produced by contract rules.
    Decision {
        text: String,
        source_contract: u64,
    },
    /// Milestone-gated fund release.
    Funding {
        amount: u64,
        beneficiary: NodeId,
        milestone_phase: u8,
    },
    /// Zone genesis registration and membership updates: the zone id with
    /// the full (satellite, virtual id) roster.
    ZoneRegistration {
        zone_id: ZoneId,
        members: Vec<(NodeId, VirtualId)>,
    },
}

impl SpaceToken {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpaceToken::UserRequest { .. } => "user_request",
            SpaceToken::TransactionSession { .. } => "transaction_session",
            SpaceToken::Uplink { .. } => "uplink",
            SpaceToken::DownlinkFeedback { .. } => "downlink_feedback",
            SpaceToken::OrbitalAsset { .. } => "orbital_asset",
            SpaceToken::Maneuver { .. } => "maneuver",
            SpaceToken::MissionPhase { .. } => "mission_phase",
            SpaceToken::Decision { .. } => "decision",
            SpaceToken::Funding { .. } => "funding",
            SpaceToken::ZoneRegistration { .. } => "zone_registration",
        }
    }

    /// Field invariants: phase range, positive funding amounts, finite
    /// floats wherever geometry enters a token.
    pub fn validate(&self) -> Result<(), TokenError> {
        match self {
            SpaceToken::UserRequest { locations, .. } => {
                if locations.iter().any(|l| !l.is_finite()) {
                    return Err(TokenError::InvalidFields("non-finite location"));
                }
            }
            SpaceToken::OrbitalAsset { state, .. } => {
                if !state.is_finite() {
                    return Err(TokenError::InvalidFields("non-finite kinematic state"));
                }
            }
            SpaceToken::Maneuver { deltas } => {
                if deltas
                    .iter()
                    .any(|(_, dv)| dv.iter().any(|c| !c.is_finite()))
                {
                    return Err(TokenError::InvalidFields("non-finite velocity delta"));
                }
            }
            SpaceToken::MissionPhase { phase, .. } => {
                if !(1..=6).contains(phase) {
                    return Err(TokenError::InvalidFields("phase must be in 1..=6"));
                }
            }
            SpaceToken::Funding {
                amount,
                milestone_phase,
                ..
            } => {
                if *amount == 0 {
                    return Err(TokenError::InvalidFields("funding amount must be positive"));
                }
                if !(1..=6).contains(milestone_phase) {
                    return Err(TokenError::InvalidFields("milestone phase must be in 1..=6"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical byte encoding of the token.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        match self {
            SpaceToken::UserRequest {
                locations,
                timeframes,
            } => {
                w.put_u8(TAG_USER_REQUEST);
                w.put_count(locations.len());
                for loc in locations {
                    w.put_f64(loc.lat_deg);
                    w.put_f64(loc.lon_deg);
                }
                w.put_count(timeframes.len());
                for frame in timeframes {
                    w.put_u64(frame.start);
                    w.put_u64(frame.end);
                }
            }
            SpaceToken::TransactionSession {
                session_id,
                uplink_metadata,
            } => {
                w.put_u8(TAG_TRANSACTION_SESSION);
                w.put_u64(*session_id);
                w.put_string(uplink_metadata);
            }
            SpaceToken::Uplink {
                ground_station,
                tdrs,
                command,
            } => {
                w.put_u8(TAG_UPLINK);
                w.put_u64(ground_station.0);
                w.put_u64(tdrs.0);
                w.put_bytes(command);
            }
            SpaceToken::DownlinkFeedback {
                image_digest,
                downlink_tick,
                start_tick,
                completion_tick,
                feedback,
            } => {
                w.put_u8(TAG_DOWNLINK_FEEDBACK);
                w.put_digest(image_digest);
                w.put_u64(*downlink_tick);
                w.put_u64(*start_tick);
                w.put_u64(*completion_tick);
                w.put_string(feedback);
            }
            SpaceToken::OrbitalAsset {
                kind,
                asset_id,
                owner,
                state,
            } => {
                w.put_u8(TAG_ORBITAL_ASSET);
                w.put_u8(kind.tag());
                w.put_u64(*asset_id);
                w.put_u64(owner.0);
                for c in state.position_km {
                    w.put_f64(c);
                }
                for c in state.velocity_km_s {
                    w.put_f64(c);
                }
            }
            SpaceToken::Maneuver { deltas } => {
                w.put_u8(TAG_MANEUVER);
                w.put_count(deltas.len());
                for (sat, dv) in deltas {
                    w.put_u64(sat.0);
                    for c in dv {
                        w.put_f64(*c);
                    }
                }
            }
            SpaceToken::MissionPhase {
                phase,
                payload_digest,
                submitter,
            } => {
                w.put_u8(TAG_MISSION_PHASE);
                w.put_u8(*phase);
                w.put_digest(payload_digest);
                w.put_u64(submitter.0);
            }
            SpaceToken::Decision {
                text,
                source_contract,
            } => {
                w.put_u8(TAG_DECISION);
                w.put_string(text);
                w.put_u64(*source_contract);
            }
            SpaceToken::Funding {
                amount,
                beneficiary,
                milestone_phase,
            } => {
                w.put_u8(TAG_FUNDING);
                w.put_u64(*amount);
                w.put_u64(beneficiary.0);
                w.put_u8(*milestone_phase);
            }
            SpaceToken::ZoneRegistration { zone_id, members } => {
                w.put_u8(TAG_ZONE_REGISTRATION);
                w.put_u64(zone_id.0);
                w.put_count(members.len());
                for (sat, vid) in members {
                    w.put_u64(sat.0);
                    w.put_u64(vid.0);
                }
            }
        }
        w.into_bytes()
    }

    /// Decodes a canonical token encoding; the whole buffer must be
    /// consumed.
    pub fn decode(bytes: &[u8]) -> Result<SpaceToken, TokenError> {
        let mut r = ByteReader::new(bytes);
        let tag = r.u8()?;
        let token = match tag {
            TAG_USER_REQUEST => {
                let n = r.count()?;
                let mut locations = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    locations.push(LatLon::new(r.f64()?, r.f64()?));
                }
                let m = r.count()?;
                let mut timeframes = Vec::with_capacity(m.min(1024));
                for _ in 0..m {
                    timeframes.push(TickInterval::new(r.u64()?, r.u64()?));
                }
                SpaceToken::UserRequest {
                    locations,
                    timeframes,
                }
            }
            TAG_TRANSACTION_SESSION => SpaceToken::TransactionSession {
                session_id: r.u64()?,
                uplink_metadata: r.string()?,
            },
            TAG_UPLINK => SpaceToken::Uplink {
                ground_station: NodeId(r.u64()?),
                tdrs: NodeId(r.u64()?),
                command: r.bytes()?,
            },
            TAG_DOWNLINK_FEEDBACK => SpaceToken::DownlinkFeedback {
                image_digest: r.digest()?,
                downlink_tick: r.u64()?,
                start_tick: r.u64()?,
                completion_tick: r.u64()?,
                feedback: r.string()?,
            },
            TAG_ORBITAL_ASSET => {
                let offset = r.offset();
                let kind = AssetKind::from_tag(r.u8()?).ok_or(CodecError {
                    offset,
                    what: "unknown asset kind",
                })?;
                let asset_id = r.u64()?;
                let owner = NodeId(r.u64()?);
                let mut position_km = [0.0; 3];
                for c in &mut position_km {
                    *c = r.f64()?;
                }
                let mut velocity_km_s = [0.0; 3];
                for c in &mut velocity_km_s {
                    *c = r.f64()?;
                }
                SpaceToken::OrbitalAsset {
                    kind,
                    asset_id,
                    owner,
                    state: KinematicState::new(position_km, velocity_km_s),
                }
            }
            TAG_MANEUVER => {
                let n = r.count()?;
                let mut deltas = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    let sat = NodeId(r.u64()?);
                    let mut dv = [0.0; 3];
                    for c in &mut dv {
                        *c = r.f64()?;
                    }
                    deltas.push((sat, dv));
                }
                SpaceToken::Maneuver { deltas }
            }
            TAG_MISSION_PHASE => SpaceToken::MissionPhase {
                phase: r.u8()?,
                payload_digest: r.digest()?,
                submitter: NodeId(r.u64()?),
            },
            TAG_DECISION => SpaceToken::Decision {
                text: r.string()?,
                source_contract: r.u64()?,
            },
            TAG_FUNDING => SpaceToken::Funding {
                amount: r.u64()?,
                beneficiary: NodeId(r.u64()?),
                milestone_phase: r.u8()?,
            },
            TAG_ZONE_REGISTRATION => {
                let zone_id = ZoneId(r.u64()?);
                let n = r.count()?;
                let mut members = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    members.push((NodeId(r.u64()?), VirtualId(r.u64()?)));
                }
                SpaceToken::ZoneRegistration { zone_id, members }
            }
            _ => {
                return Err(TokenError::MalformedBytes(CodecError {
                    offset: 0,
                    what: "unknown token kind tag",
                }))
            }
        };
        r.expect_end()?;
        Ok(token)
    }

    /// Content-addressed token id: SHA-256 of the canonical encoding.
    pub fn token_id(&self) -> TokenId {
        TokenId(Sha256::digest(self.encode()).into())
    }
}

/// Validates a token's field invariants and returns it with its fresh
/// content-derived id.
pub fn mint_token(token: SpaceToken) -> Result<(TokenId, SpaceToken), TokenError> {
    token.validate()?;
    let id = token.token_id();
    Ok((id, token))
}

/// Wraps a validated token as a ledger transaction issued by `issuer`.
pub fn token_transaction(
    token: &SpaceToken,
    issuer: NodeId,
    fee: u64,
    timestamp: u64,
) -> Result<Transaction, TokenError> {
    token.validate()?;
    Ok(Transaction::new(timestamp, issuer, fee, token.encode()))
}

/// A registered space entity eligible for tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetDescriptor {
    pub kind: AssetKind,
    pub label: String,
    pub owner: NodeId,
    pub state: KinematicState,
}

impl AssetDescriptor {
    /// Content-derived asset id: the first 8 bytes of the digest over
    /// kind, label, and owner. Identical descriptors tokenize to identical
    /// ids.
    pub fn asset_id(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update([self.kind.tag()]);
        hasher.update((self.label.len() as u32).to_be_bytes());
        hasher.update(self.label.as_bytes());
        hasher.update(self.owner.0.to_be_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        u64::from_be_bytes(digest[..8].try_into().unwrap())
    }
}

/// Turns an asset descriptor into an orbital-asset token embedding the
/// descriptor's kinematic state and owner.
pub fn tokenize_asset(descriptor: &AssetDescriptor) -> Result<SpaceToken, TokenError> {
    if !descriptor.state.is_finite() {
        return Err(TokenError::InvalidFields("non-finite kinematic state"));
    }
    Ok(SpaceToken::OrbitalAsset {
        kind: descriptor.kind,
        asset_id: descriptor.asset_id(),
        owner: descriptor.owner,
        state: descriptor.state,
    })
}
