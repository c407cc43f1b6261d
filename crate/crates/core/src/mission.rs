//! Consortium mission-lifecycle ledger: the six launch phases committed in
//! order by authorized members, with milestone-gated fund release.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::ByteWriter;
use crate::ledger::{Block, Chain, LedgerError};
use crate::tokens::{token_transaction, SpaceToken, TokenError};
use crate::types::NodeId;

/// Consortium chains are permissioned; work is not the guard, so they mine
/// at the lowest nontrivial difficulty.
pub const CONSORTIUM_DIFFICULTY: u32 = 1;

/// The six satellite-launch phases in lifecycle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MissionPhase {
    MissionAnalysisIdentification,
    FeasibilityStudy,
    PreliminaryDesign,
    DetailedDesign,
    QualificationProduction,
    LaunchingOperating,
}

impl MissionPhase {
    pub const ALL: [MissionPhase; 6] = [
        MissionPhase::MissionAnalysisIdentification,
        MissionPhase::FeasibilityStudy,
        MissionPhase::PreliminaryDesign,
        MissionPhase::DetailedDesign,
        MissionPhase::QualificationProduction,
        MissionPhase::LaunchingOperating,
    ];

    pub fn ordinal(self) -> u8 {
        match self {
            MissionPhase::MissionAnalysisIdentification => 1,
            MissionPhase::FeasibilityStudy => 2,
            MissionPhase::PreliminaryDesign => 3,
            MissionPhase::DetailedDesign => 4,
            MissionPhase::QualificationProduction => 5,
            MissionPhase::LaunchingOperating => 6,
        }
    }

    pub fn from_ordinal(ordinal: u8) -> Option<MissionPhase> {
        MissionPhase::ALL.get(ordinal.checked_sub(1)? as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MissionPhase::MissionAnalysisIdentification => "mission_analysis_identification",
            MissionPhase::FeasibilityStudy => "feasibility_study",
            MissionPhase::PreliminaryDesign => "preliminary_design",
            MissionPhase::DetailedDesign => "detailed_design",
            MissionPhase::QualificationProduction => "qualification_production",
            MissionPhase::LaunchingOperating => "launching_operating",
        }
    }
}

impl fmt::Display for MissionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ordinal(), self.name())
    }
}

/// Phase-specific submission content. The variant fixes which fields a
/// phase carries; `digest` is what lands on chain inside the phase token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhasePayload {
    /// Phase 1: candidate system requirements.
    Requirements { requirements: Vec<String> },
    /// Phase 2: outlined cost estimations.
    CostEstimates { estimates: Vec<(String, u64)> },
    /// Phase 3: component interfaces and the mission schedule.
    DesignSchedule {
        interfaces: Vec<String>,
        schedule: Vec<(String, u64)>,
    },
    /// Phase 4: structural/thermal and engineering model metadata.
    ModelMetadata { stm: String, em: String },
    /// Phase 5: flight model metadata and test results.
    FlightQualification {
        fm: String,
        test_results: Vec<(String, bool)>,
    },
    /// Phase 6: launch control and tracking data.
    LaunchOperations {
        launch_control: String,
        tracking: String,
        realtime: String,
    },
}

impl PhasePayload {
    pub fn phase(&self) -> MissionPhase {
        match self {
            PhasePayload::Requirements { .. } => MissionPhase::MissionAnalysisIdentification,
            PhasePayload::CostEstimates { .. } => MissionPhase::FeasibilityStudy,
            PhasePayload::DesignSchedule { .. } => MissionPhase::PreliminaryDesign,
            PhasePayload::ModelMetadata { .. } => MissionPhase::DetailedDesign,
            PhasePayload::FlightQualification { .. } => MissionPhase::QualificationProduction,
            PhasePayload::LaunchOperations { .. } => MissionPhase::LaunchingOperating,
        }
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let nonempty = match self {
            PhasePayload::Requirements { requirements } => !requirements.is_empty(),
            PhasePayload::CostEstimates { estimates } => !estimates.is_empty(),
            PhasePayload::DesignSchedule { interfaces, schedule } => {
                !interfaces.is_empty() && !schedule.is_empty()
            }
            PhasePayload::ModelMetadata { stm, em } => !stm.is_empty() && !em.is_empty(),
            PhasePayload::FlightQualification { fm, test_results } => {
                !fm.is_empty() && !test_results.is_empty()
            }
            PhasePayload::LaunchOperations {
                launch_control,
                tracking,
                realtime,
            } => !launch_control.is_empty() && !tracking.is_empty() && !realtime.is_empty(),
        };
        if nonempty {
            Ok(())
        } else {
            Err(MissionError::InvalidRecord("phase payload must be nonempty"))
        }
    }

    /// Canonical digest of the payload fields.
    pub fn digest(&self) -> [u8; 32] {
        let mut w = ByteWriter::new();
        w.put_u8(self.phase().ordinal());
        match self {
            PhasePayload::Requirements { requirements } => {
                w.put_count(requirements.len());
                for item in requirements {
                    w.put_string(item);
                }
            }
            PhasePayload::CostEstimates { estimates } => {
                w.put_count(estimates.len());
                for (label, cost) in estimates {
                    w.put_string(label);
                    w.put_u64(*cost);
                }
            }
            PhasePayload::DesignSchedule { interfaces, schedule } => {
                w.put_count(interfaces.len());
                for item in interfaces {
                    w.put_string(item);
                }
                w.put_count(schedule.len());
                for (label, tick) in schedule {
                    w.put_string(label);
                    w.put_u64(*tick);
                }
            }
            PhasePayload::ModelMetadata { stm, em } => {
                w.put_string(stm);
                w.put_string(em);
            }
            PhasePayload::FlightQualification { fm, test_results } => {
                w.put_string(fm);
                w.put_count(test_results.len());
                for (name, passed) in test_results {
                    w.put_string(name);
                    w.put_u8(u8::from(*passed));
                }
            }
            PhasePayload::LaunchOperations {
                launch_control,
                tracking,
                realtime,
            } => {
                w.put_string(launch_control);
                w.put_string(tracking);
                w.put_string(realtime);
            }
        }
        Sha256::digest(w.into_bytes()).into()
    }
}

/// A phase submission by a consortium member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseRecord {
    pub phase: MissionPhase,
    pub submitter: NodeId,
    pub payload: PhasePayload,
}

impl PhaseRecord {
    pub fn validate(&self) -> Result<(), MissionError> {
        if self.payload.phase() != self.phase {
            return Err(MissionError::InvalidRecord(
                "payload fields do not match the declared phase",
            ));
        }
        self.payload.validate()
    }
}

/// Consortium membership, miner permissioning, and the funding roadmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsortiumConfig {
    pub members: BTreeSet<NodeId>,
    pub miners: BTreeSet<NodeId>,
    pub budget: u64,
    /// Per-phase release fractions; must sum to exactly 1.
    pub fractions: [Ratio<u64>; 6],
    pub beneficiary: NodeId,
}

impl ConsortiumConfig {
    pub fn uniform_fractions() -> [Ratio<u64>; 6] {
        [Ratio::new(1, 6); 6]
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        if self.members.is_empty() {
            return Err(MissionError::InvalidConfig("no authorized members"));
        }
        if self.miners.is_empty() {
            return Err(MissionError::InvalidConfig("no authorized miners"));
        }
        let one = Ratio::one();
        let mut sum: Ratio<u64> = Ratio::zero();
        for fraction in &self.fractions {
            if *fraction > one {
                return Err(MissionError::InvalidConfig("fraction above 1"));
            }
            sum += *fraction;
        }
        if sum != one {
            return Err(MissionError::InvalidConfig("fractions must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MissionError {
    #[error("expected phase {expected}, got {got}")]
    OutOfOrder { expected: u8, got: u8 },
    #[error("phase {0} already committed")]
    DuplicatePhase(u8),
    #[error("submitter {0} is not an authorized member")]
    UnauthorizedSubmitter(NodeId),
    #[error("phase {0} is not committed")]
    PhaseNotCommitted(u8),
    #[error("funds for phase {0} already released")]
    AlreadyReleased(u8),
    #[error("invalid consortium config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid phase record: {0}")]
    InvalidRecord(&'static str),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Token(#[from] TokenError),
}

/// Read-only lifecycle snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifecycleStatus {
    pub current_phase: u8,
    pub released: u64,
    pub budget: u64,
    /// (phase ordinal, block index) pairs in phase order.
    pub phase_blocks: Vec<(u8, u64)>,
}

impl fmt::Display for LifecycleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let heights = self
            .phase_blocks
            .iter()
            .map(|(p, i)| format!("{p}:{i}"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "phase={} released={} budget={} heights=[{}]",
            self.current_phase, self.released, self.budget, heights
        )
    }
}

/// Single-writer consortium ledger. Verification of a submission is schema
/// checking plus authorization; an accepted phase is mined into exactly
/// one block by the first authorized miner in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissionLedger {
    pub config: ConsortiumConfig,
    pub chain: Chain,
    committed_phase: u8,
    released: BTreeMap<u8, u64>,
    phase_blocks: BTreeMap<u8, u64>,
}

impl MissionLedger {
    /// Creates the ledger with an empty genesis block.
    pub fn new(config: ConsortiumConfig, timestamp: u64) -> Result<MissionLedger, MissionError> {
        config.validate()?;
        let chain = Chain::new(Vec::new(), CONSORTIUM_DIFFICULTY, timestamp)?;
        Ok(MissionLedger {
            config,
            chain,
            committed_phase: 0,
            released: BTreeMap::new(),
            phase_blocks: BTreeMap::new(),
        })
    }

    /// The miner that assembles the next consortium block.
    pub fn assigned_miner(&self) -> NodeId {
        *self
            .config
            .miners
            .iter()
            .next()
            .expect("config validation requires at least one miner")
    }

    pub fn committed_phase(&self) -> u8 {
        self.committed_phase
    }

    pub fn released_total(&self) -> u64 {
        self.released.values().sum()
    }

    pub fn released_for(&self, phase: MissionPhase) -> Option<u64> {
        self.released.get(&phase.ordinal()).copied()
    }

    /// Commits a phase record. Accepted only when the submitter is an
    /// authorized member, the record passes schema checks, and the phase
    /// ordinal is exactly the next in sequence.
    pub fn submit_phase(
        &mut self,
        record: &PhaseRecord,
        timestamp: u64,
    ) -> Result<&Block, MissionError> {
        if !self.config.members.contains(&record.submitter) {
            return Err(MissionError::UnauthorizedSubmitter(record.submitter));
        }
        record.validate()?;
        let got = record.phase.ordinal();
        let expected = self.committed_phase + 1;
        if got <= self.committed_phase {
            return Err(MissionError::DuplicatePhase(got));
        }
        if got != expected {
            return Err(MissionError::OutOfOrder { expected, got });
        }

        let token = SpaceToken::MissionPhase {
            phase: got,
            payload_digest: record.payload.digest(),
            submitter: record.submitter,
        };
        let tx = token_transaction(&token, record.submitter, 0, timestamp)?;
        self.chain.mempool.insert(tx);
        let mined = self
            .chain
            .mine_next(CONSORTIUM_DIFFICULTY, 1, timestamp)?;
        let index = mined.block.header.index;
        self.committed_phase = got;
        self.phase_blocks.insert(got, index);
        Ok(self.chain.block_at(index).expect("block was just appended"))
    }

    /// Cumulative funds due through phase `k`: floor(budget · Σ fractions
    /// 1..=k). Releases telescope, so the total after phase 6 is exactly
    /// the budget.
    fn cumulative_due(&self, through_phase: u8) -> u64 {
        let mut sum: Ratio<u128> = Ratio::zero();
        for fraction in &self.config.fractions[..through_phase as usize] {
            sum += Ratio::new(u128::from(*fraction.numer()), u128::from(*fraction.denom()));
        }
        let scaled = sum * Ratio::from_integer(u128::from(self.budget()));
        u64::try_from(scaled.to_integer()).expect("release never exceeds the u64 budget")
    }

    fn budget(&self) -> u64 {
        self.config.budget
    }

    /// Releases the funds gated on a committed phase: a funding token of
    /// amount budget × fraction, committed in the next block. Returns the
    /// released amount (zero-fraction phases release nothing but are still
    /// marked released).
    pub fn release_funds(
        &mut self,
        phase: MissionPhase,
        timestamp: u64,
    ) -> Result<u64, MissionError> {
        let ordinal = phase.ordinal();
        if !self.phase_blocks.contains_key(&ordinal) {
            return Err(MissionError::PhaseNotCommitted(ordinal));
        }
        if self.released.contains_key(&ordinal) {
            return Err(MissionError::AlreadyReleased(ordinal));
        }
        let amount = self.cumulative_due(ordinal) - self.cumulative_due(ordinal - 1);
        if amount > 0 {
            let token = SpaceToken::Funding {
                amount,
                beneficiary: self.config.beneficiary,
                milestone_phase: ordinal,
            };
            let tx = token_transaction(&token, self.assigned_miner(), 0, timestamp)?;
            self.chain.mempool.insert(tx);
            self.chain.mine_next(CONSORTIUM_DIFFICULTY, 1, timestamp)?;
        }
        self.released.insert(ordinal, amount);
        Ok(amount)
    }

    pub fn status(&self) -> LifecycleStatus {
        LifecycleStatus {
            current_phase: self.committed_phase,
            released: self.released_total(),
            budget: self.budget(),
            phase_blocks: self.phase_blocks.iter().map(|(p, i)| (*p, *i)).collect(),
        }
    }
}

/// Builds the conventional payload for a phase from simple text fields;
/// used by the scenario runner.
pub fn payload_for_phase(
    phase: MissionPhase,
    fields: &BTreeMap<String, String>,
) -> Result<PhasePayload, MissionError> {
    let list = |key: &str| -> Vec<String> {
        fields
            .get(key)
            .map(|v| v.split(';').map(str::to_string).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    };
    let text = |key: &str| fields.get(key).cloned().unwrap_or_default();
    let payload = match phase {
        MissionPhase::MissionAnalysisIdentification => PhasePayload::Requirements {
            requirements: list("requirements"),
        },
        MissionPhase::FeasibilityStudy => {
            let mut estimates = Vec::new();
            for item in list("costs") {
                let (label, cost) = item.split_once(':').ok_or(MissionError::InvalidRecord(
                    "cost entries are label:amount",
                ))?;
                let cost = cost
                    .parse()
                    .map_err(|_| MissionError::InvalidRecord("cost amount must be an integer"))?;
                estimates.push((label.to_string(), cost));
            }
            PhasePayload::CostEstimates { estimates }
        }
        MissionPhase::PreliminaryDesign => {
            let mut schedule = Vec::new();
            for item in list("schedule") {
                let (label, tick) = item.split_once(':').ok_or(MissionError::InvalidRecord(
                    "schedule entries are label:tick",
                ))?;
                let tick = tick
                    .parse()
                    .map_err(|_| MissionError::InvalidRecord("schedule tick must be an integer"))?;
                schedule.push((label.to_string(), tick));
            }
            PhasePayload::DesignSchedule {
                interfaces: list("interfaces"),
                schedule,
            }
        }
        MissionPhase::DetailedDesign => PhasePayload::ModelMetadata {
            stm: text("stm"),
            em: text("em"),
        },
        MissionPhase::QualificationProduction => {
            let mut test_results = Vec::new();
            for item in list("tests") {
                let (name, result) = item.split_once(':').ok_or(MissionError::InvalidRecord(
                    "test entries are name:pass|fail",
                ))?;
                test_results.push((name.to_string(), result == "pass"));
            }
            PhasePayload::FlightQualification {
                fm: text("fm"),
                test_results,
            }
        }
        MissionPhase::LaunchingOperating => PhasePayload::LaunchOperations {
            launch_control: text("launch"),
            tracking: text("tracking"),
            realtime: text("realtime"),
        },
    };
    payload.validate()?;
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::validate_chain;
    use crate::tokens::SpaceToken;

    fn config(budget: u64) -> ConsortiumConfig {
        ConsortiumConfig {
            members: [NodeId(1), NodeId(2)].into_iter().collect(),
            miners: [NodeId(1)].into_iter().collect(),
            budget,
            fractions: ConsortiumConfig::uniform_fractions(),
            beneficiary: NodeId(9),
        }
    }

    fn sample_payload(phase: MissionPhase) -> PhasePayload {
        match phase {
            MissionPhase::MissionAnalysisIdentification => PhasePayload::Requirements {
                requirements: vec!["imaging".into(), "two-way comms".into()],
            },
            MissionPhase::FeasibilityStudy => PhasePayload::CostEstimates {
                estimates: vec![("bus".into(), 250), ("payload".into(), 350)],
            },
            MissionPhase::PreliminaryDesign => PhasePayload::DesignSchedule {
                interfaces: vec!["power-bus".into()],
                schedule: vec![("design-review".into(), 120)],
            },
            MissionPhase::DetailedDesign => PhasePayload::ModelMetadata {
                stm: "stm-v1".into(),
                em: "em-v1".into(),
            },
            MissionPhase::QualificationProduction => PhasePayload::FlightQualification {
                fm: "fm-v1".into(),
                test_results: vec![("thermal-vacuum".into(), true), ("vibration".into(), true)],
            },
            MissionPhase::LaunchingOperating => PhasePayload::LaunchOperations {
                launch_control: "lc-data".into(),
                tracking: "trk-data".into(),
                realtime: "rt-data".into(),
            },
        }
    }

    fn record(phase: MissionPhase, submitter: u64) -> PhaseRecord {
        PhaseRecord {
            phase,
            submitter: NodeId(submitter),
            payload: sample_payload(phase),
        }
    }

    #[test]
    fn full_lifecycle_yields_genesis_plus_six_blocks() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        for (i, phase) in MissionPhase::ALL.into_iter().enumerate() {
            let block = ledger.submit_phase(&record(phase, 1), i as u64 + 1).unwrap();
            assert_eq!(block.header.index, i as u64 + 1);
        }
        assert_eq!(ledger.chain.height(), 7);
        assert_eq!(ledger.committed_phase(), 6);
        assert!(validate_chain(&ledger.chain, CONSORTIUM_DIFFICULTY).is_valid());

        // Phase ordinals along the chain are exactly 1..=6.
        let ordinals: Vec<u8> = ledger
            .chain
            .blocks()
            .iter()
            .skip(1)
            .filter_map(|b| match SpaceToken::decode(&b.transactions[0].payload) {
                Ok(SpaceToken::MissionPhase { phase, .. }) => Some(phase),
                _ => None,
            })
            .collect();
        assert_eq!(ordinals, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn out_of_order_submission_rejected_chain_unchanged() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 1), 1)
            .unwrap();
        ledger
            .submit_phase(&record(MissionPhase::FeasibilityStudy, 1), 2)
            .unwrap();
        let height = ledger.chain.height();
        let err = ledger
            .submit_phase(&record(MissionPhase::DetailedDesign, 1), 3)
            .unwrap_err();
        assert_eq!(err, MissionError::OutOfOrder { expected: 3, got: 4 });
        assert_eq!(ledger.chain.height(), height);
    }

    #[test]
    fn duplicate_phase_rejected() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 1), 1)
            .unwrap();
        let err = ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 2), 2)
            .unwrap_err();
        assert_eq!(err, MissionError::DuplicatePhase(1));
    }

    #[test]
    fn unauthorized_submitter_rejected() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        let err = ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 77), 1)
            .unwrap_err();
        assert_eq!(err, MissionError::UnauthorizedSubmitter(NodeId(77)));
        assert_eq!(ledger.chain.height(), 1);
    }

    #[test]
    fn equal_fractions_release_equal_amounts() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        for (i, phase) in MissionPhase::ALL.into_iter().enumerate() {
            ledger.submit_phase(&record(phase, 1), i as u64 + 1).unwrap();
            let amount = ledger.release_funds(phase, i as u64 + 1).unwrap();
            assert_eq!(amount, 100);
            assert_eq!(ledger.released_total(), 100 * (i as u64 + 1));
        }
        assert_eq!(ledger.released_total(), 600);
        // 1 genesis + 6 phase blocks + 6 funding blocks.
        assert_eq!(ledger.chain.height(), 13);
    }

    #[test]
    fn release_requires_committed_phase_and_happens_once() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        let err = ledger
            .release_funds(MissionPhase::MissionAnalysisIdentification, 1)
            .unwrap_err();
        assert_eq!(err, MissionError::PhaseNotCommitted(1));

        ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 1), 1)
            .unwrap();
        ledger
            .release_funds(MissionPhase::MissionAnalysisIdentification, 2)
            .unwrap();
        let err = ledger
            .release_funds(MissionPhase::MissionAnalysisIdentification, 3)
            .unwrap_err();
        assert_eq!(err, MissionError::AlreadyReleased(1));
    }

    #[test]
    fn conservation_with_indivisible_budget() {
        // 100 does not divide by 6; telescoping floors must conserve the
        // budget exactly.
        let mut ledger = MissionLedger::new(config(100), 0).unwrap();
        let mut total = 0;
        for (i, phase) in MissionPhase::ALL.into_iter().enumerate() {
            ledger.submit_phase(&record(phase, 1), i as u64 + 1).unwrap();
            total += ledger.release_funds(phase, i as u64 + 1).unwrap();
            assert!(total <= 100);
        }
        assert_eq!(total, 100);
        assert_eq!(ledger.released_total(), 100);
    }

    #[test]
    fn zero_fraction_phase_releases_nothing() {
        let mut cfg = config(600);
        cfg.fractions = [
            Ratio::new(0, 1),
            Ratio::new(1, 2),
            Ratio::new(1, 2),
            Ratio::new(0, 1),
            Ratio::new(0, 1),
            Ratio::new(0, 1),
        ];
        let mut ledger = MissionLedger::new(cfg, 0).unwrap();
        ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 1), 1)
            .unwrap();
        let height = ledger.chain.height();
        let amount = ledger
            .release_funds(MissionPhase::MissionAnalysisIdentification, 2)
            .unwrap();
        assert_eq!(amount, 0);
        // No funding token is minted for a zero amount.
        assert_eq!(ledger.chain.height(), height);
        assert_eq!(
            ledger.released_for(MissionPhase::MissionAnalysisIdentification),
            Some(0)
        );
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let mut cfg = config(600);
        cfg.fractions[5] = Ratio::new(1, 7);
        assert_eq!(
            MissionLedger::new(cfg, 0).unwrap_err(),
            MissionError::InvalidConfig("fractions must sum to 1")
        );
    }

    #[test]
    fn status_reports_progress() {
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        let status = ledger.status();
        assert_eq!(status.current_phase, 0);
        assert_eq!(status.released, 0);

        ledger
            .submit_phase(&record(MissionPhase::MissionAnalysisIdentification, 1), 1)
            .unwrap();
        ledger
            .submit_phase(&record(MissionPhase::FeasibilityStudy, 1), 2)
            .unwrap();
        ledger
            .release_funds(MissionPhase::MissionAnalysisIdentification, 3)
            .unwrap();
        ledger.release_funds(MissionPhase::FeasibilityStudy, 3).unwrap();
        let status = ledger.status();
        assert_eq!(status.current_phase, 2);
        assert_eq!(status.released, 200);
        assert_eq!(status.phase_blocks, vec![(1, 1), (2, 2)]);
        assert_eq!(
            status.to_string(),
            "phase=2 released=200 budget=600 heights=[1:1,2:2]"
        );
    }

    #[test]
    fn empty_payload_rejected() {
        let record = PhaseRecord {
            phase: MissionPhase::MissionAnalysisIdentification,
            submitter: NodeId(1),
            payload: PhasePayload::Requirements {
                requirements: Vec::new(),
            },
        };
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        assert_eq!(
            ledger.submit_phase(&record, 1).unwrap_err(),
            MissionError::InvalidRecord("phase payload must be nonempty")
        );
    }

    #[test]
    fn mismatched_payload_phase_rejected() {
        let record = PhaseRecord {
            phase: MissionPhase::FeasibilityStudy,
            submitter: NodeId(1),
            payload: sample_payload(MissionPhase::MissionAnalysisIdentification),
        };
        let mut ledger = MissionLedger::new(config(600), 0).unwrap();
        assert!(matches!(
            ledger.submit_phase(&record, 1).unwrap_err(),
            MissionError::InvalidRecord(_)
        ));
    }
}
