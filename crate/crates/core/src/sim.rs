//! Deterministic discrete-event simulation of satellites, ground
//! stations, user terminals, and relays exchanging ledger messages.
//!
//! One logical thread processes events in (tick, insertion sequence)
//! order; node handlers never run concurrently. Everything that varies is
//! derived from the scenario seed, so a (scenario, seed) pair maps to one
//! event log.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chainfile::export_chain;
use crate::debris::{
    self, DebrisError, DebrisObject, ManeuverPlan, ReportDeduper, BASE_MANEUVER_KM_S,
};
use crate::ledger::{
    resolve_fork, Block, Chain, LedgerError, Transaction, TxId,
};
use crate::link::{Endpoint, LinkModel, MAX_TRANSMIT_ATTEMPTS};
use crate::mission::{MissionError, MissionLedger, MissionPhase, PhaseRecord};
use crate::tdrs::{
    self, Assignment, FollowerState, ImageQuery, TdrsError,
};
use crate::tokens::{SpaceToken, TokenId};
use crate::types::{vec_norm, vec_sub, KinematicState, NodeId, OrbitClass, ZoneId};
use crate::zones::{
    self, mfa_authenticate, request_join, JoinOutcome, JoinRules, MfaOutcome, VirtualZone,
    ZoneError,
};

pub type Tick = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event due at {due} is in the past (now {now})")]
    PastDue { due: Tick, now: Tick },
    #[error("invalid world config: {0}")]
    InvalidConfig(&'static str),
    #[error("node id {0} already attached")]
    DuplicateId(NodeId),
    #[error("invalid role flags: {0}")]
    InvalidRoles(&'static str),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a full node")]
    NotFullNode(NodeId),
    #[error("unknown zone {0}")]
    UnknownZone(ZoneId),
    #[error("zone {0} already exists")]
    DuplicateZone(ZoneId),
    #[error("transaction rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Debris(#[from] DebrisError),
    #[error(transparent)]
    Tdrs(#[from] TdrsError),
}

/// What a node does in the network. A miner is always a full node; a
/// reader-only node holds no replica and never mines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoleFlags {
    pub full_node: bool,
    pub miner: bool,
    pub reader_only: bool,
}

impl RoleFlags {
    pub fn full() -> RoleFlags {
        RoleFlags {
            full_node: true,
            ..RoleFlags::default()
        }
    }

    pub fn miner() -> RoleFlags {
        RoleFlags {
            full_node: true,
            miner: true,
            reader_only: false,
        }
    }

    pub fn reader() -> RoleFlags {
        RoleFlags {
            reader_only: true,
            ..RoleFlags::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.miner && !self.full_node {
            return Err(SimError::InvalidRoles("a miner must be a full node"));
        }
        if self.reader_only && (self.miner || self.full_node) {
            return Err(SimError::InvalidRoles(
                "a reader-only node holds no replica and never mines",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Satellite {
        orbit: OrbitClass,
        state: KinematicState,
    },
    GroundStation,
    UserTerminal,
    Tdrs,
}

impl NodeKind {
    pub fn endpoint(&self) -> Endpoint {
        match self {
            NodeKind::Satellite { orbit, .. } => Endpoint::Satellite(*orbit),
            NodeKind::GroundStation | NodeKind::UserTerminal => Endpoint::Ground,
            NodeKind::Tdrs => Endpoint::Tdrs,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Satellite { .. } => "satellite",
            NodeKind::GroundStation => "ground",
            NodeKind::UserTerminal => "user",
            NodeKind::Tdrs => "tdrs",
        }
    }
}

/// A simulated network participant.
#[derive(Debug, Clone)]
pub struct SimNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub roles: RoleFlags,
    /// Messages delivered but not consumed by a handler (query responses
    /// wait here for the caller).
    pub inbox: VecDeque<Message>,
    pub replica: Option<Chain>,
    /// Member-side view of each zone chain: the last verified block.
    zone_tips: BTreeMap<ZoneId, Block>,
}

impl SimNode {
    pub fn kinematics(&self) -> Option<KinematicState> {
        match &self.kind {
            NodeKind::Satellite { state, .. } => Some(*state),
            _ => None,
        }
    }

    pub fn zone_tip(&self, zone: ZoneId) -> Option<&Block> {
        self.zone_tips.get(&zone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSelector {
    BlockIndex(u64),
    Token(TokenId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    Block(Block),
    Tx(Transaction),
    NotFound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Block(Block),
    Tx(Transaction),
    ChainQuery {
        selector: ChainSelector,
        reply_to: NodeId,
    },
    ChainResponse {
        selector: ChainSelector,
        result: QueryResult,
    },
    ZoneBlock {
        zone: ZoneId,
        block: Block,
    },
    DebrisReport {
        zone: ZoneId,
        tx: Transaction,
        debris: DebrisObject,
        sensor: NodeId,
    },
    QueryNotify {
        query: ImageQuery,
        request_tx: TxId,
    },
    QueryBatch {
        gs: NodeId,
        queries: Vec<ImageQuery>,
    },
}

impl Message {
    fn kind_name(&self) -> &'static str {
        match self {
            Message::Block(_) => "block",
            Message::Tx(_) => "tx",
            Message::ChainQuery { .. } => "chain_query",
            Message::ChainResponse { .. } => "chain_response",
            Message::ZoneBlock { .. } => "zone_block",
            Message::DebrisReport { .. } => "debris_report",
            Message::QueryNotify { .. } => "query_notify",
            Message::QueryBatch { .. } => "query_batch",
        }
    }
}

/// Requested nonce behaviour for a scripted MFA exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonceSpec {
    /// Read the zone tip nonce at challenge time (the honest member path).
    Correct,
    /// Replay the previous block's nonce.
    Stale,
    /// Present a literal value.
    Literal(u64),
}

/// A zone security flow; at most one is in flight per zone.
#[derive(Debug, Clone, PartialEq)]
pub enum ZoneFlow {
    Mfa {
        initiator: NodeId,
        responder: NodeId,
        nonce: NonceSpec,
    },
    Join {
        candidate: NodeId,
        orbit: OrbitClass,
        votes: Vec<(NodeId, bool)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum ActiveFlow {
    Mfa {
        initiator: NodeId,
        responder: NodeId,
        presented: u64,
    },
    Join {
        candidate: NodeId,
        orbit: OrbitClass,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MissionAction {
    SubmitPhase(PhaseRecord),
    ReleaseFunds(MissionPhase),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Deliver {
        from: NodeId,
        to: NodeId,
        msg: Message,
    },
    MineTimer {
        node: NodeId,
    },
    DebrisSpawn {
        zone: ZoneId,
        debris: DebrisObject,
        threshold_km: f64,
        base_delta_km_s: f64,
    },
    QueryArrival {
        via: NodeId,
        query: ImageQuery,
    },
    FlowBegin {
        zone: ZoneId,
        flow: ZoneFlow,
    },
    FlowVotes {
        zone: ZoneId,
    },
    FlowConclude {
        zone: ZoneId,
    },
    MissionAction {
        action: MissionAction,
    },
    Completion {
        tdrs: NodeId,
        query_id: u64,
    },
    ReadRequest {
        reader: NodeId,
        via: NodeId,
        selector: ChainSelector,
    },
}

/// Line-delimited event log with fixed per-kind key order; bit-exact for
/// replay diffing.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    lines: Vec<String>,
}

impl EventLog {
    pub fn record(&mut self, tick: Tick, node: NodeId, kind: &str, fields: &[(&str, String)]) {
        let mut line = format!("t={tick} node={node} kind={kind}");
        for (key, value) in fields {
            let _ = write!(line, " {key}={value}");
        }
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
struct ZoneRuntime {
    zone: VirtualZone,
    dedup: ReportDeduper,
    active: Option<ActiveFlow>,
    queued: VecDeque<ZoneFlow>,
    /// threshold / base maneuver magnitude per debris id, captured at
    /// spawn time.
    debris_params: BTreeMap<u64, (f64, f64)>,
}

#[derive(Debug, Default)]
struct GsRuntime {
    /// Request tx id -> query, awaiting commitment of the request.
    pending: BTreeMap<TxId, ImageQuery>,
    /// Uplink tx id -> batch, awaiting commitment of the uplink token.
    awaiting_uplink: BTreeMap<TxId, Vec<ImageQuery>>,
    /// The relay this station uplinks to.
    tdrs: Option<NodeId>,
}

#[derive(Debug, Default)]
struct TdrsRuntime {
    followers: BTreeMap<NodeId, FollowerState>,
    assignment: Assignment,
    queries: BTreeMap<u64, ImageQuery>,
    /// Ground station to submit feedback through, per query.
    feedback_via: BTreeMap<u64, NodeId>,
    done: BTreeMap<u64, TxId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub horizon: Tick,
    pub difficulty: u32,
    pub capacity: usize,
    pub mine_interval: Tick,
    pub capture_ticks: u64,
    pub links: LinkModel,
}

impl Default for WorldConfig {
    fn default() -> WorldConfig {
        WorldConfig {
            seed: 0,
            horizon: 1000,
            difficulty: 1,
            capacity: 10,
            mine_interval: 5,
            capture_ticks: 1,
            links: LinkModel::default(),
        }
    }
}

/// The simulation world: nodes, zones, ledgers, and the event queue.
#[derive(Debug)]
pub struct World {
    cfg: WorldConfig,
    tick: Tick,
    seq: u64,
    queue: BTreeMap<(Tick, u64), SimEvent>,
    nodes: BTreeMap<NodeId, SimNode>,
    zones: BTreeMap<ZoneId, ZoneRuntime>,
    mission: Option<MissionLedger>,
    gs: BTreeMap<NodeId, GsRuntime>,
    relays: BTreeMap<NodeId, TdrsRuntime>,
    genesis_chain: Chain,
    rng: ChaCha8Rng,
    pub log: EventLog,
    violations: Vec<String>,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<World, SimError> {
        if cfg.mine_interval == 0 {
            return Err(SimError::InvalidConfig("mine_interval must be at least 1"));
        }
        if cfg.capacity == 0 {
            return Err(SimError::InvalidConfig("capacity must be at least 1"));
        }
        if !(0.0..1.0).contains(&cfg.links.drop_probability) {
            return Err(SimError::InvalidConfig("drop_probability must be in [0,1)"));
        }
        let genesis_chain = Chain::new(Vec::new(), cfg.difficulty, 0)?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(World {
            cfg,
            tick: 0,
            seq: 0,
            queue: BTreeMap::new(),
            nodes: BTreeMap::new(),
            zones: BTreeMap::new(),
            mission: None,
            gs: BTreeMap::new(),
            relays: BTreeMap::new(),
            genesis_chain,
            rng,
            log: EventLog::default(),
            violations: Vec::new(),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn current_tick(&self) -> Tick {
        self.tick
    }

    pub fn node(&self, id: NodeId) -> Option<&SimNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SimNode> {
        self.nodes.values()
    }

    pub fn zone(&self, id: ZoneId) -> Option<&VirtualZone> {
        self.zones.get(&id).map(|rt| &rt.zone)
    }

    pub fn zone_ids(&self) -> Vec<ZoneId> {
        self.zones.keys().copied().collect()
    }

    pub fn mission(&self) -> Option<&MissionLedger> {
        self.mission.as_ref()
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    // ----- construction ---------------------------------------------------

    /// Attaches a node. Full nodes receive a snapshot of the current
    /// winning chain; miners get a mining timer.
    pub fn attach_node(
        &mut self,
        id: NodeId,
        kind: NodeKind,
        roles: RoleFlags,
    ) -> Result<(), SimError> {
        roles.validate()?;
        if self.nodes.contains_key(&id) {
            return Err(SimError::DuplicateId(id));
        }
        let replica = if roles.full_node {
            Some(self.winning_chain())
        } else {
            None
        };
        self.nodes.insert(
            id,
            SimNode {
                id,
                kind,
                roles,
                inbox: VecDeque::new(),
                replica,
                zone_tips: BTreeMap::new(),
            },
        );
        if roles.miner {
            let first = (self.tick / self.cfg.mine_interval + 1) * self.cfg.mine_interval;
            if first <= self.cfg.horizon {
                self.push_event(first, SimEvent::MineTimer { node: id });
            }
        }
        Ok(())
    }

    /// The fork-choice winner across all full-node replicas, or the
    /// genesis chain when none exist yet.
    fn winning_chain(&self) -> Chain {
        let mut winner: Option<&Chain> = None;
        for node in self.nodes.values() {
            if let Some(chain) = &node.replica {
                winner = Some(match winner {
                    None => chain,
                    Some(current) => resolve_fork(current, chain).unwrap_or(current),
                });
            }
        }
        winner.cloned().unwrap_or_else(|| self.genesis_chain.clone())
    }

    /// Creates a virtual zone over attached satellite members and seeds
    /// every member's view with the zone genesis block.
    pub fn create_zone(
        &mut self,
        zone_id: ZoneId,
        master: NodeId,
        orbit: OrbitClass,
        members: &[NodeId],
        rules: JoinRules,
        difficulty: u32,
    ) -> Result<(), SimError> {
        if self.zones.contains_key(&zone_id) {
            return Err(SimError::DuplicateZone(zone_id));
        }
        if !self.nodes.contains_key(&master) {
            return Err(SimError::UnknownNode(master));
        }
        let mut swarm = Vec::new();
        for member in members {
            let node = self.nodes.get(member).ok_or(SimError::UnknownNode(*member))?;
            match node.kind {
                NodeKind::Satellite { orbit: o, .. } => swarm.push((*member, o)),
                _ => return Err(SimError::InvalidRoles("zone members must be satellites")),
            }
        }
        let zone = zones::create_zone(
            zone_id,
            master,
            orbit,
            &swarm,
            rules,
            difficulty,
            self.tick,
        )?;
        let genesis = zone.chain.genesis().clone();
        for member in members {
            if let Some(node) = self.nodes.get_mut(member) {
                node.zone_tips.insert(zone_id, genesis.clone());
            }
        }
        self.zones.insert(
            zone_id,
            ZoneRuntime {
                zone,
                dedup: ReportDeduper::new(),
                active: None,
                queued: VecDeque::new(),
                debris_params: BTreeMap::new(),
            },
        );
        Ok(())
    }

    pub fn init_mission(&mut self, ledger: MissionLedger) {
        self.mission = Some(ledger);
    }

    /// Registers a follower satellite under a relay and routes the ground
    /// station's uplinks to that relay.
    pub fn add_follower(
        &mut self,
        tdrs: NodeId,
        gs: NodeId,
        follower: FollowerState,
    ) -> Result<(), SimError> {
        if !self.nodes.contains_key(&tdrs) {
            return Err(SimError::UnknownNode(tdrs));
        }
        if !self.nodes.contains_key(&follower.satellite) {
            return Err(SimError::UnknownNode(follower.satellite));
        }
        let gs_node = self.nodes.get(&gs).ok_or(SimError::UnknownNode(gs))?;
        if !gs_node.roles.full_node {
            return Err(SimError::NotFullNode(gs));
        }
        self.relays
            .entry(tdrs)
            .or_default()
            .followers
            .insert(follower.satellite, follower);
        self.gs.entry(gs).or_default().tdrs = Some(tdrs);
        Ok(())
    }

    // ----- scheduling ------------------------------------------------------

    fn push_event(&mut self, due: Tick, event: SimEvent) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.insert((due, seq), event);
    }

    /// Schedules an event; the due tick must not be in the past.
    pub fn schedule(&mut self, due: Tick, event: SimEvent) -> Result<(), SimError> {
        if due < self.tick {
            return Err(SimError::PastDue {
                due,
                now: self.tick,
            });
        }
        self.push_event(due, event);
        Ok(())
    }

    /// Processes every event due at or before `until`, in (tick, insertion
    /// order). The current tick advances to `until`.
    pub fn run_until(&mut self, until: Tick) {
        while let Some((&(due, seq), _)) = self.queue.first_key_value() {
            if due > until {
                break;
            }
            let event = self.queue.remove(&(due, seq)).expect("key just observed");
            self.tick = due;
            self.handle(event);
        }
        self.tick = self.tick.max(until);
    }

    /// Runs the whole horizon.
    pub fn run(&mut self) {
        self.run_until(self.cfg.horizon);
    }

    // ----- node-facing operations -------------------------------------

    fn endpoint(&self, id: NodeId) -> Endpoint {
        self.nodes
            .get(&id)
            .map(|n| n.kind.endpoint())
            .unwrap_or(Endpoint::Ground)
    }

    fn same_zone(&self, a: NodeId, b: NodeId) -> bool {
        self.zones
            .values()
            .any(|rt| rt.zone.is_member(a) && rt.zone.is_member(b))
    }

    pub fn link_latency(&self, from: NodeId, to: NodeId) -> Tick {
        self.cfg
            .links
            .latency(self.endpoint(from), self.endpoint(to), self.same_zone(from, to))
    }

    /// Sends a message over the link, applying drop sampling and bounded
    /// retransmission when drops are enabled.
    fn send(&mut self, from: NodeId, to: NodeId, msg: Message) {
        let latency = self.link_latency(from, to);
        let p = self.cfg.links.drop_probability;
        let mut delay = latency;
        if p > 0.0 {
            let mut delivered = false;
            for attempt in 0..MAX_TRANSMIT_ATTEMPTS {
                if self.rng.random::<f64>() >= p {
                    delay = latency * (u64::from(attempt) + 1);
                    delivered = true;
                    break;
                }
            }
            if !delivered {
                self.log.record(
                    self.tick,
                    from,
                    "DROP",
                    &[("to", to.to_string()), ("msg", msg.kind_name().to_string())],
                );
                return;
            }
        }
        self.push_event(self.tick + delay, SimEvent::Deliver { from, to, msg });
    }

    /// Submits a transaction from `origin` through full node `via`.
    /// Malformed payloads are rejected immediately: the payload must
    /// decode to a valid token and the tx id must recompute.
    pub fn submit_transaction(
        &mut self,
        origin: NodeId,
        via: NodeId,
        tx: Transaction,
    ) -> Result<(), SimError> {
        if !self.nodes.contains_key(&origin) {
            return Err(SimError::UnknownNode(origin));
        }
        let via_node = self.nodes.get(&via).ok_or(SimError::UnknownNode(via))?;
        if !via_node.roles.full_node {
            return Err(SimError::NotFullNode(via));
        }
        validate_tx(&tx).map_err(SimError::Rejected)?;
        self.log.record(
            self.tick,
            origin,
            "TX_SUBMIT",
            &[
                ("via", via.to_string()),
                ("tx", tx.id().to_string()),
                ("fee", tx.fee.to_string()),
            ],
        );
        self.send(origin, via, Message::Tx(tx));
        Ok(())
    }

    /// Queries a full node's replica by block index or token id; the
    /// response lands in the reader's inbox after two link latencies.
    pub fn read_chain(
        &mut self,
        reader: NodeId,
        via: NodeId,
        selector: ChainSelector,
    ) -> Result<(), SimError> {
        if !self.nodes.contains_key(&reader) {
            return Err(SimError::UnknownNode(reader));
        }
        let via_node = self.nodes.get(&via).ok_or(SimError::UnknownNode(via))?;
        if !via_node.roles.full_node {
            return Err(SimError::NotFullNode(via));
        }
        self.log.record(
            self.tick,
            reader,
            "READ_QUERY",
            &[("via", via.to_string()), ("selector", selector_text(&selector))],
        );
        self.send(
            reader,
            via,
            Message::ChainQuery {
                selector,
                reply_to: reader,
            },
        );
        Ok(())
    }

    /// Broadcasts a block from a full node to every other full node.
    pub fn broadcast_block(&mut self, origin: NodeId, block: Block) {
        let peers: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.roles.full_node && n.id != origin)
            .map(|n| n.id)
            .collect();
        for peer in peers {
            self.send(origin, peer, Message::Block(block.clone()));
        }
    }

    fn broadcast_zone_block(&mut self, zone_id: ZoneId, block: Block) {
        let Some(rt) = self.zones.get(&zone_id) else {
            return;
        };
        let master = rt.zone.master;
        let members: Vec<NodeId> = rt.zone.members().keys().copied().collect();
        for member in members {
            self.send(master, member, Message::ZoneBlock {
                zone: zone_id,
                block: block.clone(),
            });
        }
    }

    // ----- event handlers ---------------------------------------------

    fn handle(&mut self, event: SimEvent) {
        match event {
            SimEvent::Deliver { from, to, msg } => self.on_deliver(from, to, msg),
            SimEvent::MineTimer { node } => self.on_mine_timer(node),
            SimEvent::DebrisSpawn {
                zone,
                debris,
                threshold_km,
                base_delta_km_s,
            } => self.on_debris_spawn(zone, debris, threshold_km, base_delta_km_s),
            SimEvent::QueryArrival { via, query } => self.on_query_arrival(via, query),
            SimEvent::FlowBegin { zone, flow } => self.on_flow_begin(zone, flow),
            SimEvent::FlowVotes { zone } => self.on_flow_votes(zone),
            SimEvent::FlowConclude { zone } => self.on_flow_conclude(zone),
            SimEvent::MissionAction { action } => self.on_mission_action(action),
            SimEvent::Completion { tdrs, query_id } => self.on_completion(tdrs, query_id),
            SimEvent::ReadRequest {
                reader,
                via,
                selector,
            } => {
                let _ = self.read_chain(reader, via, selector);
            }
        }
    }

    fn on_deliver(&mut self, from: NodeId, to: NodeId, msg: Message) {
        if !self.nodes.contains_key(&to) {
            return;
        }
        self.log.record(
            self.tick,
            to,
            "DELIVER",
            &[("from", from.to_string()), ("msg", msg.kind_name().to_string())],
        );
        match msg {
            Message::Block(block) => self.receive_block(to, block),
            Message::Tx(tx) => self.receive_tx(to, tx),
            Message::ChainQuery { selector, reply_to } => {
                let result = self.answer_query(to, &selector);
                self.send(to, reply_to, Message::ChainResponse { selector, result });
            }
            Message::ChainResponse { selector, result } => {
                self.log.record(
                    self.tick,
                    to,
                    "READ_RESPONSE",
                    &[
                        ("selector", selector_text(&selector)),
                        ("found", (!matches!(result, QueryResult::NotFound)).to_string()),
                    ],
                );
                if let Some(node) = self.nodes.get_mut(&to) {
                    node.inbox
                        .push_back(Message::ChainResponse { selector, result });
                }
            }
            Message::ZoneBlock { zone, block } => self.receive_zone_block(to, zone, block),
            Message::DebrisReport {
                zone,
                tx,
                debris,
                sensor,
            } => self.master_receive_report(to, zone, tx, debris, sensor),
            Message::QueryNotify { query, request_tx } => {
                self.gs
                    .entry(to)
                    .or_default()
                    .pending
                    .insert(request_tx, query);
            }
            Message::QueryBatch { gs, queries } => self.tdrs_receive_batch(to, gs, queries),
        }
    }

    fn answer_query(&self, via: NodeId, selector: &ChainSelector) -> QueryResult {
        let Some(chain) = self.nodes.get(&via).and_then(|n| n.replica.as_ref()) else {
            return QueryResult::NotFound;
        };
        match selector {
            ChainSelector::BlockIndex(index) => chain
                .block_at(*index)
                .cloned()
                .map(QueryResult::Block)
                .unwrap_or(QueryResult::NotFound),
            ChainSelector::Token(token_id) => {
                for block in chain.blocks() {
                    for tx in &block.transactions {
                        if SpaceToken::decode(&tx.payload)
                            .map(|t| t.token_id() == *token_id)
                            .unwrap_or(false)
                        {
                            return QueryResult::Tx(tx.clone());
                        }
                    }
                }
                QueryResult::NotFound
            }
        }
    }

    fn receive_tx(&mut self, to: NodeId, tx: Transaction) {
        let Some(node) = self.nodes.get_mut(&to) else {
            return;
        };
        if !node.roles.full_node {
            return;
        }
        if let Err(reason) = validate_tx(&tx) {
            self.log.record(
                self.tick,
                to,
                "TX_REJECT",
                &[("tx", tx.id().to_string()), ("reason", reason)],
            );
            return;
        }
        let chain = node.replica.as_mut().expect("full nodes hold a replica");
        if chain.committed_ids().contains(&tx.id()) || !chain.mempool.insert(tx.clone()) {
            return; // already known; do not re-gossip
        }
        self.log.record(
            self.tick,
            to,
            "TX_ACCEPT",
            &[("tx", tx.id().to_string()), ("fee", tx.fee.to_string())],
        );
        // Flood to the other full nodes; duplicates die out on arrival.
        let peers: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.roles.full_node && n.id != to)
            .map(|n| n.id)
            .collect();
        for peer in peers {
            self.send(to, peer, Message::Tx(tx.clone()));
        }
    }

    fn receive_block(&mut self, to: NodeId, block: Block) {
        let Some(node) = self.nodes.get(&to) else {
            return;
        };
        if !node.roles.full_node {
            return;
        }
        let chain = node.replica.as_ref().expect("full nodes hold a replica");
        let incoming_hash = block.hash();
        let index = block.header.index;

        // Already have this exact block.
        if chain
            .block_at(index)
            .is_some_and(|b| b.hash() == incoming_hash)
        {
            return;
        }

        // Fast path: extends the tip.
        if block.header.parent_hash == chain.tip().hash() {
            let difficulty = self.cfg.difficulty;
            let node = self.nodes.get_mut(&to).expect("checked above");
            let chain = node.replica.as_mut().expect("full nodes hold a replica");
            match chain.append_block(block.clone(), difficulty) {
                Ok(()) => {
                    self.log.record(
                        self.tick,
                        to,
                        "APPEND",
                        &[
                            ("index", index.to_string()),
                            ("hash", incoming_hash.to_string()),
                        ],
                    );
                    self.on_committed(to, &[block]);
                }
                Err(err) => {
                    self.log.record(
                        self.tick,
                        to,
                        "BLOCK_REJECT",
                        &[("index", index.to_string()), ("reason", err.to_string())],
                    );
                }
            }
            return;
        }

        // Fork candidate: the parent is somewhere in our history.
        let parent_index = index.checked_sub(1);
        let parent_matches = parent_index
            .and_then(|i| chain.block_at(i))
            .is_some_and(|b| b.hash() == block.header.parent_hash);
        if !parent_matches {
            self.log.record(
                self.tick,
                to,
                "BLOCK_REJECT",
                &[
                    ("index", index.to_string()),
                    ("reason", "unknown parent".to_string()),
                ],
            );
            return;
        }

        let mut candidate_blocks: Vec<Block> =
            chain.blocks()[..index as usize].to_vec();
        candidate_blocks.push(block);
        let candidate = Chain::from_blocks_unchecked(candidate_blocks);
        if !candidate.validate(self.cfg.difficulty).is_valid() {
            self.log.record(
                self.tick,
                to,
                "BLOCK_REJECT",
                &[
                    ("index", index.to_string()),
                    ("reason", "invalid fork candidate".to_string()),
                ],
            );
            return;
        }
        let adopt = match resolve_fork(chain, &candidate) {
            Ok(winner) => std::ptr::eq(winner, &candidate),
            Err(_) => false,
        };
        if adopt {
            let winner_blocks = candidate.blocks().to_vec();
            let new_blocks: Vec<Block> = winner_blocks
                .iter()
                .filter(|b| {
                    chain
                        .block_at(b.header.index)
                        .map(|mine| mine.hash() != b.hash())
                        .unwrap_or(true)
                })
                .cloned()
                .collect();
            let node = self.nodes.get_mut(&to).expect("checked above");
            let chain = node.replica.as_mut().expect("full nodes hold a replica");
            chain.reorg_to(&winner_blocks);
            let tip = chain.tip().hash();
            self.log.record(
                self.tick,
                to,
                "FORK_ADOPT",
                &[
                    ("height", winner_blocks.len().to_string()),
                    ("tip", tip.to_string()),
                ],
            );
            self.on_committed(to, &new_blocks);
        } else {
            self.log.record(
                self.tick,
                to,
                "FORK_KEEP",
                &[("competing", incoming_hash.to_string())],
            );
        }
    }

    fn on_mine_timer(&mut self, node_id: NodeId) {
        let next = self.tick + self.cfg.mine_interval;
        if next <= self.cfg.horizon {
            self.push_event(next, SimEvent::MineTimer { node: node_id });
        }
        let Some(node) = self.nodes.get_mut(&node_id) else {
            return;
        };
        if !node.roles.miner {
            return;
        }
        let chain = node.replica.as_mut().expect("miners hold a replica");
        if chain.mempool.is_empty() {
            return;
        }
        let (difficulty, capacity) = (self.cfg.difficulty, self.cfg.capacity);
        match chain.mine_next(difficulty, capacity, self.tick) {
            Ok(mined) => {
                let block = mined.block.clone();
                self.log.record(
                    self.tick,
                    node_id,
                    "MINE",
                    &[
                        ("index", block.header.index.to_string()),
                        ("hash", block.hash().to_string()),
                        ("txs", block.transactions.len().to_string()),
                        ("attempts", mined.attempts.to_string()),
                    ],
                );
                self.on_committed(node_id, std::slice::from_ref(&block));
                self.broadcast_block(node_id, block);
            }
            Err(err) => {
                self.log.record(
                    self.tick,
                    node_id,
                    "MINE_FAIL",
                    &[("reason", err.to_string())],
                );
            }
        }
    }

    /// Post-commit hooks: the ground-station uplink pipeline reacts to
    /// newly committed blocks on this node's replica.
    fn on_committed(&mut self, node_id: NodeId, blocks: &[Block]) {
        if !self.gs.contains_key(&node_id) {
            return;
        }
        let mut batch: Vec<(TxId, ImageQuery)> = Vec::new();
        let mut uplinks_done: Vec<TxId> = Vec::new();
        {
            let runtime = self.gs.get_mut(&node_id).expect("checked above");
            for block in blocks {
                for tx in &block.transactions {
                    if let Some(query) = runtime.pending.remove(&tx.id()) {
                        batch.push((tx.id(), query));
                    }
                    if runtime.awaiting_uplink.contains_key(&tx.id()) {
                        uplinks_done.push(tx.id());
                    }
                }
            }
        }

        // Committed request tokens batch into one uplink token.
        if !batch.is_empty() {
            let tdrs = self.gs.get(&node_id).and_then(|rt| rt.tdrs);
            if let Some(tdrs) = tdrs {
                let ids: Vec<u64> = batch.iter().map(|(_, q)| q.query_id).collect();
                let token = tdrs::uplink_token(node_id, tdrs, &ids);
                let tx = Transaction::new(self.tick, node_id, 0, token.encode());
                let queries: Vec<ImageQuery> =
                    batch.into_iter().map(|(_, q)| q).collect();
                self.log.record(
                    self.tick,
                    node_id,
                    "UPLINK",
                    &[
                        ("tdrs", tdrs.to_string()),
                        (
                            "queries",
                            ids.iter()
                                .map(u64::to_string)
                                .collect::<Vec<_>>()
                                .join(","),
                        ),
                        ("tx", tx.id().to_string()),
                    ],
                );
                self.gs
                    .get_mut(&node_id)
                    .expect("checked above")
                    .awaiting_uplink
                    .insert(tx.id(), queries);
                self.submit_local(node_id, tx);
            }
        }

        // Committed uplink tokens release their batch to the relay.
        for uplink_id in uplinks_done {
            let (tdrs, queries) = {
                let runtime = self.gs.get_mut(&node_id).expect("checked above");
                let queries = runtime.awaiting_uplink.remove(&uplink_id).expect("key seen");
                (runtime.tdrs, queries)
            };
            if let Some(tdrs) = tdrs {
                self.send(
                    node_id,
                    tdrs,
                    Message::QueryBatch {
                        gs: node_id,
                        queries,
                    },
                );
            }
        }
    }

    /// A full node inserting its own transaction into its local mempool
    /// and gossiping it out, with no inbound link traversal.
    pub fn submit_local(&mut self, node_id: NodeId, tx: Transaction) {
        let Some(node) = self.nodes.get_mut(&node_id) else {
            return;
        };
        let Some(chain) = node.replica.as_mut() else {
            return;
        };
        if chain.committed_ids().contains(&tx.id()) || !chain.mempool.insert(tx.clone()) {
            return;
        }
        let peers: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.roles.full_node && n.id != node_id)
            .map(|n| n.id)
            .collect();
        for peer in peers {
            self.send(node_id, peer, Message::Tx(tx.clone()));
        }
    }

    fn receive_zone_block(&mut self, to: NodeId, zone_id: ZoneId, block: Block) {
        let difficulty = match self.zones.get(&zone_id) {
            Some(rt) => rt.zone.difficulty,
            None => return,
        };
        let Some(node) = self.nodes.get_mut(&to) else {
            return;
        };
        let Some(tip) = node.zone_tips.get(&zone_id) else {
            return;
        };
        match crate::ledger::verify_block(&block, tip, difficulty, &Default::default()) {
            Ok(()) => {
                let index = block.header.index;
                let mut applied_delta: Option<[f64; 3]> = None;
                if let Ok(SpaceToken::Maneuver { deltas }) =
                    SpaceToken::decode(&block.transactions[0].payload)
                {
                    if let Some((_, dv)) = deltas.iter().find(|(sat, _)| *sat == to) {
                        if *dv != [0.0; 3] {
                            if let NodeKind::Satellite { state, .. } = &mut node.kind {
                                state.velocity_km_s = crate::types::vec_add(
                                    state.velocity_km_s,
                                    *dv,
                                );
                                applied_delta = Some(*dv);
                            }
                        }
                    }
                }
                node.zone_tips.insert(zone_id, block);
                self.log.record(
                    self.tick,
                    to,
                    "ZONE_APPEND",
                    &[
                        ("zone", zone_id.to_string()),
                        ("index", index.to_string()),
                    ],
                );
                if let Some(dv) = applied_delta {
                    self.log.record(
                        self.tick,
                        to,
                        "MANEUVER_APPLY",
                        &[
                            ("zone", zone_id.to_string()),
                            ("dv", format!("{},{},{}", dv[0], dv[1], dv[2])),
                        ],
                    );
                }
            }
            Err(reason) => {
                self.log.record(
                    self.tick,
                    to,
                    "ZONE_REJECT",
                    &[
                        ("zone", zone_id.to_string()),
                        ("reason", reason.to_string()),
                    ],
                );
            }
        }
    }

    fn on_debris_spawn(
        &mut self,
        zone_id: ZoneId,
        debris: DebrisObject,
        threshold_km: f64,
        base_delta_km_s: f64,
    ) {
        let Some(rt) = self.zones.get_mut(&zone_id) else {
            return;
        };
        rt.debris_params
            .insert(debris.debris_id, (threshold_km, base_delta_km_s));
        let master = rt.zone.master;

        // The member closest to the debris senses it.
        let members: Vec<NodeId> = rt.zone.members().keys().copied().collect();
        let mut sensor: Option<(f64, NodeId)> = None;
        for member in &members {
            let Some(state) = self.nodes.get(member).and_then(|n| n.kinematics()) else {
                continue;
            };
            let dist = vec_norm(vec_sub(state.position_km, debris.state.position_km));
            if sensor.is_none_or(|(best, _)| dist < best) {
                sensor = Some((dist, *member));
            }
        }
        let Some((_, sensor)) = sensor else {
            return;
        };
        self.log.record(
            self.tick,
            sensor,
            "DEBRIS_SPAWN",
            &[
                ("zone", zone_id.to_string()),
                ("debris", debris.debris_id.to_string()),
            ],
        );
        let rt = self.zones.get(&zone_id).expect("checked above");
        match debris::report_debris(sensor, &debris, &rt.zone, self.tick) {
            Ok(tx) => {
                self.send(
                    sensor,
                    master,
                    Message::DebrisReport {
                        zone: zone_id,
                        tx,
                        debris,
                        sensor,
                    },
                );
            }
            Err(err) => {
                self.log.record(
                    self.tick,
                    sensor,
                    "DEBRIS_REPORT_FAIL",
                    &[("reason", err.to_string())],
                );
            }
        }
    }

    fn master_receive_report(
        &mut self,
        master: NodeId,
        zone_id: ZoneId,
        tx: Transaction,
        debris: DebrisObject,
        sensor: NodeId,
    ) {
        let Some(rt) = self.zones.get_mut(&zone_id) else {
            return;
        };
        self.log.record(
            self.tick,
            master,
            "DEBRIS_REPORT",
            &[
                ("zone", zone_id.to_string()),
                ("debris", debris.debris_id.to_string()),
                ("sensor", sensor.to_string()),
            ],
        );
        if !rt.dedup.observe(debris.debris_id, self.tick) {
            self.log.record(
                self.tick,
                master,
                "DEBRIS_DEDUP",
                &[
                    ("zone", zone_id.to_string()),
                    ("debris", debris.debris_id.to_string()),
                ],
            );
            return;
        }
        let (threshold_km, base_delta) = rt
            .debris_params
            .get(&debris.debris_id)
            .copied()
            .unwrap_or((2.0, BASE_MANEUVER_KM_S));

        // The sensed-data token is distributed within the swarm on the
        // zone chain first.
        rt.zone.chain.mempool.insert(tx);
        let difficulty = rt.zone.difficulty;
        match rt.zone.chain.mine_next(difficulty, 1, self.tick) {
            Ok(mined) => {
                let report_block = mined.block;
                self.broadcast_zone_block(zone_id, report_block);
            }
            Err(err) => {
                self.violations
                    .push(format!("zone {zone_id}: report commit failed: {err}"));
                return;
            }
        }

        // Plan against the members' current states.
        let rt = self.zones.get(&zone_id).expect("checked above");
        let member_ids: Vec<NodeId> = rt.zone.members().keys().copied().collect();
        let mut states: BTreeMap<NodeId, KinematicState> = BTreeMap::new();
        for member in member_ids {
            if let Some(state) = self.nodes.get(&member).and_then(|n| n.kinematics()) {
                states.insert(member, state);
            }
        }
        match debris::plan_maneuvers(&debris.state, &states, threshold_km, base_delta, self.tick)
        {
            Ok(plan) => {
                self.log.record(
                    self.tick,
                    master,
                    "PLAN",
                    &[
                        ("zone", zone_id.to_string()),
                        ("debris", debris.debris_id.to_string()),
                        ("maneuvers", plan.nonzero_count().to_string()),
                        ("threshold_km", threshold_km.to_string()),
                    ],
                );
                let rt = self.zones.get_mut(&zone_id).expect("checked above");
                match debris::commit_plan(&mut rt.zone, &plan, self.tick) {
                    Ok(block) => self.broadcast_zone_block(zone_id, block),
                    Err(err) => self
                        .violations
                        .push(format!("zone {zone_id}: plan commit failed: {err}")),
                }
            }
            Err(err) => {
                self.log.record(
                    self.tick,
                    master,
                    "PLAN_UNAVOIDABLE",
                    &[
                        ("zone", zone_id.to_string()),
                        ("debris", debris.debris_id.to_string()),
                    ],
                );
                self.violations
                    .push(format!("zone {zone_id}: {err}"));
            }
        }
    }

    fn on_query_arrival(&mut self, via: NodeId, query: ImageQuery) {
        let user = query.requester;
        if let Err(err) = query.validate() {
            self.log.record(
                self.tick,
                user,
                "QUERY_REJECT",
                &[
                    ("query", query.query_id.to_string()),
                    ("reason", err.to_string()),
                ],
            );
            return;
        }
        let request = tdrs::user_request_token(&query).expect("validated above");
        let session = tdrs::session_token(&query);
        let request_tx = Transaction::new(self.tick, user, query.fee, request.encode());
        let session_tx = Transaction::new(self.tick, user, query.fee, session.encode());
        self.log.record(
            self.tick,
            user,
            "QUERY_SUBMIT",
            &[
                ("query", query.query_id.to_string()),
                ("fee", query.fee.to_string()),
                ("via", via.to_string()),
                ("request_tx", request_tx.id().to_string()),
                ("session_tx", session_tx.id().to_string()),
            ],
        );
        let request_id = request_tx.id();
        self.send(user, via, Message::Tx(request_tx));
        self.send(user, via, Message::Tx(session_tx));
        self.send(
            user,
            via,
            Message::QueryNotify {
                query,
                request_tx: request_id,
            },
        );
    }

    fn tdrs_receive_batch(&mut self, tdrs: NodeId, gs: NodeId, queries: Vec<ImageQuery>) {
        let runtime = self.relays.entry(tdrs).or_default();
        let fresh: Vec<ImageQuery> = queries
            .into_iter()
            .filter(|q| !runtime.queries.contains_key(&q.query_id))
            .collect();
        if fresh.is_empty() {
            return;
        }
        let capture = self.cfg.capture_ticks;
        let now = self.tick;
        match tdrs::reallocate_followers(now, &fresh, &mut runtime.followers, capture) {
            Ok(assignment) => {
                for query in &fresh {
                    runtime.queries.insert(query.query_id, query.clone());
                    runtime.feedback_via.insert(query.query_id, gs);
                }
                let mut scheduled = Vec::new();
                for (query_id, sat) in &assignment.assigned {
                    let start = assignment.start[query_id];
                    let completion = assignment.completion[query_id];
                    runtime.assignment.assigned.insert(*query_id, *sat);
                    runtime.assignment.start.insert(*query_id, start);
                    runtime.assignment.completion.insert(*query_id, completion);
                    scheduled.push((*query_id, *sat, start, completion));
                }
                for (query_id, sat, start, completion) in scheduled {
                    self.log.record(
                        now,
                        tdrs,
                        "ASSIGN",
                        &[
                            ("query", query_id.to_string()),
                            ("sat", sat.to_string()),
                            ("start", start.to_string()),
                            ("completion", completion.to_string()),
                        ],
                    );
                    if completion <= self.cfg.horizon {
                        self.push_event(completion, SimEvent::Completion { tdrs, query_id });
                    }
                }
            }
            Err(err) => {
                self.log.record(
                    now,
                    tdrs,
                    "ASSIGN_FAIL",
                    &[("reason", err.to_string())],
                );
            }
        }
    }

    fn on_completion(&mut self, tdrs: NodeId, query_id: u64) {
        let Some(runtime) = self.relays.get_mut(&tdrs) else {
            return;
        };
        if runtime.done.contains_key(&query_id) {
            return; // exactly one feedback per query
        }
        let Some(via) = runtime.feedback_via.get(&query_id).copied() else {
            return;
        };
        let downlink_latency = self.link_latency(tdrs, via);
        let runtime = self.relays.get_mut(&tdrs).expect("checked above");
        let token = match tdrs::downlink_feedback(
            self.tick,
            &runtime.assignment,
            query_id,
            downlink_latency,
        ) {
            Ok(token) => token,
            Err(err) => {
                self.log.record(
                    self.tick,
                    tdrs,
                    "FEEDBACK_FAIL",
                    &[
                        ("query", query_id.to_string()),
                        ("reason", err.to_string()),
                    ],
                );
                return;
            }
        };
        let fee = runtime
            .queries
            .get(&query_id)
            .map(|q| q.fee)
            .unwrap_or(0);
        let sat = runtime.assignment.assigned[&query_id];
        let tx = Transaction::new(self.tick, tdrs, fee, token.encode());
        runtime.done.insert(query_id, tx.id());
        self.log.record(
            self.tick,
            tdrs,
            "FEEDBACK",
            &[
                ("query", query_id.to_string()),
                ("sat", sat.to_string()),
                ("tx", tx.id().to_string()),
            ],
        );
        // Feedback is submitted through the ground station; if the relay
        // is itself a full node it still routes via the station, keeping
        // one downlink path.
        self.send(tdrs, via, Message::Tx(tx));
    }

    fn on_flow_begin(&mut self, zone_id: ZoneId, flow: ZoneFlow) {
        let Some(rt) = self.zones.get_mut(&zone_id) else {
            return;
        };
        if rt.active.is_some() {
            rt.queued.push_back(flow);
            return;
        }
        match flow {
            ZoneFlow::Mfa {
                initiator,
                responder,
                nonce,
            } => {
                let presented = match nonce {
                    NonceSpec::Correct => rt.zone.tip_nonce(),
                    NonceSpec::Stale => {
                        let chain = &rt.zone.chain;
                        let height = chain.height();
                        if height >= 2 {
                            chain.block_at(height - 2).expect("height checked").header.nonce
                        } else {
                            rt.zone.tip_nonce().wrapping_add(1)
                        }
                    }
                    NonceSpec::Literal(n) => n,
                };
                rt.active = Some(ActiveFlow::Mfa {
                    initiator,
                    responder,
                    presented,
                });
                self.log.record(
                    self.tick,
                    responder,
                    "MFA_CHALLENGE",
                    &[
                        ("zone", zone_id.to_string()),
                        ("challenger", responder.to_string()),
                        ("responder", initiator.to_string()),
                    ],
                );
                let latency = self.link_latency(initiator, responder);
                self.push_event(
                    self.tick + 2 * latency,
                    SimEvent::FlowConclude { zone: zone_id },
                );
            }
            ZoneFlow::Join {
                candidate,
                orbit,
                votes,
            } => {
                for (voter, approve) in votes {
                    rt.zone.rules.scripted_votes.insert((voter, candidate), approve);
                }
                rt.active = Some(ActiveFlow::Join { candidate, orbit });
                let master = rt.zone.master;
                self.log.record(
                    self.tick,
                    candidate,
                    "JOIN_REQUEST",
                    &[
                        ("zone", zone_id.to_string()),
                        ("orbit", orbit.to_string()),
                    ],
                );
                let latency = self.link_latency(candidate, master);
                self.push_event(self.tick + latency, SimEvent::FlowVotes { zone: zone_id });
                self.push_event(
                    self.tick + 2 * latency,
                    SimEvent::FlowConclude { zone: zone_id },
                );
            }
        }
    }

    fn on_flow_votes(&mut self, zone_id: ZoneId) {
        let Some(rt) = self.zones.get(&zone_id) else {
            return;
        };
        let Some(ActiveFlow::Join { candidate, orbit }) = rt.active.clone() else {
            return;
        };
        let votes = zones::poll_votes(&rt.zone, candidate, orbit);
        for (voter, approve) in votes {
            self.log.record(
                self.tick,
                voter,
                "JOIN_VOTE",
                &[
                    ("zone", zone_id.to_string()),
                    ("candidate", candidate.to_string()),
                    ("approve", approve.to_string()),
                ],
            );
        }
    }

    fn on_flow_conclude(&mut self, zone_id: ZoneId) {
        let Some(rt) = self.zones.get_mut(&zone_id) else {
            return;
        };
        let Some(active) = rt.active.take() else {
            return;
        };
        match active {
            ActiveFlow::Mfa {
                initiator,
                responder,
                presented,
            } => {
                let result =
                    mfa_authenticate(&mut rt.zone, initiator, responder, presented, self.tick);
                match result {
                    Ok((outcome, block)) => {
                        let outcome_text = match outcome {
                            MfaOutcome::Established { .. } => "established".to_string(),
                            MfaOutcome::Rejected(r) => format!("rejected:{r}"),
                        };
                        self.log.record(
                            self.tick,
                            responder,
                            "MFA_RESULT",
                            &[
                                ("zone", zone_id.to_string()),
                                ("initiator", initiator.to_string()),
                                ("outcome", outcome_text),
                            ],
                        );
                        if let Some(block) = block {
                            self.broadcast_zone_block(zone_id, block);
                        }
                    }
                    Err(err) => {
                        self.log.record(
                            self.tick,
                            responder,
                            "MFA_RESULT",
                            &[
                                ("zone", zone_id.to_string()),
                                ("initiator", initiator.to_string()),
                                ("outcome", format!("error:{err}")),
                            ],
                        );
                    }
                }
            }
            ActiveFlow::Join { candidate, orbit } => {
                let master = self.zones[&zone_id].zone.master;
                let rt = self.zones.get_mut(&zone_id).expect("checked above");
                match request_join(&mut rt.zone, candidate, orbit, self.tick) {
                    Ok((_votes, outcome, block)) => {
                        let (outcome_text, vid) = match outcome {
                            JoinOutcome::Admitted { virtual_id } => {
                                ("admitted".to_string(), virtual_id.to_string())
                            }
                            JoinOutcome::Intruder => ("intruder".to_string(), "-".to_string()),
                        };
                        self.log.record(
                            self.tick,
                            master,
                            "JOIN_RESULT",
                            &[
                                ("zone", zone_id.to_string()),
                                ("candidate", candidate.to_string()),
                                ("outcome", outcome_text),
                                ("vid", vid),
                            ],
                        );
                        // An admitted member starts tracking the zone chain
                        // from the membership block's parent view.
                        if matches!(outcome, JoinOutcome::Admitted { .. }) {
                            let parent_index = block.header.index - 1;
                            let parent = self.zones[&zone_id]
                                .zone
                                .chain
                                .block_at(parent_index)
                                .expect("parent of a fresh block exists")
                                .clone();
                            if let Some(node) = self.nodes.get_mut(&candidate) {
                                node.zone_tips.insert(zone_id, parent);
                            }
                        }
                        self.broadcast_zone_block(zone_id, block);
                    }
                    Err(err) => {
                        self.log.record(
                            self.tick,
                            master,
                            "JOIN_RESULT",
                            &[
                                ("zone", zone_id.to_string()),
                                ("candidate", candidate.to_string()),
                                ("outcome", format!("error:{err}")),
                                ("vid", "-".to_string()),
                            ],
                        );
                    }
                }
            }
        }
        // Start the next queued flow, if any.
        let next = self
            .zones
            .get_mut(&zone_id)
            .and_then(|rt| rt.queued.pop_front());
        if let Some(flow) = next {
            self.on_flow_begin(zone_id, flow);
        }
    }

    fn on_mission_action(&mut self, action: MissionAction) {
        let Some(mission) = self.mission.as_mut() else {
            self.violations
                .push("mission action scheduled without a mission ledger".to_string());
            return;
        };
        match action {
            MissionAction::SubmitPhase(record) => {
                let phase = record.phase.ordinal();
                let submitter = record.submitter;
                match mission.submit_phase(&record, self.tick) {
                    Ok(block) => {
                        let index = block.header.index;
                        let miner = mission.assigned_miner();
                        self.log.record(
                            self.tick,
                            submitter,
                            "PHASE_COMMIT",
                            &[
                                ("phase", phase.to_string()),
                                ("miner", miner.to_string()),
                                ("index", index.to_string()),
                            ],
                        );
                    }
                    Err(err) => {
                        self.log.record(
                            self.tick,
                            submitter,
                            "PHASE_REJECT",
                            &[
                                ("phase", phase.to_string()),
                                ("reason", err.to_string()),
                            ],
                        );
                    }
                }
            }
            MissionAction::ReleaseFunds(phase) => {
                let beneficiary = mission.config.beneficiary;
                match mission.release_funds(phase, self.tick) {
                    Ok(amount) => {
                        self.log.record(
                            self.tick,
                            beneficiary,
                            "FUND_RELEASE",
                            &[
                                ("phase", phase.ordinal().to_string()),
                                ("amount", amount.to_string()),
                            ],
                        );
                    }
                    Err(err) => {
                        self.log.record(
                            self.tick,
                            beneficiary,
                            "FUND_REJECT",
                            &[
                                ("phase", phase.ordinal().to_string()),
                                ("reason", err.to_string()),
                            ],
                        );
                    }
                }
            }
        }
    }

    // ----- post-run invariant checks ------------------------------------

    /// Runs the end-of-run invariant audit and returns the accumulated
    /// violations. Replica convergence is only meaningful at quiescence.
    pub fn finalize(&mut self) -> &[String] {
        let difficulty = self.cfg.difficulty;
        let mut exports: Vec<(NodeId, String)> = Vec::new();
        for node in self.nodes.values() {
            if let Some(chain) = &node.replica {
                let report = chain.validate(difficulty);
                if !report.is_valid() {
                    self.violations
                        .push(format!("node {}: replica invalid: {report}", node.id));
                }
                exports.push((node.id, export_chain(chain)));
            }
        }
        if let Some((first_id, first)) = exports.first() {
            for (id, export) in &exports[1..] {
                if export != first {
                    self.violations.push(format!(
                        "replica divergence: node {id} differs from node {first_id}"
                    ));
                }
            }
        }
        let lossless = self.cfg.links.drop_probability == 0.0;
        for (zone_id, rt) in &self.zones {
            let report = rt.zone.chain.validate(rt.zone.difficulty);
            if !report.is_valid() {
                self.violations
                    .push(format!("zone {zone_id}: chain invalid: {report}"));
            }
            for member in rt.zone.members().keys() {
                if rt.zone.intruders().contains(member) {
                    self.violations.push(format!(
                        "zone {zone_id}: node {member} is both member and intruder"
                    ));
                }
                if lossless {
                    let tip = rt.zone.chain.tip().hash();
                    let view = self
                        .nodes
                        .get(member)
                        .and_then(|n| n.zone_tips.get(zone_id))
                        .map(|b| b.hash());
                    // Members admitted or updated after the last block keep
                    // an older view only if no block followed; equality is
                    // required at quiescence.
                    if view != Some(tip) {
                        self.violations.push(format!(
                            "zone {zone_id}: member {member} view is stale"
                        ));
                    }
                }
            }
        }
        if let Some(mission) = &self.mission {
            let report = mission
                .chain
                .validate(crate::mission::CONSORTIUM_DIFFICULTY);
            if !report.is_valid() {
                self.violations
                    .push(format!("mission chain invalid: {report}"));
            }
            if mission.released_total() > mission.config.budget {
                self.violations.push(format!(
                    "mission released {} exceeds budget {}",
                    mission.released_total(),
                    mission.config.budget
                ));
            }
        }
        &self.violations
    }

    /// Test hook: delivers a message directly after the link latency,
    /// bypassing construction helpers (used to model in-flight tampering).
    pub fn inject_message(&mut self, from: NodeId, to: NodeId, msg: Message) {
        self.send(from, to, msg);
    }

    /// Mutable zone access for flows driven outside the event loop.
    pub fn zone_mut(&mut self, id: ZoneId) -> Option<&mut VirtualZone> {
        self.zones.get_mut(&id).map(|rt| &mut rt.zone)
    }

    /// Commits a maneuver plan on a zone chain and broadcasts the block to
    /// members (the sensing/planning path does this internally; exposed
    /// for scenario-driven plans).
    pub fn commit_zone_plan(
        &mut self,
        zone_id: ZoneId,
        plan: &ManeuverPlan,
    ) -> Result<(), SimError> {
        let rt = self
            .zones
            .get_mut(&zone_id)
            .ok_or(SimError::UnknownZone(zone_id))?;
        let block = debris::commit_plan(&mut rt.zone, plan, self.tick)?;
        self.broadcast_zone_block(zone_id, block);
        Ok(())
    }
}

fn validate_tx(tx: &Transaction) -> Result<(), String> {
    if !tx.verify_id() {
        return Err("tx id does not recompute".to_string());
    }
    let token = SpaceToken::decode(&tx.payload).map_err(|e| format!("payload: {e}"))?;
    token.validate().map_err(|e| e.to_string())?;
    Ok(())
}

fn selector_text(selector: &ChainSelector) -> String {
    match selector {
        ChainSelector::BlockIndex(index) => format!("block:{index}"),
        ChainSelector::Token(id) => format!("token:{id}"),
    }
}
