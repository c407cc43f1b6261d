//! Line-oriented sectioned scenario format.
//!
//! A scenario file is a sequence of `[section]` headers and record lines.
//! Record lines are whitespace-separated `key=value` tokens; `#` starts a
//! comment. The grammar is documented in `docs/scenario_format.md`.

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use crate::link::LinkClass;
use crate::mission::MissionPhase;
use crate::types::{KinematicState, LatLon, NodeId, OrbitClass, TickInterval, ZoneId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {what}")]
pub struct ScenarioError {
    pub line: usize,
    pub what: String,
}

fn err(line: usize, what: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line,
        what: what.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralConfig {
    pub seed: u64,
    pub horizon: u64,
    pub difficulty: u32,
    pub capacity: usize,
    pub mine_interval: u64,
    pub drop_probability: f64,
    pub capture_ticks: u64,
    /// Scenarios must state their seed; wall-clock entropy never enters a
    /// run.
    seed_set: bool,
}

impl Default for GeneralConfig {
    fn default() -> GeneralConfig {
        GeneralConfig {
            seed: 0,
            horizon: 500,
            difficulty: 1,
            capacity: 10,
            mine_interval: 5,
            drop_probability: 0.0,
            capture_ticks: 1,
            seed_set: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKindSpec {
    Satellite,
    Ground,
    User,
    Tdrs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKindSpec,
    pub orbit: Option<OrbitClass>,
    pub state: Option<KinematicState>,
    pub full: bool,
    pub miner: bool,
    pub reader: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSpec {
    pub id: ZoneId,
    pub master: NodeId,
    pub orbit: OrbitClass,
    pub members: Vec<NodeId>,
    pub roster: Vec<NodeId>,
    pub difficulty: u32,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionSpec {
    pub members: Vec<NodeId>,
    pub miners: Vec<NodeId>,
    pub budget: u64,
    pub fractions: [Ratio<u64>; 6],
    pub beneficiary: NodeId,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerSpec {
    pub tdrs: NodeId,
    pub gs: NodeId,
    pub sat: NodeId,
    pub track: LatLon,
    pub rate_deg_per_tick: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebrisSpec {
    pub tick: u64,
    pub zone: ZoneId,
    pub debris_id: u64,
    pub state: KinematicState,
    pub radius_km: f64,
    pub threshold_km: f64,
    pub base_delta_km_s: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub tick: u64,
    pub query_id: u64,
    pub user: NodeId,
    pub via: NodeId,
    pub fee: u64,
    pub locations: Vec<LatLon>,
    pub timeframes: Vec<TickInterval>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptOp {
    Mfa {
        zone: ZoneId,
        initiator: NodeId,
        responder: NodeId,
        nonce: NonceArg,
    },
    Join {
        zone: ZoneId,
        candidate: NodeId,
        orbit: OrbitClass,
        votes: Vec<(NodeId, bool)>,
    },
    SubmitPhase {
        phase: MissionPhase,
        submitter: NodeId,
        fields: BTreeMap<String, String>,
    },
    ReleaseFunds {
        phase: MissionPhase,
    },
    Tx {
        issuer: NodeId,
        via: NodeId,
        fee: u64,
        decision: String,
    },
    Read {
        reader: NodeId,
        via: NodeId,
        block: Option<u64>,
        token: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonceArg {
    Correct,
    Stale,
    Literal(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub tick: u64,
    pub op: ScriptOp,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub general: GeneralConfig,
    pub links: Vec<(LinkClass, u64)>,
    pub nodes: Vec<NodeSpec>,
    pub zones: Vec<ZoneSpec>,
    pub mission: Option<MissionSpec>,
    pub followers: Vec<FollowerSpec>,
    pub debris: Vec<DebrisSpec>,
    pub queries: Vec<QuerySpec>,
    pub script: Vec<ScriptStep>,
}

/// One parsed record line: section-agnostic key=value pairs, repeats
/// allowed.
struct Record {
    line: usize,
    pairs: Vec<(String, String)>,
}

impl Record {
    fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn all(&self, key: &str) -> Vec<&str> {
        self.pairs
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn require(&self, key: &str) -> Result<&str, ScenarioError> {
        self.get(key)
            .ok_or_else(|| err(self.line, format!("missing field `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ScenarioError> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| err(self.line, format!("field `{key}`: cannot parse `{raw}`")))
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ScenarioError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| err(self.line, format!("field `{key}`: cannot parse `{raw}`"))),
        }
    }

    fn node_id(&self, key: &str) -> Result<NodeId, ScenarioError> {
        Ok(NodeId(self.parse(key)?))
    }

    fn node_list(&self, key: &str) -> Result<Vec<NodeId>, ScenarioError> {
        let raw = self.require(key)?;
        raw.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map(NodeId)
                    .map_err(|_| err(self.line, format!("field `{key}`: bad id `{s}`")))
            })
            .collect()
    }

    fn orbit(&self, key: &str) -> Result<OrbitClass, ScenarioError> {
        let raw = self.require(key)?;
        OrbitClass::parse(raw)
            .ok_or_else(|| err(self.line, format!("field `{key}`: unknown orbit `{raw}`")))
    }

    fn vec3(&self, key: &str) -> Result<[f64; 3], ScenarioError> {
        let raw = self.require(key)?;
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 3 {
            return Err(err(self.line, format!("field `{key}`: expected x,y,z")));
        }
        let mut out = [0.0; 3];
        for (i, part) in parts.iter().enumerate() {
            out[i] = part
                .parse()
                .map_err(|_| err(self.line, format!("field `{key}`: bad number `{part}`")))?;
        }
        Ok(out)
    }

    fn latlon(&self, raw: &str) -> Result<LatLon, ScenarioError> {
        let (lat, lon) = raw
            .split_once(',')
            .ok_or_else(|| err(self.line, format!("expected lat,lon in `{raw}`")))?;
        let lat = lat
            .parse()
            .map_err(|_| err(self.line, format!("bad latitude `{lat}`")))?;
        let lon = lon
            .parse()
            .map_err(|_| err(self.line, format!("bad longitude `{lon}`")))?;
        Ok(LatLon::new(lat, lon))
    }
}

fn parse_fraction(raw: &str, line: usize) -> Result<Ratio<u64>, ScenarioError> {
    if let Some((num, den)) = raw.split_once('/') {
        let num = num
            .parse()
            .map_err(|_| err(line, format!("bad fraction numerator `{num}`")))?;
        let den: u64 = den
            .parse()
            .map_err(|_| err(line, format!("bad fraction denominator `{den}`")))?;
        if den == 0 {
            return Err(err(line, "fraction denominator is zero"));
        }
        Ok(Ratio::new(num, den))
    } else {
        let whole: u64 = raw
            .parse()
            .map_err(|_| err(line, format!("bad fraction `{raw}`")))?;
        Ok(Ratio::from_integer(whole))
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::default();
        let mut section = String::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(err(line_no, "unterminated section header"));
                }
                section = line[1..line.len() - 1].to_string();
                continue;
            }

            let mut pairs = Vec::new();
            for token in line.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| {
                    err(line_no, format!("expected key=value, got `{token}`"))
                })?;
                pairs.push((key.to_string(), value.to_string()));
            }
            let record = Record {
                line: line_no,
                pairs,
            };

            match section.as_str() {
                "general" => scenario.apply_general(&record)?,
                "links" => {
                    for (key, value) in &record.pairs {
                        let class = LinkClass::from_key(key).ok_or_else(|| {
                            err(line_no, format!("unknown link class `{key}`"))
                        })?;
                        let ticks = value.parse().map_err(|_| {
                            err(line_no, format!("bad latency `{value}` for `{key}`"))
                        })?;
                        scenario.links.push((class, ticks));
                    }
                }
                "nodes" => scenario.nodes.push(parse_node(&record)?),
                "zones" => scenario.zones.push(parse_zone(&record)?),
                "mission" => {
                    if scenario.mission.is_some() {
                        return Err(err(line_no, "multiple mission records"));
                    }
                    scenario.mission = Some(parse_mission(&record)?);
                }
                "tdrs" => scenario.followers.push(parse_follower(&record)?),
                "debris" => scenario.debris.push(parse_debris(&record)?),
                "queries" => scenario.queries.push(parse_query(&record)?),
                "script" => scenario.script.push(parse_script(&record)?),
                "" => return Err(err(line_no, "record before any [section] header")),
                other => return Err(err(line_no, format!("unknown section `[{other}]`"))),
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    fn apply_general(&mut self, record: &Record) -> Result<(), ScenarioError> {
        for (key, value) in &record.pairs {
            let bad = |what: &str| err(record.line, format!("field `{key}`: {what} `{value}`"));
            match key.as_str() {
                "seed" => {
                    self.general.seed = value.parse().map_err(|_| bad("bad integer"))?;
                    self.general.seed_set = true;
                }
                "horizon" => {
                    self.general.horizon = value.parse().map_err(|_| bad("bad integer"))?
                }
                "difficulty" => {
                    self.general.difficulty = value.parse().map_err(|_| bad("bad integer"))?
                }
                "capacity" => {
                    self.general.capacity = value.parse().map_err(|_| bad("bad integer"))?
                }
                "mine_interval" => {
                    self.general.mine_interval = value.parse().map_err(|_| bad("bad integer"))?
                }
                "drop_probability" => {
                    self.general.drop_probability =
                        value.parse().map_err(|_| bad("bad number"))?
                }
                "capture_ticks" => {
                    self.general.capture_ticks = value.parse().map_err(|_| bad("bad integer"))?
                }
                other => {
                    return Err(err(
                        record.line,
                        format!("unknown [general] field `{other}`"),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Cross-record checks: id references resolve, ranges hold.
    fn validate(&self) -> Result<(), ScenarioError> {
        if !self.general.seed_set {
            return Err(err(0, "[general] seed is required"));
        }
        if self.general.mine_interval == 0 {
            return Err(err(0, "[general] mine_interval must be at least 1"));
        }
        if self.general.capacity == 0 {
            return Err(err(0, "[general] capacity must be at least 1"));
        }
        if self.general.difficulty > 16 {
            return Err(err(0, "[general] difficulty exceeds 16 nibbles"));
        }
        if !(0.0..1.0).contains(&self.general.drop_probability) {
            return Err(err(0, "[general] drop_probability must be in [0,1)"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                return Err(err(node.line, format!("duplicate node id {}", node.id)));
            }
            if node.kind == NodeKindSpec::Satellite && node.orbit.is_none() {
                return Err(err(node.line, "satellite nodes need an orbit"));
            }
        }
        let known = |id: &NodeId| ids.contains(id);
        for zone in &self.zones {
            for referenced in std::iter::once(&zone.master).chain(zone.members.iter()) {
                if !known(referenced) {
                    return Err(err(
                        zone.line,
                        format!("zone {} references undefined node {referenced}", zone.id),
                    ));
                }
            }
        }
        for follower in &self.followers {
            for referenced in [follower.tdrs, follower.gs, follower.sat] {
                if !known(&referenced) {
                    return Err(err(
                        follower.line,
                        format!("follower references undefined node {referenced}"),
                    ));
                }
            }
        }
        for query in &self.queries {
            for referenced in [query.user, query.via] {
                if !known(&referenced) {
                    return Err(err(
                        query.line,
                        format!("query {} references undefined node {referenced}", query.query_id),
                    ));
                }
            }
        }
        let zone_ids: std::collections::BTreeSet<ZoneId> =
            self.zones.iter().map(|z| z.id).collect();
        for spec in &self.debris {
            if !zone_ids.contains(&spec.zone) {
                return Err(err(
                    spec.line,
                    format!("debris references undefined zone {}", spec.zone),
                ));
            }
        }
        for step in &self.script {
            let check_node = |id: NodeId| -> Result<(), ScenarioError> {
                if known(&id) {
                    Ok(())
                } else {
                    Err(err(step.line, format!("script references undefined node {id}")))
                }
            };
            match &step.op {
                ScriptOp::Mfa {
                    zone,
                    initiator,
                    responder,
                    ..
                } => {
                    if !zone_ids.contains(zone) {
                        return Err(err(step.line, format!("undefined zone {zone}")));
                    }
                    check_node(*initiator)?;
                    check_node(*responder)?;
                }
                ScriptOp::Join {
                    zone, candidate, ..
                } => {
                    if !zone_ids.contains(zone) {
                        return Err(err(step.line, format!("undefined zone {zone}")));
                    }
                    check_node(*candidate)?;
                }
                ScriptOp::SubmitPhase { .. } | ScriptOp::ReleaseFunds { .. } => {
                    if self.mission.is_none() {
                        return Err(err(step.line, "mission script op without [mission]"));
                    }
                }
                ScriptOp::Tx { issuer, via, .. } => {
                    check_node(*issuer)?;
                    check_node(*via)?;
                }
                ScriptOp::Read { reader, via, .. } => {
                    check_node(*reader)?;
                    check_node(*via)?;
                }
            }
        }
        Ok(())
    }
}

fn parse_roles(record: &Record) -> Result<(bool, bool, bool), ScenarioError> {
    let mut full = false;
    let mut miner = false;
    let mut reader = false;
    if let Some(raw) = record.get("roles") {
        for role in raw.split(',').filter(|s| !s.is_empty()) {
            match role {
                "full" => full = true,
                "miner" => {
                    miner = true;
                    full = true;
                }
                "reader" => reader = true,
                other => {
                    return Err(err(record.line, format!("unknown role `{other}`")));
                }
            }
        }
    }
    Ok((full, miner, reader))
}

fn parse_node(record: &Record) -> Result<NodeSpec, ScenarioError> {
    let id = record.node_id("id")?;
    let kind = match record.require("kind")? {
        "satellite" => NodeKindSpec::Satellite,
        "ground" => NodeKindSpec::Ground,
        "user" => NodeKindSpec::User,
        "tdrs" => NodeKindSpec::Tdrs,
        other => return Err(err(record.line, format!("unknown node kind `{other}`"))),
    };
    let orbit = match record.get("orbit") {
        Some(raw) => Some(
            OrbitClass::parse(raw)
                .ok_or_else(|| err(record.line, format!("unknown orbit `{raw}`")))?,
        ),
        None => None,
    };
    let state = if record.get("pos").is_some() || record.get("vel").is_some() {
        Some(KinematicState::new(record.vec3("pos")?, record.vec3("vel")?))
    } else {
        None
    };
    let (full, miner, reader) = parse_roles(record)?;
    Ok(NodeSpec {
        id,
        kind,
        orbit,
        state,
        full,
        miner,
        reader,
        line: record.line,
    })
}

fn parse_zone(record: &Record) -> Result<ZoneSpec, ScenarioError> {
    Ok(ZoneSpec {
        id: ZoneId(record.parse("id")?),
        master: record.node_id("master")?,
        orbit: record.orbit("orbit")?,
        members: record.node_list("members")?,
        roster: match record.get("roster") {
            Some(_) => record.node_list("roster")?,
            None => Vec::new(),
        },
        difficulty: record.parse_opt("difficulty")?.unwrap_or(1),
        line: record.line,
    })
}

fn parse_mission(record: &Record) -> Result<MissionSpec, ScenarioError> {
    let raw_fractions = record.require("fractions")?;
    let parts: Vec<&str> = raw_fractions.split(',').collect();
    if parts.len() != 6 {
        return Err(err(record.line, "fractions must list exactly 6 entries"));
    }
    let mut fractions = [Ratio::from_integer(0); 6];
    for (i, part) in parts.iter().enumerate() {
        fractions[i] = parse_fraction(part, record.line)?;
    }
    Ok(MissionSpec {
        members: record.node_list("members")?,
        miners: record.node_list("miners")?,
        budget: record.parse("budget")?,
        fractions,
        beneficiary: record.node_id("beneficiary")?,
        line: record.line,
    })
}

fn parse_follower(record: &Record) -> Result<FollowerSpec, ScenarioError> {
    let track_raw = record.require("track")?.to_string();
    Ok(FollowerSpec {
        tdrs: record.node_id("tdrs")?,
        gs: record.node_id("gs")?,
        sat: record.node_id("sat")?,
        track: record.latlon(&track_raw)?,
        rate_deg_per_tick: record.parse("rate")?,
        line: record.line,
    })
}

fn parse_debris(record: &Record) -> Result<DebrisSpec, ScenarioError> {
    Ok(DebrisSpec {
        tick: record.parse("tick")?,
        zone: ZoneId(record.parse("zone")?),
        debris_id: record.parse("id")?,
        state: KinematicState::new(record.vec3("pos")?, record.vec3("vel")?),
        radius_km: record.parse("radius")?,
        threshold_km: record.parse_opt("threshold")?.unwrap_or(2.0),
        base_delta_km_s: record
            .parse_opt("mu")?
            .unwrap_or(crate::debris::BASE_MANEUVER_KM_S),
        line: record.line,
    })
}

fn parse_query(record: &Record) -> Result<QuerySpec, ScenarioError> {
    let mut locations = Vec::new();
    for raw in record.all("loc") {
        locations.push(record.latlon(raw)?);
    }
    let mut timeframes = Vec::new();
    for raw in record.all("frame") {
        let (start, end) = raw
            .split_once(',')
            .ok_or_else(|| err(record.line, format!("expected start,end in `{raw}`")))?;
        let start = start
            .parse()
            .map_err(|_| err(record.line, format!("bad tick `{start}`")))?;
        let end = end
            .parse()
            .map_err(|_| err(record.line, format!("bad tick `{end}`")))?;
        timeframes.push(TickInterval::new(start, end));
    }
    Ok(QuerySpec {
        tick: record.parse("tick")?,
        query_id: record.parse("id")?,
        user: record.node_id("user")?,
        via: record.node_id("via")?,
        fee: record.parse("fee")?,
        locations,
        timeframes,
        line: record.line,
    })
}

fn parse_phase(record: &Record) -> Result<MissionPhase, ScenarioError> {
    let ordinal: u8 = record.parse("phase")?;
    MissionPhase::from_ordinal(ordinal)
        .ok_or_else(|| err(record.line, format!("phase {ordinal} out of range 1..=6")))
}

fn parse_script(record: &Record) -> Result<ScriptStep, ScenarioError> {
    let tick = record.parse("tick")?;
    let op = match record.require("op")? {
        "mfa" => {
            let nonce = match record.require("nonce")? {
                "correct" => NonceArg::Correct,
                "stale" => NonceArg::Stale,
                literal => NonceArg::Literal(literal.parse().map_err(|_| {
                    err(
                        record.line,
                        format!("nonce must be correct, stale, or a number, got `{literal}`"),
                    )
                })?),
            };
            ScriptOp::Mfa {
                zone: ZoneId(record.parse("zone")?),
                initiator: record.node_id("initiator")?,
                responder: record.node_id("responder")?,
                nonce,
            }
        }
        "join" => {
            let mut votes = Vec::new();
            if let Some(raw) = record.get("votes") {
                for item in raw.split(',').filter(|s| !s.is_empty()) {
                    let (voter, verdict) = item.split_once(':').ok_or_else(|| {
                        err(record.line, format!("votes are voter:approve|reject, got `{item}`"))
                    })?;
                    let voter = NodeId(voter.parse().map_err(|_| {
                        err(record.line, format!("bad voter id `{voter}`"))
                    })?);
                    let approve = match verdict {
                        "approve" => true,
                        "reject" => false,
                        other => {
                            return Err(err(
                                record.line,
                                format!("vote must be approve or reject, got `{other}`"),
                            ))
                        }
                    };
                    votes.push((voter, approve));
                }
            }
            ScriptOp::Join {
                zone: ZoneId(record.parse("zone")?),
                candidate: record.node_id("candidate")?,
                orbit: record.orbit("orbit")?,
                votes,
            }
        }
        "submit-phase" => {
            let phase = parse_phase(record)?;
            let mut fields = BTreeMap::new();
            for (key, value) in &record.pairs {
                if !matches!(key.as_str(), "tick" | "op" | "phase" | "submitter") {
                    fields.insert(key.clone(), value.clone());
                }
            }
            ScriptOp::SubmitPhase {
                phase,
                submitter: record.node_id("submitter")?,
                fields,
            }
        }
        "release-funds" => ScriptOp::ReleaseFunds {
            phase: parse_phase(record)?,
        },
        "tx" => ScriptOp::Tx {
            issuer: record.node_id("issuer")?,
            via: record.node_id("via")?,
            fee: record.parse("fee")?,
            decision: record.require("decision")?.to_string(),
        },
        "read" => {
            let block = record.parse_opt("block")?;
            let token = record.get("token").map(str::to_string);
            if block.is_none() && token.is_none() {
                return Err(err(record.line, "read needs block=<i> or token=<hex>"));
            }
            ScriptOp::Read {
                reader: record.node_id("reader")?,
                via: record.node_id("via")?,
                block,
                token,
            }
        }
        other => return Err(err(record.line, format!("unknown script op `{other}`"))),
    };
    Ok(ScriptStep {
        tick,
        op,
        line: record.line,
    })
}
