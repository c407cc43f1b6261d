//! Scenario runner and inspection tool.
//!
//! Exit codes are a contract: 0 success, 1 invariant violation (including
//! an invalid chain under `validate`), 2 usage or config errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use orbitledger_core::bench::mining_attempt_stats;
use orbitledger_core::chainfile::import_chain;
use orbitledger_core::ledger::{validate_chain, ValidationReport};
use orbitledger_core::runner::{run_scenario, RunArtifacts};
use orbitledger_core::scenario::Scenario;
use orbitledger_core::tokens::{SpaceToken, TokenId};
use orbitledger_core::types::NodeId;

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "orbitledger",
    about = "Deterministic simulator of a blockchain-coordinated satellite network",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit a chain export; prints "valid" or the first invalid index.
    Validate {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        difficulty: u32,
    },
    /// Decode blocks or tokens from a chain export.
    Inspect {
        #[arg(long)]
        chain: PathBuf,
        /// Block index to dump.
        #[arg(long)]
        block: Option<u64>,
        /// Token id (hex) to look up.
        #[arg(long)]
        token: Option<String>,
    },
    /// Mine trial blocks and print attempt statistics.
    MineBench {
        #[arg(long)]
        difficulty: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a scenario and print each zone's status report.
    ZoneStatus {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to one zone id.
        #[arg(long)]
        zone: Option<u64>,
    },
    /// Run a scenario and print the mission lifecycle report.
    LifecycleStatus {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORBITLEDGER_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

/// Err means a usage/config problem (exit 2); Ok carries the final code.
fn run_command(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out),
        Command::Validate { chain, difficulty } => cmd_validate(&chain, difficulty),
        Command::Inspect {
            chain,
            block,
            token,
        } => cmd_inspect(&chain, block, token.as_deref()),
        Command::MineBench {
            difficulty,
            trials,
            seed,
        } => cmd_mine_bench(difficulty, trials, seed),
        Command::ZoneStatus {
            scenario,
            seed,
            zone,
        } => cmd_status(&scenario, seed, StatusKind::Zones { only: zone }),
        Command::LifecycleStatus { scenario, seed } => {
            cmd_status(&scenario, seed, StatusKind::Mission)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario {}: {e}", path.display()))?;
    Scenario::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn execute(path: &Path, seed: Option<u64>) -> Result<RunArtifacts, String> {
    let scenario = load_scenario(path)?;
    run_scenario(&scenario, seed).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<ExitCode, String> {
    let artifacts = execute(scenario, seed)?;
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let write = |name: String, contents: &str| -> Result<(), String> {
        let path = out.join(name);
        fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    write("events.log".to_string(), &artifacts.event_log)?;
    for (name, export) in &artifacts.chains {
        write(format!("{name}.chain.txt"), export)?;
    }
    for (name, report) in &artifacts.statuses {
        write(format!("status_{name}.txt"), report)?;
    }
    log::info!(
        "wrote {} artifacts to {}",
        1 + artifacts.chains.len() + artifacts.statuses.len(),
        out.display()
    );
    for violation in &artifacts.violations {
        eprintln!("violation: {violation}");
    }
    if artifacts.violations.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}

fn load_chain(path: &Path) -> Result<orbitledger_core::ledger::Chain, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read chain {}: {e}", path.display()))?;
    import_chain(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_validate(path: &Path, difficulty: u32) -> Result<ExitCode, String> {
    let chain = load_chain(path)?;
    let report = validate_chain(&chain, difficulty);
    match report {
        ValidationReport::Valid => {
            println!("valid");
            Ok(ExitCode::SUCCESS)
        }
        ValidationReport::Invalid {
            first_invalid_index,
            ..
        } => {
            println!("first invalid index {first_invalid_index}");
            println!("{report}");
            Ok(ExitCode::from(EXIT_VIOLATION))
        }
    }
}

fn describe_token(token: &SpaceToken) -> String {
    let id = token.token_id();
    let body = match token {
        SpaceToken::UserRequest {
            locations,
            timeframes,
        } => {
            let locs = locations
                .iter()
                .map(|l| format!("{},{}", l.lat_deg, l.lon_deg))
                .collect::<Vec<_>>()
                .join(";");
            let frames = timeframes
                .iter()
                .map(|t| format!("{}..{}", t.start, t.end))
                .collect::<Vec<_>>()
                .join(";");
            format!("locations=[{locs}] timeframes=[{frames}]")
        }
        SpaceToken::TransactionSession {
            session_id,
            uplink_metadata,
        } => format!("session={session_id} metadata={uplink_metadata}"),
        SpaceToken::Uplink {
            ground_station,
            tdrs,
            command,
        } => format!(
            "gs={ground_station} tdrs={tdrs} command_bytes={}",
            command.len()
        ),
        SpaceToken::DownlinkFeedback {
            image_digest,
            downlink_tick,
            start_tick,
            completion_tick,
            feedback,
        } => format!(
            "image={} downlink={downlink_tick} start={start_tick} completion={completion_tick} feedback={feedback}",
            short_hex(image_digest)
        ),
        SpaceToken::OrbitalAsset {
            kind,
            asset_id,
            owner,
            state,
        } => format!(
            "asset_kind={kind} asset_id={asset_id} owner={owner} pos={:?} vel={:?}",
            state.position_km, state.velocity_km_s
        ),
        SpaceToken::Maneuver { deltas } => {
            let parts = deltas
                .iter()
                .map(|(sat, dv)| format!("{sat}:{},{},{}", dv[0], dv[1], dv[2]))
                .collect::<Vec<_>>()
                .join(";");
            format!("deltas=[{parts}]")
        }
        SpaceToken::MissionPhase {
            phase,
            payload_digest,
            submitter,
        } => format!(
            "phase={phase} submitter={submitter} payload={}",
            short_hex(payload_digest)
        ),
        SpaceToken::Decision {
            text,
            source_contract,
        } => format!("text={text} contract={source_contract}"),
        SpaceToken::Funding {
            amount,
            beneficiary,
            milestone_phase,
        } => format!("amount={amount} beneficiary={beneficiary} phase={milestone_phase}"),
        SpaceToken::ZoneRegistration { zone_id, members } => {
            let roster = members
                .iter()
                .map(|(n, v)| format!("{n}:{v}"))
                .collect::<Vec<_>>()
                .join(",");
            format!("zone={zone_id} members=[{roster}]")
        }
    };
    format!("token kind={} id={id} {body}", token.kind_name())
}

/// Abbreviated digest for human-facing dumps.
fn short_hex(digest: &[u8; 32]) -> String {
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn cmd_inspect(path: &Path, block: Option<u64>, token: Option<&str>) -> Result<ExitCode, String> {
    let chain = load_chain(path)?;
    match (block, token) {
        (Some(index), None) => {
            let Some(block) = chain.block_at(index) else {
                println!("block {index} not found (height {})", chain.height());
                return Ok(ExitCode::SUCCESS);
            };
            println!(
                "block index={} hash={} parent={} timestamp={} difficulty={} nonce={} txs={}",
                block.header.index,
                block.hash(),
                block.header.parent_hash,
                block.header.timestamp,
                block.header.difficulty,
                block.header.nonce,
                block.transactions.len()
            );
            for tx in &block.transactions {
                print_tx(tx);
            }
            Ok(ExitCode::SUCCESS)
        }
        (None, Some(raw)) => {
            let token_id =
                TokenId::from_hex(raw).ok_or_else(|| format!("bad token id `{raw}`"))?;
            for block in chain.blocks() {
                for tx in &block.transactions {
                    if let Ok(decoded) = SpaceToken::decode(&tx.payload) {
                        if decoded.token_id() == token_id {
                            println!("found in block {}", block.header.index);
                            print_tx(tx);
                            return Ok(ExitCode::SUCCESS);
                        }
                    }
                }
            }
            println!("token {raw} not found");
            Ok(ExitCode::SUCCESS)
        }
        (None, None) => {
            for block in chain.blocks() {
                println!(
                    "block index={} hash={} txs={}",
                    block.header.index,
                    block.hash(),
                    block.transactions.len()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        (Some(_), Some(_)) => Err("pass either --block or --token, not both".to_string()),
    }
}

fn print_tx(tx: &orbitledger_core::ledger::Transaction) {
    let issuer: NodeId = tx.issuer;
    match SpaceToken::decode(&tx.payload) {
        Ok(token) => println!(
            "  tx id={} issuer={issuer} fee={} {}",
            tx.id(),
            tx.fee,
            describe_token(&token)
        ),
        Err(err) => println!(
            "  tx id={} issuer={issuer} fee={} undecodable payload ({err})",
            tx.id(),
            tx.fee
        ),
    }
}

fn cmd_mine_bench(difficulty: u32, trials: u64, seed: u64) -> Result<ExitCode, String> {
    if trials == 0 {
        return Err("trials must be at least 1".to_string());
    }
    let stats = mining_attempt_stats(difficulty, trials, seed).map_err(|e| e.to_string())?;
    println!(
        "difficulty={difficulty} trials={trials} min={} mean={:.2} max={}",
        stats.min_attempts, stats.mean_attempts, stats.max_attempts
    );
    Ok(ExitCode::SUCCESS)
}

enum StatusKind {
    Zones { only: Option<u64> },
    Mission,
}

fn cmd_status(path: &Path, seed: Option<u64>, kind: StatusKind) -> Result<ExitCode, String> {
    let artifacts = execute(path, seed)?;
    match kind {
        StatusKind::Zones { only } => {
            let report = artifacts
                .statuses
                .iter()
                .find(|(name, _)| name == "zones")
                .map(|(_, text)| text.as_str())
                .unwrap_or("");
            let mut printed = false;
            for line in report.lines() {
                let keep = match only {
                    None => true,
                    Some(zone) => line.starts_with(&format!("zone={zone} ")),
                };
                if keep {
                    println!("{line}");
                    printed = true;
                }
            }
            if !printed {
                println!("no matching zones");
            }
        }
        StatusKind::Mission => {
            match artifacts.statuses.iter().find(|(name, _)| name == "mission") {
                Some((_, text)) => print!("{text}"),
                None => println!("no mission configured"),
            }
        }
    }
    if artifacts.violations.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for violation in &artifacts.violations {
            eprintln!("violation: {violation}");
        }
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}
