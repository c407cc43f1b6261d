//! Chain export file format: one block per line, lowercase-hex fields
//! separated by `|`.
//!
//! ```text
//! index(16) | parent_hash(64) | tx_digest(64) | timestamp(16) | difficulty(8) | nonce(16) [| tx_hex ...]
//! ```
//!
//! Each transaction field is the hex of its canonical encoding; tx ids are
//! recomputed on import. Import only checks syntax — auditing the linkage
//! is `validate_chain`'s job, so tampered exports can still be loaded and
//! reported on.

use thiserror::Error;

use crate::ledger::{Block, BlockHash, BlockHeader, Chain, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {what}")]
pub struct ChainFileError {
    pub line: usize,
    pub what: String,
}

fn err(line: usize, what: impl Into<String>) -> ChainFileError {
    ChainFileError {
        line,
        what: what.into(),
    }
}

/// Renders a chain (committed blocks only) to the line format.
pub fn export_chain(chain: &Chain) -> String {
    let mut out = String::new();
    for block in chain.blocks() {
        let header = &block.header;
        out.push_str(&format!(
            "{:016x}|{}|{}|{:016x}|{:08x}|{:016x}",
            header.index,
            header.parent_hash.to_hex(),
            hex::encode(header.tx_digest),
            header.timestamp,
            header.difficulty,
            header.nonce,
        ));
        for tx in &block.transactions {
            out.push('|');
            out.push_str(&hex::encode(tx.canonical_bytes()));
        }
        out.push('\n');
    }
    out
}

fn parse_u64_hex(field: &str, line: usize, what: &str) -> Result<u64, ChainFileError> {
    u64::from_str_radix(field, 16).map_err(|_| err(line, format!("{what}: not a hex integer")))
}

/// Parses an export back into a chain. The mempool starts empty.
pub fn import_chain(text: &str) -> Result<Chain, ChainFileError> {
    let mut blocks = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < 6 {
            return Err(err(line_no, "expected at least 6 `|`-separated fields"));
        }
        let index = parse_u64_hex(fields[0], line_no, "index")?;
        let parent_hash = BlockHash::from_hex(fields[1])
            .ok_or_else(|| err(line_no, "parent_hash: expected 64 hex chars"))?;
        let tx_digest: [u8; 32] = hex::decode(fields[2])
            .ok()
            .and_then(|raw| raw.try_into().ok())
            .ok_or_else(|| err(line_no, "tx_digest: expected 64 hex chars"))?;
        let timestamp = parse_u64_hex(fields[3], line_no, "timestamp")?;
        let difficulty = parse_u64_hex(fields[4], line_no, "difficulty")? as u32;
        let nonce = parse_u64_hex(fields[5], line_no, "nonce")?;

        let mut transactions = Vec::new();
        for (pos, tx_hex) in fields[6..].iter().enumerate() {
            let raw = hex::decode(tx_hex)
                .map_err(|_| err(line_no, format!("transaction {pos}: invalid hex")))?;
            let tx = Transaction::decode_canonical(&raw)
                .map_err(|e| err(line_no, format!("transaction {pos}: {e}")))?;
            transactions.push(tx);
        }

        blocks.push(Block {
            header: BlockHeader {
                index,
                parent_hash,
                tx_digest,
                timestamp,
                nonce,
                difficulty,
            },
            transactions,
        });
    }
    if blocks.is_empty() {
        return Err(err(0, "chain file has no blocks"));
    }
    Ok(Chain::from_blocks_unchecked(blocks))
}
