//! Proof-of-work ledger: blocks, mining, verification, chain maintenance,
//! mempool, and fork choice.
//!
//! A block hash is the SHA-256 of the 92-byte canonical header layout
//! (big-endian throughout):
//!
//! ```text
//! index (8) || parent_hash (32) || tx_digest (32) || timestamp (8) || difficulty (4) || nonce (8)
//! ```
//!
//! Difficulty counts leading zero hex nibbles of the block hash. The nonce
//! search is sequential from zero so that identical inputs always produce
//! byte-identical blocks.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{ByteReader, ByteWriter};
use crate::types::NodeId;

pub const HASH_LEN: usize = 32;
pub const HEADER_ENCODING_LEN: usize = 92;
/// Difficulty is a count of hex nibbles, so 16 (the full width of a
/// 64-bit nonce in nibbles) is the largest meaningful target here.
pub const MAX_DIFFICULTY: u32 = 16;

fn sha256(data: &[u8]) -> [u8; 32] {
    let out = Sha256::digest(data);
    out.into()
}

/// Content digest identifying a transaction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl TxId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<TxId> {
        let raw = hex::decode(s).ok()?;
        let arr: [u8; 32] = raw.try_into().ok()?;
        Some(TxId(arr))
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({})", self.to_hex())
    }
}

/// Block hash code: the digest identifying a block.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub const ZERO: BlockHash = BlockHash([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<BlockHash> {
        let raw = hex::decode(s).ok()?;
        let arr: [u8; 32] = raw.try_into().ok()?;
        Some(BlockHash(arr))
    }

    /// Number of leading zero hex nibbles of the digest.
    pub fn leading_zero_nibbles(&self) -> u32 {
        let mut count = 0;
        for byte in self.0 {
            if byte == 0 {
                count += 2;
                continue;
            }
            if byte >> 4 == 0 {
                count += 1;
            }
            break;
        }
        count
    }
}

impl fmt::Display for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockHash({})", self.to_hex())
    }
}

/// A ledger transaction. The payload is the canonical byte encoding of one
/// space token; the ledger itself treats it as opaque bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    tx_id: TxId,
    pub timestamp: u64,
    pub issuer: NodeId,
    pub fee: u64,
    pub payload: Vec<u8>,
}

impl Transaction {
    pub fn new(timestamp: u64, issuer: NodeId, fee: u64, payload: Vec<u8>) -> Transaction {
        let mut tx = Transaction {
            tx_id: TxId([0u8; 32]),
            timestamp,
            issuer,
            fee,
            payload,
        };
        tx.tx_id = tx.compute_id();
        tx
    }

    /// Canonical encoding: timestamp (8) || issuer (8) || fee (8) ||
    /// payload length (4) || payload. The tx id is excluded.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_u64(self.timestamp);
        w.put_u64(self.issuer.0);
        w.put_u64(self.fee);
        w.put_bytes(&self.payload);
        w.into_bytes()
    }

    pub fn compute_id(&self) -> TxId {
        TxId(sha256(&self.canonical_bytes()))
    }

    pub fn id(&self) -> TxId {
        self.tx_id
    }

    pub fn verify_id(&self) -> bool {
        self.tx_id == self.compute_id()
    }

    pub fn decode_canonical(bytes: &[u8]) -> Result<Transaction, crate::codec::CodecError> {
        let mut r = ByteReader::new(bytes);
        let timestamp = r.u64()?;
        let issuer = NodeId(r.u64()?);
        let fee = r.u64()?;
        let payload = r.bytes()?;
        r.expect_end()?;
        Ok(Transaction::new(timestamp, issuer, fee, payload))
    }

    /// Test/tamper support: rebuilds a transaction with an explicit id
    /// instead of the recomputed one.
    pub fn with_forged_id(mut self, tx_id: TxId) -> Transaction {
        self.tx_id = tx_id;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub index: u64,
    pub parent_hash: BlockHash,
    pub tx_digest: [u8; 32],
    pub timestamp: u64,
    pub nonce: u64,
    pub difficulty: u32,
}

impl BlockHeader {
    /// The 92-byte hashing preimage.
    pub fn canonical_bytes(&self) -> [u8; HEADER_ENCODING_LEN] {
        let mut out = [0u8; HEADER_ENCODING_LEN];
        out[0..8].copy_from_slice(&self.index.to_be_bytes());
        out[8..40].copy_from_slice(&self.parent_hash.0);
        out[40..72].copy_from_slice(&self.tx_digest);
        out[72..80].copy_from_slice(&self.timestamp.to_be_bytes());
        out[80..84].copy_from_slice(&self.difficulty.to_be_bytes());
        out[84..92].copy_from_slice(&self.nonce.to_be_bytes());
        out
    }

    pub fn hash(&self) -> BlockHash {
        BlockHash(sha256(&self.canonical_bytes()))
    }
}

/// Hash of a block header per the canonical layout.
pub fn block_hash(header: &BlockHeader) -> BlockHash {
    header.hash()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    /// Digest over the concatenated canonical transaction encodings in
    /// block order.
    pub fn tx_digest_of(transactions: &[Transaction]) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for tx in transactions {
            hasher.update(tx.canonical_bytes());
        }
        hasher.finalize().into()
    }

    pub fn hash(&self) -> BlockHash {
        self.header.hash()
    }

    pub fn is_genesis(&self) -> bool {
        self.header.index == 0
    }
}

/// Why a block was rejected by verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("parent hash mismatch")]
    ParentMismatch,
    #[error("transaction id mismatch at position {position}")]
    TxIdMismatch { position: usize },
    #[error("transaction digest mismatch")]
    TxDigestMismatch,
    #[error("hash has {got} leading zero nibbles, {required} required")]
    DifficultyNotMet { required: u32, got: u32 },
    #[error("index {got} does not follow parent index {parent}")]
    IndexMismatch { parent: u64, got: u64 },
    #[error("duplicate transaction {tx_id}")]
    DuplicateTx { tx_id: TxId },
    #[error("non-genesis block has no transactions")]
    EmptyTransactions,
    #[error("genesis parent hash is not zero")]
    GenesisParentNotZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("invalid block: {0}")]
    InvalidBlock(#[from] RejectReason),
    #[error("nonce space exhausted at difficulty {difficulty}")]
    NonceExhausted { difficulty: u32 },
    #[error("difficulty {0} exceeds {MAX_DIFFICULTY} hex nibbles")]
    DifficultyTooHigh(u32),
    #[error("cannot mine from an empty mempool")]
    EmptyMempool,
    #[error("chains have different genesis blocks")]
    IncompatibleGenesis,
}

/// Fee-ordered set of unconfirmed transactions. Iteration yields highest
/// fee first; ties break toward the smaller tx id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mempool {
    queue: BTreeSet<(Reverse<u64>, TxId)>,
    txs: std::collections::BTreeMap<TxId, Transaction>,
}

impl Mempool {
    pub fn new() -> Mempool {
        Mempool::default()
    }

    /// Inserts a transaction. Returns false if it was already present.
    pub fn insert(&mut self, tx: Transaction) -> bool {
        if self.txs.contains_key(&tx.id()) {
            return false;
        }
        self.queue.insert((Reverse(tx.fee), tx.id()));
        self.txs.insert(tx.id(), tx);
        true
    }

    pub fn remove(&mut self, tx_id: TxId) -> Option<Transaction> {
        let tx = self.txs.remove(&tx_id)?;
        self.queue.remove(&(Reverse(tx.fee), tx_id));
        Some(tx)
    }

    pub fn contains(&self, tx_id: TxId) -> bool {
        self.txs.contains_key(&tx_id)
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Transactions in priority order: fee descending, tx id ascending.
    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.queue.iter().map(|(_, id)| &self.txs[id])
    }

    /// The top-fee selection of at most `capacity` transactions.
    pub fn select(&self, capacity: usize) -> Vec<Transaction> {
        self.iter().take(capacity).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedBlock {
    pub block: Block,
    /// Nonce values tried, i.e. final nonce + 1.
    pub attempts: u64,
}

fn search_nonce(mut header: BlockHeader, difficulty: u32) -> Result<(BlockHeader, u64), LedgerError> {
    let mut nonce: u64 = 0;
    loop {
        header.nonce = nonce;
        if header.hash().leading_zero_nibbles() >= difficulty {
            return Ok((header, nonce + 1));
        }
        nonce = nonce
            .checked_add(1)
            .ok_or(LedgerError::NonceExhausted { difficulty })?;
    }
}

/// Assembles and mines a block on top of `parent` from the top-fee
/// `capacity` entries of the mempool. The nonce search iterates 0, 1, 2, …
/// so the result is deterministic.
pub fn mine_block(
    mempool: &Mempool,
    parent: &Block,
    difficulty: u32,
    capacity: usize,
    timestamp: u64,
) -> Result<MinedBlock, LedgerError> {
    if difficulty > MAX_DIFFICULTY {
        return Err(LedgerError::DifficultyTooHigh(difficulty));
    }
    let transactions = mempool.select(capacity);
    if transactions.is_empty() {
        return Err(LedgerError::EmptyMempool);
    }
    let header = BlockHeader {
        index: parent.header.index + 1,
        parent_hash: parent.hash(),
        tx_digest: Block::tx_digest_of(&transactions),
        timestamp,
        nonce: 0,
        difficulty,
    };
    let (header, attempts) = search_nonce(header, difficulty)?;
    Ok(MinedBlock {
        block: Block {
            header,
            transactions,
        },
        attempts,
    })
}

/// Mines a genesis block. The transaction list may be empty here and only
/// here.
pub fn mine_genesis(
    transactions: Vec<Transaction>,
    difficulty: u32,
    timestamp: u64,
) -> Result<MinedBlock, LedgerError> {
    if difficulty > MAX_DIFFICULTY {
        return Err(LedgerError::DifficultyTooHigh(difficulty));
    }
    let header = BlockHeader {
        index: 0,
        parent_hash: BlockHash::ZERO,
        tx_digest: Block::tx_digest_of(&transactions),
        timestamp,
        nonce: 0,
        difficulty,
    };
    let (header, attempts) = search_nonce(header, difficulty)?;
    Ok(MinedBlock {
        block: Block {
            header,
            transactions,
        },
        attempts,
    })
}

fn verify_block_body(
    block: &Block,
    difficulty: u32,
    committed: &BTreeSet<TxId>,
) -> Result<(), RejectReason> {
    for (position, tx) in block.transactions.iter().enumerate() {
        if !tx.verify_id() {
            return Err(RejectReason::TxIdMismatch { position });
        }
    }
    if block.header.tx_digest != Block::tx_digest_of(&block.transactions) {
        return Err(RejectReason::TxDigestMismatch);
    }
    let got = block.hash().leading_zero_nibbles();
    if got < difficulty {
        return Err(RejectReason::DifficultyNotMet {
            required: difficulty,
            got,
        });
    }
    // The header's own difficulty field is an invariant of its hash too.
    if got < block.header.difficulty {
        return Err(RejectReason::DifficultyNotMet {
            required: block.header.difficulty,
            got,
        });
    }
    let mut seen = BTreeSet::new();
    for tx in &block.transactions {
        if committed.contains(&tx.id()) || !seen.insert(tx.id()) {
            return Err(RejectReason::DuplicateTx { tx_id: tx.id() });
        }
    }
    Ok(())
}

/// Verifies a block against its parent. Verification is recompute-and-
/// compare: the hash linkage, transaction digest, difficulty target, index
/// sequence, and duplicate-transaction checks are all re-derived from the
/// block contents.
pub fn verify_block(
    block: &Block,
    parent: &Block,
    difficulty: u32,
    committed: &BTreeSet<TxId>,
) -> Result<(), RejectReason> {
    if block.header.parent_hash != parent.hash() {
        return Err(RejectReason::ParentMismatch);
    }
    if block.transactions.is_empty() {
        return Err(RejectReason::EmptyTransactions);
    }
    verify_block_body(block, difficulty, committed)?;
    if block.header.index != parent.header.index + 1 {
        return Err(RejectReason::IndexMismatch {
            parent: parent.header.index,
            got: block.header.index,
        });
    }
    Ok(())
}

fn verify_genesis(block: &Block, difficulty: u32) -> Result<(), RejectReason> {
    if block.header.parent_hash != BlockHash::ZERO {
        return Err(RejectReason::GenesisParentNotZero);
    }
    if block.header.index != 0 {
        return Err(RejectReason::IndexMismatch {
            parent: 0,
            got: block.header.index,
        });
    }
    verify_block_body(block, difficulty, &BTreeSet::new())
}

/// Outcome of a full-history audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationReport {
    Valid,
    Invalid {
        first_invalid_index: u64,
        reason: RejectReason,
    },
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidationReport::Valid)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationReport::Valid => f.write_str("valid"),
            ValidationReport::Invalid {
                first_invalid_index,
                reason,
            } => write!(f, "first invalid index {first_invalid_index}: {reason}"),
        }
    }
}

/// Hash-linked chain of blocks plus the mempool of unconfirmed
/// transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
    pub mempool: Mempool,
    committed: BTreeSet<TxId>,
}

impl Chain {
    /// Starts a chain by mining a fresh genesis block.
    pub fn new(
        genesis_transactions: Vec<Transaction>,
        difficulty: u32,
        timestamp: u64,
    ) -> Result<Chain, LedgerError> {
        let mined = mine_genesis(genesis_transactions, difficulty, timestamp)?;
        Ok(Chain::from_blocks_unchecked(vec![mined.block]))
    }

    /// Builds a chain from existing blocks without verifying them; use
    /// `validate` to audit. Empty input is not meaningful and panics.
    pub fn from_blocks_unchecked(blocks: Vec<Block>) -> Chain {
        assert!(!blocks.is_empty(), "a chain has at least a genesis block");
        let committed = blocks
            .iter()
            .flat_map(|b| b.transactions.iter().map(|tx| tx.id()))
            .collect();
        Chain {
            blocks,
            mempool: Mempool::new(),
            committed,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain is never empty")
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn committed_ids(&self) -> &BTreeSet<TxId> {
        &self.committed
    }

    pub fn block_at(&self, index: u64) -> Option<&Block> {
        self.blocks.get(index as usize)
    }

    pub fn find_tx(&self, tx_id: TxId) -> Option<(&Block, &Transaction)> {
        for block in &self.blocks {
            if let Some(tx) = block.transactions.iter().find(|tx| tx.id() == tx_id) {
                return Some((block, tx));
            }
        }
        None
    }

    /// Appends a block after verifying it against the current tip; the
    /// block's transactions leave the mempool.
    pub fn append_block(&mut self, block: Block, difficulty: u32) -> Result<(), LedgerError> {
        verify_block(&block, self.tip(), difficulty, &self.committed)?;
        for tx in &block.transactions {
            self.committed.insert(tx.id());
            self.mempool.remove(tx.id());
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Mines the next block from this chain's mempool and appends it.
    pub fn mine_next(
        &mut self,
        difficulty: u32,
        capacity: usize,
        timestamp: u64,
    ) -> Result<MinedBlock, LedgerError> {
        let mined = mine_block(&self.mempool, self.tip(), difficulty, capacity, timestamp)?;
        self.append_block(mined.block.clone(), difficulty)?;
        Ok(mined)
    }

    /// Runs verification over the whole history and reports the earliest
    /// failing block index.
    pub fn validate(&self, difficulty: u32) -> ValidationReport {
        if let Err(reason) = verify_genesis(&self.blocks[0], difficulty) {
            return ValidationReport::Invalid {
                first_invalid_index: 0,
                reason,
            };
        }
        let mut committed: BTreeSet<TxId> =
            self.blocks[0].transactions.iter().map(|tx| tx.id()).collect();
        for i in 1..self.blocks.len() {
            if let Err(reason) =
                verify_block(&self.blocks[i], &self.blocks[i - 1], difficulty, &committed)
            {
                return ValidationReport::Invalid {
                    first_invalid_index: i as u64,
                    reason,
                };
            }
            committed.extend(self.blocks[i].transactions.iter().map(|tx| tx.id()));
        }
        ValidationReport::Valid
    }

    /// Replaces this chain's blocks with the winner of a fork resolution.
    /// Transactions committed only on the abandoned branch return to the
    /// mempool; transactions committed on the adopted branch leave it.
    pub fn reorg_to(&mut self, winner_blocks: &[Block]) {
        let winner_ids: BTreeSet<TxId> = winner_blocks
            .iter()
            .flat_map(|b| b.transactions.iter().map(|tx| tx.id()))
            .collect();
        for block in &self.blocks {
            for tx in &block.transactions {
                if !winner_ids.contains(&tx.id()) {
                    self.mempool.insert(tx.clone());
                }
            }
        }
        for id in &winner_ids {
            self.mempool.remove(*id);
        }
        self.blocks = winner_blocks.to_vec();
        self.committed = winner_ids;
    }
}

/// Full-history audit of a chain at the given difficulty.
pub fn validate_chain(chain: &Chain, difficulty: u32) -> ValidationReport {
    chain.validate(difficulty)
}

/// Fork choice: the longer chain wins; on equal length the chain whose tip
/// hash is lexicographically smaller as a hex string wins.
pub fn resolve_fork<'a>(a: &'a Chain, b: &'a Chain) -> Result<&'a Chain, LedgerError> {
    if a.genesis().hash() != b.genesis().hash() {
        return Err(LedgerError::IncompatibleGenesis);
    }
    if a.height() != b.height() {
        return Ok(if a.height() > b.height() { a } else { b });
    }
    // Hex is ordered the same as the raw bytes.
    Ok(if a.tip().hash().0 <= b.tip().hash().0 {
        a
    } else {
        b
    })
}
