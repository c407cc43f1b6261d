//! Deterministic discrete-event simulator of a blockchain-coordinated
//! satellite network: a proof-of-work ledger carrying space digital
//! tokens, virtual-zone security protocols, a consortium mission
//! lifecycle, debris avoidance, and a relay query workflow.

pub mod bench;
pub mod chainfile;
pub mod codec;
pub mod debris;
pub mod ledger;
pub mod link;
pub mod mission;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod tdrs;
pub mod tokens;
pub mod types;
pub mod zones;
