//! Provenance headers written at the top of every artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("binvqa ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            tool: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seed,
        }
    }

    /// Provenance for artifacts produced outside a configured run.
    pub fn adhoc(seed: u64) -> Self {
        Provenance::new("none", seed)
    }

    /// `# tool=... config=... seed=...` comment line, without newline.
    pub fn comment_line(&self) -> String {
        format!(
            "# tool={} config={} seed={}",
            self.tool.replace(' ', "/"),
            self.config_hash,
            self.seed
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
