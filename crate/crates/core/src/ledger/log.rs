//! `chain.log`: newline-delimited JSON with the configuration first, then
//! every block as sealed, then redaction patches in application order, then
//! the verdict audit trail.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AuditEntry, Block, Chain, ChainConfig, LedgerError, PatchRecord};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
pub enum LogRecord {
    Config(ChainConfig),
    Block(Block),
    Patch(PatchRecord),
    Verdict(AuditEntry),
}

pub fn write_chain_log<W: Write>(chain: &Chain, mut out: W) -> Result<(), LedgerError> {
    let mut line = |rec: &LogRecord| -> Result<(), LedgerError> {
        serde_json::to_writer(&mut out, rec).map_err(|e| LedgerError::Log(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| LedgerError::Log(e.to_string()))
    };
    line(&LogRecord::Config(chain.config().clone()))?;
    for b in chain.original_blocks() {
        line(&LogRecord::Block(b))?;
    }
    for p in chain.patches() {
        line(&LogRecord::Patch(p.clone()))?;
    }
    for v in chain.audit() {
        line(&LogRecord::Verdict(v.clone()))?;
    }
    Ok(())
}

pub fn read_chain_log<R: BufRead>(input: R) -> Result<Chain, LedgerError> {
    let mut config = None;
    let mut blocks = Vec::new();
    let mut patches = Vec::new();
    let mut audit = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LedgerError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line)
            .map_err(|e| LedgerError::Log(format!("line {}: {e}", n + 1)))?;
        match rec {
            LogRecord::Config(c) if config.is_none() => config = Some(c),
            LogRecord::Config(_) => return Err(LedgerError::Log("duplicate config record".into())),
            LogRecord::Block(b) => blocks.push(b),
            LogRecord::Patch(p) => patches.push(p),
            LogRecord::Verdict(v) => audit.push(v),
        }
    }
    let config = config.ok_or_else(|| LedgerError::Log("missing config record".into()))?;
    Chain::from_parts(config, blocks, patches, audit)
}
