use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use efrb_core::ledger::write_chain_log;
use efrb_simnet::{run, transcript_assert, Record, Scenario};

use crate::CliError;

pub const SEED_ENV: &str = "EFRB_SEED";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub scenario: PathBuf,
    /// Beats `EFRB_SEED`, which beats the file.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub chain_log: Option<PathBuf>,
    /// Whose chain goes to `chain_log`; defaults to the CA.
    pub node: Option<String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub checked: usize,
    pub failures: Vec<String>,
    pub events: usize,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} is not an unsigned integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn run_scenario(opts: &RunOptions) -> Result<RunReport, CliError> {
    let mut scenario = Scenario::load(&opts.scenario).map_err(|e| match e {
        efrb_simnet::ScenarioError::Io(io) => CliError::io(&opts.scenario, io),
        other => CliError::Scenario(other),
    })?;
    if let Some(seed) = opts.seed.or(seed_from_env()?) {
        scenario.seed = seed;
    }
    let output = run(&scenario)?;
    if let Some(path) = &opts.out {
        let mut w = create(path)?;
        output.transcript.write_ndjson(&mut w).map_err(|e| CliError::io(path, e))?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &opts.chain_log {
        let name = match &opts.node {
            Some(n) => n.clone(),
            None => scenario.nodes.iter().find(|n| n.has(efrb_simnet::Role::Ca)).expect("validated").name.clone(),
        };
        let chain = output.chains.get(&name).ok_or_else(|| CliError::Usage(format!("no node named {name}")))?;
        let mut w = create(path)?;
        write_chain_log(chain, &mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    let failures = transcript_assert(&output.transcript, &scenario.expect).err().unwrap_or_default();
    let events = output.transcript.records.iter().filter(|r| matches!(r, Record::Event { .. })).count();
    Ok(RunReport { scenario: scenario.name, seed: scenario.seed, checked: scenario.expect.len(), failures, events })
}
