//! Timing experiments: group initialization, transaction generation,
//! request generation and redaction verification.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use efrb_core::crypto::{ds_kgen, Digest, SigningKeyPair};
use efrb_core::ledger::{build_redactable_tx, Chain, ChainConfig, RedactableTransaction, Transaction, TxIndex};
use efrb_core::policy::{issue_certificate, parse_policy, AttributeCertificate, AttributeSet, Policy};
use efrb_core::redaction::{
    attach_approval, cast_vote, collect, make_request, validate_redacted_tx, CollectOutcome, RedactionError,
    RedactionReject, RedactionRequest,
};
use efrb_core::witness::{
    form_group, sel, verify_election_record, vsel_candidate, ElectionRecord, Ratio, SelConfig, SlotRange,
    WitnessCandidate, WitnessGroup,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::CliError;

pub const MIN_ITERATIONS: usize = 30;
pub const DEFAULT_WGN: u64 = 50;
pub const DEFAULT_ATTRS: u64 = 10;
pub const DEFAULT_POLICY: u64 = 10;
const DEPOSIT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Init,
    Gentx,
    Genreq,
    Verify,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::Init, Experiment::Gentx, Experiment::Genreq, Experiment::Verify];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Init => "init",
            Experiment::Gentx => "gentx",
            Experiment::Genreq => "genreq",
            Experiment::Verify => "verify",
        }
    }

    /// Parameters that may be swept; the first is the default.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            Experiment::Init => &["wgn"],
            Experiment::Gentx => &["policy"],
            Experiment::Genreq => &["attrs"],
            Experiment::Verify => &["wgn", "attrs"],
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown experiment {s:?}; expected init, gentx, genreq or verify")))
    }
}

/// `param=values`, where values is `a..b` (inclusive, step 50 or given
/// as `a..b:step`) or a comma list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<u64>,
}

impl FromStr for Sweep {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("bad sweep {s:?}; expected param=a..b[:step] or param=a,b,c"));
        let (param, spec) = s.split_once('=').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let values = if let Some((a, rest)) = spec.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, st)) => (num(b)?, num(st)?),
                None => (num(rest)?, 50),
            };
            let a = num(a)?;
            if step == 0 || a > b {
                return Err(bad());
            }
            (a..=b).step_by(step as usize).collect()
        } else {
            spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if param.is_empty() || values.is_empty() || values.contains(&0) {
            return Err(bad());
        }
        Ok(Sweep { param: param.trim().to_string(), values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub experiment: String,
    pub param: String,
    pub value: u64,
    pub mean_s: f64,
    pub stddev_s: f64,
}

/// Mean and sample standard deviation of `iterations` timed calls, after
/// one untimed warm-up call.
pub fn measure(iterations: usize, mut f: impl FnMut()) -> (f64, f64) {
    f();
    let samples: Vec<f64> = (0..iterations)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Attribute names used to pad policies and certificates.
fn filler(n: u64) -> impl Iterator<Item = String> {
    (0..n).map(|i| format!("attr{i}"))
}

/// An OR over `n` attributes, the last one `Teacher`.
pub fn policy_text(n: u64) -> String {
    let mut parts: Vec<String> = filler(n.saturating_sub(1)).collect();
    parts.push("Teacher".into());
    parts.join(" OR ")
}

/// Witnesses with lottery proofs for the first select period, and the
/// chain whose genesis they are anchored to.
pub struct Federation {
    pub rng: ChaCha20Rng,
    pub ca: SigningKeyPair,
    pub chain: Chain,
    pub window: SlotRange,
    pub witnesses: Vec<SigningKeyPair>,
    pub candidates: Vec<WitnessCandidate>,
    pub deposits: BTreeMap<efrb_core::crypto::PublicKey, u64>,
}

impl Federation {
    pub fn new(wgn: u64, seed: u64) -> Result<Self, CliError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = ds_kgen(&mut rng);
        let sel_config = SelConfig {
            tv: Digest::with_leading_zero_bits(1),
            epoch_len: 100,
            sp_len: 10,
            wgn: wgn as usize,
            ts_fraction: Ratio::new(2, 3),
        };
        let config = ChainConfig::new(Digest::with_leading_zero_bits(8), ca.pk, sel_config);
        let chain = Chain::new(config)?;
        let window = chain.config().witness.election_window(0);
        let tv = chain.config().witness.tv;
        let mut witnesses = Vec::new();
        let mut candidates = Vec::new();
        while (candidates.len() as u64) < wgn {
            let w = ds_kgen(&mut rng);
            let (weight, proof) = sel(&chain, &tv, window, &w.pk, 16, &mut rng);
            if weight > 0 {
                candidates.push(WitnessCandidate { pk: w.pk, weight, proof });
                witnesses.push(w);
            }
        }
        let deposits = witnesses.iter().map(|w| (w.pk, DEPOSIT)).collect();
        Ok(Federation { rng, ca, chain, window, witnesses, candidates, deposits })
    }

    /// Verifies every candidacy, forms the group and checks the resulting
    /// election record as a block validator would.
    pub fn initialize(&self) -> ElectionRecord {
        let c = &self.chain.config().witness;
        let verified: Vec<WitnessCandidate> =
            self.candidates.iter().filter(|cand| vsel_candidate(cand, self.window, &c.tv, &self.chain)).cloned().collect();
        let group = form_group(1, &verified, c.wgn, &self.deposits, DEPOSIT, c.ts_fraction).expect("candidates present");
        let record = ElectionRecord::assemble(self.window, group, &verified);
        verify_election_record(&record, &self.chain, c, None, None, self.window.end + 1).expect("record verifies");
        record
    }
}

/// A chain with an elected group, a block of redactable transactions
/// under `Teacher OR Student`, and a redactor certified for `attrs`
/// attributes including `Teacher`.
pub struct RedactionBench {
    pub fed: Federation,
    pub group: WitnessGroup,
    pub inds: Vec<TxIndex>,
    pub redactor: SigningKeyPair,
    pub cert: AttributeCertificate,
}

impl RedactionBench {
    pub fn new(wgn: u64, attrs: u64, seed: u64) -> Result<Self, CliError> {
        Self::with_txs(wgn, attrs, 1, seed)
    }

    pub fn with_txs(wgn: u64, attrs: u64, n_txs: usize, seed: u64) -> Result<Self, CliError> {
        let mut fed = Federation::new(wgn, seed)?;
        let record = fed.initialize();
        let group = record.group.clone();
        let owner = ds_kgen(&mut fed.rng);
        let policy = parse_policy("Teacher OR Student").expect("static policy");
        let mut txs = vec![Transaction::Election(record)];
        for i in 0..n_txs {
            let content = format!("record {i}");
            txs.push(Transaction::Redactable(build_redactable_tx(&owner, content.as_bytes(), policy.clone(), &mut fed.rng)?));
        }
        let slot = fed.window.end + 1;
        let block = fed.chain.build_block(slot, txs, 0)?;
        fed.chain
            .append_block(block)
            .map_err(|e| CliError::Usage(format!("bench fixture rejected: {}", e.reason.code())))?;
        let redactor = ds_kgen(&mut fed.rng);
        let mut names: Vec<String> = filler(attrs.saturating_sub(1)).collect();
        names.push("Teacher".into());
        let set = AttributeSet::new(names).expect("valid attribute names");
        let cert = issue_certificate(&fed.ca.sk, &redactor.pk, set).expect("valid certificate");
        let inds = (1..=n_txs as u64).map(|p| TxIndex::new(slot, p)).collect();
        Ok(RedactionBench { fed, group, inds, redactor, cert })
    }

    pub fn request_at(&self, ind: TxIndex, content: &[u8], policy: Option<Policy>) -> Result<RedactionRequest, RedactionError> {
        make_request(&self.fed.chain, ind, content, policy, &self.redactor.sk, &self.cert, 10)
    }

    pub fn request(&self) -> RedactionRequest {
        self.request_at(self.inds[0], b"grade: A", None).expect("authorized request")
    }

    /// Every witness votes; the collector stops at the threshold.
    pub fn approve(&self, req: &RedactionRequest) -> RedactableTransaction {
        let votes: Vec<_> = self.fed.witnesses.iter().map(|w| cast_vote(&w.sk, req, self.group.epoch)).collect();
        match collect(&votes, req, &self.group, true) {
            CollectOutcome::Approved(a) => attach_approval(req, a),
            other => panic!("unanimous vote did not pass: {other:?}"),
        }
    }

    pub fn approved(&self) -> RedactableTransaction {
        self.approve(&self.request())
    }

    pub fn check(&self, ind: TxIndex, tx: &RedactableTransaction) -> Result<(), RedactionReject> {
        validate_redacted_tx(tx, ind, &self.fed.chain, &self.group, &self.fed.ca.pk)
    }

    pub fn verify(&self, tx: &RedactableTransaction) -> bool {
        self.check(self.inds[0], tx).is_ok()
    }
}

/// Times one experiment at one point of its sweep. `fixed` supplies the
/// values of the parameters not being swept.
pub fn time_point(exp: Experiment, param: &str, value: u64, iterations: usize, seed: u64) -> Result<(f64, f64), CliError> {
    if !exp.params().contains(&param) {
        return Err(CliError::Usage(format!("{} sweeps {:?}, not {param:?}", exp.name(), exp.params())));
    }
    let iterations = iterations.max(1);
    Ok(match exp {
        Experiment::Init => {
            let fed = Federation::new(value, seed)?;
            measure(iterations, || {
                std::hint::black_box(fed.initialize());
            })
        }
        Experiment::Gentx => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let owner = ds_kgen(&mut rng);
            let text = policy_text(value);
            measure(iterations, || {
                let policy: Policy = parse_policy(&text).expect("generated policy parses");
                std::hint::black_box(build_redactable_tx(&owner, b"grade: B", policy, &mut rng).expect("non-empty"));
            })
        }
        Experiment::Genreq => {
            let b = RedactionBench::new(4, value, seed)?;
            measure(iterations, || {
                std::hint::black_box(b.request());
            })
        }
        Experiment::Verify => {
            let (wgn, attrs) = if param == "wgn" { (value, DEFAULT_ATTRS) } else { (DEFAULT_WGN, value) };
            let b = RedactionBench::new(wgn, attrs, seed)?;
            let tx = b.approved();
            assert!(b.verify(&tx), "fixture redaction must verify");
            measure(iterations, || {
                std::hint::black_box(b.verify(&tx));
            })
        }
    })
}

pub fn run_bench(exp: Experiment, sweep: &Sweep, iterations: usize, seed: u64) -> Result<Vec<BenchRow>, CliError> {
    if iterations < MIN_ITERATIONS {
        return Err(CliError::Usage(format!("at least {MIN_ITERATIONS} iterations per point")));
    }
    sweep
        .values
        .iter()
        .map(|&v| {
            let (mean_s, stddev_s) = time_point(exp, &sweep.param, v, iterations, seed)?;
            Ok(BenchRow { experiment: exp.name().into(), param: sweep.param.clone(), value: v, mean_s, stddev_s })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(())
}

/// Least-squares fit `y = a + b x`; returns `(slope, r_squared)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_syntax() {
        assert_eq!("wgn=50..300".parse::<Sweep>().unwrap().values, vec![50, 100, 150, 200, 250, 300]);
        assert_eq!("attrs=1..7:3".parse::<Sweep>().unwrap().values, vec![1, 4, 7]);
        assert_eq!("policy=5,10".parse::<Sweep>().unwrap().values, vec![5, 10]);
        for bad in ["wgn", "wgn=", "wgn=5..1", "wgn=1..5:0", "wgn=0,1", "wgn=a"] {
            assert!(bad.parse::<Sweep>().is_err(), "{bad}");
        }
    }

    #[test]
    fn experiment_names() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("setup".parse::<Experiment>().is_err());
    }

    #[test]
    fn fit_of_a_line() {
        let (b, r2) = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]);
        assert!((b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn policy_text_size() {
        let p = parse_policy(&policy_text(5)).unwrap();
        assert_eq!(p.attributes().len(), 5);
    }

    #[test]
    fn fixtures_verify() {
        let b = RedactionBench::new(6, 3, 1).unwrap();
        assert_eq!(b.group.members.len(), 6);
        let tx = b.approved();
        assert!(b.verify(&tx));
        assert!(time_point(Experiment::Verify, "policy", 5, 1, 1).is_err());
    }
}
