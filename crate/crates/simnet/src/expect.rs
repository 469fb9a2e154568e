//! Structural assertions over a finished transcript.

use serde::{Deserialize, Serialize};

use crate::transcript::{Record, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantifier {
    /// Every matching record agrees, and at least one exists.
    #[default]
    All,
    Any,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expectation {
    /// Verdicts recorded for `request` at `stage` (`local`, `review`,
    /// `apply`), optionally restricted to one node.
    Verdict {
        request: String,
        stage: String,
        verdict: String,
        #[serde(default)]
        node: Option<String>,
        #[serde(default)]
        quantifier: Quantifier,
    },
    /// Final status: approved, failed, refused or pending.
    Outcome { request: String, outcome: String },
    /// Final content of a transaction at every node.
    Content { target: String, content: String },
    /// Final canonical policy of a transaction at every node.
    Policy { target: String, policy: String },
    Balance { node: String, amount: u64 },
    Burned { amount: u64 },
    /// Every ledger snapshot sums to the minted total.
    Conservation,
    /// Every honest node's chain re-validates from genesis.
    ChainValid,
    /// Honest nodes agree on every Merkle root and on transaction state.
    RootsAgree,
    Group {
        epoch: u64,
        #[serde(default)]
        includes: Vec<String>,
        #[serde(default)]
        excludes: Vec<String>,
        #[serde(default)]
        collector: Option<String>,
    },
    /// Epoch in office at honest nodes when the run ends.
    FinalEpoch { epoch: u64 },
    Event {
        event: String,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        node: Option<String>,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        min: Option<usize>,
    },
}

fn check(t: &Transcript, e: &Expectation) -> Result<(), String> {
    let fin = t.final_record().ok_or("transcript has no final record")?;
    match e {
        Expectation::Verdict { request, stage, verdict, node, quantifier } => {
            let seen: Vec<(&str, &str)> = t
                .records
                .iter()
                .filter_map(|r| match r {
                    Record::Verdict { node: n, request: q, stage: s, verdict: v, .. }
                        if q == request && s == stage && node.as_ref().is_none_or(|x| x == n) =>
                    {
                        Some((n.as_str(), v.as_str()))
                    }
                    _ => None,
                })
                .collect();
            let hits = seen.iter().filter(|(_, v)| v == verdict).count();
            let ok = match quantifier {
                Quantifier::All => !seen.is_empty() && hits == seen.len(),
                Quantifier::Any => hits > 0,
                Quantifier::None => hits == 0,
            };
            if ok {
                Ok(())
            } else {
                Err(format!("{request}/{stage}: expected {quantifier:?} {verdict}, saw {seen:?}"))
            }
        }
        Expectation::Outcome { request, outcome } => match fin.1.get(request) {
            Some(o) if o == outcome => Ok(()),
            other => Err(format!("{request}: expected {outcome}, got {other:?}")),
        },
        Expectation::Content { target, content } => {
            for n in fin.0 {
                let got = n.txs.get(target).map(|s| s.content.as_str());
                if got != Some(content.as_str()) {
                    return Err(format!("{target} at {}: expected {content:?}, got {got:?}", n.name));
                }
            }
            Ok(())
        }
        Expectation::Policy { target, policy } => {
            for n in fin.0 {
                let got = n.txs.get(target).map(|s| s.policy.as_str());
                if got != Some(policy.as_str()) {
                    return Err(format!("{target} at {}: expected policy {policy:?}, got {got:?}", n.name));
                }
            }
            Ok(())
        }
        Expectation::Balance { node, amount } => match last_balances(t) {
            Some(Record::Balances { balances, .. }) if balances.get(node) == Some(amount) => Ok(()),
            Some(Record::Balances { balances, .. }) => {
                Err(format!("balance of {node}: expected {amount}, got {:?}", balances.get(node)))
            }
            _ => Err("no balance snapshot".into()),
        },
        Expectation::Burned { amount } => match last_balances(t) {
            Some(Record::Balances { burned, .. }) if burned == amount => Ok(()),
            Some(Record::Balances { burned, .. }) => Err(format!("burned: expected {amount}, got {burned}")),
            _ => Err("no balance snapshot".into()),
        },
        Expectation::Conservation => {
            let mut any = false;
            for r in &t.records {
                if let Record::Balances { slot, total, minted, .. } = r {
                    any = true;
                    if total != minted {
                        return Err(format!("slot {slot}: total {total} != minted {minted}"));
                    }
                }
            }
            if any {
                Ok(())
            } else {
                Err("no balance snapshot".into())
            }
        }
        Expectation::ChainValid => match fin.0.iter().find(|n| n.honest && !n.chain_valid) {
            Some(n) => Err(format!("chain at {} does not validate", n.name)),
            None => Ok(()),
        },
        Expectation::RootsAgree => {
            let honest: Vec<_> = fin.0.iter().filter(|n| n.honest).collect();
            let Some(first) = honest.first() else { return Err("no honest nodes".into()) };
            match honest.iter().find(|n| n.roots != first.roots || n.state != first.state) {
                Some(n) => Err(format!("{} disagrees with {}", n.name, first.name)),
                None => Ok(()),
            }
        }
        Expectation::Group { epoch, includes, excludes, collector } => {
            let g = t.records.iter().find_map(|r| match r {
                Record::Group { epoch: e, members, collector: c, .. } if e == epoch => Some((members, c)),
                _ => None,
            });
            let Some((members, c)) = g else { return Err(format!("no group for epoch {epoch}")) };
            let names: Vec<&str> = members.iter().map(|m| m.name.as_str()).collect();
            if let Some(x) = includes.iter().find(|x| !names.contains(&x.as_str())) {
                return Err(format!("epoch {epoch}: {x} not in {names:?}"));
            }
            if let Some(x) = excludes.iter().find(|x| names.contains(&x.as_str())) {
                return Err(format!("epoch {epoch}: {x} unexpectedly in group"));
            }
            match collector {
                Some(want) if want != c => Err(format!("epoch {epoch}: collector {c}, expected {want}")),
                _ => Ok(()),
            }
        }
        Expectation::FinalEpoch { epoch } => match fin.0.iter().find(|n| n.honest && n.epoch != Some(*epoch)) {
            Some(n) => Err(format!("{} ends in epoch {:?}, expected {epoch}", n.name, n.epoch)),
            None => Ok(()),
        },
        Expectation::Event { event, label, node, count, min } => {
            let n = t
                .events(event)
                .filter(|r| match r {
                    Record::Event { label: l, node: who, .. } => {
                        label.as_ref().is_none_or(|x| l.as_ref() == Some(x))
                            && node.as_ref().is_none_or(|x| x == who)
                    }
                    _ => false,
                })
                .count();
            match (count, min) {
                (Some(c), _) if n != *c => Err(format!("event {event}: expected {c}, saw {n}")),
                (_, Some(m)) if n < *m => Err(format!("event {event}: expected at least {m}, saw {n}")),
                (None, None) if n == 0 => Err(format!("event {event}: never happened")),
                _ => Ok(()),
            }
        }
    }
}

fn last_balances(t: &Transcript) -> Option<&Record> {
    t.records.iter().rev().find(|r| matches!(r, Record::Balances { .. }))
}

/// Checks every expectation and returns one line per failure.
pub fn transcript_assert(t: &Transcript, expectations: &[Expectation]) -> Result<(), Vec<String>> {
    let failures: Vec<String> = expectations.iter().filter_map(|e| check(t, e).err()).collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}
