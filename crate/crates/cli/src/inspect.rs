use std::fmt::Write as _;

use efrb_core::ledger::{Chain, Transaction, TxIndex};

use crate::CliError;

fn text(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => format!("{s:?}"),
        Err(_) => format!("0x{}", hex(bytes)),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn short(hex: String) -> String {
    hex.chars().take(16).collect()
}

/// Human-readable report on a chain, optionally zoomed in on one
/// transaction and followed by the verdict audit trail.
pub fn inspect(chain: &Chain, tx: Option<TxIndex>, audit: bool) -> Result<String, CliError> {
    let mut out = String::new();
    let head = chain.head();
    let valid = match chain.validate_chain() {
        Ok(()) => "valid".to_string(),
        Err(e) => format!("INVALID at height {}: {}", e.height, e.reason.code()),
    };
    let (mut imm, mut red, mut ele) = (0, 0, 0);
    for (_, t) in chain.transactions() {
        match t {
            Transaction::Immutable(_) => imm += 1,
            Transaction::Redactable(_) => red += 1,
            Transaction::Election(_) => ele += 1,
        }
    }
    let _ = writeln!(out, "blocks: {} (slots 0..={}), {valid}", chain.len(), head.slot());
    let _ = writeln!(out, "head: {}", head.hash().to_hex());
    let _ = writeln!(out, "transactions: {imm} immutable, {red} redactable, {ele} election");
    for (slot, rec) in chain.elections() {
        let g = &rec.group;
        let _ = writeln!(
            out,
            "election at slot {slot}: epoch {} window {}..={} members {} weight {} threshold >{} collector {}",
            g.epoch,
            rec.window.start,
            rec.window.end,
            g.members.len(),
            g.total_weight,
            g.ts_abs(),
            short(g.collector.to_hex())
        );
    }
    let _ = writeln!(out, "redactions applied: {}", chain.patches().len());

    if let Some(ind) = tx {
        let t = chain.tx(ind).ok_or_else(|| CliError::Usage(format!("no transaction at {ind}")))?;
        let _ = writeln!(out, "\ntransaction {ind} ({})", t.kind());
        match t {
            Transaction::Immutable(i) => {
                let _ = writeln!(out, "  content: {}", text(&i.content));
            }
            Transaction::Election(rec) => {
                for m in &rec.group.members {
                    let _ = writeln!(out, "  member {} weight {}", short(m.pk.to_hex()), m.weight);
                }
            }
            Transaction::Redactable(r) => {
                let history: Vec<_> = chain.redaction_history(ind).collect();
                if let Some(first) = history.first() {
                    let _ = writeln!(out, "  original: {} policy {}", text(&first.previous.content), first.previous.policy.canonical_text());
                }
                for p in &history {
                    let approvals = p.replacement.redaction.as_ref().and_then(|m| m.approval.as_ref());
                    let _ = writeln!(
                        out,
                        "  slot {}: {} -> {} policy {} (epoch {}, {} approvals)",
                        p.slot,
                        text(&p.previous.content),
                        text(&p.replacement.content),
                        p.replacement.policy.canonical_text(),
                        approvals.map_or(0, |a| a.epoch),
                        approvals.map_or(0, |a| a.entries.len()),
                    );
                }
                let _ = writeln!(out, "  current: {} policy {}", text(&r.content), r.policy.canonical_text());
                let _ = writeln!(out, "  owner: {}", short(r.owner_pk.to_hex()));
                if let Some(m) = &r.redaction {
                    let attrs: Vec<&str> = m.redactor_cert.attributes.iter().collect();
                    let _ = writeln!(out, "  last redactor: {} {:?}", short(m.redactor_cert.subject_pk.to_hex()), attrs);
                }
            }
        }
    }

    if audit {
        let _ = writeln!(out, "\naudit trail: {} entries", chain.audit().len());
        for a in chain.audit() {
            let _ = writeln!(out, "  slot {} tx {} {} {}", a.slot, a.ind, a.verdict, short(a.tx_digest.to_hex()));
        }
    }
    Ok(out)
}
