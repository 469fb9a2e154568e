//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use efrb_cli::bench::{linear_fit, time_point, Experiment, RedactionBench};
use efrb_core::crypto::{
    adapt_exponent, ch_adapt, ch_hash, ch_kgen, ch_verify, commit, ds_kgen, ds_sign, PrimeOrderGroup, ToyGroup,
    STANDARD_GROUP,
};
use efrb_core::ledger::{Chain, ChainConfig, Transaction};
use efrb_core::policy::{issue_certificate, AttributeCertificate, AttributeSet};
use efrb_core::redaction::{redactor_message, vote_message, AggregatedApproval, ApprovalEntry, RedactionReject};
use efrb_core::witness::{sel, vsel, vsel_candidate, Member, Ratio, SelConfig, SlotRange, WitnessCandidate, WitnessGroup};
use efrb_core::crypto::Digest;
use efrb_simnet::{run, transcript_assert, Record, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn scenario(file: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn chameleon() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut failures = 0;
    for i in 0..1000u32 {
        let keys = ch_kgen(&STANDARD_GROUP, &mut rng);
        let m = format!("m{i}");
        let m2 = format!("m'{i}");
        let d = ch_hash(&STANDARD_GROUP, &keys.pk, m.as_bytes(), &mut rng);
        let r2 = ch_adapt(&STANDARD_GROUP, &keys.sk, &d.h, &d.r, m.as_bytes(), m2.as_bytes()).map_err(|e| e.to_string())?;
        if !ch_verify(&STANDARD_GROUP, &keys.pk, &d.h, &r2, m2.as_bytes()) {
            failures += 1;
        }
    }
    ensure(failures == 0, format!("{failures}/1000 standard round trips failed"))?;

    // Toy group: every adapted opening equals the brute-forced one.
    let (p, q, g) = (47u64, 23u64, 2u64);
    let pow = |b: u64, e: u64| (0..e).fold(1, |acc, _| acc * b % p);
    let group = ToyGroup::shipped();
    let mut cases = 0u32;
    for sk in 1..q {
        let pk = pow(g, sk);
        ensure(group.pow(&group.generator(), &sk) == pk, format!("toy pk mismatch at sk={sk}"))?;
        for r in 0..q {
            for e in 0..q {
                let h = pow(g, e) * pow(pk, r) % p;
                ensure(commit(&group, &pk, &e, &r) == h, "toy commitment mismatch")?;
                for e2 in 0..q {
                    let oracle = (0..q).find(|rr| pow(g, e2) * pow(pk, *rr) % p == h);
                    let got = adapt_exponent(&group, &sk, &r, &e, &e2).ok();
                    ensure(got == oracle, format!("toy adapt differs at sk={sk} r={r} e={e} e'={e2}"))?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("1000/1000 round trips, {cases} toy cases match the oracle"))
}

fn header_invariance() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut total = 0;
    for c in 0..100u64 {
        let mut b = RedactionBench::with_txs(5, 2, 5, 1000 + c).map_err(|e| e.to_string())?;
        let before = b.fed.chain.headers();
        let n = rng.gen_range(1..=5);
        for k in 0..n {
            let ind = b.inds[rng.gen_range(0..b.inds.len())];
            let content = format!("chain {c} edit {k} {}", rng.gen::<u32>());
            let req = b.request_at(ind, content.as_bytes(), None).map_err(|e| e.to_string())?;
            let tx = b.approve(&req);
            let slot = b.fed.chain.head().slot() + 1 + k as u64;
            let group = b.group.clone();
            b.fed.chain.apply_redaction(ind, tx, &group, slot).map_err(|r| format!("chain {c}: {}", r.code()))?;
            let now = b.fed.chain.tx(ind).and_then(Transaction::as_redactable).map(|t| t.content.clone());
            ensure(now.as_deref() == Some(content.as_bytes()), format!("chain {c}: content not replaced"))?;
            total += 1;
        }
        ensure(b.fed.chain.headers() == before, format!("chain {c}: headers changed"))?;
        b.fed.chain.validate_chain().map_err(|e| format!("chain {c}: {}", e.reason.code()))?;
    }
    Ok(format!("100 chains, {total} redactions, headers byte-identical"))
}

fn ablation() -> Verdict {
    let b = RedactionBench::new(5, 2, 9).map_err(|e| e.to_string())?;
    let ind = b.inds[0];
    let honest = b.approved();
    b.check(ind, &honest).map_err(|r| format!("honest control rejected: {}", r.code()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let resign = |t: &mut efrb_core::ledger::RedactableTransaction, cert: AttributeCertificate| {
        let meta = t.redaction.as_mut().expect("meta");
        meta.redactor_sig = ds_sign(&redactor_message(&t.content, &t.policy, &cert), &b.redactor.sk);
        meta.redactor_cert = cert;
    };
    let mut variants: Vec<(&str, efrb_core::ledger::RedactableTransaction)> = Vec::new();

    let mut t = honest.clone();
    t.redaction.as_mut().unwrap().approval.as_mut().unwrap().entries[0].sig.0[7] ^= 1;
    variants.push(("bad-witness-sig", t));

    let mut t = honest.clone();
    let a = t.redaction.as_mut().unwrap().approval.as_mut().unwrap();
    let lightest = *b.group.members.last().unwrap();
    a.entries.retain(|e| e.witness_pk == lightest.pk);
    a.claimed_weight = lightest.weight;
    variants.push(("weight-not-exceeded", t));

    let mut t = honest.clone();
    t.redaction.as_mut().unwrap().redactor_sig.0[3] ^= 1;
    variants.push(("bad-redactor-sig", t));

    let rogue = ds_kgen(&mut rng);
    let forged = issue_certificate(&rogue.sk, &b.redactor.pk, b.cert.attributes.clone()).unwrap();
    let mut t = honest.clone();
    resign(&mut t, forged);
    variants.push(("bad-cert", t));

    let salesman =
        issue_certificate(&b.fed.ca.sk, &b.redactor.pk, AttributeSet::new(["Salesman"]).unwrap()).unwrap();
    let mut t = honest.clone();
    resign(&mut t, salesman);
    variants.push(("policy-mismatch", t));

    let mut t = honest.clone();
    t.r = b.fed.chain.tx(ind).and_then(Transaction::as_redactable).unwrap().r;
    variants.push(("bad-collision", t));

    let mut hits = 0;
    for (want, t) in &variants {
        let got = b.check(ind, t).err().map(|r| r.code());
        ensure(got == Some(*want), format!("{want}: got {got:?}"))?;
        hits += 1;
    }
    Ok(format!("{hits}/6 rejected with matching codes, honest control accepted"))
}

fn anchored_chain(seed: u64) -> Chain {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ca = ds_kgen(&mut rng);
    let config = ChainConfig::new(Digest::with_leading_zero_bits(8), ca.pk, SelConfig::default());
    let mut chain = Chain::new(config).unwrap();
    for slot in [2, 5, 8] {
        let blk = chain.build_block(slot, vec![Transaction::immutable(vec![slot as u8])], 0).unwrap();
        chain.append_block(blk).unwrap();
    }
    chain
}

fn lottery() -> Verdict {
    let chain = anchored_chain(31);
    let sp = SlotRange::new(0, 10);
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    let other = ds_kgen(&mut rng).pk;

    // A hard target keeps accidental solutions among mutants negligible.
    let tv = Digest::with_leading_zero_bits(14);
    let mut mutations = 0;
    for i in 0..100 {
        let pk = ds_kgen(&mut rng).pk;
        let (w, info) = sel(&chain, &tv, sp, &pk, 1 << 15, &mut rng);
        let cand = WitnessCandidate { pk, weight: w, proof: info.clone() };
        ensure(vsel_candidate(&cand, sp, &tv, &chain), format!("honest proof {i} rejected"))?;
        ensure(!vsel(w + 1, &info, sp, &tv, &chain), "overclaimed weight accepted")?;
        if w == 0 {
            continue;
        }
        ensure(!vsel(w - 1, &info, sp, &tv, &chain), "underclaimed weight accepted")?;
        let mut dup = info.clone();
        dup.push(info[0]);
        ensure(!vsel(w + 1, &dup, sp, &tv, &chain), "duplicate entry counted")?;
        for j in 0..info.len() {
            let edits: [fn(&mut efrb_core::witness::WitnessProofEntry, efrb_core::crypto::PublicKey); 6] = [
                |e, _| e.tm += 11,
                |e, _| e.ph.0[31] ^= 1,
                |e, _| e.mt.0[0] ^= 0x80,
                |e, _| e.ne ^= 1 << 40,
                |e, _| e.ne = e.ne.wrapping_add(1),
                |e, o| e.pk = o,
            ];
            for edit in edits {
                let mut bad = info.clone();
                edit(&mut bad[j], other);
                let forged = WitnessCandidate { pk, weight: w, proof: bad };
                ensure(!vsel_candidate(&forged, sp, &tv, &chain), format!("mutation accepted in proof {i} entry {j}"))?;
                mutations += 1;
            }
        }
    }

    let tv8 = Digest::with_leading_zero_bits(8);
    let pk = ds_kgen(&mut rng).pk;
    let (mut sbw, mut sbb) = (0f64, 0f64);
    for k in [1u64, 2, 4] {
        for _ in 0..20 {
            let budget = 2000 * k;
            let w = sel(&chain, &tv8, sp, &pk, budget, &mut rng).0;
            sbw += (budget * w) as f64;
            sbb += (budget * budget) as f64;
        }
    }
    let ratio = (sbw / sbb) * 256.0;
    ensure((ratio - 1.0).abs() <= 0.15, format!("slope {ratio:.3} of linear"))?;
    ensure(mutations > 300, format!("only {mutations} mutations exercised"))?;
    Ok(format!("100 honest proofs verify, {mutations} mutations rejected, slope {ratio:.3}x of linear"))
}

fn threshold() -> Verdict {
    let b = RedactionBench::new(3, 2, 21).map_err(|e| e.to_string())?;
    let ind = b.inds[0];
    let req = b.request();
    let ks = &b.fed.witnesses;
    let group = WitnessGroup {
        epoch: b.group.epoch,
        members: [5, 3, 2].iter().zip(ks).map(|(w, k)| Member { pk: k.pk, weight: *w }).collect(),
        collector: ks[0].pk,
        total_weight: 10,
        deposits: ks.iter().map(|k| (k.pk, 100)).collect(),
        ts_fraction: Ratio::new(2, 3),
        flagged: BTreeSet::new(),
    };
    let msg = vote_message(&req.new_tx, ind, group.epoch);
    let with = |idx: &[usize], claimed: u64| {
        let mut entries: Vec<ApprovalEntry> =
            idx.iter().map(|&i| ApprovalEntry { witness_pk: ks[i].pk, sig: ds_sign(&msg, &ks[i].sk) }).collect();
        entries.sort_by_key(|e| e.witness_pk);
        let mut t = req.new_tx.clone();
        t.redaction.as_mut().unwrap().approval =
            Some(AggregatedApproval { epoch: group.epoch, entries, claimed_weight: claimed });
        efrb_core::redaction::validate_redacted_tx(&t, ind, &b.fed.chain, &group, &b.fed.ca.pk)
    };
    ensure(group.ts_abs() == 7, format!("ts_abs {}", group.ts_abs()))?;
    ensure(with(&[0, 1], 8).is_ok(), "weight 8 > 7 rejected")?;
    ensure(with(&[0, 2], 7) == Err(RedactionReject::WeightNotExceeded), "weight 7 = ts_abs accepted")?;
    ensure(with(&[1, 2], 5) == Err(RedactionReject::WeightNotExceeded), "weight 5 accepted")?;
    ensure(with(&[0, 2], 8) == Err(RedactionReject::WeightNotExceeded), "overclaim accepted")?;
    Ok("ts_abs 7: 8 accepts, 7 and 5 reject, overclaim rejects".into())
}

fn verdicts<'a>(t: &'a efrb_simnet::Transcript, request: &'a str, stage: &'a str) -> impl Iterator<Item = &'a str> {
    t.records.iter().filter_map(move |r| match r {
        Record::Verdict { request: q, stage: s, verdict, .. } if q == request && s == stage => Some(verdict.as_str()),
        _ => None,
    })
}

fn policy_update() -> Verdict {
    let s = scenario("policy_update.json");
    let out = run(&s).map_err(|e| e.to_string())?;
    transcript_assert(&out.transcript, &s.expect).map_err(|e| e.join("; "))?;
    let before: Vec<_> = verdicts(&out.transcript, "before", "review").collect();
    let after: Vec<_> = verdicts(&out.transcript, "after", "review").collect();
    ensure(!before.is_empty() && before.iter().all(|v| *v == "accept"), format!("before: {before:?}"))?;
    ensure(!after.is_empty() && after.iter().all(|v| *v == "policy-mismatch"), format!("after: {after:?}"))?;
    Ok(format!("accepted at {} nodes before, policy-mismatch at {} nodes after", before.len(), after.len()))
}

fn accountability() -> Verdict {
    let s = scenario("malicious_quorum.json");
    let out = run(&s).map_err(|e| e.to_string())?;
    transcript_assert(&out.transcript, &s.expect).map_err(|e| e.join("; "))?;
    let l = &out.ledger;
    let pk = |name: &str| {
        out.transcript
            .records
            .iter()
            .find_map(|r| match r {
                Record::Setup { nodes, .. } => nodes.iter().find(|n| n.name == name).map(|n| n.pk.clone()),
                _ => None,
            })
            .unwrap()
    };
    let balance = |name: &str| {
        l.balances.iter().find(|(k, _)| k.to_hex() == pk(name)).map_or(0, |(_, v)| *v)
    };
    let init = s.economy.initial_balance;
    ensure(balance("alice") == init + 150, format!("reporter balance {}", balance("alice")))?;
    ensure(balance("bob") == init, format!("redactor balance {}", balance("bob")))?;
    ensure(l.burned == 150, format!("burned {}", l.burned))?;
    ensure(l.total() == l.minted, format!("total {} minted {}", l.total(), l.minted))?;
    let new_group = out.transcript.records.iter().any(|r| matches!(r, Record::Group { epoch: 2, .. }));
    ensure(new_group, "no new group elected")?;
    Ok(format!("slashed 300: reporter +150, burned 150, fee refunded, epoch 2 in office, {} = {}", l.total(), l.minted))
}

fn benchmarks() -> Verdict {
    let sweep: Vec<u64> = (50..=300).step_by(50).collect();
    let series = |exp: Experiment, param: &str, iterations: usize| -> Result<Vec<(f64, f64)>, String> {
        sweep
            .iter()
            .map(|&v| time_point(exp, param, v, iterations, 1).map(|(m, _)| (v as f64, m)).map_err(|e| e.to_string()))
            .collect()
    };
    let init = series(Experiment::Init, "wgn", 100)?;
    let (_, r2) = linear_fit(&init);
    let monotone = init.windows(2).all(|w| w[1].1 >= w[0].1);
    ensure(monotone, format!("init means not non-decreasing: {init:?}"))?;
    ensure(r2 >= 0.9, format!("init R^2 {r2:.3}"))?;
    let init300 = init.last().unwrap().1;
    ensure(init300 < 0.2 * 5.0, format!("init at 300 took {init300:.4}s"))?;

    let gentx = series(Experiment::Gentx, "policy", 100)?;
    let (gslope, _) = linear_fit(&gentx);
    let (g50, g300) = (gentx[0].1, gentx.last().unwrap().1);
    ensure(gslope > 0.0 && g300 > g50, format!("gentx does not grow: {gentx:?}"))?;
    ensure(g300 < 0.05 * 5.0, format!("gentx at 300 took {g300:.4}s"))?;

    let t = |param: &str, v: u64| time_point(Experiment::Verify, param, v, 30, 1).map(|x| x.0).map_err(|e| e.to_string());
    let wgn_effect = t("wgn", 300)? - t("wgn", 50)?;
    let attr_effect = (t("attrs", 300)? - t("attrs", 50)?).max(0.0);
    ensure(wgn_effect >= 3.0 * attr_effect, format!("WGN effect {wgn_effect:.5}s vs attribute effect {attr_effect:.5}s"))?;
    Ok(format!(
        "init R^2 {r2:.3}, {init300:.4}s at 300; gentx {g50:.5}s -> {g300:.5}s; verify WGN effect {wgn_effect:.4}s vs attrs {attr_effect:.5}s"
    ))
}

fn determinism() -> Verdict {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for f in &files {
        let s = Scenario::load(f).map_err(|e| e.to_string())?;
        let a = run(&s).map_err(|e| e.to_string())?.transcript.to_ndjson();
        let b = run(&s).map_err(|e| e.to_string())?.transcript.to_ndjson();
        ensure(a == b, format!("{} differs between runs", f.display()))?;
    }
    Ok(format!("{} golden scenarios byte-identical across two runs", files.len()))
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Verdict); 9] = [
        ("chameleon-hash correctness", Some(10), chameleon),
        ("merkle/header invariance", Some(30), header_invariance),
        ("experiment-predicate ablation", Some(5), ablation),
        ("sel/vsel round trip and forgeries", Some(60), lottery),
        ("threshold semantics", None, threshold),
        ("policy-update revocation", None, policy_update),
        ("accountability flow", None, accountability),
        ("benchmark trends", None, benchmarks),
        ("simulation determinism", None, determinism),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let res = match (res, limit) {
            (Ok(_), Some(s)) if took > Duration::from_secs(s) => Err(format!("took {took:.2?}, limit {s}s")),
            (r, _) => r,
        };
        match res {
            Ok(detail) => println!("PASS {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
