//! The event loop. Every message is delivered one slot after it is sent;
//! within a slot, deliveries run before scripted actions, which run before
//! timers, each in send order.

use std::collections::{BTreeMap, BTreeSet};

use efrb_core::crypto::{ds_kgen, hash, Digest, PublicKey, STANDARD_GROUP};
use efrb_core::encoding::Encoder;
use efrb_core::ledger::{
    build_redactable_tx, Block, Chain, ChainConfig, RedactableTransaction, Transaction, TxIndex,
};
use efrb_core::policy::{issue_certificate, parse_policy, AttributeSet, Policy};
use efrb_core::redaction::{
    attach_approval, cast_vote, file_report, make_request, redaction_key, review_request, rewrite, CaLedger,
    CollectOutcome, RedactionError, RedactionRequest, Report, ReportOutcome, Vote, VoteCollector,
};
use efrb_core::witness::{
    form_group, replace_collector, sel, vsel_candidate, ElectionRecord, Ratio, SelConfig, SlotRange,
    WitnessCandidate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::node::{Authority, Collecting, Node, Office, OwnRequest};
use crate::scenario::{Action, Behavior, Role, Scenario, ScenarioError};
use crate::transcript::{MemberInfo, NodeFinal, NodeInfo, Record, Transcript, TxState};

/// Slots past `end_slot` during which in-flight messages still land.
const DRAIN_SLOTS: u64 = 16;

#[derive(Clone)]
enum Payload {
    TxSubmit(Transaction),
    Block(Block),
    Candidacy { window: SlotRange, candidate: WitnessCandidate },
    Election(ElectionRecord),
    Request(RedactionRequest),
    Escrow { request_id: Digest, key: Digest, fee: u64, epoch: u64 },
    Vote { request_id: Digest, vote: Vote },
    Approval { ind: TxIndex, tx: RedactableTransaction },
    Failed { request_id: Digest },
    CollectorTimeout { epoch: u64, collector: PublicKey },
    Report(Report),
    Dissolved { epoch: u64, at: u64 },
}

impl Payload {
    fn kind(&self) -> &'static str {
        match self {
            Payload::TxSubmit(_) => "tx-submit",
            Payload::Block(_) => "block",
            Payload::Candidacy { .. } => "witness-candidacy",
            Payload::Election(_) => "election",
            Payload::Request(_) => "redaction-request",
            Payload::Escrow { .. } => "escrow",
            Payload::Vote { .. } => "vote",
            Payload::Approval { .. } => "approval",
            Payload::Failed { .. } => "request-failed",
            Payload::CollectorTimeout { .. } => "collector-timeout",
            Payload::Report(_) => "report",
            Payload::Dissolved { .. } => "dissolved",
        }
    }
}

enum Timer {
    Produce,
    Lottery(SlotRange),
    FormGroup(SlotRange),
    Deadline(Digest),
    RedactorCheck(String),
    Settle { epoch: u64, term_end: u64 },
}

enum Task {
    Deliver { from: usize, payload: Payload, label: Option<String> },
    Action(usize),
    Timer(Timer),
}

const DELIVER: u8 = 0;
const ACTION: u8 = 1;
const TIMER: u8 = 2;

/// What a run leaves behind.
pub struct RunOutput {
    pub transcript: Transcript,
    pub chains: BTreeMap<String, Chain>,
    pub ledger: CaLedger,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    nodes: Vec<Node>,
    ca: usize,
    names: BTreeMap<PublicKey, String>,
    queue: BTreeMap<(u64, u8, u64), (usize, Task)>,
    seq: u64,
    now: u64,
    transcript: Transcript,
    policies: BTreeMap<String, Policy>,
    tx_labels: BTreeMap<String, Digest>,
    request_ids: BTreeMap<String, Digest>,
    request_labels: BTreeMap<Digest, String>,
    status: BTreeMap<String, String>,
    sel_config: SelConfig,
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let mut sim = Sim::new(scenario)?;
    sim.schedule_initial();
    sim.main_loop();
    Ok(sim.finish())
}

fn bits_target(bits: u32) -> Digest {
    Digest::with_leading_zero_bits(bits)
}

impl<'a> Sim<'a> {
    fn new(s: &'a Scenario) -> Result<Self, ScenarioError> {
        let mut master = ChaCha20Rng::seed_from_u64(s.seed);
        let mut keyed = Vec::new();
        for spec in &s.nodes {
            let mut rng = ChaCha20Rng::from_seed(master.gen());
            let keys = ds_kgen(&mut rng);
            keyed.push((spec.clone(), keys, rng));
        }
        let ca = s.nodes.iter().position(|n| n.has(Role::Ca)).expect("validated");
        let ca_keys = keyed[ca].1.clone();
        let w = &s.witness;
        let sel_config = SelConfig {
            tv: bits_target(w.tv_bits),
            epoch_len: w.epoch_len,
            sp_len: w.sp_len,
            wgn: w.wgn,
            ts_fraction: Ratio::new(w.ts_fraction[0], w.ts_fraction[1]),
        };
        let config = ChainConfig::new(bits_target(s.chain.block_bits), ca_keys.pk, sel_config.clone());
        let chain = Chain::new(config).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let names: BTreeMap<PublicKey, String> = keyed.iter().map(|(n, k, _)| (k.pk, n.name.clone())).collect();
        let identities: BTreeMap<&str, String> =
            keyed.iter().map(|(n, k, _)| (n.name.as_str(), k.pk.identity_attribute())).collect();

        let mut policies = BTreeMap::new();
        for a in &s.actions {
            let (label, Some(text)) = (match a {
                Action::SubmitTx { label, policy, .. } | Action::Redact { label, policy, .. } => (label, policy),
                _ => continue,
            }) else {
                continue;
            };
            let resolved = resolve_identities(text, &identities)?;
            let p = parse_policy(&resolved)
                .map_err(|e| ScenarioError::Invalid(format!("policy of {label}: {e}")))?;
            policies.insert(label.clone(), p);
        }

        let mut ledger = CaLedger::new(
            s.unlock_delay(),
            Ratio::new(s.economy.reward_share[0], s.economy.reward_share[1]),
        );
        let mut nodes = Vec::new();
        for (spec, keys, rng) in keyed {
            let mut attrs: Vec<String> = spec.attributes.clone();
            attrs.push(keys.pk.identity_attribute());
            let set = AttributeSet::new(attrs).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            let issuer = if spec.behavior == Behavior::CertForger { &keys.sk } else { &ca_keys.sk };
            let cert = issue_certificate(issuer, &keys.pk, set).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            ledger.mint(keys.pk, s.economy.initial_balance);
            nodes.push(Node {
                spec,
                keys,
                cert,
                rng,
                chain: chain.clone(),
                office: None,
                mempool: Vec::new(),
                elections: Vec::new(),
                collecting: BTreeMap::new(),
                own: BTreeMap::new(),
                approvals: BTreeMap::new(),
                authority: None,
            });
        }
        nodes[ca].authority =
            Some(Authority { ledger, candidacies: BTreeMap::new(), next_epoch: 1, last_window_end: None });

        let mut sim = Sim {
            scenario: s,
            nodes,
            ca,
            names,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            transcript: Transcript::default(),
            policies,
            tx_labels: BTreeMap::new(),
            request_ids: BTreeMap::new(),
            request_labels: BTreeMap::new(),
            status: BTreeMap::new(),
            sel_config,
        };
        let infos = sim
            .nodes
            .iter()
            .map(|n| NodeInfo {
                name: n.spec.name.clone(),
                pk: n.keys.pk.to_hex(),
                roles: n.spec.roles.iter().map(|r| enum_name(r)).collect(),
                behavior: enum_name(&n.spec.behavior),
            })
            .collect();
        sim.transcript.push(Record::Setup { scenario: s.name.clone(), seed: s.seed, nodes: infos });
        sim.snapshot();
        Ok(sim)
    }

    // ---- plumbing ----

    fn push(&mut self, slot: u64, phase: u8, node: usize, task: Task) {
        self.queue.insert((slot, phase, self.seq), (node, task));
        self.seq += 1;
    }

    fn timer(&mut self, slot: u64, node: usize, t: Timer) {
        if slot <= self.scenario.end_slot {
            self.push(slot, TIMER, node, Task::Timer(t));
        }
    }

    fn name(&self, i: usize) -> String {
        self.nodes[i].spec.name.clone()
    }

    fn pk_name(&self, pk: &PublicKey) -> String {
        self.names.get(pk).cloned().unwrap_or_else(|| pk.to_hex())
    }

    fn send(&mut self, from: usize, to: Option<usize>, payload: Payload, label: Option<String>, detail: Option<String>) {
        self.transcript.push(Record::Message {
            slot: self.now,
            from: self.name(from),
            to: to.map_or_else(|| "*".to_string(), |t| self.name(t)),
            kind: payload.kind().to_string(),
            label: label.clone(),
            detail,
        });
        let targets: Vec<usize> = match to {
            Some(t) => vec![t],
            None => (0..self.nodes.len()).collect(),
        };
        for t in targets {
            let task = Task::Deliver { from, payload: payload.clone(), label: label.clone() };
            self.push(self.now + 1, DELIVER, t, task);
        }
    }

    fn event(&mut self, node: usize, event: &str, label: Option<&str>, detail: Option<String>) {
        self.transcript.push(Record::Event {
            slot: self.now,
            node: self.name(node),
            event: event.to_string(),
            label: label.map(str::to_string),
            detail,
        });
    }

    fn verdict(&mut self, node: usize, request: &str, stage: &str, verdict: &str) {
        self.transcript.push(Record::Verdict {
            slot: self.now,
            node: self.name(node),
            request: request.to_string(),
            stage: stage.to_string(),
            verdict: verdict.to_string(),
        });
    }

    fn set_status(&mut self, label: &str, status: &str) {
        let cur = self.status.get(label).map(String::as_str);
        let settled = matches!(cur, Some("approved"));
        if !settled {
            self.status.insert(label.to_string(), status.to_string());
        }
    }

    fn ledger(&mut self) -> &mut CaLedger {
        &mut self.nodes[self.ca].authority.as_mut().expect("ca holds authority").ledger
    }

    fn snapshot(&mut self) {
        let names = self.names.clone();
        let l = &self.nodes[self.ca].authority.as_ref().expect("ca").ledger;
        let balances = names.iter().map(|(pk, n)| (n.clone(), l.balance(pk))).collect();
        let r = Record::Balances {
            slot: self.now,
            balances,
            deposits: l.deposited(),
            escrow: l.escrowed(),
            burned: l.burned,
            total: l.total(),
            minted: l.minted,
        };
        self.transcript.push(r);
    }

    fn malicious(&self, label: &str) -> bool {
        self.scenario.malicious.contains(label)
    }

    fn is(&self, i: usize, role: Role) -> bool {
        self.nodes[i].spec.has(role)
    }

    // ---- schedule ----

    fn schedule_initial(&mut self) {
        let s = self.scenario;
        let producers: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.is(i, Role::Producer)).collect();
        let mut slot = s.chain.block_interval;
        while slot <= s.end_slot {
            let p = producers[((slot / s.chain.block_interval) as usize) % producers.len()];
            self.timer(slot, p, Timer::Produce);
            slot += s.chain.block_interval;
        }
        let mut k = 0;
        loop {
            let window = self.sel_config.election_window(k);
            if window.end + 2 > s.end_slot {
                break;
            }
            self.schedule_election(window);
            k += 1;
        }
        for (i, a) in s.actions.iter().enumerate() {
            let by = s.nodes.iter().position(|n| n.name == a.by()).expect("validated");
            self.push(a.at(), ACTION, by, Task::Action(i));
        }
    }

    fn schedule_election(&mut self, window: SlotRange) {
        for i in 0..self.nodes.len() {
            if self.is(i, Role::Witness) {
                self.timer(window.end + 1, i, Timer::Lottery(window));
            }
        }
        self.timer(window.end + 2, self.ca, Timer::FormGroup(window));
    }

    fn main_loop(&mut self) {
        let end = self.scenario.end_slot;
        while let Some(((slot, phase, _), (node, task))) = self.queue.pop_first() {
            if slot > end + DRAIN_SLOTS {
                break;
            }
            if slot > end && phase != DELIVER {
                continue;
            }
            self.now = slot;
            match task {
                Task::Deliver { from, payload, label } => self.deliver(node, from, payload, label),
                Task::Action(i) => self.action(node, i),
                Task::Timer(t) => self.on_timer(node, t),
            }
        }
    }

    // ---- deliveries ----

    fn deliver(&mut self, me: usize, from: usize, payload: Payload, label: Option<String>) {
        match payload {
            Payload::TxSubmit(tx) => {
                if self.is(me, Role::Producer) {
                    self.nodes[me].mempool.push(tx);
                }
            }
            Payload::Election(rec) => {
                if self.is(me, Role::Producer) {
                    self.nodes[me].elections.push(rec);
                }
            }
            Payload::Block(b) => self.on_block(me, b),
            Payload::Candidacy { window, candidate } => {
                if let Some(auth) = self.nodes[me].authority.as_mut() {
                    auth.candidacies.entry(window.start).or_default().push(candidate);
                }
            }
            Payload::Request(req) => self.on_request(me, req, label.unwrap_or_default()),
            Payload::Escrow { request_id, key, fee, epoch } => {
                if me != self.ca {
                    return;
                }
                let payer = self.nodes[from].keys.pk;
                match self.ledger().escrow_fee(request_id, key, payer, fee, epoch) {
                    Ok(()) => {
                        self.event(me, "fee-escrowed", label.as_deref(), Some(fee.to_string()));
                        self.snapshot();
                    }
                    Err(e) => self.event(me, "escrow-refused", label.as_deref(), Some(e.code().into())),
                }
            }
            Payload::Vote { request_id, vote } => self.on_vote(me, request_id, vote),
            Payload::Approval { ind, tx } => self.on_approval(me, ind, tx, label.unwrap_or_default()),
            Payload::Failed { request_id } => {
                let label = label.unwrap_or_default();
                if let Some(own) = self.nodes[me].own.get_mut(&label) {
                    own.resolved = true;
                }
                if me == self.ca && self.ledger().refund_fee(&request_id).is_ok() {
                    self.event(me, "fee-refunded", Some(&label), None);
                    self.snapshot();
                }
            }
            Payload::CollectorTimeout { epoch, collector } => {
                let Some(office) = self.nodes[me].office.as_mut() else { return };
                if office.group.epoch != epoch || office.group.collector != collector || office.dissolved {
                    return;
                }
                let res = replace_collector(&mut office.group, &collector);
                if me == self.ca {
                    match res {
                        Ok(next) => {
                            let detail = format!("{} -> {}", self.pk_name(&collector), self.pk_name(&next));
                            self.event(me, "collector-replaced", label.as_deref(), Some(detail));
                        }
                        Err(e) => self.event(me, "no-collector", label.as_deref(), Some(e.to_string())),
                    }
                }
            }
            Payload::Report(report) => self.on_report(me, report, label.unwrap_or_default()),
            Payload::Dissolved { epoch, at } => {
                if let Some(o) = self.nodes[me].office.as_mut().filter(|o| o.group.epoch == epoch) {
                    o.dissolved = true;
                }
                if self.is(me, Role::Witness) {
                    let window = self.sel_config.window_from(at + 1);
                    self.timer(window.end + 1, me, Timer::Lottery(window));
                }
            }
        }
    }

    fn on_block(&mut self, me: usize, b: Block) {
        if let Err(e) = self.nodes[me].chain.append_block(b.clone()) {
            self.event(me, "block-rejected", None, Some(format!("slot {}: {}", b.slot(), e.reason.code())));
            return;
        }
        let included: BTreeSet<Digest> = b.transactions.iter().map(Transaction::leaf_digest).collect();
        let node = &mut self.nodes[me];
        node.mempool.retain(|t| !included.contains(&t.leaf_digest()));
        node.elections.retain(|r| !included.contains(&Transaction::Election(r.clone()).leaf_digest()));
        for tx in &b.transactions {
            let Transaction::Election(rec) = tx else { continue };
            let prev = self.nodes[me].office.replace(Office { group: rec.group.clone(), dissolved: false });
            if me != self.ca {
                continue;
            }
            self.event(me, "term-start", None, Some(format!("epoch {}", rec.group.epoch)));
            if let Some(prev) = prev.filter(|p| !p.dissolved) {
                let t = Timer::Settle { epoch: prev.group.epoch, term_end: b.slot() };
                self.timer(b.slot() + self.scenario.unlock_delay(), me, t);
            }
        }
    }

    fn on_request(&mut self, me: usize, req: RedactionRequest, label: String) {
        let ca_pk = self.nodes[me].chain.config().ca_pk;
        let review = review_request(&req, &self.nodes[me].chain, &ca_pk);
        self.verdict(me, &label, "review", review.map_or_else(|r| r.code(), |()| "accept"));
        let Some(group) = self.nodes[me].active_group().cloned() else { return };
        let behavior = self.nodes[me].spec.behavior;
        let id = req.id();
        if group.collector == self.nodes[me].keys.pk && !self.nodes[me].collecting.contains_key(&id) {
            if behavior == Behavior::SilentCollector {
                self.event(me, "collector-silent", Some(&label), None);
            } else {
                let deadline = self.now + self.scenario.economy.vote_deadline;
                let tally = VoteCollector::new(&req, &group, deadline);
                self.nodes[me].collecting.insert(id, Collecting { label: label.clone(), req: req.clone(), tally });
                self.timer(deadline + 1, me, Timer::Deadline(id));
            }
        }
        if !group.is_member(&self.nodes[me].keys.pk) {
            return;
        }
        let approve = match behavior {
            Behavior::MaliciousQuorum => review.is_ok(),
            _ => review.is_ok() && !self.malicious(&label),
        };
        if !approve {
            if review.is_ok() {
                self.event(me, "vote-withheld", Some(&label), None);
            }
            return;
        }
        let vote = cast_vote(&self.nodes[me].keys.sk, &req, group.epoch);
        let collector = self.nodes.iter().position(|n| n.keys.pk == group.collector).expect("collector is a node");
        let copies = if behavior == Behavior::DoubleVoter { 2 } else { 1 };
        for _ in 0..copies {
            let p = Payload::Vote { request_id: id, vote: vote.clone() };
            self.send(me, Some(collector), p, Some(label.clone()), None);
        }
    }

    fn on_vote(&mut self, me: usize, request_id: Digest, vote: Vote) {
        let voter = self.pk_name(&vote.witness_pk);
        let Some(c) = self.nodes[me].collecting.get_mut(&request_id) else {
            let label = self.request_labels.get(&request_id).cloned();
            let event = if self.nodes[me].spec.behavior == Behavior::SilentCollector { "vote-dropped" } else { "vote-unexpected" };
            self.event(me, event, label.as_deref(), Some(voter));
            return;
        };
        let outcome = c.tally.add_vote(&vote);
        let label = c.label.clone();
        match outcome {
            CollectOutcome::Approved(a) => {
                let tx = attach_approval(&c.req, a);
                let ind = c.req.ind;
                let weight = c.tally.weight();
                self.event(me, "approved", Some(&label), Some(format!("weight {weight}")));
                self.set_status(&label, "approved");
                self.send(me, None, Payload::Approval { ind, tx }, Some(label), None);
            }
            CollectOutcome::Ignored(why) => {
                self.event(me, "vote-ignored", Some(&label), Some(format!("{voter}: {}", enum_name(&why))));
            }
            CollectOutcome::Pending { .. } | CollectOutcome::Failed => {}
        }
    }

    fn on_approval(&mut self, me: usize, ind: TxIndex, tx: RedactableTransaction, label: String) {
        self.nodes[me].approvals.insert(label.clone(), (ind, tx.clone()));
        if let Some(own) = self.nodes[me].own.get_mut(&label) {
            own.resolved = true;
        }
        let now = self.now;
        let node = &mut self.nodes[me];
        let verdict = match node.office.as_ref().filter(|o| !o.dissolved).map(|o| o.group.clone()) {
            None => Err("stale-group"),
            Some(group) => node.chain.apply_redaction(ind, tx, &group, now).map_err(|r| r.code()),
        };
        self.verdict(me, &label, "apply", verdict.err().unwrap_or("accept"));
        if verdict.is_ok() && me == self.ca {
            if let Some(id) = self.request_ids.get(&label).copied() {
                if self.ledger().mark_served(&id).is_ok() {
                    self.event(me, "fee-served", Some(&label), None);
                }
            }
        }
    }

    fn on_report(&mut self, me: usize, report: Report, label: String) {
        if me != self.ca {
            return;
        }
        let malicious = self.malicious(&label);
        match self.ledger().process_report(&report, malicious) {
            ReportOutcome::Dismissed => self.event(me, "report-dismissed", Some(&label), None),
            ReportOutcome::DismissedDuplicate => self.event(me, "report-duplicate", Some(&label), None),
            ReportOutcome::Punished(p) => {
                let reporter = self.pk_name(&report.reporter_pk);
                let detail = format!(
                    "epoch {} slashed {} reporter {} +{} burned {}",
                    p.epoch, p.slashed, reporter, p.reporter_reward, p.burned
                );
                self.event(me, "slash", Some(&label), Some(detail));
                for (payer, fee) in &p.refunds {
                    let d = format!("{} +{fee}", self.pk_name(payer));
                    self.event(me, "fee-refunded", Some(&label), Some(d));
                }
                self.event(me, "group-dissolved", Some(&label), Some(format!("epoch {}", p.epoch)));
                self.snapshot();
                let at = self.now;
                self.send(me, None, Payload::Dissolved { epoch: p.epoch, at }, Some(label), None);
                self.timer(self.sel_config.window_from(at + 1).end + 2, me, Timer::FormGroup(self.sel_config.window_from(at + 1)));
            }
        }
    }

    // ---- scripted actions ----

    fn action(&mut self, me: usize, index: usize) {
        match self.scenario.actions[index].clone() {
            Action::SubmitTx { label, content, .. } => {
                let tx = match self.policies.get(&label).cloned() {
                    Some(policy) => {
                        let node = &mut self.nodes[me];
                        match build_redactable_tx(&node.keys, content.as_bytes(), policy, &mut node.rng) {
                            Ok(t) => Transaction::Redactable(t),
                            Err(e) => {
                                self.event(me, "tx-refused", Some(&label), Some(e.to_string()));
                                return;
                            }
                        }
                    }
                    None => Transaction::immutable(content.into_bytes()),
                };
                self.tx_labels.insert(label.clone(), tx.leaf_digest());
                for p in 0..self.nodes.len() {
                    if self.is(p, Role::Producer) {
                        self.send(me, Some(p), Payload::TxSubmit(tx.clone()), Some(label.clone()), None);
                    }
                }
            }
            Action::Redact { label, target, content, fee, .. } => {
                let policy = self.policies.get(&label).cloned();
                self.redact(me, label, target, content, policy, fee);
            }
            Action::Report { request, .. } => {
                let Some((ind, tx)) = self.nodes[me].approvals.get(&request).cloned() else {
                    self.event(me, "nothing-to-report", Some(&request), None);
                    return;
                };
                match file_report(self.nodes[me].keys.pk, ind, tx, "malicious") {
                    Ok(r) => self.send(me, Some(self.ca), Payload::Report(r), Some(request), None),
                    Err(e) => self.event(me, "report-refused", Some(&request), Some(e.code().into())),
                }
            }
            Action::Replay { request, .. } => {
                let Some((ind, tx)) = self.nodes[me].approvals.get(&request).cloned() else {
                    self.event(me, "nothing-to-replay", Some(&request), None);
                    return;
                };
                self.event(me, "replay", Some(&request), None);
                self.send(me, None, Payload::Approval { ind, tx }, Some(request), None);
            }
        }
    }

    fn redact(&mut self, me: usize, label: String, target: String, content: String, policy: Option<Policy>, fee: u64) {
        let Some(leaf) = self.tx_labels.get(&target).copied() else {
            self.verdict(me, &label, "local", "no-such-tx");
            self.set_status(&label, "refused");
            return;
        };
        let Some(ind) = self.nodes[me].find_tx(&leaf).map(|(i, _)| i) else {
            self.verdict(me, &label, "local", "no-such-tx");
            self.set_status(&label, "refused");
            return;
        };
        let Some(epoch) = self.nodes[me].active_group().map(|g| g.epoch) else {
            self.verdict(me, &label, "local", "no-group");
            self.set_status(&label, "refused");
            return;
        };
        let node = &self.nodes[me];
        let behavior = node.spec.behavior;
        let built = make_request(&node.chain, ind, content.as_bytes(), policy.clone(), &node.keys.sk, &node.cert, fee);
        let req = match (built, behavior) {
            (Ok(mut req), Behavior::CollisionSkipper) => {
                let original = node.chain.tx(ind).and_then(Transaction::as_redactable).expect("checked");
                req.new_tx.r = original.r;
                req
            }
            (Ok(req), _) => req,
            (Err(RedactionError::NotAuthorized), Behavior::UnauthorizedRedactor) => {
                let original = node.chain.tx(ind).and_then(Transaction::as_redactable).expect("checked").clone();
                let policy = policy.unwrap_or_else(|| original.policy.clone());
                let msg_new = efrb_core::ledger::redactable_message(content.as_bytes(), &policy);
                let r = efrb_core::crypto::ch_adapt(
                    &STANDARD_GROUP,
                    &original.ch_sk,
                    &original.h,
                    &original.r,
                    &original.message(),
                    &msg_new,
                )
                .expect("stored transaction opens");
                let new_tx = rewrite(&original, content.into_bytes(), policy, r, &node.keys.sk, node.cert.clone());
                RedactionRequest { new_tx, ind, fee }
            }
            (Err(e), _) => {
                self.verdict(me, &label, "local", e.code());
                self.set_status(&label, "refused");
                return;
            }
        };
        self.verdict(me, &label, "local", "sent");
        let id = req.id();
        self.request_ids.insert(label.clone(), id);
        self.request_labels.insert(id, label.clone());
        self.set_status(&label, "pending");
        let key = redaction_key(&req.new_tx, ind);
        self.nodes[me].own.insert(label.clone(), OwnRequest { req: req.clone(), epoch, resolved: false, retries: 0 });
        self.send(me, Some(self.ca), Payload::Escrow { request_id: id, key, fee, epoch }, Some(label.clone()), None);
        self.send(me, None, Payload::Request(req), Some(label.clone()), None);
        let check = self.now + self.scenario.economy.vote_deadline + 3;
        self.timer(check, me, Timer::RedactorCheck(label));
    }

    // ---- timers ----

    fn on_timer(&mut self, me: usize, t: Timer) {
        match t {
            Timer::Produce => self.produce(me),
            Timer::Lottery(window) => {
                let tv = self.sel_config.tv;
                let node = &mut self.nodes[me];
                let pk = node.keys.pk;
                let (weight, proof) = sel(&node.chain, &tv, window, &pk, node.spec.trial_budget, &mut node.rng);
                if weight > 0 {
                    let p = Payload::Candidacy { window, candidate: WitnessCandidate { pk, weight, proof } };
                    self.send(me, Some(self.ca), p, None, Some(format!("window {}..{} weight {weight}", window.start, window.end)));
                }
            }
            Timer::FormGroup(window) => self.form_group(me, window),
            Timer::Deadline(id) => {
                let now = self.now;
                let Some(c) = self.nodes[me].collecting.get_mut(&id) else { return };
                if c.tally.tick(now) == Some(CollectOutcome::Failed) {
                    let label = c.label.clone();
                    let weight = c.tally.weight();
                    self.event(me, "request-failed", Some(&label), Some(format!("weight {weight}")));
                    self.set_status(&label, "failed");
                    self.send(me, None, Payload::Failed { request_id: id }, Some(label), None);
                }
            }
            Timer::RedactorCheck(label) => {
                let node = &self.nodes[me];
                let Some(own) = node.own.get(&label) else { return };
                let Some(group) = node.active_group() else { return };
                if own.resolved || group.epoch != own.epoch || own.retries >= group.members.len() {
                    return;
                }
                let (epoch, collector, req) = (group.epoch, group.collector, own.req.clone());
                self.nodes[me].own.get_mut(&label).expect("present").retries += 1;
                self.event(me, "collector-unresponsive", Some(&label), Some(self.pk_name(&collector)));
                self.send(me, None, Payload::CollectorTimeout { epoch, collector }, Some(label.clone()), None);
                self.send(me, None, Payload::Request(req), Some(label.clone()), None);
                let check = self.now + self.scenario.economy.vote_deadline + 3;
                self.timer(check, me, Timer::RedactorCheck(label));
            }
            Timer::Settle { epoch, term_end } => {
                let Some(group) = self.nodes[me].chain.election_record(epoch).map(|r| r.group.clone()) else {
                    return;
                };
                let now = self.now;
                match self.ledger().settle_epoch(&group, term_end, now) {
                    Ok(s) => {
                        let fees: u64 = s.fee_payouts.values().sum();
                        let deposits: u64 = s.deposits_returned.values().sum();
                        self.event(me, "settled", None, Some(format!("epoch {epoch} deposits {deposits} fees {fees}")));
                        self.snapshot();
                    }
                    Err(e) => self.event(me, "settle-refused", None, Some(format!("epoch {epoch}: {}", e.code()))),
                }
            }
        }
    }

    fn produce(&mut self, me: usize) {
        let slot = self.now;
        let max = self.nodes[me].chain.config().max_block_txs;
        let coinbase = Transaction::immutable(format!("slot {slot} by {}", self.name(me)).into_bytes());
        let node = &self.nodes[me];
        let mut txs = vec![coinbase];
        txs.extend(node.elections.iter().cloned().map(Transaction::Election));
        txs.extend(node.mempool.iter().cloned());
        txs.truncate(max);
        loop {
            let block = match node.chain.build_block(slot, txs.clone(), 0) {
                Ok(b) => b,
                Err(e) => {
                    self.event(me, "produce-failed", None, Some(e.to_string()));
                    return;
                }
            };
            let mut trial = node.chain.clone();
            match trial.append_block(block.clone()) {
                Ok(()) => {
                    let n = block.transactions.len();
                    self.send(me, None, Payload::Block(block), None, Some(format!("slot {slot} txs {n}")));
                    return;
                }
                Err(e) => match e.reason {
                    efrb_core::ledger::BlockReject::BadTx { index, .. } if index > 0 => {
                        txs.remove(index);
                    }
                    other => {
                        self.event(me, "produce-failed", None, Some(other.code().into()));
                        return;
                    }
                },
            }
        }
    }

    fn form_group(&mut self, me: usize, window: SlotRange) {
        let auth = self.nodes[me].authority.as_mut().expect("ca");
        if auth.last_window_end.is_some_and(|e| window.start <= e) {
            auth.candidacies.remove(&window.start);
            self.event(me, "election-skipped", None, Some(format!("window {}..{}", window.start, window.end)));
            return;
        }
        let candidates = auth.candidacies.remove(&window.start).unwrap_or_default();
        let epoch = auth.next_epoch;
        let tv = self.sel_config.tv;
        let deposit = self.scenario.economy.deposit;
        let mut valid = Vec::new();
        for c in candidates {
            if !vsel_candidate(&c, window, &tv, &self.nodes[me].chain) {
                let who = self.pk_name(&c.pk);
                self.event(me, "candidate-rejected", None, Some(who));
                continue;
            }
            match self.ledger().post_deposit(c.pk, epoch, deposit) {
                Ok(()) => valid.push(c),
                Err(e) => {
                    let who = self.pk_name(&c.pk);
                    self.event(me, "deposit-refused", None, Some(format!("{who}: {}", e.code())));
                }
            }
        }
        let deposits = valid.iter().map(|c| (c.pk, deposit)).collect();
        let cfg = &self.sel_config;
        match form_group(epoch, &valid, cfg.wgn, &deposits, deposit, cfg.ts_fraction) {
            Err(e) => {
                for c in &valid {
                    self.ledger().release_deposit(epoch, &c.pk);
                }
                self.event(me, "election-failed", None, Some(e.to_string()));
            }
            Ok(group) => {
                for c in &valid {
                    if !group.is_member(&c.pk) {
                        self.ledger().release_deposit(epoch, &c.pk);
                    }
                }
                let auth = self.nodes[me].authority.as_mut().expect("ca");
                auth.next_epoch += 1;
                auth.last_window_end = Some(window.end);
                self.transcript.push(Record::Group {
                    slot: self.now,
                    epoch,
                    window: [window.start, window.end],
                    members: group
                        .members
                        .iter()
                        .map(|m| MemberInfo { name: self.pk_name(&m.pk), weight: m.weight })
                        .collect(),
                    collector: self.pk_name(&group.collector),
                    total_weight: group.total_weight,
                    ts_abs: group.ts_abs(),
                });
                self.snapshot();
                let record = ElectionRecord::assemble(window, group, &valid);
                for p in 0..self.nodes.len() {
                    if self.is(p, Role::Producer) {
                        self.send(me, Some(p), Payload::Election(record.clone()), None, Some(format!("epoch {epoch}")));
                    }
                }
            }
        }
    }

    // ---- wrap-up ----

    fn finish(mut self) -> RunOutput {
        let mut finals = Vec::new();
        for n in &self.nodes {
            let chain = &n.chain;
            let mut roots = Encoder::tagged("efrb/sim-roots");
            let mut state = Encoder::tagged("efrb/sim-state");
            for b in chain.blocks() {
                roots.fixed(b.header.merkle_root.as_bytes());
                for tx in &b.transactions {
                    state.bytes(&serde_json::to_vec(tx).expect("transactions serialize"));
                }
            }
            let txs = self
                .tx_labels
                .iter()
                .filter_map(|(label, leaf)| {
                    let (_, tx) = n.find_tx(leaf)?;
                    let st = match tx {
                        Transaction::Redactable(t) => TxState {
                            content: String::from_utf8_lossy(&t.content).into_owned(),
                            policy: t.policy.canonical_text().to_string(),
                        },
                        Transaction::Immutable(t) => TxState {
                            content: String::from_utf8_lossy(&t.content).into_owned(),
                            policy: String::new(),
                        },
                        Transaction::Election(_) => return None,
                    };
                    Some((label.clone(), st))
                })
                .collect();
            finals.push(NodeFinal {
                name: n.spec.name.clone(),
                honest: n.spec.behavior.is_honest(),
                chain_valid: chain.validate_chain().is_ok(),
                height: chain.len(),
                head: chain.head().hash().to_hex(),
                roots: hash(roots.as_slice()).to_hex(),
                state: hash(state.as_slice()).to_hex(),
                epoch: n.office.as_ref().map(|o| o.group.epoch),
                txs,
            });
        }
        self.snapshot();
        let requests = self.status.clone();
        self.transcript.push(Record::Final { slot: self.now, nodes: finals, requests });
        let chains = self.nodes.iter().map(|n| (n.spec.name.clone(), n.chain.clone())).collect();
        let ledger = self.nodes[self.ca].authority.take().expect("ca").ledger;
        RunOutput { transcript: self.transcript, chains, ledger }
    }
}

/// Replaces `@name` with that node's quoted identity attribute.
fn resolve_identities(text: &str, ids: &BTreeMap<&str, String>) -> Result<String, ScenarioError> {
    let mut out = String::new();
    let mut rest = text;
    while let Some(at) = rest.find('@') {
        out.push_str(&rest[..at]);
        let tail = &rest[at + 1..];
        let len = tail.find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-')).unwrap_or(tail.len());
        let name = &tail[..len];
        let id = ids.get(name).ok_or_else(|| ScenarioError::Invalid(format!("policy names unknown node @{name}")))?;
        out.push('"');
        out.push_str(id);
        out.push('"');
        rest = &tail[len..];
    }
    out.push_str(rest);
    Ok(out)
}

fn enum_name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}
