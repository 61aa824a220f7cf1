use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::committees::{Committees, ShuffleMode};
use crate::error::{Error, Result};
use crate::ffg::{self, build_attestation};
use crate::fork_choice::{self, ForkChoiceOptions};
use crate::slashing::{self, Detection};
use crate::types::*;
use crate::view::View;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Mean delay in slots.
    pub a: f64,
    /// Half-width of the sender timing jitter.
    pub eps1: f64,
    /// Half-width of the per-recipient delay jitter.
    pub eps2: f64,
}

impl NetworkParams {
    pub const SYNCHRONOUS: NetworkParams = NetworkParams { a: 0.0, eps1: 0.0, eps2: 0.0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Byzantine validators behave honestly.
    Honest,
    /// Byzantine validators send nothing.
    Withhold,
    /// A byzantine proposer publishes two sibling blocks. With
    /// `split_broadcast` each half of the network sees only one of them.
    ForkBuilder { split_broadcast: bool },
    /// Byzantine attestors hold their votes until `vote_time` into the slot
    /// and split them over the two leading candidates, claiming
    /// `fake_timestamp` into the slot. Byzantine proposers also fork.
    SmokeBomb { vote_time: f64, fake_timestamp: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub validators: usize,
    pub slots_per_epoch: u64,
    pub stakes: Option<Vec<Stake>>,
    /// The last `byzantine` validator ids are byzantine.
    pub byzantine: usize,
    pub strategy: Strategy,
    pub network: NetworkParams,
    pub epochs: u64,
    /// Attestations are included only once they are at least this many slots old.
    pub inclusion_delay: u64,
    /// Attestors ignore attestations from the current slot.
    pub consideration_delay: bool,
    /// Attestations older than the previous epoch do not count for GHOST.
    pub stale_filter: bool,
    pub identity_shuffle: bool,
    pub log_deliveries: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            validators: 16,
            slots_per_epoch: 4,
            stakes: None,
            byzantine: 0,
            strategy: Strategy::Honest,
            network: NetworkParams::SYNCHRONOUS,
            epochs: 4,
            inclusion_delay: 1,
            consideration_delay: false,
            stale_filter: false,
            identity_shuffle: false,
            log_deliveries: true,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.slots_per_epoch == 0 || self.validators == 0 {
            return err("validators and slots_per_epoch must be positive".into());
        }
        if self.validators as u64 % self.slots_per_epoch != 0 {
            return err(format!(
                "slots_per_epoch {} must divide validators {}",
                self.slots_per_epoch, self.validators
            ));
        }
        if self.byzantine > self.validators {
            return err("byzantine exceeds validators".into());
        }
        if self.inclusion_delay == 0 {
            return err("inclusion_delay must be at least 1".into());
        }
        let n = self.network;
        for (k, v) in [("a", n.a), ("eps1", n.eps1), ("eps2", n.eps2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{k} must be finite and nonnegative"));
            }
        }
        if let Strategy::SmokeBomb { vote_time, fake_timestamp } = self.strategy {
            if !(0.0..1.0).contains(&vote_time) || !(0.0..1.0).contains(&fake_timestamp) {
                return err("vote_time and fake_timestamp must lie in [0, 1)".into());
            }
        }
        self.validator_set()?;
        Ok(())
    }

    pub fn validator_set(&self) -> Result<ValidatorSet> {
        match &self.stakes {
            None => Ok(ValidatorSet::uniform(self.validators)),
            Some(s) if s.len() == self.validators => ValidatorSet::new(s.clone()),
            Some(_) => Err(Error::Config("stakes must list one entry per validator".into())),
        }
    }

    pub fn is_byzantine(&self, v: ValidatorId) -> bool {
        (v.0 as usize) >= self.validators - self.byzantine
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Propose { t: f64, slot: Slot, proposer: ValidatorId, block: BlockId, parent: BlockId, attests: usize, byzantine: bool },
    Attest { t: f64, slot: Slot, author: ValidatorId, block: BlockId, source: CheckpointPair, target: CheckpointPair, claimed: f64, byzantine: bool },
    Deliver { t: f64, to: ValidatorId, msg: MessageId, accepted: usize },
    EpochEnd { t: f64, epoch: Epoch },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: Epoch,
    pub justified: usize,
    pub finalized: usize,
    pub max_justified_epoch: Epoch,
    pub max_finalized_epoch: Epoch,
    pub new_justified: Vec<CheckpointPair>,
    pub new_finalized: Vec<CheckpointPair>,
    pub head: BlockId,
    pub blocks: usize,
    pub equivocated_slots: usize,
    pub honest_evidence: usize,
    pub views_agree: bool,
}

#[derive(Clone, Debug)]
pub struct SimTrace {
    pub config: SimConfig,
    pub events: Vec<SimEvent>,
    pub metrics: Vec<EpochMetrics>,
    pub views: Vec<View>,
    pub network: View,
    pub honest_attestations: u64,
    pub detection: Detection,
    /// Offenders that were honest for the whole run.
    pub honest_offenders: Vec<ValidatorId>,
}

impl SimTrace {
    /// JSON-lines event log; the first line holds the config and seed.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({ "event": "config", "config": self.config, "seed": self.config.seed });
        out.push_str(&header.to_string());
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// Per-epoch metrics as CSV, preceded by a commented config line.
    pub fn metrics_csv(&self) -> String {
        let mut out = format!("# config: {}\n", serde_json::to_string(&self.config).expect("config serializes"));
        out.push_str(&format!("# seed: {}\n", self.config.seed));
        out.push_str("epoch,justified,finalized,max_justified_epoch,max_finalized_epoch,new_justified,new_finalized,head,blocks,equivocated_slots,honest_evidence,views_agree\n");
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.epoch,
                m.justified,
                m.finalized,
                m.max_justified_epoch,
                m.max_finalized_epoch,
                m.new_justified.len(),
                m.new_finalized.len(),
                m.head,
                m.blocks,
                m.equivocated_slots,
                m.honest_evidence,
                m.views_agree
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum Action {
    EpochEnd(Epoch),
    Propose(Slot),
    Attest(Slot, ValidatorId),
    SmokeBomb(Slot),
    Deliver(ValidatorId, usize),
}

#[derive(Clone, Copy, Debug)]
struct Scheduled {
    t: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest (t, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

/// Deterministic discrete-event engine. Time is measured in slots.
pub struct Simulator {
    cfg: SimConfig,
    validators: Arc<ValidatorSet>,
    committees: Committees,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    messages: Vec<Message>,
    views: Vec<View>,
    network: View,
    events: Vec<SimEvent>,
    metrics: Vec<EpochMetrics>,
    honest_attestations: u64,
    // validators that deviated at some point
    ever_byzantine: BTreeSet<ValidatorId>,
    scheduled_until: Slot,
    last_j: BTreeSet<CheckpointPair>,
    last_f: BTreeSet<CheckpointPair>,
    all_honest: bool,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let validators = Arc::new(cfg.validator_set()?);
        let mode = if cfg.identity_shuffle { ShuffleMode::Identity } else { ShuffleMode::Seeded(cfg.seed) };
        let committees = Committees::new(cfg.validators, cfg.slots_per_epoch, mode)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let c = cfg.slots_per_epoch;
        let views = (0..cfg.validators).map(|_| View::new(c, validators.clone()).with_clock(0.0)).collect();
        let network = View::new(c, validators.clone()).with_clock(0.0);
        let ever_byzantine = if matches!(cfg.strategy, Strategy::Honest) {
            BTreeSet::new()
        } else {
            (0..cfg.validators as u32).map(ValidatorId).filter(|v| cfg.is_byzantine(*v)).collect()
        };
        let mut sim = Simulator {
            cfg,
            validators,
            committees,
            rng,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            messages: Vec::new(),
            views,
            network,
            events: Vec::new(),
            metrics: Vec::new(),
            honest_attestations: 0,
            ever_byzantine,
            scheduled_until: 0,
            last_j: BTreeSet::from([CheckpointPair::GENESIS]),
            last_f: BTreeSet::from([CheckpointPair::GENESIS]),
            all_honest: false,
        };
        let epochs = sim.cfg.epochs;
        sim.schedule_epochs(0, epochs);
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn network_view(&self) -> &View {
        &self.network
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn honest_attestations(&self) -> u64 {
        self.honest_attestations
    }

    fn push(&mut self, t: f64, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled { t, seq: self.seq, action });
    }

    fn schedule_epochs(&mut self, from: Epoch, to: Epoch) {
        let c = self.cfg.slots_per_epoch;
        for epoch in from..to {
            for k in 0..c {
                let slot = epoch * c + k;
                if slot == 0 {
                    continue;
                }
                let t = self.sender_time(slot as f64);
                self.push(t, Action::Propose(slot));
            }
            for k in 0..c {
                let slot = epoch * c + k;
                for v in self.committees.committee_for_slot(slot) {
                    let t = self.sender_time(slot as f64 + 0.5);
                    self.push(t, Action::Attest(slot, v));
                }
                if let Strategy::SmokeBomb { vote_time, .. } = self.cfg.strategy {
                    self.push(slot as f64 + vote_time, Action::SmokeBomb(slot));
                }
            }
            self.push(((epoch + 1) * c) as f64, Action::EpochEnd(epoch));
        }
        self.scheduled_until = to * c;
    }

    // intended time plus sender jitter, kept inside the slot
    fn sender_time(&mut self, intent: f64) -> f64 {
        let e = self.cfg.network.eps1;
        let x = if e > 0.0 { self.rng.random_range(-e..=e) } else { 0.0 };
        let slot_start = intent.floor();
        (intent + x).clamp(slot_start, slot_start + 1.0 - 1e-9)
    }

    fn delivery_time(&mut self, sent: f64) -> f64 {
        let n = self.cfg.network;
        let y = if n.eps2 > 0.0 { self.rng.random_range(-n.eps2..=n.eps2) } else { 0.0 };
        (sent + n.a + y).max(sent)
    }

    fn acts_honestly(&self, v: ValidatorId) -> bool {
        self.all_honest || !self.cfg.is_byzantine(v) || matches!(self.cfg.strategy, Strategy::Honest)
    }

    fn fork_choice_opts(&self, slot: Slot) -> ForkChoiceOptions {
        let epoch = slot / self.cfg.slots_per_epoch;
        ForkChoiceOptions {
            before_slot: self.cfg.consideration_delay.then_some(slot),
            min_epoch: self.cfg.stale_filter.then(|| epoch.saturating_sub(1)),
        }
    }

    /// Runs every scheduled event.
    pub fn run_to_end(&mut self) {
        while self.step() {}
    }

    /// Runs events strictly before time `t`.
    pub fn run_until(&mut self, t: f64) {
        while self.queue.peek().is_some_and(|s| s.t < t) {
            self.step();
        }
        self.now = self.now.max(t);
    }

    fn step(&mut self) -> bool {
        let Some(s) = self.queue.pop() else { return false };
        self.now = s.t;
        self.network.advance_clock(s.t);
        match s.action {
            Action::Propose(slot) => self.on_propose(s.t, slot),
            Action::Attest(slot, v) => self.on_attest(s.t, slot, v),
            Action::SmokeBomb(slot) => self.on_smoke_bomb(s.t, slot),
            Action::Deliver(to, idx) => self.on_deliver(s.t, to, idx),
            Action::EpochEnd(e) => self.on_epoch_end(s.t, e),
        }
        true
    }

    fn broadcast(&mut self, t: f64, from: ValidatorId, msg: Message, recipients: Option<&[ValidatorId]>) {
        let idx = self.messages.len();
        self.messages.push(msg.clone());
        let _ = self.network.deliver(msg.clone());
        let own = &mut self.views[from.0 as usize];
        own.advance_clock(t);
        let _ = own.deliver(msg);
        let targets: Vec<ValidatorId> = match recipients {
            Some(r) => r.to_vec(),
            None => (0..self.cfg.validators as u32).map(ValidatorId).collect(),
        };
        for to in targets {
            if to == from {
                continue;
            }
            let d = self.delivery_time(t);
            self.push(d, Action::Deliver(to, idx));
        }
    }

    fn on_deliver(&mut self, t: f64, to: ValidatorId, idx: usize) {
        let msg = self.messages[idx].clone();
        let id = msg.id();
        let view = &mut self.views[to.0 as usize];
        let mut accepted = view.advance_clock(t).len();
        accepted += view.deliver(msg).map(|v| v.len()).unwrap_or(0);
        if self.cfg.log_deliveries {
            self.events.push(SimEvent::Deliver { t, to, msg: id, accepted });
        }
    }

    fn includable(&self, view: &View, head: BlockId, slot: Slot) -> Vec<AttestationId> {
        let mut included = BTreeSet::new();
        for b in view.chain(head).expect("head is accepted") {
            included.extend(view.block(b).unwrap().newattests.iter().copied());
        }
        view.attestations()
            .filter(|a| a.slot + self.cfg.inclusion_delay <= slot && !included.contains(&a.id))
            .map(|a| a.id)
            .collect()
    }

    fn on_propose(&mut self, t: f64, slot: Slot) {
        let proposer = self.committees.proposer(slot);
        let pi = proposer.0 as usize;
        self.views[pi].advance_clock(t);
        let honest = self.acts_honestly(proposer);
        if !honest && matches!(self.cfg.strategy, Strategy::Withhold) {
            return;
        }
        let opts = self.fork_choice_opts(slot);
        let head = fork_choice::hlmd_with(&self.views[pi], &opts).head;
        let atts = self.includable(&self.views[pi], head, slot);
        let forking = !honest && matches!(self.cfg.strategy, Strategy::ForkBuilder { .. } | Strategy::SmokeBomb { .. });
        if !forking {
            let b = Block::new(proposer, slot, head, atts, Vec::new()).with_timestamp(t);
            self.log_propose(t, &b, head, honest);
            self.broadcast(t, proposer, b.into(), None);
            return;
        }
        let a = Block::new(proposer, slot, head, atts.clone(), b"left".to_vec()).with_timestamp(t);
        let b = Block::new(proposer, slot, head, atts, b"right".to_vec()).with_timestamp(t);
        self.log_propose(t, &a, head, false);
        self.log_propose(t, &b, head, false);
        // smoke-bomb siblings are public; only the fork builder may partition
        let split = matches!(self.cfg.strategy, Strategy::ForkBuilder { split_broadcast: true });
        if split {
            let n = self.cfg.validators as u32;
            let byz: Vec<ValidatorId> = (0..n).map(ValidatorId).filter(|v| self.cfg.is_byzantine(*v)).collect();
            let mut left: Vec<ValidatorId> = (0..n / 2).map(ValidatorId).collect();
            let mut right: Vec<ValidatorId> = (n / 2..n).map(ValidatorId).collect();
            left.extend(byz.iter().copied());
            right.extend(byz.iter().copied());
            left.sort();
            left.dedup();
            right.sort();
            right.dedup();
            self.broadcast(t, proposer, a.into(), Some(&left));
            self.broadcast(t, proposer, b.into(), Some(&right));
        } else {
            self.broadcast(t, proposer, a.into(), None);
            self.broadcast(t, proposer, b.into(), None);
        }
    }

    fn log_propose(&mut self, t: f64, b: &Block, parent: BlockId, honest: bool) {
        self.events.push(SimEvent::Propose {
            t,
            slot: b.slot,
            proposer: b.proposer.unwrap(),
            block: b.id,
            parent,
            attests: b.newattests.len(),
            byzantine: !honest,
        });
    }

    fn on_attest(&mut self, t: f64, slot: Slot, v: ValidatorId) {
        let vi = v.0 as usize;
        self.views[vi].advance_clock(t);
        if !self.acts_honestly(v) && matches!(self.cfg.strategy, Strategy::Withhold | Strategy::SmokeBomb { .. }) {
            return;
        }
        let opts = self.fork_choice_opts(slot);
        let att = ffg::make_attestation(&self.views[vi], &self.committees, v, slot, &opts)
            .expect("scheduled attestor is in the committee")
            .with_timestamp(t);
        if self.acts_honestly(v) {
            self.honest_attestations += 1;
        }
        self.log_attest(t, &att, !self.acts_honestly(v));
        self.broadcast(t, v, att.into(), None);
    }

    fn log_attest(&mut self, t: f64, a: &Attestation, byzantine: bool) {
        self.events.push(SimEvent::Attest {
            t,
            slot: a.slot,
            author: a.author,
            block: a.block,
            source: a.source,
            target: a.target,
            claimed: a.timestamp,
            byzantine,
        });
    }

    // the two blocks the adversary splits over, judged from the network view
    fn smoke_targets(&self, slot: Slot) -> (BlockId, BlockId) {
        let nw = &self.network;
        let in_slot: Vec<BlockId> = nw.blocks().filter(|b| b.slot == slot).map(|b| b.id).collect();
        if in_slot.len() >= 2 {
            return (in_slot[0], in_slot[1]);
        }
        let a = in_slot.first().copied().unwrap_or_else(|| fork_choice::hlmd(nw));
        let b = nw.block(a).ok().and_then(|blk| blk.parent).unwrap_or(a);
        (a, b)
    }

    fn on_smoke_bomb(&mut self, t: f64, slot: Slot) {
        if self.all_honest {
            return;
        }
        let Strategy::SmokeBomb { fake_timestamp, .. } = self.cfg.strategy else { return };
        let (x, y) = self.smoke_targets(slot);
        let byz: Vec<ValidatorId> =
            self.committees.committee_for_slot(slot).into_iter().filter(|v| self.cfg.is_byzantine(*v)).collect();
        for (i, v) in byz.into_iter().enumerate() {
            let target = if i % 2 == 0 { x } else { y };
            let Ok(att) = build_attestation(&self.network, v, slot, target) else { continue };
            let att = att.with_timestamp(slot as f64 + fake_timestamp);
            self.log_attest(t, &att, true);
            self.broadcast(t, v, att.into(), None);
        }
    }

    fn on_epoch_end(&mut self, t: f64, epoch: Epoch) {
        for v in &mut self.views {
            v.advance_clock(t);
        }
        self.events.push(SimEvent::EpochEnd { t, epoch });
        let m = self.epoch_metrics(epoch);
        self.metrics.push(m);
    }

    fn epoch_metrics(&mut self, epoch: Epoch) -> EpochMetrics {
        let nw = &self.network;
        let j = ffg::justified(nw);
        let f = ffg::finalized(nw);
        let new_justified: Vec<_> = j.difference(&self.last_j).copied().collect();
        let new_finalized: Vec<_> = f.difference(&self.last_f).copied().collect();
        let c = self.cfg.slots_per_epoch;
        let mut equivocated = 0;
        for slot in epoch * c..(epoch + 1) * c {
            let committee = self.committees.committee_for_slot(slot);
            let cw: Stake = committee.iter().map(|v| self.validators.stake(*v)).sum();
            let mut by_block: BTreeMap<BlockId, BTreeSet<ValidatorId>> = BTreeMap::new();
            for a in nw.attestations().filter(|a| a.slot == slot) {
                by_block.entry(a.block).or_default().insert(a.author);
            }
            let best = by_block
                .values()
                .map(|s| s.iter().map(|v| self.validators.stake(*v)).sum::<Stake>())
                .fold(0.0, f64::max);
            if 3.0 * best < 2.0 * cw {
                equivocated += 1;
            }
        }
        let detection = slashing::detect(nw);
        let honest_evidence = detection.evidence.iter().filter(|e| !self.ever_byzantine.contains(&e.author)).count();
        let first = &self.views[0];
        let views_agree = self.views.iter().all(|v| {
            v.block_count() == first.block_count()
                && v.attestation_count() == first.attestation_count()
                && v.blocks().map(|b| b.id).eq(first.blocks().map(|b| b.id))
                && v.attestations().map(|a| a.id).eq(first.attestations().map(|a| a.id))
        });
        let m = EpochMetrics {
            epoch,
            justified: j.len(),
            finalized: f.len(),
            max_justified_epoch: j.iter().map(|p| p.epoch).max().unwrap_or(0),
            max_finalized_epoch: f.iter().map(|p| p.epoch).max().unwrap_or(0),
            new_justified,
            new_finalized,
            head: fork_choice::hlmd(nw),
            blocks: nw.block_count(),
            equivocated_slots: equivocated,
            honest_evidence,
            views_agree,
        };
        self.last_j = j;
        self.last_f = f;
        m
    }

    /// Switches to the all-honest, zero-latency regime at the next epoch
    /// boundary: every message sent so far reaches every validator, pending
    /// deliveries are dropped, proposers include everything from earlier
    /// slots, and `extra_epochs` more epochs are scheduled.
    pub fn continue_synchronously(&mut self, extra_epochs: u64) {
        let c = self.cfg.slots_per_epoch;
        let start_epoch = self.now.ceil() as u64 / c + u64::from(self.now.ceil() as u64 % c != 0);
        let start = (start_epoch * c) as f64;
        self.run_until(start);
        self.queue.clear();
        self.all_honest = true;
        self.cfg.network = NetworkParams::SYNCHRONOUS;
        self.cfg.inclusion_delay = 1;
        for v in &mut self.views {
            v.advance_clock(start);
            v.deliver_all(self.messages.iter().cloned());
        }
        self.network.advance_clock(start);
        self.now = start;
        self.schedule_epochs(start_epoch, start_epoch + extra_epochs);
        self.cfg.epochs = start_epoch + extra_epochs;
    }

    pub fn finish(self) -> SimTrace {
        let detection = slashing::detect(&self.network);
        let honest_offenders: Vec<ValidatorId> =
            detection.offenders.iter().copied().filter(|v| !self.ever_byzantine.contains(v)).collect();
        SimTrace {
            config: self.cfg,
            events: self.events,
            metrics: self.metrics,
            views: self.views,
            network: self.network,
            honest_attestations: self.honest_attestations,
            detection,
            honest_offenders,
        }
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }
}

pub fn run(cfg: SimConfig) -> Result<SimTrace> {
    let mut sim = Simulator::new(cfg)?;
    sim.run_to_end();
    Ok(sim.finish())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LivenessFailure {
    pub case: u64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LivenessReport {
    pub cases: u64,
    pub failures: Vec<LivenessFailure>,
    pub honest_attestations: u64,
    pub honest_offenders: usize,
}

/// Random adversarial pre-state configuration for case `seed`.
pub fn liveness_prestate_config(seed: u64) -> SimConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = [2u64, 4][rng.random_range(0..2)];
    let per = rng.random_range(2..=4u64);
    let n = (c * per) as usize;
    let byzantine = rng.random_range(0..=((n - 1) / 3));
    let strategy = match rng.random_range(0..4) {
        0 => Strategy::Withhold,
        1 => Strategy::ForkBuilder { split_broadcast: rng.random_bool(0.5) },
        2 => Strategy::SmokeBomb { vote_time: rng.random_range(0.0..0.9), fake_timestamp: rng.random_range(0.0..0.9) },
        _ => Strategy::Honest,
    };
    let stakes = if rng.random_bool(0.3) {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let s: f64 = raw.iter().sum();
        Some(raw.iter().map(|x| x * n as f64 / s).collect())
    } else {
        None
    };
    SimConfig {
        validators: n,
        slots_per_epoch: c,
        stakes,
        byzantine,
        strategy,
        network: NetworkParams {
            a: rng.random_range(0.0..1.5),
            eps1: rng.random_range(0.0..0.3),
            eps2: rng.random_range(0.0..1.0),
        },
        epochs: rng.random_range(1..=4),
        inclusion_delay: rng.random_range(1..=2),
        consideration_delay: rng.random_bool(0.5),
        stale_filter: false,
        identity_shuffle: false,
        log_deliveries: false,
        seed: rng.random(),
    }
}

/// Runs one adversarial pre-state followed by two synchronous all-honest
/// epochs and checks that a new pair gets 1-finalized.
pub fn liveness_case(seed: u64) -> Result<(bool, String, u64, usize)> {
    let cfg = liveness_prestate_config(seed);
    let mut sim = Simulator::new(cfg)?;
    sim.run_to_end();
    let before: BTreeSet<(CheckpointPair, u64)> =
        ffg::finalizations(sim.network_view()).into_iter().map(|f| (f.pair, f.k)).collect();
    sim.continue_synchronously(2);
    sim.run_to_end();
    let trace = sim.finish();
    let after = ffg::finalizations(&trace.network);
    let fresh: Vec<_> = after.iter().filter(|f| f.k == 1 && !before.contains(&(f.pair, f.k))).collect();
    let ok = !fresh.is_empty();
    let reason = if ok {
        String::new()
    } else {
        format!("no new 1-finalized pair; finalized after continuation: {:?}", after)
    };
    Ok((ok, reason, trace.honest_attestations, trace.honest_offenders.len()))
}

pub fn fuzz_plausible_liveness(seed: u64, n_cases: u64) -> LivenessReport {
    let mut report = LivenessReport { cases: n_cases, ..Default::default() };
    for case in 0..n_cases {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(case);
        match liveness_case(s) {
            Ok((ok, reason, atts, offenders)) => {
                report.honest_attestations += atts;
                report.honest_offenders += offenders;
                if !ok {
                    report.failures.push(LivenessFailure { case, seed: s, reason });
                }
            }
            Err(e) => report.failures.push(LivenessFailure { case, seed: s, reason: e.to_string() }),
        }
    }
    report
}
