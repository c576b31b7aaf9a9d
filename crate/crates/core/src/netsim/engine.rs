use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::adversary::{tamper_block, Adversary, AdversaryKind, Attack};
use super::log::{Event, EventKind, EventLog};
use super::{LinkClass, Scenario, SimConfig};
use crate::consensus::{AuthOutcome, ClientOutcome, DropReason, NodeState, RejectReason, Role, WireBlock};
use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::puf::{manufacture, Challenge, PufConfig, PufDevice};
use crate::registry::Registry;
use crate::seed;

/// How a receiver disposed of a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
    Appended,
    Dropped(DropReason),
}

impl Verdict {
    pub fn code(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::Appended => "appended",
            Verdict::Rejected(r) => r.code(),
            Verdict::Dropped(r) => r.code(),
        }
    }
}

/// A message that reached a node and was handled.
#[derive(Clone, Debug)]
pub struct Delivery {
    pub msg: u64,
    pub from: NodeId,
    pub to: NodeId,
    /// Index of the scripted initiation this message descends from.
    pub tx: Option<usize>,
    pub adversarial: Option<AdversaryKind>,
    pub t_sent: u64,
    pub t_recv: u64,
    pub t_done: u64,
    /// Handler cost charged to the receiver (excludes queueing).
    pub cost_ms: u64,
    pub block: WireBlock,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct LostMessage {
    pub msg: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub tx: Option<usize>,
    pub adversarial: Option<AdversaryKind>,
}

/// One scripted initiation as it actually happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxRecord {
    pub tx: usize,
    pub origin: NodeId,
    pub seq: u64,
    pub challenge_index: usize,
    /// Data collection time, also stored in the block.
    pub t_i: u64,
    /// When tagging finished and the broadcast left the device.
    pub t_sent: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub log: EventLog,
    /// Final node states in roster order.
    pub nodes: Vec<NodeState>,
    pub transactions: Vec<TxRecord>,
    pub deliveries: Vec<Delivery>,
    pub lost: Vec<LostMessage>,
    /// Time of the last processed event.
    pub end_ms: u64,
}

impl RunOutcome {
    pub fn node(&self, id: NodeId) -> Option<&NodeState> {
        self.nodes.iter().find(|n| n.node_id() == id)
    }
}

/// A configured network ready to run one scenario.
pub struct Network {
    config: SimConfig,
    registry: Registry,
    nodes: Vec<NodeState>,
    puf: PufConfig,
}

impl Network {
    /// Builds node states for the roster. Every roster node needs a device
    /// with a matching id and an enrolment record; the trusted node must be
    /// on the registry's trusted list. `puf` is used to manufacture any fake
    /// devices the scenario injects.
    pub fn new(config: SimConfig, registry: Registry, devices: Vec<PufDevice>, puf: PufConfig) -> Result<Self> {
        config.validate()?;
        let mut by_id: BTreeMap<NodeId, PufDevice> = devices.into_iter().map(|d| (d.device_id(), d)).collect();
        let mut nodes = Vec::with_capacity(config.roster.len());
        for r in &config.roster {
            let device = by_id
                .remove(&r.node_id)
                .ok_or_else(|| Error::Config(format!("no device for roster node {}", r.node_id)))?;
            let challenges = registry
                .enrolled_challenges(r.node_id)
                .map_err(|_| Error::Config(format!("roster node {} is not enrolled", r.node_id)))?;
            if r.role == Role::Trusted && !registry.is_trusted(r.node_id) {
                return Err(Error::Config(format!("trusted node {} lacks database access", r.node_id)));
            }
            nodes.push(NodeState::new(r.role, device, challenges));
        }
        Ok(Self { config, registry, nodes, puf })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    /// Runs the event loop to quiescence.
    pub fn run(self, scenario: &Scenario) -> Result<RunOutcome> {
        scenario.validate(&self.config)?;
        Engine::new(self, scenario).run()
    }
}

#[derive(Clone)]
struct Msg {
    id: u64,
    from: NodeId,
    to: NodeId,
    block: WireBlock,
    tx: Option<usize>,
    adversarial: Option<AdversaryKind>,
    t_sent: u64,
}

enum Ev {
    Initiate(usize),
    Send { from: NodeId, block: WireBlock, tx: Option<usize>, adversarial: Option<AdversaryKind> },
    Deliver(Msg),
    Handle { node: usize, msg: Msg, t_recv: u64, cost: u64 },
    Inject { adversary: usize },
}

struct Scheduled {
    t: u64,
    order: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.t, self.order) == (other.t, other.order)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t, other.order).cmp(&(self.t, self.order))
    }
}

struct Engine<'s> {
    config: SimConfig,
    registry: Registry,
    nodes: Vec<NodeState>,
    index: BTreeMap<NodeId, usize>,
    busy_until: Vec<u64>,
    puf: PufConfig,
    scenario: &'s Scenario,
    queue: BinaryHeap<Scheduled>,
    order: u64,
    next_msg: u64,
    net_rng: ChaCha8Rng,
    cost_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    phantoms: BTreeMap<usize, NodeState>,
    delivered: Vec<Msg>,
    log: EventLog,
    transactions: Vec<TxRecord>,
    deliveries: Vec<Delivery>,
    lost: Vec<LostMessage>,
    now: u64,
}

impl<'s> Engine<'s> {
    fn new(net: Network, scenario: &'s Scenario) -> Self {
        let seed = net.config.seed;
        let index = net.nodes.iter().enumerate().map(|(i, n)| (n.node_id(), i)).collect();
        let busy_until = vec![0; net.nodes.len()];
        Self {
            config: net.config,
            registry: net.registry,
            nodes: net.nodes,
            index,
            busy_until,
            puf: net.puf,
            scenario,
            queue: BinaryHeap::new(),
            order: 0,
            next_msg: 0,
            net_rng: seed::rng("netsim/link", &[seed]),
            cost_rng: seed::rng("netsim/cost", &[seed]),
            adv_rng: seed::rng("netsim/adversary", &[seed]),
            phantoms: BTreeMap::new(),
            delivered: Vec::new(),
            log: EventLog::default(),
            transactions: Vec::new(),
            deliveries: Vec::new(),
            lost: Vec::new(),
            now: 0,
        }
    }

    fn schedule(&mut self, t: u64, ev: Ev) {
        debug_assert!(t >= self.now, "event scheduled in the past");
        self.queue.push(Scheduled { t, order: self.order, ev });
        self.order += 1;
    }

    fn emit(&mut self, kind: EventKind, node: NodeId, block_ref: String, detail: String) {
        self.log.push(Event { t_ms: self.now, kind, node, block_ref, detail });
    }

    fn run(mut self) -> Result<RunOutcome> {
        for k in 0..self.scenario.initiations.len() {
            self.schedule(self.scenario.initiations[k].t_ms, Ev::Initiate(k));
        }
        for (k, a) in self.scenario.adversaries.iter().enumerate() {
            if let super::Schedule::At(times) = &a.schedule {
                for t in times.clone() {
                    self.schedule(t, Ev::Inject { adversary: k });
                }
            }
        }
        while let Some(Scheduled { t, ev, .. }) = self.queue.pop() {
            self.now = t;
            match ev {
                Ev::Initiate(k) => self.initiate(k)?,
                Ev::Send { from, block, tx, adversarial } => self.broadcast(from, block, tx, adversarial),
                Ev::Deliver(msg) => self.deliver(msg)?,
                Ev::Handle { node, msg, t_recv, cost } => self.handle(node, msg, t_recv, cost)?,
                Ev::Inject { adversary } => self.inject(adversary)?,
            }
        }
        Ok(RunOutcome {
            log: self.log,
            nodes: self.nodes,
            transactions: self.transactions,
            deliveries: self.deliveries,
            lost: self.lost,
            end_ms: self.now,
        })
    }

    fn occupy(&mut self, node: usize, cost: u64) -> u64 {
        let done = self.now.max(self.busy_until[node]) + cost;
        self.busy_until[node] = done;
        done
    }

    fn scale(&self, node: usize) -> f64 {
        self.config.roster[node].cost_scale
    }

    fn link(&self, id: NodeId) -> LinkClass {
        self.index.get(&id).map_or(LinkClass::Wireless, |i| self.config.roster[*i].link)
    }

    fn initiate(&mut self, k: usize) -> Result<()> {
        let script = &self.scenario.initiations[k];
        let node = self.index[&script.node];
        let count = self.nodes[node].enrolled_challenge_count();
        let challenge_index = match script.challenge_index {
            Some(i) => i,
            None => (seed::derive_u64("netsim/challenge", &[self.config.seed, k as u64]) % count as u64) as usize,
        };
        let block = self.nodes[node].initiate(script.payload.clone(), challenge_index, self.now)?;
        let cost = self.config.costs.initiate.sample(self.scale(node), &mut self.cost_rng);
        let t_sent = self.occupy(node, cost);
        self.transactions.push(TxRecord {
            tx: k,
            origin: script.node,
            seq: block.data.seq,
            challenge_index,
            t_i: self.now,
            t_sent,
        });
        self.emit(
            EventKind::Initiate,
            script.node,
            block.auth_tag.0.to_hex(),
            format!("tx={k} seq={} challenge={challenge_index}", block.data.seq),
        );
        self.schedule(t_sent, Ev::Send { from: script.node, block, tx: Some(k), adversarial: None });
        Ok(())
    }

    /// Fan-out to every roster node except the sender.
    fn broadcast(&mut self, from: NodeId, block: WireBlock, tx: Option<usize>, adversarial: Option<AdversaryKind>) {
        let recipients: Vec<NodeId> =
            self.config.roster.iter().map(|r| r.node_id).filter(|id| *id != from).collect();
        for to in recipients {
            let mut msg = Msg { id: self.next_msg, from, to, block: block.clone(), tx, adversarial, t_sent: self.now };
            self.next_msg += 1;
            if msg.adversarial.is_none() {
                self.apply_transforms(&mut msg);
            }
            self.transmit(msg);
        }
    }

    fn apply_transforms(&mut self, msg: &mut Msg) {
        for a in self.scenario.adversaries.iter() {
            if !a.window_contains(self.now) || !a.target.matches(msg.from, msg.to) {
                continue;
            }
            match a.attack {
                Attack::Tamper { flips } => {
                    let bits = tamper_block(&mut msg.block, flips, &mut self.adv_rng);
                    msg.adversarial = Some(AdversaryKind::Tamper);
                    self.log.push(Event {
                        t_ms: self.now,
                        kind: EventKind::Tamper,
                        node: msg.to,
                        block_ref: msg.block.auth_tag.0.to_hex(),
                        detail: format!("msg={} bits={bits:?}", msg.id),
                    });
                }
                Attack::ForgeValidator { claimed } if msg.block.validated_by.is_none() => {
                    msg.block.validated_by = Some(claimed);
                    msg.adversarial = Some(AdversaryKind::ForgeValidator);
                    self.log.push(Event {
                        t_ms: self.now,
                        kind: EventKind::Forge,
                        node: msg.to,
                        block_ref: msg.block.auth_tag.0.to_hex(),
                        detail: format!("msg={} claimed={claimed}", msg.id),
                    });
                }
                _ => {}
            }
        }
    }

    /// Loss and latency for one message.
    fn transmit(&mut self, msg: Msg) {
        let tag = msg.block.auth_tag.0.to_hex();
        if self.config.drop_rate > 0.0 && self.net_rng.random::<f64>() < self.config.drop_rate {
            self.emit(EventKind::Lost, msg.to, tag, format!("msg={} from={}", msg.id, msg.from));
            self.lost.push(LostMessage { msg: msg.id, from: msg.from, to: msg.to, tx: msg.tx, adversarial: msg.adversarial });
            return;
        }
        let latency = self.config.latency.hop(self.link(msg.from)).sample(&mut self.net_rng)
            + self.config.latency.hop(self.link(msg.to)).sample(&mut self.net_rng);
        self.emit(EventKind::Send, msg.from, tag, format!("msg={} to={} latency={latency}", msg.id, msg.to));
        self.schedule(self.now + latency, Ev::Deliver(msg));
    }

    fn deliver(&mut self, msg: Msg) -> Result<()> {
        let Some(&node) = self.index.get(&msg.to) else {
            return Ok(());
        };
        self.emit(
            EventKind::Recv,
            msg.to,
            msg.block.auth_tag.0.to_hex(),
            format!("msg={} from={}{}", msg.id, msg.from, adversarial_suffix(msg.adversarial)),
        );
        self.delivered.push(msg.clone());
        let t_recv = self.now;
        match self.nodes[node].role() {
            Role::Trusted => {
                let cost = self.config.costs.authenticate.sample(self.scale(node), &mut self.cost_rng);
                let done = self.occupy(node, cost);
                self.schedule(done, Ev::Handle { node, msg, t_recv, cost });
            }
            // sender identity is checked on arrival; only claimed validations
            // cost handler time
            Role::Client if msg.block.validated_by.is_none() => self.handle(node, msg, t_recv, 0)?,
            Role::Client => {
                let cost = self.config.costs.append.sample(self.scale(node), &mut self.cost_rng);
                let done = self.occupy(node, cost);
                self.schedule(done, Ev::Handle { node, msg, t_recv, cost });
            }
        }
        Ok(())
    }

    fn handle(&mut self, node: usize, msg: Msg, t_recv: u64, cost: u64) -> Result<()> {
        let id = self.nodes[node].node_id();
        let suffix = adversarial_suffix(msg.adversarial);
        let verdict = match self.nodes[node].role() {
            Role::Trusted => match self.nodes[node].authenticate(&msg.block, &self.registry, self.now)? {
                AuthOutcome::Accepted { entry, rebroadcast } => {
                    self.emit(
                        EventKind::Accept,
                        id,
                        entry.entry_hash.to_hex(),
                        format!("msg={} height={} device={} seq={}{suffix}", msg.id, entry.height, entry.data.device_id, entry.data.seq),
                    );
                    self.schedule(
                        self.now,
                        Ev::Send { from: id, block: rebroadcast, tx: msg.tx, adversarial: msg.adversarial },
                    );
                    Verdict::Accepted
                }
                AuthOutcome::Rejected(reason) => {
                    self.emit(EventKind::Reject, id, msg.block.auth_tag.0.to_hex(), format!("msg={} reason={reason}{suffix}", msg.id));
                    Verdict::Rejected(reason)
                }
            },
            Role::Client => match self.nodes[node].accept_validated(&msg.block, &self.registry, self.now)? {
                ClientOutcome::Appended(entry) => {
                    self.emit(
                        EventKind::Append,
                        id,
                        entry.entry_hash.to_hex(),
                        format!("msg={} height={} device={} seq={}{suffix}", msg.id, entry.height, entry.data.device_id, entry.data.seq),
                    );
                    Verdict::Appended
                }
                ClientOutcome::Dropped(reason) => {
                    self.emit(EventKind::Drop, id, msg.block.auth_tag.0.to_hex(), format!("msg={} reason={reason}{suffix}", msg.id));
                    Verdict::Dropped(reason)
                }
            },
        };
        self.deliveries.push(Delivery {
            msg: msg.id,
            from: msg.from,
            to: msg.to,
            tx: msg.tx,
            adversarial: msg.adversarial,
            t_sent: msg.t_sent,
            t_recv,
            t_done: self.now,
            cost_ms: cost,
            block: msg.block,
            verdict,
        });
        Ok(())
    }

    fn inject(&mut self, k: usize) -> Result<()> {
        let adversary: &Adversary = &self.scenario.adversaries[k];
        match adversary.attack {
            Attack::Replay => {
                let target = adversary.target;
                let Some(old) = self.delivered.iter().rev().find(|m| target.matches(m.from, m.to)).cloned() else {
                    self.emit(EventKind::Replay, NodeId::default(), String::new(), format!("adversary={k} nothing-to-replay"));
                    return Ok(());
                };
                let msg = Msg {
                    id: self.next_msg,
                    adversarial: Some(AdversaryKind::Replay),
                    t_sent: self.now,
                    ..old
                };
                self.next_msg += 1;
                self.emit(
                    EventKind::Replay,
                    msg.to,
                    msg.block.auth_tag.0.to_hex(),
                    format!("adversary={k} msg={} from={}", msg.id, msg.from),
                );
                self.transmit(msg);
            }
            Attack::FakeDevice { device_seed } => {
                if !self.phantoms.contains_key(&k) {
                    let phantom = self.phantom(device_seed)?;
                    self.phantoms.insert(k, phantom);
                }
                let phantom = self.phantoms.get_mut(&k).expect("inserted above");
                let payload = format!("fake reading {}", phantom.next_seq()).into_bytes();
                let block = phantom.initiate(payload, 0, self.now)?;
                let from = phantom.node_id();
                self.emit(
                    EventKind::FakeDevice,
                    from,
                    block.auth_tag.0.to_hex(),
                    format!("adversary={k} seq={}", block.data.seq),
                );
                self.broadcast(from, block, None, Some(AdversaryKind::FakeDevice));
            }
            Attack::Tamper { .. } | Attack::ForgeValidator { .. } => {}
        }
        Ok(())
    }

    fn phantom(&self, device_seed: u64) -> Result<NodeState> {
        let id = Adversary::fake_device_id(device_seed);
        let device = manufacture(&self.puf, id, seed::derive_u64("netsim/fake-device", &[self.config.seed, device_seed]))?;
        let mut rng = seed::rng("netsim/fake-challenge", &[self.config.seed, device_seed]);
        let challenge = Challenge::random(&mut rng, device.bank_size(), crate::ledger::RESPONSE_BITS)?;
        Ok(NodeState::new(Role::Client, device, vec![challenge]))
    }
}

fn adversarial_suffix(kind: Option<AdversaryKind>) -> String {
    kind.map(|k| format!(" adversary={k}")).unwrap_or_default()
}
