use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::delay::{propagation_delay, DelayConstants, JitterModel};
use super::packet::{DropReason, NodeIx, Packet, PacketId, PacketKind, PacketStatus, DEFAULT_TTL};
use super::{SimError, SimTime};
use crate::routing::{compute_tables, default_tdm_schedules, ForwardingTables, TdmSchedule};
use crate::topo::{NodeKind, ScenarioConfig, Topology};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    pub constants: DelayConstants,
    pub jitter: JitterModel,
    pub seed: u64,
    /// Independent random stream under the same seed; campaigns give each
    /// iteration its own stream.
    pub stream: u64,
    /// Per link direction, counting the packet in service. `None` = unbounded.
    pub queue_cap: Option<usize>,
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conservation {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub kind: &'static str,
    pub node: NodeIx,
    pub packet: PacketId,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Originate(PacketId),
    Arrive(PacketId, NodeIx),
    Processed(PacketId, NodeIx),
}

#[derive(Debug, Clone)]
struct Event {
    time: SimTime,
    seq: u64,
    action: Action,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone)]
struct NodeInfo {
    id: String,
    kind: NodeKind,
    processing_us: f64,
}

#[derive(Debug, Clone)]
struct LinkInfo {
    a: NodeIx,
    propagation: SimTime,
    rate_gbps: f64,
}

#[derive(Debug, Clone, Default)]
struct LinkQueue {
    busy_until: SimTime,
    /// Finish times of packets queued or in service.
    pending: VecDeque<SimTime>,
}

/// One single-threaded simulation instance. Independent engines share
/// nothing and can run on different threads.
#[derive(Debug, Clone)]
pub struct Engine {
    nodes: Vec<NodeInfo>,
    index: BTreeMap<String, NodeIx>,
    links: Vec<LinkInfo>,
    next: Vec<Vec<Option<(NodeIx, usize)>>>,
    tdm: BTreeMap<(NodeIx, NodeIx), TdmSchedule>,
    queues: Vec<LinkQueue>,
    queue_cap: Option<usize>,
    max_depth: usize,
    jitter: JitterModel,
    rng: ChaCha8Rng,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: SimTime,
    packets: Vec<Packet>,
    delivered: u64,
    dropped: u64,
    processed: u64,
    trace: Option<Vec<TraceRecord>>,
}

impl Engine {
    pub fn new(t: &Topology, tables: &ForwardingTables, opts: SimOptions) -> Result<Engine, SimError> {
        opts.constants.check().map_err(SimError::InvalidArgument)?;
        opts.jitter.check().map_err(SimError::InvalidArgument)?;

        let nodes: Vec<NodeInfo> = t
            .nodes()
            .map(|n| NodeInfo {
                id: n.id.clone(),
                kind: n.kind(),
                processing_us: n.processing_delay_us.max(0.0),
            })
            .collect();
        let index: BTreeMap<String, NodeIx> =
            nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

        let mut links = Vec::new();
        let mut link_index = BTreeMap::new();
        for l in t.links() {
            let (Some(&a), Some(_)) = (index.get(&l.a), index.get(&l.b)) else {
                continue;
            };
            if !(l.rate_gbps > 0.0) {
                return Err(SimError::InvalidArgument(format!("link {} has rate {}", l.id, l.rate_gbps)));
            }
            link_index.insert(l.id.clone(), links.len());
            links.push(LinkInfo {
                a,
                propagation: SimTime::from_us(propagation_delay(l, &opts.constants)),
                rate_gbps: l.rate_gbps,
            });
        }

        let mut next = vec![vec![None; nodes.len()]; nodes.len()];
        for (at, row) in next.iter_mut().enumerate() {
            let Some(table) = tables.table(&nodes[at].id) else {
                continue;
            };
            for (dst, (hop, link)) in table {
                if let (Some(&d), Some(&h), Some(&l)) = (index.get(dst), index.get(hop), link_index.get(link)) {
                    row[d] = Some((h, l));
                }
            }
        }

        let mut tdm = BTreeMap::new();
        for (coupler, sched) in default_tdm_schedules(t) {
            let c = index[&coupler];
            for g in &sched.grants {
                tdm.insert((index[&g.sender], c), sched.clone());
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(opts.stream);

        Ok(Engine {
            queues: vec![LinkQueue::default(); links.len() * 2],
            nodes,
            index,
            links,
            next,
            tdm,
            queue_cap: opts.queue_cap,
            max_depth: 0,
            jitter: opts.jitter,
            rng,
            heap: BinaryHeap::new(),
            seq: 0,
            now: SimTime::ZERO,
            packets: Vec::new(),
            delivered: 0,
            dropped: 0,
            processed: 0,
            trace: opts.trace.then(Vec::new),
        })
    }

    /// Engine for a scenario with its own seed and jitter model.
    pub fn from_scenario(s: &ScenarioConfig) -> Result<Engine, SimError> {
        let opts = SimOptions {
            jitter: s.jitter,
            seed: s.seed,
            ..SimOptions::default()
        };
        Engine::new(&s.topology, &compute_tables(&s.topology), opts)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIx> {
        self.index.get(id).copied()
    }

    pub fn node_id(&self, ix: NodeIx) -> &str {
        &self.nodes[ix].id
    }

    pub fn node_kind(&self, ix: NodeIx) -> NodeKind {
        self.nodes[ix].kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes visited from `src` to `dst` by table lookup, both included.
    pub fn path(&self, src: NodeIx, dst: NodeIx) -> Option<Vec<NodeIx>> {
        let mut p = vec![src];
        let mut cur = src;
        while cur != dst {
            let (n, _) = self.next[cur][dst]?;
            if p.len() > self.nodes.len() {
                return None;
            }
            p.push(n);
            cur = n;
        }
        Some(p)
    }

    /// Links crossed from `src` to `dst`, as (rate Gbps, propagation).
    pub fn path_links(&self, src: NodeIx, dst: NodeIx) -> Option<Vec<(f64, SimTime)>> {
        let mut out = Vec::new();
        let mut cur = src;
        while cur != dst {
            let (n, l) = self.next[cur][dst]?;
            if out.len() > self.nodes.len() {
                return None;
            }
            out.push((self.links[l].rate_gbps, self.links[l].propagation));
            cur = n;
        }
        Some(out)
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet> {
        self.packets.get(id.0 as usize)
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn events_processed(&self) -> u64 {
        self.processed
    }

    pub fn pending_events(&self) -> usize {
        self.heap.len()
    }

    pub fn max_queue_depth(&self) -> usize {
        self.max_depth
    }

    pub fn reset_queue_stats(&mut self) {
        self.max_depth = 0;
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn conservation(&self) -> Conservation {
        let in_flight = self
            .packets
            .iter()
            .filter(|p| matches!(p.status, PacketStatus::Scheduled | PacketStatus::InFlight))
            .count() as u64;
        Conservation {
            injected: self.packets.len() as u64,
            delivered: self.delivered,
            dropped: self.dropped,
            in_flight,
        }
    }

    /// Schedules a packet to leave `src` at `at_us` (not before the clock).
    pub fn send(
        &mut self,
        kind: PacketKind,
        src: &str,
        dst: &str,
        size_bytes: u32,
        ttl: u8,
        at_us: f64,
    ) -> Result<PacketId, SimError> {
        let s = self.node_index(src).ok_or_else(|| SimError::UnknownNode(src.into()))?;
        let d = self.node_index(dst).ok_or_else(|| SimError::UnknownNode(dst.into()))?;
        self.send_ix(kind, s, d, size_bytes, ttl, SimTime::from_us(at_us))
    }

    pub fn send_ix(
        &mut self,
        kind: PacketKind,
        src: NodeIx,
        dst: NodeIx,
        size_bytes: u32,
        ttl: u8,
        at: SimTime,
    ) -> Result<PacketId, SimError> {
        if src >= self.nodes.len() || dst >= self.nodes.len() {
            return Err(SimError::InvalidArgument("node index out of range".into()));
        }
        if src == dst {
            return Err(SimError::InvalidArgument("source and destination coincide".into()));
        }
        if size_bytes == 0 {
            return Err(SimError::InvalidArgument("packet size must be positive".into()));
        }
        if at < self.now {
            return Err(SimError::InvalidArgument(format!("send time {at} is in the past")));
        }
        let id = self.create(kind, src, dst, size_bytes, ttl, at, None);
        self.schedule(at, Action::Originate(id));
        Ok(id)
    }

    /// Processes every pending event.
    pub fn run(&mut self) -> u64 {
        self.run_inner(None)
    }

    /// Processes events with time <= `until_us`, then advances the clock to
    /// `until_us`. Returns the number of events processed by this call.
    pub fn run_until_us(&mut self, until_us: f64) -> u64 {
        let until = SimTime::from_us(until_us);
        let n = self.run_inner(Some(until));
        self.now = self.now.max(until);
        n
    }

    fn run_inner(&mut self, until: Option<SimTime>) -> u64 {
        let mut n = 0;
        while let Some(Reverse(top)) = self.heap.peek() {
            if until.is_some_and(|u| top.time > u) {
                break;
            }
            let Reverse(ev) = self.heap.pop().unwrap();
            debug_assert!(ev.time >= self.now);
            self.now = ev.time;
            self.processed += 1;
            n += 1;
            match ev.action {
                Action::Originate(p) => self.originate(p),
                Action::Arrive(p, node) => self.arrive(p, node),
                Action::Processed(p, node) => self.processed(p, node),
            }
        }
        n
    }

    #[allow(clippy::too_many_arguments)]
    fn create(
        &mut self,
        kind: PacketKind,
        src: NodeIx,
        dst: NodeIx,
        size_bytes: u32,
        ttl: u8,
        at: SimTime,
        in_reply_to: Option<PacketId>,
    ) -> PacketId {
        let id = PacketId(self.packets.len() as u64);
        self.packets.push(Packet {
            id,
            kind,
            size_bytes,
            ttl,
            src,
            dst,
            sent_at: at,
            received_at: None,
            hop_trace: Vec::new(),
            in_reply_to,
            status: PacketStatus::Scheduled,
        });
        id
    }

    fn schedule(&mut self, time: SimTime, action: Action) {
        self.seq += 1;
        self.heap.push(Reverse(Event {
            time,
            seq: self.seq,
            action,
        }));
    }

    fn record(&mut self, kind: &'static str, node: NodeIx, packet: PacketId) {
        if let Some(t) = &mut self.trace {
            t.push(TraceRecord {
                time: self.now,
                kind,
                node,
                packet,
            });
        }
    }

    fn processing(&mut self, node: NodeIx) -> SimTime {
        let info = &self.nodes[node];
        let mut us = info.processing_us;
        // capping the half width at the base delay keeps the draw zero-mean
        // without ever producing a negative delay
        let h = self.jitter.half_width_us.min(us);
        if info.kind.is_l3() && !self.jitter.is_zero() && h > 0.0 {
            us = (us + self.rng.gen_range(-h..=h)).max(0.0);
        }
        SimTime::from_us(us)
    }

    fn originate(&mut self, id: PacketId) {
        let src = {
            let p = &mut self.packets[id.0 as usize];
            p.status = PacketStatus::InFlight;
            p.hop_trace.push((p.src, p.sent_at));
            p.src
        };
        self.record("inject", src, id);
        let d = self.processing(src);
        self.schedule(self.now + d, Action::Processed(id, src));
    }

    fn arrive(&mut self, id: PacketId, node: NodeIx) {
        self.packets[id.0 as usize].hop_trace.push((node, self.now));
        self.record("arrive", node, id);
        let d = self.processing(node);
        self.schedule(self.now + d, Action::Processed(id, node));
    }

    fn processed(&mut self, id: PacketId, node: NodeIx) {
        let (kind, src, dst, ttl, size) = {
            let p = &self.packets[id.0 as usize];
            (p.kind, p.src, p.dst, p.ttl, p.size_bytes)
        };
        if node == dst {
            let p = &mut self.packets[id.0 as usize];
            p.status = PacketStatus::Delivered;
            p.received_at = Some(self.now);
            self.delivered += 1;
            self.record("deliver", node, id);
            if kind == PacketKind::EchoRequest {
                self.reply(PacketKind::EchoReply, node, src, size, id);
            }
            return;
        }
        if node != src && self.nodes[node].kind.is_l3() {
            if ttl <= 1 {
                self.drop(id, node, DropReason::TtlExpired);
                if !kind.is_icmp_error_or_reply() {
                    self.reply(PacketKind::TimeExceeded, node, src, size, id);
                }
                return;
            }
            self.packets[id.0 as usize].ttl = ttl - 1;
        }
        let Some((hop, link)) = self.next[node][dst] else {
            self.drop(id, node, DropReason::Unreachable);
            return;
        };
        self.transmit(id, node, hop, link, size);
    }

    fn reply(&mut self, kind: PacketKind, from: NodeIx, to: NodeIx, size: u32, cause: PacketId) {
        let id = self.create(kind, from, to, size, DEFAULT_TTL, self.now, Some(cause));
        self.originate(id);
    }

    fn drop(&mut self, id: PacketId, node: NodeIx, reason: DropReason) {
        self.packets[id.0 as usize].status = PacketStatus::Dropped(reason);
        self.dropped += 1;
        self.record("drop", node, id);
    }

    fn transmit(&mut self, id: PacketId, from: NodeIx, to: NodeIx, link: usize, size: u32) {
        let info = &self.links[link];
        let dir = if info.a == from { 0 } else { 1 };
        let serialise = SimTime::from_us(size as f64 * 8.0 / (info.rate_gbps * 1e3));
        let propagation = info.propagation;
        let now = self.now;
        let q = &mut self.queues[link * 2 + dir];
        while q.pending.front().is_some_and(|f| *f <= now) {
            q.pending.pop_front();
        }
        if self.queue_cap.is_some_and(|cap| q.pending.len() >= cap) {
            self.drop(id, from, DropReason::QueueFull);
            return;
        }
        let mut start = now.max(q.busy_until);
        if let Some(s) = self.tdm.get(&(from, to)) {
            start = s.release(&self.nodes[from].id, start).unwrap_or(start);
        }
        let finish = start + serialise;
        q.busy_until = finish;
        q.pending.push_back(finish);
        self.max_depth = self.max_depth.max(q.pending.len());
        self.schedule(finish + propagation, Action::Arrive(id, to));
    }

    /// Event trace as CSV: time_us, event_kind, node_id, packet_id.
    pub fn write_trace_csv<W: io::Write>(&self, mut w: W) -> Result<(), SimError> {
        let io_err = |e: io::Error| SimError::Io(e.to_string());
        writeln!(w, "time_us,event_kind,node_id,packet_id").map_err(io_err)?;
        for r in self.trace.as_deref().unwrap_or_default() {
            writeln!(w, "{},{},{},{}", r.time, r.kind, self.nodes[r.node].id, r.packet.0).map_err(io_err)?;
        }
        Ok(())
    }
}
