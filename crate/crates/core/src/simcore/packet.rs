use super::SimTime;

/// Index of a node inside one [`super::Engine`]; see `Engine::node_id`.
pub type NodeIx = usize;

pub const DEFAULT_TTL: u8 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    EchoRequest,
    EchoReply,
    TimeExceeded,
    Data,
}

impl PacketKind {
    pub fn is_icmp_error_or_reply(self) -> bool {
        matches!(self, PacketKind::EchoReply | PacketKind::TimeExceeded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Unreachable,
    TtlExpired,
    QueueFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketStatus {
    /// Created, origin event not yet processed.
    Scheduled,
    InFlight,
    Delivered,
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub kind: PacketKind,
    pub size_bytes: u32,
    pub ttl: u8,
    pub src: NodeIx,
    pub dst: NodeIx,
    pub sent_at: SimTime,
    pub received_at: Option<SimTime>,
    /// Every node the packet reached, with its arrival time. The first entry
    /// is the source at `sent_at`.
    pub hop_trace: Vec<(NodeIx, SimTime)>,
    /// For replies and time-exceeded messages, the packet that caused them.
    pub in_reply_to: Option<PacketId>,
    pub status: PacketStatus,
}

impl Packet {
    pub fn sent_at_us(&self) -> f64 {
        self.sent_at.as_us()
    }

    pub fn received_at_us(&self) -> Option<f64> {
        self.received_at.map(SimTime::as_us)
    }
}
