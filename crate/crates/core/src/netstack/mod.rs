//! Protocol stack below the middleware: datagram transport with port
//! multiplexing, static routing and a slotted TDMA link layer.

pub mod routing;
pub mod tdma;

use std::collections::VecDeque;

use thiserror::Error;

pub use routing::{route_next_hop, RouteError, RouteTable};
pub use tdma::{tdma_next_tx_start, TdmaConfig, TdmaError};

/// Node address; 0 is reserved for broadcast.
pub type NodeAddress = u8;

pub const BROADCAST: NodeAddress = 0;

pub const DEFAULT_HEADER_OVERHEAD: usize = 4;
pub const DEFAULT_BITRATE_BPS: f64 = 13_900.0;
pub const DEFAULT_QUEUE_CAP: usize = 64;
pub const MAX_BODY: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src: NodeAddress,
    pub dst: NodeAddress,
    pub port: u8,
    pub body: Vec<u8>,
}

impl Datagram {
    /// Serialized form: `src | dst | port | len | body`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.body.len());
        out.extend_from_slice(&[self.src, self.dst, self.port, self.body.len() as u8]);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let (hdr, body) = bytes.split_at_checked(4)?;
        (body.len() == hdr[3] as usize).then(|| Datagram {
            src: hdr[0],
            dst: hdr[1],
            port: hdr[2],
            body: body.to_vec(),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("datagram body of {0} bytes exceeds {MAX_BODY}")]
    PayloadTooLong(usize),
    #[error("transmit queue of node {node} is full ({cap} datagrams)")]
    QueueFull { node: NodeAddress, cap: usize },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Tdma(#[from] TdmaError),
}

/// What the stack does with a datagram the channel delivered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RxOutcome {
    Deliver { port: u8, body: Vec<u8> },
    Forward,
    Overheard,
}

/// Per-node transport + MAC state. Timing decisions are left to the caller,
/// which asks for the next service instant and then pops the queue head.
#[derive(Debug, Clone)]
pub struct NetStack {
    pub addr: NodeAddress,
    queue: VecDeque<Datagram>,
    cap: usize,
    header_overhead: usize,
    bitrate_bps: f64,
    /// Frame index of the last transmission; one transmission per owned slot.
    last_tx_frame: Option<u64>,
}

impl NetStack {
    pub fn new(addr: NodeAddress, cap: usize, header_overhead: usize, bitrate_bps: f64) -> Self {
        Self {
            addr,
            queue: VecDeque::new(),
            cap,
            header_overhead,
            bitrate_bps,
            last_tx_frame: None,
        }
    }

    pub fn airtime_for(&self, body_len: usize) -> f64 {
        (self.header_overhead + body_len) as f64 * 8.0 / self.bitrate_bps
    }

    pub fn airtime(&self, d: &Datagram) -> f64 {
        self.airtime_for(d.body.len())
    }

    /// Enqueues a datagram toward `dst`, FIFO.
    pub fn send(&mut self, routes: &RouteTable, dst: NodeAddress, port: u8, body: Vec<u8>) -> Result<(), NetError> {
        if body.len() > MAX_BODY {
            return Err(NetError::PayloadTooLong(body.len()));
        }
        route_next_hop(routes, dst)?;
        self.enqueue(Datagram {
            src: self.addr,
            dst,
            port,
            body,
        })
    }

    fn enqueue(&mut self, d: Datagram) -> Result<(), NetError> {
        if self.queue.len() >= self.cap {
            return Err(NetError::QueueFull {
                node: self.addr,
                cap: self.cap,
            });
        }
        self.queue.push_back(d);
        Ok(())
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queued(&self) -> impl Iterator<Item = &Datagram> {
        self.queue.iter()
    }

    /// Earliest instant at or after `now` when the head of the queue may go
    /// out, or `None` with an empty queue.
    pub fn next_service_time(&self, now: f64, tdma: &TdmaConfig) -> Result<Option<f64>, NetError> {
        let Some(head) = self.queue.front() else {
            return Ok(None);
        };
        let mut earliest = now;
        if let Some(frame) = self.last_tx_frame {
            earliest = earliest.max(tdma.slot_start(self.addr, frame + 1)?);
        }
        Ok(Some(tdma_next_tx_start(earliest, self.addr, tdma, self.airtime(head))?))
    }

    /// Removes the queue head for transmission at `t`.
    pub fn pop_for_tx(&mut self, t: f64, tdma: &TdmaConfig) -> Option<Datagram> {
        let d = self.queue.pop_front()?;
        self.last_tx_frame = Some(tdma.frame_index(t));
        Some(d)
    }

    /// Handles a datagram the channel decoded at this node.
    pub fn on_channel_rx(&mut self, routes: &RouteTable, d: &Datagram) -> RxOutcome {
        if d.dst == self.addr || d.dst == BROADCAST {
            return RxOutcome::Deliver {
                port: d.port,
                body: d.body.clone(),
            };
        }
        if routes.get(d.dst) == Some(self.addr) && d.src != self.addr && self.enqueue(d.clone()).is_ok() {
            return RxOutcome::Forward;
        }
        RxOutcome::Overheard
    }
}
