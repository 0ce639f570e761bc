//! Synchronous local-broadcast executor.
//!
//! Every message broadcast in round `t` is delivered to all graph neighbors of
//! the sender at the start of round `t + 1`. A node's inbox is ordered by
//! sender ID, then by message kind. Round 0 runs each node's `init`. The run
//! ends at the first round that starts with no message in flight and no node
//! asking to be woken; that round's index is reported as `rounds_used`.
//!
//! Protocols see only their own ID, their sorted neighbor IDs and their inbox.

use std::cell::RefCell;
use std::io::{self, Write};

use thiserror::Error;

use crate::netgraph::{NodeId, UnitDiskGraph};

pub const DEFAULT_MAX_ROUNDS: u32 = 200_000;

pub trait Message: Clone {
    /// Ordering key among messages from the same sender in one round.
    fn kind(&self) -> u8;

    fn kind_name(&self) -> &'static str;

    /// Number of ID-sized fields, including the sender ID.
    fn size_units(&self) -> usize;
}

#[derive(Debug, Clone, Copy)]
pub struct NodeCtx<'a> {
    pub id: NodeId,
    pub neighbors: &'a [NodeId],
    pub round: u32,
}

impl NodeCtx<'_> {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_neighbor(&self, id: NodeId) -> bool {
        self.neighbors.binary_search(&id).is_ok()
    }
}

#[derive(Debug)]
pub struct Envelope<'a, M> {
    pub from: NodeId,
    pub msg: &'a M,
}

#[derive(Debug)]
pub struct Outbox<M> {
    msgs: Vec<M>,
    wake: bool,
}

impl<M> Default for Outbox<M> {
    fn default() -> Self {
        Self {
            msgs: Vec::new(),
            wake: false,
        }
    }
}

impl<M: Message> Outbox<M> {
    pub fn broadcast(&mut self, msg: M) {
        debug_assert!(msg.size_units() >= 1, "every message carries a sender ID");
        self.msgs.push(msg);
    }

    /// Run this node again next round even if its inbox is empty.
    pub fn stay_awake(&mut self) {
        self.wake = true;
    }
}

pub trait Protocol {
    type Input;
    type State;
    type Msg: Message;

    fn init(&self, ctx: &NodeCtx<'_>, input: Self::Input, out: &mut Outbox<Self::Msg>) -> Self::State;

    fn on_round(
        &self,
        ctx: &NodeCtx<'_>,
        state: &mut Self::State,
        inbox: &[Envelope<'_, Self::Msg>],
        out: &mut Outbox<Self::Msg>,
    );
}

/// Per-node and global message costs, in broadcasts and ID-sized units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub broadcasts_sent: Vec<u64>,
    pub id_units_sent: Vec<u64>,
    pub messages_received: Vec<u64>,
    pub total_broadcasts: u64,
    pub total_id_units: u64,
}

impl CostLedger {
    pub fn new(n: usize) -> Self {
        Self {
            broadcasts_sent: vec![0; n],
            id_units_sent: vec![0; n],
            messages_received: vec![0; n],
            total_broadcasts: 0,
            total_id_units: 0,
        }
    }

    /// Accounts for one broadcast by node `index`.
    pub fn charge<M: Message>(&mut self, index: usize, msg: &M) {
        let units = msg.size_units();
        assert!(units >= 1, "zero-size message");
        self.broadcasts_sent[index] += 1;
        self.id_units_sent[index] += units as u64;
        self.total_broadcasts += 1;
        self.total_id_units += units as u64;
    }

    pub fn absorb(&mut self, other: &CostLedger) {
        if self.broadcasts_sent.is_empty() {
            *self = CostLedger::new(other.broadcasts_sent.len());
        }
        for i in 0..self.broadcasts_sent.len() {
            self.broadcasts_sent[i] += other.broadcasts_sent[i];
            self.id_units_sent[i] += other.id_units_sent[i];
            self.messages_received[i] += other.messages_received[i];
        }
        self.total_broadcasts += other.total_broadcasts;
        self.total_id_units += other.total_id_units;
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no quiescence after {max_rounds} rounds; {} nodes still active", stuck.len())]
    RoundLimitExceeded { max_rounds: u32, stuck: Vec<NodeId> },
    #[error("trace output failed: {0}")]
    Trace(#[from] io::Error),
}

#[derive(Debug)]
pub struct RunOutcome<S> {
    /// Final protocol state per node, indexed like the graph.
    pub states: Vec<S>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

pub struct Simulator<'g> {
    graph: &'g UnitDiskGraph,
    max_rounds: u32,
    trace: Option<&'g mut dyn Write>,
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g UnitDiskGraph) -> Self {
        Self {
            graph,
            max_rounds: DEFAULT_MAX_ROUNDS,
            trace: None,
        }
    }

    pub fn max_rounds(mut self, max_rounds: u32) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    /// Writes one `round,node,kind,size_units` line per broadcast, without a
    /// header.
    pub fn trace(mut self, out: &'g mut dyn Write) -> Self {
        self.trace = Some(out);
        self
    }

    pub fn run<P: Protocol>(
        mut self,
        protocol: &P,
        inputs: Vec<P::Input>,
    ) -> Result<RunOutcome<P::State>, SimError> {
        let g = self.graph;
        let n = g.len();
        assert_eq!(inputs.len(), n, "one input per node");
        let mut ledger = CostLedger::new(n);
        let mut out = Outbox::<P::Msg>::default();

        // Messages broadcast in the previous round, grouped by sender.
        let mut cur = Mailbag::<P::Msg>::new(n);
        let mut next = Mailbag::<P::Msg>::new(n);
        let mut wake = vec![false; n];
        let mut next_wake = vec![false; n];

        let mut states = Vec::with_capacity(n);
        for (i, input) in inputs.into_iter().enumerate() {
            let ctx = NodeCtx {
                id: g.id(i),
                neighbors: g.neighbor_ids(i),
                round: 0,
            };
            states.push(protocol.init(&ctx, input, &mut out));
            wake[i] = next.flush(&mut out, i, 0, g, &mut ledger, self.trace.as_deref_mut())?;
        }

        let mut mail = vec![false; n];
        let mut round = 1u32;
        loop {
            std::mem::swap(&mut cur, &mut next);
            next.clear();
            if cur.senders.is_empty() && !wake.iter().any(|&w| w) {
                break;
            }
            if round > self.max_rounds {
                let mut stuck: Vec<NodeId> = cur.senders.iter().map(|&s| g.id(s as usize)).collect();
                stuck.extend((0..n).filter(|&i| wake[i]).map(|i| g.id(i)));
                stuck.sort_unstable();
                stuck.dedup();
                return Err(SimError::RoundLimitExceeded {
                    max_rounds: self.max_rounds,
                    stuck,
                });
            }

            for &u in &cur.senders {
                for &v in g.neighbors(u as usize) {
                    mail[v as usize] = true;
                }
            }
            let mut inbox: Vec<Envelope<'_, P::Msg>> = Vec::new();
            for i in 0..n {
                if !wake[i] && !mail[i] {
                    continue;
                }
                mail[i] = false;
                // Neighbors are sorted by ID and each sender's messages by
                // kind, so the inbox comes out in delivery order.
                inbox.clear();
                for &u in g.neighbors(i) {
                    let (a, b) = cur.range[u as usize];
                    if a < b {
                        let from = g.id(u as usize);
                        inbox.extend(cur.msgs[a as usize..b as usize].iter().map(|msg| Envelope { from, msg }));
                    }
                }
                ledger.messages_received[i] += inbox.len() as u64;
                let ctx = NodeCtx {
                    id: g.id(i),
                    neighbors: g.neighbor_ids(i),
                    round,
                };
                protocol.on_round(&ctx, &mut states[i], &inbox, &mut out);
                next_wake[i] = next.flush(&mut out, i, round, g, &mut ledger, self.trace.as_deref_mut())?;
            }
            std::mem::swap(&mut wake, &mut next_wake);
            next_wake.iter_mut().for_each(|w| *w = false);
            round += 1;
        }

        Ok(RunOutcome {
            states,
            ledger,
            rounds_used: round,
        })
    }
}

struct Mailbag<M> {
    msgs: Vec<M>,
    range: Vec<(u32, u32)>,
    senders: Vec<u32>,
}

impl<M: Message> Mailbag<M> {
    fn new(n: usize) -> Self {
        Self {
            msgs: Vec::new(),
            range: vec![(0, 0); n],
            senders: Vec::new(),
        }
    }

    fn clear(&mut self) {
        for &s in &self.senders {
            self.range[s as usize] = (0, 0);
        }
        self.senders.clear();
        self.msgs.clear();
    }

    /// Moves a node's outbox into the bag and charges it; returns the node's
    /// wake request.
    fn flush(
        &mut self,
        out: &mut Outbox<M>,
        index: usize,
        round: u32,
        g: &UnitDiskGraph,
        ledger: &mut CostLedger,
        mut trace: Option<&mut (dyn Write + '_)>,
    ) -> io::Result<bool> {
        if !out.msgs.is_empty() {
            out.msgs.sort_by_key(Message::kind);
            let start = self.msgs.len() as u32;
            for msg in out.msgs.drain(..) {
                ledger.charge(index, &msg);
                if let Some(t) = trace.as_deref_mut() {
                    writeln!(t, "{},{},{},{}", round, g.id(index), msg.kind_name(), msg.size_units())?;
                }
                self.msgs.push(msg);
            }
            self.range[index] = (start, self.msgs.len() as u32);
            self.senders.push(index as u32);
        }
        Ok(std::mem::take(&mut out.wake))
    }
}

pub const TRACE_HEADER: &str = "round,node,kind,size_units";

thread_local! {
    static TRACE: RefCell<Option<Box<dyn Write>>> = const { RefCell::new(None) };
}

/// Runs `f` with every [`run_protocol`] call on this thread tracing into
/// `sink`, which receives a header line first.
pub fn with_trace<R>(mut sink: Box<dyn Write>, f: impl FnOnce() -> R) -> io::Result<R> {
    writeln!(sink, "{TRACE_HEADER}")?;
    let previous = TRACE.with(|t| t.replace(Some(sink)));
    let result = f();
    let sink = TRACE.with(|t| t.replace(previous));
    sink.expect("trace sink restored").flush()?;
    Ok(result)
}

/// Runs a protocol with the default round limit, tracing if a sink was
/// installed with [`with_trace`].
pub fn run_protocol<P: Protocol>(
    graph: &UnitDiskGraph,
    protocol: &P,
    inputs: Vec<P::Input>,
) -> Result<RunOutcome<P::State>, SimError> {
    TRACE.with(|t| match t.borrow_mut().as_deref_mut() {
        Some(sink) => Simulator::new(graph).trace(sink).run(protocol, inputs),
        None => Simulator::new(graph).run(protocol, inputs),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Point;

    pub(crate) fn path_graph(len: usize) -> UnitDiskGraph {
        let pts = (0..len).map(|i| Point::new(i as f64 * 0.9, 0.0)).collect();
        UnitDiskGraph::build(pts, (1..=len as u32).map(NodeId).collect(), 1.0)
    }

    #[derive(Clone, Debug)]
    struct Ping(usize);

    impl Message for Ping {
        fn kind(&self) -> u8 {
            0
        }
        fn kind_name(&self) -> &'static str {
            "ping"
        }
        fn size_units(&self) -> usize {
            self.0
        }
    }

    struct Echo;

    impl Protocol for Echo {
        type Input = ();
        type State = usize;
        type Msg = Ping;

        fn init(&self, _: &NodeCtx<'_>, _: (), out: &mut Outbox<Ping>) -> usize {
            out.broadcast(Ping(1));
            0
        }

        fn on_round(&self, _: &NodeCtx<'_>, heard: &mut usize, inbox: &[Envelope<'_, Ping>], _: &mut Outbox<Ping>) {
            *heard += inbox.len();
        }
    }

    struct Flood;

    impl Protocol for Flood {
        type Input = bool;
        type State = Option<u32>;
        type Msg = Ping;

        fn init(&self, _: &NodeCtx<'_>, source: bool, out: &mut Outbox<Ping>) -> Option<u32> {
            if source {
                out.broadcast(Ping(2));
                Some(0)
            } else {
                None
            }
        }

        fn on_round(&self, ctx: &NodeCtx<'_>, seen: &mut Option<u32>, _: &[Envelope<'_, Ping>], out: &mut Outbox<Ping>) {
            if seen.is_none() {
                *seen = Some(ctx.round);
                out.broadcast(Ping(2));
            }
        }
    }

    #[test]
    fn echo_takes_two_rounds() {
        let g = path_graph(5);
        let run = run_protocol(&g, &Echo, vec![(); 5]).unwrap();
        assert_eq!(run.rounds_used, 2);
        assert!(run.ledger.broadcasts_sent.iter().all(|&b| b == 1));
        for i in 0..5 {
            assert_eq!(run.states[i], g.degree(i));
            assert_eq!(run.ledger.messages_received[i], g.degree(i) as u64);
        }
    }

    #[test]
    fn flood_on_path() {
        for len in [1, 2, 7] {
            let g = path_graph(len);
            let mut inputs = vec![false; len];
            inputs[0] = true;
            let run = run_protocol(&g, &Flood, inputs).unwrap();
            assert_eq!(run.rounds_used, len as u32 + 1);
            assert_eq!(run.ledger.total_id_units, 2 * len as u64);
            for (i, s) in run.states.iter().enumerate() {
                assert_eq!(*s, Some(i as u32));
            }
        }
    }

    #[test]
    fn round_limit() {
        let g = path_graph(10);
        let mut inputs = vec![false; 10];
        inputs[0] = true;
        let err = Simulator::new(&g).max_rounds(3).run(&Flood, inputs).unwrap_err();
        assert!(matches!(err, SimError::RoundLimitExceeded { max_rounds: 3, .. }));
    }

    #[test]
    fn charge_counts_units() {
        let mut ledger = CostLedger::new(2);
        ledger.charge(1, &Ping(3));
        assert_eq!(ledger.id_units_sent[1], 3);
        assert_eq!(ledger.broadcasts_sent[1], 1);
        assert_eq!(ledger.total_id_units, 3);
    }

    #[test]
    #[should_panic(expected = "zero-size")]
    fn zero_size_is_rejected() {
        CostLedger::new(1).charge(0, &Ping(0));
    }

    #[test]
    fn trace_lines() {
        let g = path_graph(3);
        let mut buf = Vec::new();
        Simulator::new(&g).trace(&mut buf).run(&Echo, vec![(); 3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "0,1,ping,1\n0,2,ping,1\n0,3,ping,1\n");
    }

    #[test]
    fn installed_trace() {
        #[derive(Clone, Default)]
        struct Shared(std::rc::Rc<RefCell<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                self.0.borrow_mut().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let g = path_graph(2);
        let sink = Shared::default();
        with_trace(Box::new(sink.clone()), || {
            run_protocol(&g, &Echo, vec![(); 2]).unwrap();
            run_protocol(&g, &Echo, vec![(); 2]).unwrap();
        })
        .unwrap();
        let text = String::from_utf8(sink.0.borrow().clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with(TRACE_HEADER));
        run_protocol(&g, &Echo, vec![(); 2]).unwrap();
        assert_eq!(sink.0.borrow().len(), text.len());
    }

    #[test]
    fn deterministic_ledgers() {
        let g = path_graph(12);
        let a = run_protocol(&g, &Echo, vec![(); 12]).unwrap();
        let b = run_protocol(&g, &Echo, vec![(); 12]).unwrap();
        assert_eq!(a.ledger, b.ledger);
    }
}
