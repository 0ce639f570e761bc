//! Leader election, spanning tree construction and tree-based aggregation.
//!
//! The tree is built by max-ID extrema propagation: every node floods the
//! largest ID it has heard, and adopts as parent the neighbor the current
//! maximum first arrived from (smallest ID on ties). Completion is detected
//! in-protocol with an echo: a node reports its subtree size to its parent
//! once every neighbor has announced the same candidate and every child has
//! reported. The root's echo completion starts a `Done` wave carrying `n`, so
//! every node learns that the tree is final.

use std::io::{self, Write};
use std::marker::PhantomData;

use crate::netgraph::{DegreeHistogram, NodeId, UnitDiskGraph};
use crate::simkernel::{
    run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeState {
    pub root_id: NodeId,
    pub parent: Option<NodeId>,
    /// Sorted by ID.
    pub children: Vec<NodeId>,
    pub subtree_size: u32,
    pub hop: u32,
    /// Network size as learned from the root.
    pub n: u32,
    /// Round in which this node learned that the tree is complete.
    pub completion_round: u32,
}

#[derive(Debug, Clone, Copy)]
pub enum TreeMsg {
    Join {
        cand: NodeId,
        hop: u32,
        parent: Option<NodeId>,
    },
    Echo {
        cand: NodeId,
        parent: NodeId,
        size: u32,
    },
    Done {
        n: u32,
    },
}

impl Message for TreeMsg {
    fn kind(&self) -> u8 {
        match self {
            TreeMsg::Join { .. } => 0,
            TreeMsg::Echo { .. } => 1,
            TreeMsg::Done { .. } => 2,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            TreeMsg::Join { .. } => "tree_join",
            TreeMsg::Echo { .. } => "tree_echo",
            TreeMsg::Done { .. } => "tree_done",
        }
    }

    fn size_units(&self) -> usize {
        match self {
            TreeMsg::Join { parent, .. } => 3 + usize::from(parent.is_some()),
            TreeMsg::Echo { .. } => 4,
            TreeMsg::Done { .. } => 2,
        }
    }
}

#[derive(Debug)]
pub struct TreeNode {
    cand: NodeId,
    hop: u32,
    parent: Option<NodeId>,
    /// Latest `(candidate, parent)` announced by each neighbor, by position.
    announced: Vec<Option<(NodeId, Option<NodeId>)>>,
    echoes: Vec<(NodeId, NodeId, u32)>,
    echoed: bool,
    done: bool,
    size: u32,
    n: u32,
    completion_round: u32,
}

pub struct BuildTree;

impl BuildTree {
    fn try_complete(ctx: &NodeCtx<'_>, st: &mut TreeNode, out: &mut Outbox<TreeMsg>) {
        if st.echoed || st.done {
            return;
        }
        let mut size = 1u32;
        for (pos, ann) in st.announced.iter().enumerate() {
            match ann {
                Some((cand, parent)) if *cand == st.cand => {
                    if *parent == Some(ctx.id) {
                        let child = ctx.neighbors[pos];
                        match st
                            .echoes
                            .iter()
                            .find(|(c, cand, _)| *c == child && *cand == st.cand)
                        {
                            Some((_, _, s)) => size += s,
                            None => return,
                        }
                    }
                }
                _ => return,
            }
        }
        st.size = size;
        if st.cand == ctx.id {
            st.done = true;
            st.n = size;
            st.completion_round = ctx.round;
            out.broadcast(TreeMsg::Done { n: size });
        } else {
            st.echoed = true;
            out.broadcast(TreeMsg::Echo {
                cand: st.cand,
                parent: st.parent.expect("non-root has a parent"),
                size,
            });
        }
    }
}

impl Protocol for BuildTree {
    type Input = ();
    type State = TreeNode;
    type Msg = TreeMsg;

    fn init(&self, ctx: &NodeCtx<'_>, _: (), out: &mut Outbox<TreeMsg>) -> TreeNode {
        let mut st = TreeNode {
            cand: ctx.id,
            hop: 0,
            parent: None,
            announced: vec![None; ctx.degree()],
            echoes: Vec::new(),
            echoed: false,
            done: false,
            size: 1,
            n: 0,
            completion_round: 0,
        };
        out.broadcast(TreeMsg::Join {
            cand: ctx.id,
            hop: 0,
            parent: None,
        });
        Self::try_complete(ctx, &mut st, out);
        st
    }

    fn on_round(
        &self,
        ctx: &NodeCtx<'_>,
        st: &mut TreeNode,
        inbox: &[Envelope<'_, TreeMsg>],
        out: &mut Outbox<TreeMsg>,
    ) {
        let mut best: Option<(NodeId, u32, NodeId)> = None;
        for env in inbox {
            match *env.msg {
                TreeMsg::Join { cand, hop, parent } => {
                    if let Ok(pos) = ctx.neighbors.binary_search(&env.from) {
                        st.announced[pos] = Some((cand, parent));
                    }
                    if cand > st.cand && best.is_none_or(|(b, _, _)| cand > b) {
                        best = Some((cand, hop, env.from));
                    }
                }
                TreeMsg::Echo { cand, parent, size } => {
                    if parent == ctx.id {
                        st.echoes.push((env.from, cand, size));
                    }
                }
                TreeMsg::Done { n } => {
                    if !st.done && st.parent == Some(env.from) {
                        st.done = true;
                        st.n = n;
                        st.completion_round = ctx.round;
                        out.broadcast(TreeMsg::Done { n });
                    }
                }
            }
        }
        if let Some((cand, hop, from)) = best {
            st.cand = cand;
            st.hop = hop + 1;
            st.parent = Some(from);
            st.echoed = false;
            st.echoes.retain(|&(_, c, _)| c == cand);
            out.broadcast(TreeMsg::Join {
                cand,
                hop: st.hop,
                parent: Some(from),
            });
        }
        Self::try_complete(ctx, st, out);
    }
}

/// A built spanning tree plus the cost of building it.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    /// Per node, indexed like the graph.
    pub nodes: Vec<TreeState>,
    pub root: usize,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

impl SpanningTree {
    pub fn root_id(&self) -> NodeId {
        self.nodes[self.root].root_id
    }

    /// Parent/child links in the form the aggregation protocols take.
    pub fn links(&self) -> Vec<TreeLink> {
        self.nodes
            .iter()
            .map(|s| TreeLink {
                parent: s.parent,
                children: s.children.clone(),
            })
            .collect()
    }

    /// Writes `id,parent_id,subtree_size` rows in ID order; the root has an
    /// empty parent.
    pub fn write_csv<W: Write>(&self, g: &UnitDiskGraph, mut out: W) -> io::Result<()> {
        writeln!(out, "id,parent_id,subtree_size")?;
        for &i in g.order_by_id() {
            let st = &self.nodes[i as usize];
            let parent = st.parent.map_or(String::new(), |p| p.to_string());
            writeln!(out, "{},{},{}", g.id(i as usize), parent, st.subtree_size)?;
        }
        Ok(())
    }

    /// True if every node learned completion before the executor saw
    /// quiescence and nothing but the final `Done` delivery happened after.
    pub fn termination_consistent(&self) -> bool {
        let last = self.nodes.iter().map(|s| s.completion_round).max().unwrap_or(0);
        self.rounds_used == last + 2
    }
}

/// Runs the tree construction protocol. The graph must be connected;
/// on a disconnected graph no component with a smaller maximum can complete.
pub fn build_tree(g: &UnitDiskGraph) -> Result<SpanningTree, SimError> {
    let run = run_protocol(g, &BuildTree, vec![(); g.len()])?;
    let mut nodes = Vec::with_capacity(g.len());
    let mut root = None;
    for (i, st) in run.states.iter().enumerate() {
        if !st.done {
            return Err(SimError::RoundLimitExceeded {
                max_rounds: run.rounds_used,
                stuck: vec![g.id(i)],
            });
        }
        let mut children: Vec<NodeId> = st
            .announced
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some((st.cand, Some(g.id(i)))))
            .map(|(pos, _)| g.neighbor_ids(i)[pos])
            .collect();
        children.sort_unstable();
        if st.parent.is_none() {
            root = Some(i);
        }
        nodes.push(TreeState {
            root_id: st.cand,
            parent: st.parent,
            children,
            subtree_size: st.size,
            hop: st.hop,
            n: st.n,
            completion_round: st.completion_round,
        });
    }
    Ok(SpanningTree {
        nodes,
        root: root.expect("exactly one root"),
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeLink {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// An associative, commutative combiner for convergecasts.
pub trait AggregateOp {
    type Value: Clone;

    fn combine(&self, acc: &mut Self::Value, other: &Self::Value);

    /// Payload size in ID units, excluding the sender ID.
    fn payload_units(&self, value: &Self::Value) -> usize;
}

pub struct Max;

impl AggregateOp for Max {
    type Value = u64;
    fn combine(&self, acc: &mut u64, other: &u64) {
        *acc = (*acc).max(*other);
    }
    fn payload_units(&self, _: &u64) -> usize {
        1
    }
}

pub struct Sum;

impl AggregateOp for Sum {
    type Value = u64;
    fn combine(&self, acc: &mut u64, other: &u64) {
        *acc += other;
    }
    fn payload_units(&self, _: &u64) -> usize {
        1
    }
}

/// Recognized boundary components and boundary nodes, summed over the tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComponentTally {
    pub components: u64,
    pub boundary_nodes: u64,
}

pub struct ComponentCount;

impl AggregateOp for ComponentCount {
    type Value = ComponentTally;
    fn combine(&self, acc: &mut ComponentTally, other: &ComponentTally) {
        acc.components += other.components;
        acc.boundary_nodes += other.boundary_nodes;
    }
    fn payload_units(&self, _: &ComponentTally) -> usize {
        2
    }
}

pub struct HistogramMerge;

impl AggregateOp for HistogramMerge {
    type Value = DegreeHistogram;
    fn combine(&self, acc: &mut DegreeHistogram, other: &DegreeHistogram) {
        acc.merge(other);
    }
    fn payload_units(&self, value: &DegreeHistogram) -> usize {
        value.bin_count()
    }
}

#[derive(Debug, Clone)]
pub struct Partial<V> {
    value: V,
    units: usize,
}

impl<V: Clone> Message for Partial<V> {
    fn kind(&self) -> u8 {
        0
    }
    fn kind_name(&self) -> &'static str {
        "aggregate"
    }
    fn size_units(&self) -> usize {
        self.units
    }
}

pub struct Convergecast<'a, Op>(pub &'a Op);

#[derive(Debug)]
pub struct ConvergecastNode<V> {
    link: TreeLink,
    acc: V,
    waiting: usize,
    /// Final value; only set at the root.
    pub result: Option<V>,
}

impl<Op: AggregateOp> Convergecast<'_, Op> {
    fn finish(&self, st: &mut ConvergecastNode<Op::Value>, out: &mut Outbox<Partial<Op::Value>>) {
        if st.link.parent.is_some() {
            out.broadcast(Partial {
                units: 1 + self.0.payload_units(&st.acc),
                value: st.acc.clone(),
            });
        } else {
            st.result = Some(st.acc.clone());
        }
    }
}

impl<Op: AggregateOp> Protocol for Convergecast<'_, Op> {
    type Input = (TreeLink, Op::Value);
    type State = ConvergecastNode<Op::Value>;
    type Msg = Partial<Op::Value>;

    fn init(&self, _: &NodeCtx<'_>, (link, value): Self::Input, out: &mut Outbox<Self::Msg>) -> Self::State {
        let mut st = ConvergecastNode {
            waiting: link.children.len(),
            link,
            acc: value,
            result: None,
        };
        if st.waiting == 0 {
            self.finish(&mut st, out);
        }
        st
    }

    fn on_round(
        &self,
        _: &NodeCtx<'_>,
        st: &mut Self::State,
        inbox: &[Envelope<'_, Self::Msg>],
        out: &mut Outbox<Self::Msg>,
    ) {
        if st.waiting == 0 {
            return;
        }
        for env in inbox {
            if st.link.children.binary_search(&env.from).is_ok() {
                self.0.combine(&mut st.acc, &env.msg.value);
                st.waiting -= 1;
            }
        }
        if st.waiting == 0 {
            self.finish(st, out);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Aggregated<V> {
    pub value: V,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

/// Leaves-to-root combination of one value per node.
pub fn aggregate<Op: AggregateOp>(
    g: &UnitDiskGraph,
    links: &[TreeLink],
    op: &Op,
    values: Vec<Op::Value>,
) -> Result<Aggregated<Op::Value>, SimError> {
    let inputs = links.iter().cloned().zip(values).collect();
    let run = run_protocol(g, &Convergecast(op), inputs)?;
    let value = run
        .states
        .into_iter()
        .find_map(|s| s.result)
        .expect("root produced a result");
    Ok(Aggregated {
        value,
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

#[derive(Debug, Clone)]
pub struct Down<V> {
    value: V,
    units: usize,
}

impl<V: Clone> Message for Down<V> {
    fn kind(&self) -> u8 {
        0
    }
    fn kind_name(&self) -> &'static str {
        "broadcast_down"
    }
    fn size_units(&self) -> usize {
        self.units
    }
}

pub struct BroadcastDown<V> {
    payload_units: usize,
    _value: PhantomData<V>,
}

impl<V> BroadcastDown<V> {
    pub fn new(payload_units: usize) -> Self {
        Self {
            payload_units,
            _value: PhantomData,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DownNode<V> {
    parent: Option<NodeId>,
    pub value: Option<V>,
    pub received_round: u32,
}

impl<V: Clone> BroadcastDown<V> {
    fn send(&self, value: &V, out: &mut Outbox<Down<V>>) {
        out.broadcast(Down {
            value: value.clone(),
            units: 1 + self.payload_units,
        });
    }
}

pub struct DownInput<V> {
    pub parent: Option<NodeId>,
    /// Set at the root only.
    pub value: Option<V>,
}

impl<V: Clone> Protocol for BroadcastDown<V> {
    type Input = DownInput<V>;
    type State = DownNode<V>;
    type Msg = Down<V>;

    fn init(&self, _: &NodeCtx<'_>, input: DownInput<V>, out: &mut Outbox<Down<V>>) -> DownNode<V> {
        if let Some(v) = &input.value {
            self.send(v, out);
        }
        DownNode {
            parent: input.parent,
            value: input.value,
            received_round: 0,
        }
    }

    fn on_round(
        &self,
        ctx: &NodeCtx<'_>,
        st: &mut DownNode<V>,
        inbox: &[Envelope<'_, Down<V>>],
        out: &mut Outbox<Down<V>>,
    ) {
        if st.value.is_some() {
            return;
        }
        if let Some(env) = inbox.iter().find(|e| Some(e.from) == st.parent) {
            st.value = Some(env.msg.value.clone());
            st.received_round = ctx.round;
            self.send(&env.msg.value, out);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Broadcasted<V> {
    /// Value held by each node after the flood.
    pub values: Vec<V>,
    /// Round in which each node received the value (0 at the root).
    pub received_round: Vec<u32>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

/// Root-to-leaves flood of one value along the tree; one broadcast per node.
pub fn broadcast_down<V: Clone>(
    g: &UnitDiskGraph,
    tree: &SpanningTree,
    value: V,
    payload_units: usize,
) -> Result<Broadcasted<V>, SimError> {
    let inputs = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, s)| DownInput {
            parent: s.parent,
            value: (i == tree.root).then(|| value.clone()),
        })
        .collect();
    let protocol = BroadcastDown::new(payload_units);
    let run = run_protocol(g, &protocol, inputs)?;
    let received_round = run.states.iter().map(|s| s.received_round).collect();
    let values = run
        .states
        .into_iter()
        .map(|s| s.value.expect("flood reached every node"))
        .collect();
    Ok(Broadcasted {
        values,
        received_round,
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::netgraph::hop_bfs;
    use crate::simkernel::tests::path_graph;

    fn star() -> UnitDiskGraph {
        // Center 7 at the origin, leaves on a circle of radius 0.9. Adjacent
        // leaves also see each other.
        let mut pts = vec![Point::new(0.0, 0.0)];
        let mut ids = vec![NodeId(7)];
        for (k, id) in [1, 2, 3, 4, 5, 6, 9].into_iter().enumerate() {
            let a = k as f64 * std::f64::consts::TAU / 7.0;
            pts.push(Point::new(0.9 * a.cos(), 0.9 * a.sin()));
            ids.push(NodeId(id));
        }
        UnitDiskGraph::build(pts, ids, 1.0)
    }

    #[test]
    fn path_tree() {
        let g = path_graph(3);
        let tree = build_tree(&g).unwrap();
        assert_eq!(tree.root_id(), NodeId(3));
        assert_eq!(tree.nodes[0].parent, Some(NodeId(2)));
        assert_eq!(tree.nodes[1].parent, Some(NodeId(3)));
        assert_eq!(tree.nodes[2].parent, None);
        assert_eq!(tree.nodes[2].subtree_size, 3);
        assert!(tree.nodes.iter().all(|s| s.n == 3));
        assert!(tree.termination_consistent());

        let mut csv = Vec::new();
        tree.write_csv(&g, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "id,parent_id,subtree_size\n1,2,1\n2,3,2\n3,,3\n");
    }

    #[test]
    fn star_tree() {
        let g = star();
        assert_eq!(g.degree(0), 7);
        let tree = build_tree(&g).unwrap();
        assert_eq!(tree.root_id(), NodeId(9));
        let center = g.index(NodeId(7)).unwrap();
        assert_eq!(tree.nodes[center].parent, Some(NodeId(9)));
        let root = &tree.nodes[tree.root];
        assert_eq!(root.subtree_size, 8);
        let sizes: u32 = root.children.iter().map(|&c| tree.nodes[g.index(c).unwrap()].subtree_size).sum();
        assert_eq!(sizes, 7);
        assert!(tree.termination_consistent());
    }

    #[test]
    fn singleton_tree() {
        let g = path_graph(1);
        let tree = build_tree(&g).unwrap();
        assert_eq!(tree.nodes[0].n, 1);
        assert!(tree.termination_consistent());
    }

    #[test]
    fn aggregates_and_broadcast_on_path() {
        let g = path_graph(6);
        let tree = build_tree(&g).unwrap();
        let links = tree.links();
        let max = aggregate(&g, &links, &Max, (0..6).map(|i| g.degree(i) as u64).collect()).unwrap();
        assert_eq!(max.value, g.max_degree() as u64);
        let n = aggregate(&g, &links, &Sum, vec![1; 6]).unwrap();
        assert_eq!(n.value, 6);

        let down = broadcast_down(&g, &tree, 42u64, 1).unwrap();
        assert!(down.values.iter().all(|&v| v == 42));
        assert_eq!(down.ledger.total_broadcasts, 6);
        let ecc = *hop_bfs(&g, &[tree.root]).iter().max().unwrap();
        assert_eq!(*down.received_round.iter().max().unwrap(), ecc);
        assert_eq!(ecc, 5);
    }
}
