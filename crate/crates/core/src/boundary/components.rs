//! Boundary components: boundary nodes linked when at most two hops apart.
//!
//! The component with the largest member ID wins a max-ID flood over the
//! virtual graph. A non-boundary node adjacent to boundary nodes relays the
//! best candidate it has heard directly from them. Members then echo subtree
//! sizes up the resulting component tree, and the root sends the component ID
//! and size back down. Every member rebroadcasts that information once, so
//! all nodes next to a member learn which component it belongs to.

use super::Classification;
use crate::netgraph::{NodeId, UnitDiskGraph};
use crate::simkernel::{run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError};

pub const DEFAULT_MIN_COMPONENT_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
enum FloodMsg {
    Join { cand: NodeId, hop: u32 },
    Relay { cand: NodeId, origin: NodeId, hop: u32 },
}

impl Message for FloodMsg {
    fn kind(&self) -> u8 {
        match self {
            FloodMsg::Join { .. } => 0,
            FloodMsg::Relay { .. } => 1,
        }
    }
    fn kind_name(&self) -> &'static str {
        match self {
            FloodMsg::Join { .. } => "comp_join",
            FloodMsg::Relay { .. } => "comp_relay",
        }
    }
    fn size_units(&self) -> usize {
        match self {
            FloodMsg::Join { .. } => 3,
            FloodMsg::Relay { .. } => 4,
        }
    }
}

#[derive(Debug, Clone)]
enum FloodNode {
    Member {
        cand: NodeId,
        hop: u32,
        parent: Option<(NodeId, Option<NodeId>)>,
    },
    Relay {
        best: Option<NodeId>,
    },
}

struct ComponentFlood;

impl Protocol for ComponentFlood {
    type Input = bool;
    type State = FloodNode;
    type Msg = FloodMsg;

    fn init(&self, ctx: &NodeCtx<'_>, member: bool, out: &mut Outbox<FloodMsg>) -> FloodNode {
        if member {
            out.broadcast(FloodMsg::Join { cand: ctx.id, hop: 0 });
            FloodNode::Member {
                cand: ctx.id,
                hop: 0,
                parent: None,
            }
        } else {
            FloodNode::Relay { best: None }
        }
    }

    fn on_round(&self, ctx: &NodeCtx<'_>, st: &mut FloodNode, inbox: &[Envelope<'_, FloodMsg>], out: &mut Outbox<FloodMsg>) {
        match st {
            FloodNode::Member { cand, hop, parent } => {
                // Key: larger candidate, then smaller origin, then direct
                // before relayed, then smaller relay.
                let mut best: Option<(NodeId, u32, NodeId, Option<NodeId>)> = None;
                let key = |b: &(NodeId, u32, NodeId, Option<NodeId>)| {
                    (std::cmp::Reverse(b.0), b.2, b.3.map_or(0, |r| u64::from(r.0) + 1))
                };
                for env in inbox {
                    let offer = match *env.msg {
                        FloodMsg::Join { cand, hop } => (cand, hop, env.from, None),
                        FloodMsg::Relay { cand, origin, hop } if origin != ctx.id => (cand, hop, origin, Some(env.from)),
                        FloodMsg::Relay { .. } => continue,
                    };
                    if best.is_none_or(|b| key(&offer) < key(&b)) {
                        best = Some(offer);
                    }
                }
                if let Some((c, h, origin, via)) = best {
                    if c > *cand {
                        *cand = c;
                        *hop = h + 1;
                        *parent = Some((origin, via));
                        out.broadcast(FloodMsg::Join { cand: c, hop: *hop });
                    }
                }
            }
            FloodNode::Relay { best } => {
                let mut improved = None;
                for env in inbox {
                    if let FloodMsg::Join { cand, hop } = *env.msg {
                        if best.is_none_or(|b| cand > b) && improved.is_none_or(|(c, _, _)| cand > c) {
                            improved = Some((cand, env.from, hop));
                        }
                    }
                }
                if let Some((cand, origin, hop)) = improved {
                    *best = Some(cand);
                    out.broadcast(FloodMsg::Relay { cand, origin, hop });
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum EchoMsg {
    ChildOf { parent: NodeId, via: Option<NodeId> },
    RelayChildOf { child: NodeId, parent: NodeId },
    Size { parent: NodeId, via: Option<NodeId>, size: u32 },
    RelaySize { child: NodeId, parent: NodeId, size: u32 },
    CompInfo { comp: NodeId, size: u32 },
    RelayCompInfo { parent: NodeId, comp: NodeId, size: u32 },
}

impl Message for EchoMsg {
    fn kind(&self) -> u8 {
        match self {
            EchoMsg::ChildOf { .. } => 0,
            EchoMsg::RelayChildOf { .. } => 1,
            EchoMsg::Size { .. } => 2,
            EchoMsg::RelaySize { .. } => 3,
            EchoMsg::CompInfo { .. } => 4,
            EchoMsg::RelayCompInfo { .. } => 5,
        }
    }
    fn kind_name(&self) -> &'static str {
        match self {
            EchoMsg::ChildOf { .. } => "comp_child_of",
            EchoMsg::RelayChildOf { .. } => "comp_relay_child_of",
            EchoMsg::Size { .. } => "comp_size",
            EchoMsg::RelaySize { .. } => "comp_relay_size",
            EchoMsg::CompInfo { .. } => "comp_info",
            EchoMsg::RelayCompInfo { .. } => "comp_relay_info",
        }
    }
    fn size_units(&self) -> usize {
        match self {
            EchoMsg::ChildOf { via, .. } => 2 + usize::from(via.is_some()),
            EchoMsg::RelayChildOf { .. } => 3,
            EchoMsg::Size { via, .. } => 3 + usize::from(via.is_some()),
            EchoMsg::RelaySize { .. } => 4,
            EchoMsg::CompInfo { .. } => 3,
            EchoMsg::RelayCompInfo { .. } => 4,
        }
    }
}

#[derive(Debug, Clone)]
struct EchoNode {
    member: Option<EchoMember>,
    /// `(child, parent)` pairs this node relays for.
    served: Vec<(NodeId, NodeId)>,
    forwarded_info: Vec<NodeId>,
    /// `(neighbor, component, component size)` heard from member neighbors.
    neighbor_comps: Vec<(NodeId, NodeId, u32)>,
}

#[derive(Debug, Clone)]
struct EchoMember {
    parent: Option<(NodeId, Option<NodeId>)>,
    children: Vec<(NodeId, Option<NodeId>)>,
    sizes: Vec<(NodeId, u32)>,
    subtree: u32,
    sent: bool,
    info: Option<(NodeId, u32)>,
}

struct ComponentEcho;

impl Protocol for ComponentEcho {
    type Input = Option<Option<(NodeId, Option<NodeId>)>>;
    type State = EchoNode;
    type Msg = EchoMsg;

    fn init(&self, _: &NodeCtx<'_>, input: Self::Input, out: &mut Outbox<EchoMsg>) -> EchoNode {
        let member = input.map(|parent| {
            if let Some((parent, via)) = parent {
                out.broadcast(EchoMsg::ChildOf { parent, via });
            }
            out.stay_awake();
            EchoMember {
                parent,
                children: Vec::new(),
                sizes: Vec::new(),
                subtree: 1,
                sent: false,
                info: None,
            }
        });
        EchoNode {
            member,
            served: Vec::new(),
            forwarded_info: Vec::new(),
            neighbor_comps: Vec::new(),
        }
    }

    fn on_round(&self, ctx: &NodeCtx<'_>, st: &mut EchoNode, inbox: &[Envelope<'_, EchoMsg>], out: &mut Outbox<EchoMsg>) {
        let me = ctx.id;
        for env in inbox {
            match *env.msg {
                EchoMsg::ChildOf { parent, via } => {
                    if via == Some(me) {
                        st.served.push((env.from, parent));
                        out.broadcast(EchoMsg::RelayChildOf { child: env.from, parent });
                    } else if parent == me && via.is_none() {
                        if let Some(m) = &mut st.member {
                            m.children.push((env.from, None));
                        }
                    }
                }
                EchoMsg::RelayChildOf { child, parent } => {
                    if parent == me {
                        if let Some(m) = &mut st.member {
                            m.children.push((child, Some(env.from)));
                        }
                    }
                }
                EchoMsg::Size { parent, via, size } => {
                    if via == Some(me) {
                        out.broadcast(EchoMsg::RelaySize { child: env.from, parent, size });
                    } else if parent == me && via.is_none() {
                        if let Some(m) = &mut st.member {
                            m.sizes.push((env.from, size));
                        }
                    }
                }
                EchoMsg::RelaySize { child, parent, size } => {
                    if parent == me {
                        if let Some(m) = &mut st.member {
                            if m.children.contains(&(child, Some(env.from))) {
                                m.sizes.push((child, size));
                            }
                        }
                    }
                }
                EchoMsg::CompInfo { comp, size } => {
                    st.neighbor_comps.push((env.from, comp, size));
                    if st.served.iter().any(|&(_, p)| p == env.from) && !st.forwarded_info.contains(&env.from) {
                        st.forwarded_info.push(env.from);
                        out.broadcast(EchoMsg::RelayCompInfo { parent: env.from, comp, size });
                    }
                    if let Some(m) = &mut st.member {
                        if m.info.is_none() && m.parent == Some((env.from, None)) {
                            m.info = Some((comp, size));
                            out.broadcast(EchoMsg::CompInfo { comp, size });
                        }
                    }
                }
                EchoMsg::RelayCompInfo { parent, comp, size } => {
                    if let Some(m) = &mut st.member {
                        if m.info.is_none() && m.parent == Some((parent, Some(env.from))) {
                            m.info = Some((comp, size));
                            out.broadcast(EchoMsg::CompInfo { comp, size });
                        }
                    }
                }
            }
        }
        let Some(m) = &mut st.member else { return };
        if ctx.round < 2 {
            out.stay_awake();
            return;
        }
        if m.sent || m.sizes.len() < m.children.len() {
            return;
        }
        m.sent = true;
        m.subtree = 1 + m.sizes.iter().map(|&(_, s)| s).sum::<u32>();
        match m.parent {
            Some((parent, via)) => out.broadcast(EchoMsg::Size {
                parent,
                via,
                size: m.subtree,
            }),
            None => {
                m.info = Some((me, m.subtree));
                out.broadcast(EchoMsg::CompInfo {
                    comp: me,
                    size: m.subtree,
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentMember {
    pub component: NodeId,
    pub component_size: u32,
    /// Parent in the component tree and the relay in between, if any.
    pub parent: Option<(NodeId, Option<NodeId>)>,
    pub children: Vec<(NodeId, Option<NodeId>)>,
    pub subtree_size: u32,
    pub hop: u32,
}

#[derive(Debug, Clone)]
pub struct Components {
    /// Membership per node; `None` for non-boundary nodes.
    pub member: Vec<Option<ComponentMember>>,
    /// Per node, `(neighbor, component)` for every boundary neighbor.
    pub neighbor_components: Vec<Vec<(NodeId, NodeId)>>,
    /// `(component id, size)` sorted by ID.
    pub sizes: Vec<(NodeId, u32)>,
    pub min_size: usize,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

impl Components {
    pub fn is_recognized(&self, size: u32) -> bool {
        size as usize >= self.min_size
    }

    /// Component ID of a node if it belongs to a recognized component.
    pub fn recognized_component(&self, index: usize) -> Option<NodeId> {
        self.member[index]
            .as_ref()
            .filter(|m| self.is_recognized(m.component_size))
            .map(|m| m.component)
    }

    pub fn recognized(&self) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        self.sizes.iter().copied().filter(|&(_, s)| self.is_recognized(s))
    }

    pub fn recognized_count(&self) -> usize {
        self.recognized().count()
    }
}

/// Groups boundary nodes into components and tells every node the
/// components of its boundary neighbors.
pub fn form_components(g: &UnitDiskGraph, classes: &Classification, min_size: usize) -> Result<Components, SimError> {
    let members: Vec<bool> = (0..g.len()).map(|i| classes.is_boundary(i)).collect();
    let flood = run_protocol(g, &ComponentFlood, members)?;
    let inputs = flood
        .states
        .iter()
        .map(|s| match s {
            FloodNode::Member { parent, .. } => Some(*parent),
            FloodNode::Relay { .. } => None,
        })
        .collect();
    let echo = run_protocol(g, &ComponentEcho, inputs)?;
    let mut ledger = flood.ledger;
    ledger.absorb(&echo.ledger);

    let mut member = Vec::with_capacity(g.len());
    let mut neighbor_components = Vec::with_capacity(g.len());
    let mut sizes = Vec::new();
    for (i, (f, e)) in flood.states.iter().zip(echo.states).enumerate() {
        let mut nc: Vec<(NodeId, NodeId)> = e.neighbor_comps.iter().map(|&(v, c, _)| (v, c)).collect();
        nc.sort_unstable();
        neighbor_components.push(nc);
        let m = match (f, e.member) {
            (FloodNode::Member { cand, hop, parent }, Some(m)) => {
                let (component, component_size) = m.info.expect("component info reached every member");
                debug_assert_eq!(component, *cand);
                if parent.is_none() {
                    sizes.push((g.id(i), component_size));
                }
                let mut children = m.children;
                children.sort_unstable();
                Some(ComponentMember {
                    component,
                    component_size,
                    parent: *parent,
                    children,
                    subtree_size: m.subtree,
                    hop: *hop,
                })
            }
            _ => None,
        };
        member.push(m);
    }
    sizes.sort_unstable();
    Ok(Components {
        member,
        neighbor_components,
        sizes,
        min_size,
        ledger,
        rounds_used: flood.rounds_used + echo.rounds_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{classify, NodeClass};
    use crate::geometry::Point;

    /// Nodes on a line 0.9 apart; `boundary` marks members by position.
    fn line(boundary: &[bool]) -> (UnitDiskGraph, Classification) {
        let n = boundary.len();
        let pts = (0..n).map(|i| Point::new(i as f64 * 0.9, 0.0)).collect();
        let g = UnitDiskGraph::build(pts, (1..=n as u32).map(NodeId).collect(), 1.0);
        let thresholds = boundary.iter().map(|&b| if b { 10.0 } else { -1.0 }).collect();
        let c = classify(&g, thresholds).unwrap();
        (g, c)
    }

    #[test]
    fn relay_links_two_hops() {
        let (g, c) = line(&[true, false, true]);
        assert_eq!(c.class[1], NodeClass::NearBoundary);
        let comps = form_components(&g, &c, 1).unwrap();
        assert_eq!(comps.sizes, vec![(NodeId(3), 2)]);
        let m = comps.member[0].as_ref().unwrap();
        assert_eq!(m.component, NodeId(3));
        assert_eq!(m.parent, Some((NodeId(3), Some(NodeId(2)))));
        let root = comps.member[2].as_ref().unwrap();
        assert_eq!(root.children, vec![(NodeId(1), Some(NodeId(2)))]);
        assert_eq!(root.subtree_size, 2);
        assert_eq!(comps.neighbor_components[1], vec![(NodeId(1), NodeId(3)), (NodeId(3), NodeId(3))]);
    }

    #[test]
    fn three_hops_split() {
        let (g, c) = line(&[true, false, false, true]);
        let comps = form_components(&g, &c, 1).unwrap();
        assert_eq!(comps.sizes, vec![(NodeId(1), 1), (NodeId(4), 1)]);
        let strict = form_components(&g, &c, 2).unwrap();
        assert_eq!(strict.recognized_count(), 0);
    }

    #[test]
    fn mixed_chain() {
        // 1 2 _ 4 5 _ _ 8: {1,2,4,5} via relay 3, {8} alone.
        let (g, c) = line(&[true, true, false, true, true, false, false, true]);
        let comps = form_components(&g, &c, 1).unwrap();
        assert_eq!(comps.sizes, vec![(NodeId(5), 4), (NodeId(8), 1)]);
        for i in [0, 1, 3, 4] {
            let m = comps.member[i].as_ref().unwrap();
            assert_eq!((m.component, m.component_size), (NodeId(5), 4));
        }
        let root = comps.member[4].as_ref().unwrap();
        assert_eq!(root.subtree_size, 4);
        assert_eq!(comps.recognized_component(7), Some(NodeId(8)));
        assert_eq!(comps.recognized_component(2), None);
    }
}
