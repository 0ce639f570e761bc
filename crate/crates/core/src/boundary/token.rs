//! Token loops through boundary components.
//!
//! The root of each recognized component holds a token and offers it to its
//! component. Members within two hops bid with the size of their common
//! neighborhood with the holder; the smallest bid wins (ties to the smaller
//! ID), which pushes the token as far as possible along the boundary. Direct
//! bidders that lose are excluded so the token does not fall back. Once the
//! token has moved a few hops, the root bids as well and wins whenever it
//! does, closing the loop. A holder without bidders hands the token back to
//! its predecessor, which lifts its exclusions and offers again.
//!
//! A holder decides four rounds after its offer: a two-hop candidate hears
//! the offer through a relay one round late and its bid takes two rounds to
//! come back. All components run concurrently.

use std::sync::Arc;

use super::{BoundaryError, Components};
use crate::netgraph::{NodeId, UnitDiskGraph};
use crate::simkernel::{run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError};

pub const DEFAULT_ROOT_AFTER_HOPS: u32 = 5;

const DECISION_DELAY: u32 = 4;

#[derive(Debug, Clone)]
enum TokenMsg {
    Unexclude {
        comp: NodeId,
    },
    /// The holder's offer; `prev` doubles as the acknowledgment of the pass.
    Offer {
        comp: NodeId,
        prev: Option<NodeId>,
        step: u32,
        nbrs: Arc<[NodeId]>,
    },
    RelayOffer {
        comp: NodeId,
        holder: NodeId,
        step: u32,
        nbrs: Arc<[NodeId]>,
    },
    Bid {
        comp: NodeId,
        holder: NodeId,
        common: u32,
        via: Option<NodeId>,
    },
    RelayBid {
        comp: NodeId,
        holder: NodeId,
        cand: NodeId,
        common: u32,
    },
    Pass {
        comp: NodeId,
        successor: NodeId,
        via: Option<NodeId>,
        step: u32,
    },
    RelayPass {
        comp: NodeId,
        holder: NodeId,
        successor: NodeId,
        step: u32,
    },
    Back {
        comp: NodeId,
        to: NodeId,
        via: Option<NodeId>,
    },
    RelayBack {
        comp: NodeId,
        to: NodeId,
    },
}

impl Message for TokenMsg {
    fn kind(&self) -> u8 {
        match self {
            TokenMsg::Unexclude { .. } => 0,
            TokenMsg::Offer { .. } => 1,
            TokenMsg::RelayOffer { .. } => 2,
            TokenMsg::Bid { .. } => 3,
            TokenMsg::RelayBid { .. } => 4,
            TokenMsg::Pass { .. } => 5,
            TokenMsg::RelayPass { .. } => 6,
            TokenMsg::Back { .. } => 7,
            TokenMsg::RelayBack { .. } => 8,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            TokenMsg::Unexclude { .. } => "token_unexclude",
            TokenMsg::Offer { .. } => "token_offer",
            TokenMsg::RelayOffer { .. } => "token_relay_offer",
            TokenMsg::Bid { .. } => "token_bid",
            TokenMsg::RelayBid { .. } => "token_relay_bid",
            TokenMsg::Pass { .. } => "token_pass",
            TokenMsg::RelayPass { .. } => "token_relay_pass",
            TokenMsg::Back { .. } => "token_back",
            TokenMsg::RelayBack { .. } => "token_relay_back",
        }
    }

    fn size_units(&self) -> usize {
        match self {
            TokenMsg::Unexclude { .. } => 2,
            TokenMsg::Offer { prev, nbrs, .. } => 3 + usize::from(prev.is_some()) + nbrs.len(),
            TokenMsg::RelayOffer { nbrs, .. } => 4 + nbrs.len(),
            TokenMsg::Bid { via, .. } => 4 + usize::from(via.is_some()),
            TokenMsg::RelayBid { .. } => 5,
            TokenMsg::Pass { via, .. } => 4 + usize::from(via.is_some()),
            TokenMsg::RelayPass { .. } => 5,
            TokenMsg::Back { via, .. } => 3 + usize::from(via.is_some()),
            TokenMsg::RelayBack { .. } => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenInput {
    /// Recognized component of this node and whether it is its root.
    pub member: Option<(NodeId, bool)>,
    /// `(neighbor, component)` for boundary neighbors, sorted by neighbor.
    pub neighbor_components: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Default)]
struct Holding {
    offered_at: u32,
    bids: Vec<(u32, NodeId, Option<NodeId>)>,
}

#[derive(Debug)]
struct TokenNode {
    comp: Option<NodeId>,
    is_root: bool,
    neighbor_components: Vec<(NodeId, NodeId)>,
    visited: bool,
    dead: bool,
    excluded_by: Option<NodeId>,
    step: u32,
    prev: Option<(NodeId, Option<NodeId>)>,
    next: Option<(NodeId, Option<NodeId>)>,
    holding: Option<Holding>,
    /// Holder this node last bid to directly.
    bid_to: Option<NodeId>,
    closed: bool,
    failed: bool,
}

struct TokenProtocol {
    root_after: u32,
}

fn common_count(a: &[NodeId], b: &[NodeId]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl TokenProtocol {
    fn eligible(&self, st: &TokenNode, step: u32) -> bool {
        if st.is_root {
            step >= self.root_after && !st.closed
        } else {
            !st.visited && st.excluded_by.is_none()
        }
    }

    fn offer(ctx: &NodeCtx<'_>, st: &mut TokenNode, out: &mut Outbox<TokenMsg>) {
        out.broadcast(TokenMsg::Offer {
            comp: st.comp.expect("holders are members"),
            prev: st.prev.map(|(p, _)| p),
            step: st.step,
            nbrs: ctx.neighbors.into(),
        });
        st.holding = Some(Holding {
            offered_at: ctx.round,
            bids: Vec::new(),
        });
        out.stay_awake();
    }

    fn take_token(&self, ctx: &NodeCtx<'_>, st: &mut TokenNode, from: NodeId, via: Option<NodeId>, step: u32, out: &mut Outbox<TokenMsg>) {
        st.prev = Some((from, via));
        if st.is_root {
            st.closed = true;
            return;
        }
        st.visited = true;
        st.step = step;
        Self::offer(ctx, st, out);
    }

    fn decide(&self, st: &mut TokenNode, out: &mut Outbox<TokenMsg>) {
        let holding = st.holding.take().expect("deciding holder");
        let comp = st.comp.unwrap();
        let root_bid = holding.bids.iter().find(|&&(_, c, _)| c == comp);
        let choice = root_bid.or_else(|| holding.bids.iter().min_by_key(|&&(common, c, _)| (common, c)));
        match choice {
            Some(&(_, successor, via)) => {
                st.next = Some((successor, via));
                out.broadcast(TokenMsg::Pass {
                    comp,
                    successor,
                    via,
                    step: st.step + 1,
                });
            }
            None if st.is_root => st.failed = true,
            None => {
                st.dead = true;
                st.next = None;
                let (to, via) = st.prev.expect("non-root holder has a predecessor");
                out.broadcast(TokenMsg::Back { comp, to, via });
            }
        }
    }

    fn relay_reaches(st: &TokenNode, comp: NodeId, holder: NodeId, nbrs: &[NodeId]) -> bool {
        st.neighbor_components
            .iter()
            .any(|&(v, c)| c == comp && v != holder && nbrs.binary_search(&v).is_err())
    }
}

impl Protocol for TokenProtocol {
    type Input = TokenInput;
    type State = TokenNode;
    type Msg = TokenMsg;

    fn init(&self, ctx: &NodeCtx<'_>, input: TokenInput, out: &mut Outbox<TokenMsg>) -> TokenNode {
        let (comp, is_root) = match input.member {
            Some((c, r)) => (Some(c), r),
            None => (None, false),
        };
        let mut st = TokenNode {
            comp,
            is_root,
            neighbor_components: input.neighbor_components,
            visited: is_root,
            dead: false,
            excluded_by: None,
            step: 0,
            prev: None,
            next: None,
            holding: None,
            bid_to: None,
            closed: false,
            failed: false,
        };
        if is_root {
            Self::offer(ctx, &mut st, out);
        }
        st
    }

    fn on_round(&self, ctx: &NodeCtx<'_>, st: &mut TokenNode, inbox: &[Envelope<'_, TokenMsg>], out: &mut Outbox<TokenMsg>) {
        let me = ctx.id;
        let mut relayed_bid_for: Option<NodeId> = None;
        for env in inbox {
            let from = env.from;
            match env.msg {
                TokenMsg::Unexclude { comp } => {
                    if st.comp == Some(*comp) && st.excluded_by == Some(from) {
                        st.excluded_by = None;
                    }
                }
                TokenMsg::Offer { comp, step, nbrs, .. } => {
                    if Self::relay_reaches(st, *comp, from, nbrs) {
                        out.broadcast(TokenMsg::RelayOffer {
                            comp: *comp,
                            holder: from,
                            step: *step,
                            nbrs: nbrs.clone(),
                        });
                    }
                    if st.comp == Some(*comp) && self.eligible(st, *step) {
                        st.bid_to = Some(from);
                        out.broadcast(TokenMsg::Bid {
                            comp: *comp,
                            holder: from,
                            common: common_count(ctx.neighbors, nbrs),
                            via: None,
                        });
                    }
                }
                TokenMsg::RelayOffer { comp, holder, step, nbrs } => {
                    let holder = *holder;
                    if st.comp == Some(*comp)
                        && holder != me
                        && !ctx.is_neighbor(holder)
                        && relayed_bid_for != Some(holder)
                        && self.eligible(st, *step)
                    {
                        relayed_bid_for = Some(holder);
                        out.broadcast(TokenMsg::Bid {
                            comp: *comp,
                            holder,
                            common: common_count(ctx.neighbors, nbrs),
                            via: Some(from),
                        });
                    }
                }
                TokenMsg::Bid { comp, holder, common, via } => {
                    if *via == Some(me) {
                        out.broadcast(TokenMsg::RelayBid {
                            comp: *comp,
                            holder: *holder,
                            cand: from,
                            common: *common,
                        });
                    } else if *holder == me && via.is_none() {
                        if let Some(h) = &mut st.holding {
                            h.bids.push((*common, from, None));
                        }
                    }
                }
                TokenMsg::RelayBid { comp, holder, cand, common } => {
                    if *holder == me && st.comp == Some(*comp) {
                        if let Some(h) = &mut st.holding {
                            h.bids.push((*common, *cand, Some(from)));
                        }
                    }
                }
                TokenMsg::Pass { comp, successor, via, step } => {
                    if *via == Some(me) {
                        out.broadcast(TokenMsg::RelayPass {
                            comp: *comp,
                            holder: from,
                            successor: *successor,
                            step: *step,
                        });
                    }
                    if st.comp != Some(*comp) {
                        continue;
                    }
                    if *successor == me && via.is_none() {
                        self.take_token(ctx, st, from, None, *step, out);
                    } else if st.bid_to == Some(from) && *successor != me && !st.is_root {
                        st.excluded_by = Some(from);
                    }
                    if st.bid_to == Some(from) {
                        st.bid_to = None;
                    }
                }
                TokenMsg::RelayPass { comp, holder, successor, step } => {
                    if st.comp == Some(*comp) && *successor == me {
                        self.take_token(ctx, st, *holder, Some(from), *step, out);
                    }
                }
                TokenMsg::Back { comp, to, via } => {
                    if *via == Some(me) {
                        out.broadcast(TokenMsg::RelayBack { comp: *comp, to: *to });
                    } else if *to == me && st.comp == Some(*comp) {
                        out.broadcast(TokenMsg::Unexclude { comp: *comp });
                        Self::offer(ctx, st, out);
                    }
                }
                TokenMsg::RelayBack { comp, to, .. } => {
                    if *to == me && st.comp == Some(*comp) {
                        out.broadcast(TokenMsg::Unexclude { comp: *comp });
                        Self::offer(ctx, st, out);
                    }
                }
            }
        }
        if let Some(h) = &st.holding {
            if ctx.round >= h.offered_at + DECISION_DELAY {
                self.decide(st, out);
            } else {
                out.stay_awake();
            }
        }
    }
}

/// A closed walk through a component: `holders[0] == holders.last() == root`.
/// `relays[i]` is the node that forwarded the token from `holders[i]` to
/// `holders[i + 1]` when they are two hops apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLoop {
    pub component: NodeId,
    pub holders: Vec<NodeId>,
    pub relays: Vec<Option<NodeId>>,
    /// Members still excluded when the token came home.
    pub excluded: Vec<NodeId>,
}

impl TokenLoop {
    /// The loop as a walk in the graph, relays included.
    pub fn walk(&self) -> Vec<NodeId> {
        let mut w = vec![self.holders[0]];
        for (i, h) in self.holders[1..].iter().enumerate() {
            if let Some(r) = self.relays[i] {
                w.push(r);
            }
            w.push(*h);
        }
        w
    }

    /// Number of token passes.
    pub fn steps(&self) -> usize {
        self.holders.len() - 1
    }
}

#[derive(Debug)]
pub struct TokenLoops {
    pub loops: Vec<TokenLoop>,
    pub failures: Vec<BoundaryError>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

/// Runs one token per recognized component, all at once.
pub fn token_loops(g: &UnitDiskGraph, comps: &Components, root_after: u32) -> Result<TokenLoops, SimError> {
    let inputs = (0..g.len())
        .map(|i| {
            let member = comps.recognized_component(i).map(|c| (c, c == g.id(i)));
            let mut neighbor_components: Vec<(NodeId, NodeId)> = comps.neighbor_components[i]
                .iter()
                .copied()
                .filter(|&(_, c)| comps.sizes.binary_search_by_key(&c, |&(id, _)| id).is_ok_and(|k| comps.is_recognized(comps.sizes[k].1)))
                .collect();
            neighbor_components.sort_unstable();
            TokenInput {
                member,
                neighbor_components,
            }
        })
        .collect();
    let run = run_protocol(g, &TokenProtocol { root_after }, inputs)?;

    let mut loops = Vec::new();
    let mut failures = Vec::new();
    for (comp, _) in comps.recognized() {
        let root = g.index(comp).expect("component root exists");
        let st = &run.states[root];
        if !st.closed {
            failures.push(BoundaryError::LoopFailure { component: comp });
            continue;
        }
        let mut holders = vec![comp];
        let mut relays = Vec::new();
        let mut cur = root;
        while let Some((next, via)) = run.states[cur].next {
            holders.push(next);
            relays.push(via);
            if next == comp || holders.len() > g.len() + 1 {
                break;
            }
            cur = g.index(next).unwrap();
        }
        if holders.last() != Some(&comp) {
            failures.push(BoundaryError::LoopFailure { component: comp });
            continue;
        }
        let excluded = (0..g.len())
            .filter(|&i| run.states[i].comp == Some(comp) && run.states[i].excluded_by.is_some())
            .map(|i| g.id(i))
            .collect();
        loops.push(TokenLoop {
            component: comp,
            holders,
            relays,
            excluded,
        });
    }
    Ok(TokenLoops {
        loops,
        failures,
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}
