//! Hop distances to the two nearest boundary components.
//!
//! Members of recognized components start a flood at distance 0 tagged with
//! their component. Each node keeps the best two `(distance, component)`
//! entries over distinct components, ordered lexicographically, and
//! rebroadcasts an entry when it enters that top two. Because any entry in a
//! node's top two was in the top two of its predecessor on a shortest path,
//! the result equals a per-component BFS followed by a top-two selection.

use super::Components;
use crate::netgraph::{NodeId, UnitDiskGraph, UNREACHABLE};
use crate::simkernel::{run_protocol, CostLedger, Envelope, Message, NodeCtx, Outbox, Protocol, SimError};

pub const DEFAULT_VORONOI_TOLERANCE: u32 = 2;

#[derive(Debug, Clone, Copy)]
struct Dist {
    comp: NodeId,
    hop: u32,
}

impl Message for Dist {
    fn kind(&self) -> u8 {
        0
    }
    fn kind_name(&self) -> &'static str {
        "distance"
    }
    fn size_units(&self) -> usize {
        3
    }
}

type Slots = [Option<(u32, NodeId)>; 2];

/// Offers `(d, comp)` to the top two; returns true if the slots changed.
fn offer(slots: &mut Slots, entry: (u32, NodeId)) -> bool {
    if let Some(pos) = slots.iter().position(|s| s.is_some_and(|(_, c)| c == entry.1)) {
        if entry.0 >= slots[pos].unwrap().0 {
            return false;
        }
        slots[pos] = Some(entry);
    } else if slots[1].is_none_or(|worst| entry < worst) {
        slots[1] = Some(entry);
    } else {
        return false;
    }
    if let [Some(a), Some(b)] = *slots {
        if b < a {
            slots.swap(0, 1);
        }
    } else if slots[0].is_none() {
        slots.swap(0, 1);
    }
    true
}

struct DistanceFlood;

impl Protocol for DistanceFlood {
    type Input = Option<NodeId>;
    type State = Slots;
    type Msg = Dist;

    fn init(&self, _: &NodeCtx<'_>, source: Option<NodeId>, out: &mut Outbox<Dist>) -> Slots {
        match source {
            Some(comp) => {
                out.broadcast(Dist { comp, hop: 0 });
                [Some((0, comp)), None]
            }
            None => [None, None],
        }
    }

    fn on_round(&self, _: &NodeCtx<'_>, slots: &mut Slots, inbox: &[Envelope<'_, Dist>], out: &mut Outbox<Dist>) {
        let before = *slots;
        for env in inbox {
            offer(slots, (env.msg.hop + 1, env.msg.comp));
        }
        for (d, comp) in slots.iter().flatten() {
            if !before.contains(&Some((*d, *comp))) {
                out.broadcast(Dist { comp: *comp, hop: *d });
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceInfo {
    /// Hop distance to the nearest recognized component, or
    /// [`UNREACHABLE`].
    pub hop_dist: Vec<u32>,
    pub boundary_id: Vec<Option<NodeId>>,
    /// Second nearest distinct component.
    pub runner_up: Vec<Option<(u32, NodeId)>>,
    pub ledger: CostLedger,
    pub rounds_used: u32,
}

pub fn distance_flood(g: &UnitDiskGraph, comps: &Components) -> Result<DistanceInfo, SimError> {
    let inputs = (0..g.len()).map(|i| comps.recognized_component(i)).collect();
    let run = run_protocol(g, &DistanceFlood, inputs)?;
    let mut hop_dist = Vec::with_capacity(g.len());
    let mut boundary_id = Vec::with_capacity(g.len());
    let mut runner_up = Vec::with_capacity(g.len());
    for [first, second] in run.states {
        hop_dist.push(first.map_or(UNREACHABLE, |(d, _)| d));
        boundary_id.push(first.map(|(_, c)| c));
        runner_up.push(second);
    }
    Ok(DistanceInfo {
        hop_dist,
        boundary_id,
        runner_up,
        ledger: run.ledger,
        rounds_used: run.rounds_used,
    })
}

/// Local rule: a node is a Voronoi node when it has heard two distinct
/// components whose distances differ by at most `tolerance` hops.
pub fn detect_voronoi(info: &DistanceInfo, tolerance: u32) -> Vec<bool> {
    info.hop_dist
        .iter()
        .zip(&info.runner_up)
        .map(|(&d1, second)| second.is_some_and(|(d2, _)| d2 - d1 <= tolerance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_order() {
        let mut s: Slots = [None, None];
        assert!(offer(&mut s, (5, NodeId(3))));
        assert!(offer(&mut s, (4, NodeId(9))));
        assert_eq!(s, [Some((4, NodeId(9))), Some((5, NodeId(3)))]);
        assert!(!offer(&mut s, (6, NodeId(1))));
        assert!(offer(&mut s, (5, NodeId(1))));
        assert_eq!(s, [Some((4, NodeId(9))), Some((5, NodeId(1)))]);
        assert!(offer(&mut s, (2, NodeId(1))));
        assert_eq!(s, [Some((2, NodeId(1))), Some((4, NodeId(9)))]);
        assert!(!offer(&mut s, (3, NodeId(1))));
    }
}
