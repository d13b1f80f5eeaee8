use std::collections::BTreeMap;

use thiserror::Error;

use super::{NodeAddress, BROADCAST};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RouteError {
    #[error("no route to node {0}")]
    NoRoute(NodeAddress),
    #[error("routing loop reaching node {dst}: {path:?}")]
    Loop { dst: NodeAddress, path: Vec<NodeAddress> },
    #[error("address 0 is reserved for broadcast and cannot appear in a route")]
    BroadcastInTable,
}

/// Static next-hop table shared by all nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteTable {
    next_hop: BTreeMap<NodeAddress, NodeAddress>,
}

impl RouteTable {
    /// Builds a table and rejects loops: following next hops toward any
    /// destination must reach it or dead-end within `entries + 1` steps.
    pub fn new(entries: impl IntoIterator<Item = (NodeAddress, NodeAddress)>) -> Result<Self, RouteError> {
        let next_hop: BTreeMap<_, _> = entries.into_iter().collect();
        if next_hop.iter().any(|(d, h)| *d == BROADCAST || *h == BROADCAST) {
            return Err(RouteError::BroadcastInTable);
        }
        let table = Self { next_hop };
        table.check_loops()?;
        Ok(table)
    }

    /// Every node reaches every listed address directly.
    pub fn direct(nodes: impl IntoIterator<Item = NodeAddress>) -> Self {
        Self {
            next_hop: nodes.into_iter().map(|n| (n, n)).collect(),
        }
    }

    fn check_loops(&self) -> Result<(), RouteError> {
        let limit = self.next_hop.len() + 1;
        for &dst in self.next_hop.keys() {
            let mut path = vec![];
            let mut hop = self.next_hop[&dst];
            // With a single shared table, relays toward dst forward to
            // table[dst] again; only the destination itself terminates.
            while hop != dst {
                path.push(hop);
                if path.len() > limit || path[..path.len() - 1].contains(&hop) {
                    return Err(RouteError::Loop { dst, path });
                }
                match self.next_hop.get(&hop) {
                    Some(&h) if h == hop => break,
                    Some(&h) => hop = h,
                    None => break,
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (NodeAddress, NodeAddress)> + '_ {
        self.next_hop.iter().map(|(d, h)| (*d, *h))
    }

    pub fn get(&self, dst: NodeAddress) -> Option<NodeAddress> {
        self.next_hop.get(&dst).copied()
    }
}

/// Next hop toward `dst`. Broadcasts map to broadcast and are never relayed.
pub fn route_next_hop(table: &RouteTable, dst: NodeAddress) -> Result<NodeAddress, RouteError> {
    if dst == BROADCAST {
        return Ok(BROADCAST);
    }
    table.get(dst).ok_or(RouteError::NoRoute(dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let t = RouteTable::new([(2, 2), (3, 3)]).unwrap();
        assert_eq!(route_next_hop(&t, 3), Ok(3));
        assert_eq!(route_next_hop(&t, 0), Ok(0));
        assert_eq!(route_next_hop(&t, 9), Err(RouteError::NoRoute(9)));
    }

    #[test]
    fn relay_chain_is_accepted() {
        // 4 is reached through 2, which itself is direct.
        let t = RouteTable::new([(2, 2), (4, 2)]).unwrap();
        assert_eq!(route_next_hop(&t, 4), Ok(2));
    }

    #[test]
    fn loops_rejected() {
        // 4 via 5, 5 via 6, 6 via 5.
        assert!(matches!(
            RouteTable::new([(4, 5), (5, 6), (6, 5)]),
            Err(RouteError::Loop { .. })
        ));
        assert_eq!(RouteTable::new([(0, 1)]), Err(RouteError::BroadcastInTable));
    }
}
