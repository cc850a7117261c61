//! Exact integer maxflow via breadth-first augmenting paths. Capacities are
//! arbitrary-precision integers, so the computation is exact; adjacency is
//! scanned in insertion order, making flows and residual cuts deterministic.

use num::bigint::BigInt;
use num::Zero;
use std::collections::VecDeque;

pub(crate) struct FlowNetwork {
    // forward/backward edge pairs at indices 2i / 2i+1
    to: Vec<usize>,
    cap: Vec<BigInt>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            to: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Returns the forward edge index.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: BigInt) -> usize {
        let e = self.to.len();
        self.to.push(v);
        self.cap.push(cap);
        self.adj[u].push(e);
        self.to.push(u);
        self.cap.push(BigInt::zero());
        self.adj[v].push(e + 1);
        e
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> BigInt {
        let mut total = BigInt::zero();
        loop {
            // BFS for a shortest augmenting path
            let mut prev_edge: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[source] = true;
            let mut queue = VecDeque::new();
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e] > BigInt::zero() {
                        seen[v] = true;
                        prev_edge[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            // bottleneck
            let mut bottleneck: Option<BigInt> = None;
            let mut v = sink;
            while v != source {
                let e = prev_edge[v].unwrap();
                bottleneck = Some(match bottleneck {
                    None => self.cap[e].clone(),
                    Some(b) => b.min(self.cap[e].clone()),
                });
                v = self.to[e ^ 1];
            }
            let aug = bottleneck.unwrap();
            let mut v = sink;
            while v != source {
                let e = prev_edge[v].unwrap();
                self.cap[e] -= &aug;
                self.cap[e ^ 1] += &aug;
                v = self.to[e ^ 1];
            }
            total += aug;
        }
    }

    /// Flow pushed through a forward edge (the accumulated reverse capacity).
    pub fn flow(&self, forward_edge: usize) -> BigInt {
        self.cap[forward_edge ^ 1].clone()
    }

    /// Nodes reachable from `source` in the residual network.
    pub fn residual_reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut queue = VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e] > BigInt::zero() {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_network() {
        // source 0, sink 3; parallel routes with a shared middle edge
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, BigInt::from(3));
        net.add_edge(0, 2, BigInt::from(2));
        net.add_edge(1, 2, BigInt::from(1));
        net.add_edge(1, 3, BigInt::from(2));
        net.add_edge(2, 3, BigInt::from(3));
        assert_eq!(net.max_flow(0, 3), BigInt::from(5));
    }

    #[test]
    fn disconnected_sink() {
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, BigInt::from(5));
        assert_eq!(net.max_flow(0, 2), BigInt::zero());
        let seen = net.residual_reachable(0);
        assert!(seen[0] && seen[1] && !seen[2]);
    }
}
