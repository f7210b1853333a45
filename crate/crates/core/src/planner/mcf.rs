//! Exact integral min-cost flow by successive shortest augmenting paths
//! with node potentials. Negative arc costs are allowed as long as the
//! network has no negative cycle; the first potentials come from a
//! label-correcting shortest-path pass.

use super::network::FlowNetwork;
use crate::error::{Error, Result};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

const UNSET: usize = usize::MAX;
const INF: i64 = i64::MAX / 4;

#[derive(Debug, Clone, PartialEq)]
pub struct McfSolution {
    /// Flow on every arc of the network, in arc order.
    pub flows: Vec<i64>,
    /// `sum(cost * flow)`.
    pub objective: i64,
}

/// Residual graph with paired forward/backward edges (edge `e ^ 1` is the
/// twin of `e`).
struct Residual {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
}

impl Residual {
    fn new(n: usize) -> Self {
        Residual {
            head: vec![UNSET; n],
            next: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    fn n(&self) -> usize {
        self.head.len()
    }

    fn link(&mut self, u: usize, v: usize, cap: i64, cost: i64) -> usize {
        let e = self.to.len();
        for (from, to, c, w) in [(u, v, cap, cost), (v, u, 0, -cost)] {
            self.to.push(to);
            self.cap.push(c);
            self.cost.push(w);
            self.next.push(self.head[from]);
            self.head[from] = self.to.len() - 1;
        }
        e
    }

    fn edges(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let mut e = self.head[u];
        std::iter::from_fn(move || {
            if e == UNSET {
                None
            } else {
                let cur = e;
                e = self.next[e];
                Some(cur)
            }
        })
    }

    /// Label-correcting shortest paths over edges with residual capacity.
    /// `None` signals a negative cycle.
    fn bellman_ford(&self, sources: &[usize]) -> Option<Vec<i64>> {
        let n = self.n();
        let mut dist = vec![INF; n];
        let mut queued = vec![false; n];
        let mut relaxations = vec![0usize; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            dist[s] = 0;
            queued[s] = true;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for e in self.edges(u) {
                if self.cap[e] <= 0 {
                    continue;
                }
                let v = self.to[e];
                let nd = dist[u] + self.cost[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    relaxations[v] += 1;
                    if relaxations[v] > n {
                        return None;
                    }
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        Some(dist)
    }
}

fn build_residual(net: &FlowNetwork) -> (Residual, Vec<usize>) {
    let mut g = Residual::new(net.n_nodes);
    let ids = net
        .arcs
        .iter()
        .map(|a| g.link(a.from, a.to, a.cap, a.cost))
        .collect();
    (g, ids)
}

/// Solve `net` exactly. Every unit of supply must reach a demand node.
pub fn solve_min_cost_flow(net: &FlowNetwork) -> Result<McfSolution> {
    let (mut g, ids) = build_residual(net);
    // Super source and super sink around the supplies.
    let n0 = net.n_nodes;
    g.head.extend([UNSET, UNSET]);
    let (src, dst) = (n0, n0 + 1);
    let mut required = 0i64;
    let mut demand_total = 0i64;
    for (v, &b) in net.supplies.iter().enumerate() {
        if b > 0 {
            g.link(src, v, b, 0);
            required += b;
        } else if b < 0 {
            g.link(v, dst, -b, 0);
            demand_total -= b;
        }
    }
    if required != demand_total {
        return Err(Error::InfeasibleNetwork(format!(
            "unbalanced supplies: {required} supplied, {demand_total} demanded"
        )));
    }

    let n = g.n();
    let mut potential = g
        .bellman_ford(&[src])
        .ok_or_else(|| Error::InfeasibleNetwork("negative cycle".into()))?;
    for p in potential.iter_mut() {
        if *p >= INF {
            *p = 0;
        }
    }

    let mut dist = vec![INF; n];
    let mut parent = vec![UNSET; n];
    let mut done = vec![false; n];
    let mut sent = 0i64;
    while sent < required {
        dist.fill(INF);
        parent.fill(UNSET);
        done.fill(false);
        dist[src] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((du, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == dst {
                break;
            }
            for e in g.edges(u) {
                if g.cap[e] <= 0 {
                    continue;
                }
                let v = g.to[e];
                let nd = du + g.cost[e] + potential[u] - potential[v];
                debug_assert!(
                    g.cost[e] + potential[u] - potential[v] >= 0,
                    "negative reduced cost"
                );
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if dist[dst] >= INF {
            return Err(Error::InfeasibleNetwork(format!(
                "only {sent} of {required} units can reach a sink"
            )));
        }
        let cutoff = dist[dst];
        for v in 0..n {
            potential[v] += dist[v].min(cutoff);
        }
        let mut push = required - sent;
        let mut v = dst;
        while v != src {
            let e = parent[v];
            push = push.min(g.cap[e]);
            v = g.to[e ^ 1];
        }
        let mut v = dst;
        while v != src {
            let e = parent[v];
            g.cap[e] -= push;
            g.cap[e ^ 1] += push;
            v = g.to[e ^ 1];
        }
        sent += push;
    }

    let flows: Vec<i64> = ids.iter().map(|&e| g.cap[e ^ 1]).collect();
    let objective = net.arcs.iter().zip(&flows).map(|(a, f)| a.cost * f).sum();
    Ok(McfSolution { flows, objective })
}

/// Node potentials proving `flows` optimal: every residual arc has a
/// non-negative reduced cost `cost + p[from] - p[to]`. Errors if the flows
/// violate bounds or conservation, or if the residual graph has a
/// negative cycle (the flow is not optimal).
pub fn optimality_certificate(net: &FlowNetwork, flows: &[i64]) -> Result<Vec<i64>> {
    let mut balance = net.supplies.clone();
    for (a, &f) in net.arcs.iter().zip(flows) {
        if f < 0 || f > a.cap {
            return Err(Error::InfeasibleNetwork(format!(
                "flow {f} outside [0, {}]",
                a.cap
            )));
        }
        balance[a.from] -= f;
        balance[a.to] += f;
    }
    if balance.iter().any(|&b| b != 0) {
        return Err(Error::InfeasibleNetwork(
            "flow conservation violated".into(),
        ));
    }
    let mut g = Residual::new(net.n_nodes);
    for (a, &f) in net.arcs.iter().zip(flows) {
        let e = g.link(a.from, a.to, a.cap - f, a.cost);
        g.cap[e ^ 1] = f;
    }
    let all: Vec<usize> = (0..net.n_nodes).collect();
    g.bellman_ford(&all)
        .ok_or_else(|| Error::InfeasibleNetwork("residual graph has a negative cycle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::network::{ArcKind, FlowArc};

    fn net(n: usize, arcs: &[(usize, usize, i64, i64)], supplies: Vec<i64>) -> FlowNetwork {
        FlowNetwork {
            n_nodes: n,
            arcs: arcs
                .iter()
                .map(|&(from, to, cap, cost)| FlowArc {
                    from,
                    to,
                    cap,
                    cost,
                    kind: ArcKind::Carry,
                })
                .collect(),
            supplies,
            ..FlowNetwork::default()
        }
    }

    #[test]
    fn prefers_negative_arc() {
        // 0 -> 1 twice, caps 3 and 2, costs -1 and 0; 3 units to route.
        let n = net(2, &[(0, 1, 3, -1), (0, 1, 2, 0)], vec![3, -3]);
        let s = solve_min_cost_flow(&n).unwrap();
        assert_eq!(s.flows, vec![3, 0]);
        assert_eq!(s.objective, -3);
    }

    #[test]
    fn zero_supply_is_free() {
        let n = net(3, &[(0, 1, 5, 0), (1, 2, 5, 0)], vec![0, 0, 0]);
        let s = solve_min_cost_flow(&n).unwrap();
        assert_eq!(s.objective, 0);
    }

    #[test]
    fn detours_through_cheaper_path() {
        // Diamond: 0->1->3 costs 1+1, 0->2->3 costs 5+(-10), capacity limits.
        let n = net(
            4,
            &[(0, 1, 4, 1), (1, 3, 4, 1), (0, 2, 2, 5), (2, 3, 2, -10)],
            vec![5, 0, 0, -5],
        );
        let s = solve_min_cost_flow(&n).unwrap();
        assert_eq!(s.flows, vec![3, 3, 2, 2]);
        assert_eq!(s.objective, 6 - 10);
        let p = optimality_certificate(&n, &s.flows).unwrap();
        for (a, f) in n.arcs.iter().zip(&s.flows) {
            let rc = a.cost + p[a.from] - p[a.to];
            if *f < a.cap {
                assert!(rc >= 0);
            }
            if *f > 0 {
                assert!(rc <= 0);
            }
        }
    }

    #[test]
    fn reports_infeasibility() {
        let n = net(2, &[(0, 1, 1, 0)], vec![2, -2]);
        assert!(matches!(
            solve_min_cost_flow(&n),
            Err(Error::InfeasibleNetwork(_))
        ));
    }

    #[test]
    fn suboptimal_flow_has_no_certificate() {
        let n = net(2, &[(0, 1, 3, -1), (0, 1, 2, 0)], vec![2, -2]);
        assert!(optimality_certificate(&n, &[0, 2]).is_err());
        assert!(optimality_certificate(&n, &[2, 0]).is_ok());
    }
}
