//! Bipartite max-closure via Dinic's algorithm.
//!
//! Slices sit on the left, the (mode, index) positions they touch on the
//! right. For a focus slice `e` the flow computes
//! `max { |S| + c - w·|N(S)| : e ∈ S ⊆ members }` together with a maximizer.

use std::collections::HashMap;
use std::collections::VecDeque;

const INF: i64 = 1 << 50;

struct Edge {
    to: usize,
    cap: i64,
}

struct Dinic {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    next: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            level: vec![0; n],
            next: vec![0; n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0 });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    q.push_back(to);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: i64) -> i64 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.adj[u].len() {
            let e = self.adj[u][self.next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.dfs(s, t, INF);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Result of a focused max-closure query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Closure {
    pub excess: i64,
    /// Maximizing set, sorted, always containing the focus.
    pub set: Vec<usize>,
}

/// `members` must contain `focus`; `neighbours(s)` lists the distinct right
/// vertices of slice `s`.
pub(crate) fn max_excess<'a, F>(members: &[usize], focus: usize, neighbours: F, w: i64, c: i64) -> Closure
where
    F: Fn(usize) -> &'a [u32],
{
    debug_assert!(members.contains(&focus));
    let (src, sink) = (0, 1);
    let mut vertex_node: HashMap<u32, usize> = HashMap::new();
    let mut n = 2 + members.len();
    for &s in members {
        for &v in neighbours(s) {
            vertex_node.entry(v).or_insert_with(|| {
                n += 1;
                n - 1
            });
        }
    }
    let mut g = Dinic::new(n);
    for (k, &s) in members.iter().enumerate() {
        let node = 2 + k;
        g.add(src, node, if s == focus { INF } else { 1 });
        for v in neighbours(s) {
            g.add(node, vertex_node[v], INF);
        }
    }
    for &node in vertex_node.values() {
        g.add(node, sink, w);
    }
    let flow = g.max_flow(src, sink);
    g.bfs(src);
    let mut set: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|&(k, _)| g.level[2 + k] >= 0)
        .map(|(_, &s)| s)
        .collect();
    set.sort_unstable();
    Closure {
        excess: members.len() as i64 + c - flow,
        set,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(members: &[usize], focus: usize, nb: &[Vec<u32>], w: i64, c: i64) -> i64 {
        let others: Vec<usize> = members.iter().copied().filter(|&s| s != focus).collect();
        (0u32..1 << others.len())
            .map(|mask| {
                let mut verts: Vec<u32> = nb[focus].clone();
                let mut size = 1;
                for (b, &s) in others.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        size += 1;
                        verts.extend(&nb[s]);
                    }
                }
                verts.sort_unstable();
                verts.dedup();
                size + c - w * verts.len() as i64
            })
            .max()
            .unwrap()
    }

    #[test]
    fn agrees_with_brute_force() {
        let nb: Vec<Vec<u32>> = vec![
            vec![0, 3],
            vec![0, 3],
            vec![0, 4],
            vec![1, 3],
            vec![0, 3],
            vec![2, 5],
        ];
        let members: Vec<usize> = (0..nb.len()).collect();
        for focus in 0..nb.len() {
            for (w, c) in [(1, 0), (1, 1), (2, 1), (1, 2)] {
                let got = max_excess(&members, focus, |s| &nb[s], w, c);
                assert_eq!(got.excess, brute(&members, focus, &nb, w, c), "focus {focus} w {w} c {c}");
                assert!(got.set.contains(&focus));
                let mut verts: Vec<u32> = got.set.iter().flat_map(|&s| nb[s].clone()).collect();
                verts.sort_unstable();
                verts.dedup();
                assert_eq!(got.set.len() as i64 + c - w * verts.len() as i64, got.excess);
            }
        }
    }
}
