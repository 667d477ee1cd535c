//! Structural diagnostics for undirected simple graphs.
//!
//! Planarity uses the left-right (de Fraysseix–Rosenstiehl) criterion in
//! Brandes' formulation: a DFS orientation with lowpoints and nesting
//! depths, followed by a second DFS that maintains a stack of conflict
//! pairs. Only the test is implemented, no embedding is produced.
//!
//! Chordality uses maximum cardinality search and checks that the reverse
//! visit order is a perfect elimination ordering.

use std::collections::HashMap;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    /// `m <= 3n - 6` (or trivially small).
    pub edge_bound: bool,
    pub planar: bool,
    pub chordal: bool,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.planar && self.chordal
    }
}

pub fn check_planarity_chordality(n: usize, edges: &[[usize; 2]]) -> StructureReport {
    let m = edges.len();
    let edge_bound = n < 3 || m <= 3 * n - 6;
    StructureReport {
        edge_bound,
        planar: edge_bound && is_planar(n, edges),
        chordal: is_chordal(n, edges),
    }
}

fn adjacency(n: usize, edges: &[[usize; 2]]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &[a, b] in edges {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    adj
}

/// True iff the graph has a perfect elimination ordering.
pub fn is_chordal(n: usize, edges: &[[usize; 2]]) -> bool {
    let adj = adjacency(n, edges);
    let mut connected = vec![false; n * n];
    for (v, l) in adj.iter().enumerate() {
        for &u in l {
            connected[v * n + u] = true;
        }
    }

    // maximum cardinality search
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut position = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    for step in 0..n {
        let v = (0..n)
            .filter(|&v| !visited[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("unvisited vertex remains");
        visited[v] = true;
        position[v] = step;
        order.push(v);
        for &u in &adj[v] {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }

    // earlier-visited neighbours of each vertex must form a clique; it is
    // enough to check them against the most recently visited one
    for &v in &order {
        let earlier: Vec<usize> = adj[v]
            .iter()
            .copied()
            .filter(|&u| position[u] < position[v])
            .collect();
        let Some(&parent) = earlier.iter().max_by_key(|&&u| position[u]) else {
            continue;
        };
        for &u in &earlier {
            if u != parent && !connected[parent * n + u] {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Interval {
    low: Option<usize>,
    high: Option<usize>,
}

impl Interval {
    fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

#[derive(Debug, Clone, Copy)]
struct ConflictPair {
    id: usize,
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState<'a> {
    adj: &'a [Vec<usize>],
    height: Vec<Option<usize>>,
    parent_edge: Vec<Option<usize>>,
    /// oriented edges as (source, target)
    oriented: Vec<(usize, usize)>,
    edge_of: HashMap<(usize, usize), usize>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<usize>,
    out_edges: Vec<Vec<usize>>,
    // testing phase
    refs: Vec<Option<usize>>,
    lowpt_edge: Vec<Option<usize>>,
    stack_bottom: Vec<Option<usize>>,
    stack: Vec<ConflictPair>,
    next_id: usize,
}

impl LrState<'_> {
    fn orient(&mut self, v: usize) {
        let e_par = self.parent_edge[v];
        let adj = self.adj;
        for &w in &adj[v] {
            if self.edge_of.contains_key(&(v, w)) || self.edge_of.contains_key(&(w, v)) {
                continue;
            }
            let e = self.oriented.len();
            self.oriented.push((v, w));
            self.edge_of.insert((v, w), e);
            self.out_edges[v].push(e);
            let hv = self.height[v].expect("visited");
            self.lowpt.push(hv);
            self.lowpt2.push(hv);
            self.nesting_depth.push(0);
            match self.height[w] {
                None => {
                    self.parent_edge[w] = Some(e);
                    self.height[w] = Some(hv + 1);
                    self.orient(w);
                }
                Some(hw) => self.lowpt[e] = hw,
            }
            self.nesting_depth[e] = 2 * self.lowpt[e];
            if self.lowpt2[e] < hv {
                self.nesting_depth[e] += 1;
            }
            if let Some(p) = e_par {
                if self.lowpt[e] < self.lowpt[p] {
                    self.lowpt2[p] = self.lowpt[p].min(self.lowpt2[e]);
                    self.lowpt[p] = self.lowpt[e];
                } else if self.lowpt[e] > self.lowpt[p] {
                    self.lowpt2[p] = self.lowpt2[p].min(self.lowpt[e]);
                } else {
                    self.lowpt2[p] = self.lowpt2[p].min(self.lowpt2[e]);
                }
            }
        }
    }

    fn top_id(&self) -> Option<usize> {
        self.stack.last().map(|p| p.id)
    }

    fn conflicting(&self, i: &Interval, b: usize) -> bool {
        !i.is_empty() && i.high.is_some_and(|h| self.lowpt[h] > self.lowpt[b])
    }

    fn lowest(&self, p: &ConflictPair) -> usize {
        match (p.left.low, p.right.low) {
            (None, Some(r)) => self.lowpt[r],
            (Some(l), None) => self.lowpt[l],
            (Some(l), Some(r)) => self.lowpt[l].min(self.lowpt[r]),
            (None, None) => usize::MAX,
        }
    }

    fn new_pair(&mut self, left: Interval, right: Interval) -> ConflictPair {
        self.next_id += 1;
        ConflictPair {
            id: self.next_id,
            left,
            right,
        }
    }

    fn test(&mut self, v: usize) -> bool {
        let e = self.parent_edge[v];
        let edges = self.out_edges[v].clone();
        for (k, &ei) in edges.iter().enumerate() {
            let w = self.oriented[ei].1;
            self.stack_bottom[ei] = self.top_id();
            if self.parent_edge[w] == Some(ei) {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[ei] = Some(ei);
                let p = self.new_pair(
                    Interval::default(),
                    Interval {
                        low: Some(ei),
                        high: Some(ei),
                    },
                );
                self.stack.push(p);
            }
            if self.lowpt[ei] < self.height[v].expect("visited") {
                let e = e.expect("edge with a return edge below v has a parent edge");
                if k == 0 {
                    self.lowpt_edge[e] = self.lowpt_edge[ei];
                } else if !self.add_constraints(ei, e) {
                    return false;
                }
            }
        }
        if let Some(e) = e {
            self.remove_back_edges(e);
        }
        true
    }

    fn add_constraints(&mut self, ei: usize, e: usize) -> bool {
        let mut p = self.new_pair(Interval::default(), Interval::default());
        while let Some(mut q) = self.stack.pop() {
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            let q_low = q.right.low.expect("non-empty right interval");
            if self.lowpt[q_low] > self.lowpt[e] {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    self.refs[p.right.low.expect("set")] = q.right.high;
                }
                p.right.low = q.right.low;
            } else {
                self.refs[q_low] = self.lowpt_edge[e];
            }
            if self.top_id() == self.stack_bottom[ei] {
                break;
            }
        }
        while let Some(top) = self.stack.last() {
            if !(self.conflicting(&top.left, ei) || self.conflicting(&top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().expect("non-empty");
            if self.conflicting(&q.right, ei) {
                q.swap();
            }
            if self.conflicting(&q.right, ei) {
                return false;
            }
            if let Some(pl) = p.right.low {
                self.refs[pl] = q.right.high;
            }
            if q.right.low.is_some() {
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else if let Some(ll) = p.left.low {
                self.refs[ll] = q.left.high;
            }
            p.left.low = q.left.low;
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: usize) {
        let u = self.oriented[e].0;
        let hu = self.height[u].expect("visited");
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != hu {
                break;
            }
            self.stack.pop();
        }
        if let Some(mut p) = self.stack.pop() {
            while let Some(h) = p.left.high {
                if self.oriented[h].1 != u {
                    break;
                }
                p.left.high = self.refs[h];
            }
            if p.left.high.is_none() && p.left.low.is_some() {
                self.refs[p.left.low.expect("set")] = p.right.low;
                p.left.low = None;
            }
            while let Some(h) = p.right.high {
                if self.oriented[h].1 != u {
                    break;
                }
                p.right.high = self.refs[h];
            }
            if p.right.high.is_none() && p.right.low.is_some() {
                self.refs[p.right.low.expect("set")] = p.left.low;
                p.right.low = None;
            }
            self.stack.push(p);
        }
        if self.lowpt[e] < hu {
            if let Some(top) = self.stack.last() {
                let (hl, hr) = (top.left.high, top.right.high);
                self.refs[e] = match (hl, hr) {
                    (Some(l), Some(r)) if self.lowpt[l] > self.lowpt[r] => Some(l),
                    (Some(l), None) => Some(l),
                    _ => hr,
                };
            }
        }
    }
}

/// Left-right planarity test.
pub fn is_planar(n: usize, edges: &[[usize; 2]]) -> bool {
    let adj = adjacency(n, edges);
    let m: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if n > 2 && m > 3 * n - 6 {
        return false;
    }
    let mut st = LrState {
        adj: &adj,
        height: vec![None; n],
        parent_edge: vec![None; n],
        oriented: Vec::with_capacity(m),
        edge_of: HashMap::with_capacity(m),
        lowpt: Vec::with_capacity(m),
        lowpt2: Vec::with_capacity(m),
        nesting_depth: Vec::with_capacity(m),
        out_edges: vec![Vec::new(); n],
        refs: Vec::new(),
        lowpt_edge: Vec::new(),
        stack_bottom: Vec::new(),
        stack: Vec::new(),
        next_id: 0,
    };
    let mut roots = Vec::new();
    for v in 0..n {
        if st.height[v].is_none() {
            st.height[v] = Some(0);
            roots.push(v);
            st.orient(v);
        }
    }
    for v in 0..n {
        let nd = &st.nesting_depth;
        st.out_edges[v].sort_by_key(|&e| nd[e]);
    }
    let m = st.oriented.len();
    st.refs = vec![None; m];
    st.lowpt_edge = vec![None; m];
    st.stack_bottom = vec![None; m];
    roots.into_iter().all(|r| st.test(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Vec<[usize; 2]> {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push([i, j]);
            }
        }
        e
    }

    fn k33() -> Vec<[usize; 2]> {
        let mut e = Vec::new();
        for a in 0..3 {
            for b in 3..6 {
                e.push([a, b]);
            }
        }
        e
    }

    #[test]
    fn small_complete_graphs() {
        assert!(is_planar(4, &complete(4)));
        assert!(!is_planar(5, &complete(5)));
        let rep = check_planarity_chordality(5, &complete(5));
        assert!(!rep.planar);
        assert!(rep.chordal);
    }

    #[test]
    fn k5_minus_edge_is_planar() {
        let e: Vec<_> = complete(5).into_iter().filter(|e| *e != [0, 1]).collect();
        assert!(is_planar(5, &e));
    }

    #[test]
    fn k33_and_subdivision() {
        assert!(!is_planar(6, &k33()));
        assert!(!is_chordal(6, &k33()));
        // subdivide edge (0,3) through vertex 6
        let mut e: Vec<_> = k33().into_iter().filter(|e| *e != [0, 3]).collect();
        e.push([0, 6]);
        e.push([3, 6]);
        assert!(!is_planar(7, &e));
        let e: Vec<_> = k33().into_iter().skip(1).collect();
        assert!(is_planar(6, &e));
    }

    #[test]
    fn petersen_is_not_planar() {
        let mut e = Vec::new();
        for i in 0..5 {
            e.push([i, (i + 1) % 5]);
            e.push([i, i + 5]);
            e.push([5 + i, 5 + (i + 2) % 5]);
        }
        let e: Vec<[usize; 2]> = e.into_iter().map(|[a, b]| [a.min(b), a.max(b)]).collect();
        assert!(!is_planar(10, &e));
    }

    #[test]
    fn cycles_and_chords() {
        let c4 = [[0, 1], [1, 2], [2, 3], [0, 3]];
        assert!(!is_chordal(4, &c4));
        assert!(is_planar(4, &c4));
        let mut chorded = c4.to_vec();
        chorded.push([0, 2]);
        assert!(is_chordal(4, &chorded));
    }

    #[test]
    fn grid_and_wheel() {
        // 4x4 grid: planar, not chordal
        let mut e = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                let v = r * 4 + c;
                if c < 3 {
                    e.push([v, v + 1]);
                }
                if r < 3 {
                    e.push([v, v + 4]);
                }
            }
        }
        assert!(is_planar(16, &e));
        assert!(!is_chordal(16, &e));
        // wheel with 8 spokes
        let mut w: Vec<[usize; 2]> = (1..=8).map(|i| [0, i]).collect();
        for i in 1..=8 {
            let j = if i == 8 { 1 } else { i + 1 };
            w.push([i.min(j), i.max(j)]);
        }
        assert!(is_planar(9, &w));
        assert!(!is_chordal(9, &w));
    }

    #[test]
    fn disconnected_and_trees() {
        assert!(is_planar(7, &[[0, 1], [1, 2], [4, 5]]));
        assert!(is_chordal(7, &[[0, 1], [1, 2], [4, 5]]));
        let mut two_k5 = complete(5);
        two_k5.extend(complete(4).into_iter().map(|[a, b]| [a + 5, b + 5]));
        assert!(!is_planar(9, &two_k5));
    }

    #[test]
    fn apex_over_planar_graph() {
        // K_{1,1,1,3}-like: octahedron plus apex is non-planar
        let oct = [
            [0, 1],
            [0, 2],
            [0, 3],
            [0, 4],
            [5, 1],
            [5, 2],
            [5, 3],
            [5, 4],
            [1, 2],
            [2, 3],
            [3, 4],
            [1, 4],
        ];
        assert!(is_planar(6, &oct));
        let mut apex = oct.to_vec();
        for v in 0..6 {
            apex.push([v, 6]);
        }
        assert!(!is_planar(7, &apex));
    }
}
