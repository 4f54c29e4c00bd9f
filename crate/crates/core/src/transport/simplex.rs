//! Primal network simplex for the balanced transportation problem.
//!
//! The spanning tree is stored with parent, thread and successor-count
//! arrays in the style of LEMON's `NetworkSimplex`. Nodes `0..m` are
//! sources, `m..m + n` are sinks and `m + n` is the artificial root. Real arc
//! `i * n + j` joins source `i` to sink `j`; every node also owns one
//! artificial arc to or from the root. All arcs are uncapacitated, so a
//! non-tree arc always carries zero flow and the flow of a tree arc is kept
//! on the child node it enters the tree through.
//!
//! Potentials are split into an integer multiple of the artificial cost and
//! a real remainder. The artificial cost is never added to a float, so
//! reduced costs of real arcs carry no rounding from it.

use std::collections::HashSet;

use crate::error::{Error, Result};

const UP: i8 = 1;
const DOWN: i8 = -1;
const NONE: usize = usize::MAX;

/// Ground cost between a source and a sink.
pub(crate) trait CostFn: Sync {
    fn cost(&self, i: usize, j: usize) -> f64;
}

/// Dense cost matrix in row-major order.
pub(crate) struct DenseCost {
    pub n: usize,
    pub data: Vec<f64>,
}

impl CostFn for DenseCost {
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Arc on which a node hangs from its parent.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Arc {
    Real(usize, usize),
    Artificial(usize),
}

pub(crate) struct Solution {
    /// `(source, sink, mass)` for every positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    /// Node potentials; reduced cost is `c_ij + pi[i] - pi[m + j]`.
    pub potentials: Vec<f64>,
}

pub(crate) struct Simplex<'a, C: CostFn> {
    m: usize,
    n: usize,
    root: usize,
    cost: &'a C,
    art_cost: f64,
    tolerance: f64,
    parent: Vec<usize>,
    pred: Vec<Arc>,
    pred_dir: Vec<i8>,
    pred_flow: Vec<f64>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    level: Vec<i64>,
    in_tree: HashSet<usize>,
    dirty_revs: Vec<usize>,
    block_size: usize,
    next_arc: usize,
    pub(crate) validate: bool,
}

impl<'a, C: CostFn> Simplex<'a, C> {
    /// `supply` holds source masses, `demand` sink masses; both sums must agree.
    pub fn new(supply: &[f64], demand: &[f64], cost: &'a C, max_cost: f64) -> Self {
        let m = supply.len();
        let n = demand.len();
        let nodes = m + n;
        let root = nodes;
        let art_cost = (max_cost + 1.0) * (nodes as f64 + 1.0);
        let arcs = m * n;
        let block_size = ((arcs as f64).sqrt().ceil() as usize).max(10).min(arcs.max(1));
        let mut s = Self {
            m,
            n,
            root,
            cost,
            art_cost,
            tolerance: 0.0,
            parent: vec![root; nodes + 1],
            pred: (0..=nodes).map(Arc::Artificial).collect(),
            pred_dir: vec![UP; nodes + 1],
            pred_flow: vec![0.0; nodes + 1],
            thread: vec![0; nodes + 1],
            rev_thread: vec![0; nodes + 1],
            succ_num: vec![1; nodes + 1],
            last_succ: (0..=nodes).collect(),
            pi: vec![0.0; nodes + 1],
            level: vec![0; nodes + 1],
            in_tree: HashSet::new(),
            dirty_revs: Vec::new(),
            block_size,
            next_arc: 0,
            validate: false,
        };
        for u in 0..nodes {
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            if u < m {
                s.pred_dir[u] = UP;
                s.pred_flow[u] = supply[u];
                s.pi[u] = 0.0;
            } else {
                s.pred_dir[u] = DOWN;
                s.pred_flow[u] = demand[u - m];
                s.level[u] = 1;
            }
        }
        s.parent[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = nodes + 1;
        s.last_succ[root] = root - 1;
        // Reduced costs below -tolerance are admissible.
        s.tolerance = 1e-13 * max_cost.max(f64::MIN_POSITIVE);
        if nodes == 0 {
            s.last_succ[root] = root;
            s.thread[root] = root;
        }
        s
    }

    fn arc_ends(&self, a: Arc) -> (usize, usize) {
        match a {
            Arc::Real(i, j) => (i, self.m + j),
            Arc::Artificial(u) if u < self.m => (u, self.root),
            Arc::Artificial(u) => (self.root, u),
        }
    }

    /// Cost as `(multiple of the artificial cost, real part)`.
    fn arc_cost(&self, a: Arc) -> (i64, f64) {
        match a {
            Arc::Real(i, j) => (0, self.cost.cost(i, j)),
            Arc::Artificial(u) if u < self.m => (0, 0.0),
            Arc::Artificial(_) => (1, 0.0),
        }
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        let t = self.m + j;
        let rc = self.cost.cost(i, j) + self.pi[i] - self.pi[t];
        let dl = self.level[i] - self.level[t];
        if dl == 0 {
            rc
        } else {
            rc + dl as f64 * self.art_cost
        }
    }

    /// Block pivot search over the real arcs.
    fn find_entering(&mut self) -> Option<(usize, usize)> {
        let total = self.m * self.n;
        if total == 0 {
            return None;
        }
        let mut best = -self.tolerance;
        let mut found = None;
        let mut count = self.block_size;
        let mut e = self.next_arc;
        let mut i = e / self.n;
        let mut j = e % self.n;
        for _ in 0..total {
            let c = self.reduced_cost(i, j);
            if c < best && !self.in_tree.contains(&(i * self.n + j)) {
                best = c;
                found = Some((i, j));
            }
            e += 1;
            j += 1;
            if j == self.n {
                j = 0;
                i += 1;
                if i == self.m {
                    i = 0;
                    e = 0;
                }
            }
            count -= 1;
            if count == 0 {
                if found.is_some() {
                    break;
                }
                count = self.block_size;
            }
        }
        if found.is_some() {
            self.next_arc = e;
        }
        found
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    pub fn solve(mut self, max_pivots: usize) -> Result<Solution> {
        let mut pivots = 0usize;
        while let Some((ei, ej)) = self.find_entering() {
            if pivots == max_pivots {
                return Err(Error::Solver(format!(
                    "network simplex did not converge within {max_pivots} pivots"
                )));
            }
            pivots += 1;
            self.pivot(ei, ej);
            if self.validate {
                self.check_tree().map_err(Error::Solver)?;
            }
        }
        let base = self.level[..self.m + self.n].iter().copied().min().unwrap_or(0);
        let potentials = (0..self.m + self.n)
            .map(|u| self.pi[u] + (self.level[u] - base) as f64 * self.art_cost)
            .collect();
        let mut flows = Vec::new();
        for u in 0..self.m + self.n {
            if let Arc::Real(i, j) = self.pred[u] {
                if self.pred_flow[u] > 0.0 {
                    flows.push((i, j, self.pred_flow[u]));
                }
            }
        }
        flows.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Solution {
            flows,
            potentials,
        })
    }

    fn pivot(&mut self, ei: usize, ej: usize) {
        let in_arc = Arc::Real(ei, ej);
        let first = ei;
        let second = self.m + ej;
        let join = self.find_join(first, second);

        // Leaving arc: the first blocking arc met when walking the cycle in
        // its orientation, ties resolved to keep the tree strongly feasible.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut result = 0;
        let mut u = first;
        while u != join {
            if self.pred_dir[u] == UP && self.pred_flow[u] < delta {
                delta = self.pred_flow[u];
                u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if self.pred_dir[u] == DOWN && self.pred_flow[u] <= delta {
                delta = self.pred_flow[u];
                u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        debug_assert!(result != 0, "uncapacitated cycle without blocking arc");
        let (u_in, v_in) = if result == 1 {
            (first, second)
        } else {
            (second, first)
        };

        if delta > 0.0 {
            let mut u = first;
            while u != join {
                self.pred_flow[u] -= self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                self.pred_flow[u] += self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
        }
        if let Arc::Real(i, j) = self.pred[u_out] {
            self.in_tree.remove(&(i * self.n + j));
        }
        self.in_tree.insert(ei * self.n + ej);
        self.update_tree(in_arc, delta, join, u_in, v_in, u_out);
        self.update_potential(in_arc, u_in, v_in);
    }

    #[allow(clippy::too_many_arguments)]
    fn update_tree(&mut self, in_arc: Arc, delta: f64, join: usize, u_in: usize, v_in: usize, u_out: usize) {
        let (in_src, _) = self.arc_ends(in_arc);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == in_src { UP } else { DOWN };
            self.pred_flow[u_in] = delta;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem between u_in and u_out and splice the thread.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift tree arcs, orientations and flows one step along the stem.
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.pred_flow[u] = self.pred_flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == in_src { UP } else { DOWN };
            self.pred_flow[u_in] = delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self, in_arc: Arc, u_in: usize, v_in: usize) {
        let (cl, cs) = self.arc_cost(in_arc);
        let dir = self.pred_dir[u_in];
        let sigma = self.pi[v_in] - self.pi[u_in] - dir as f64 * cs;
        let sigma_level = self.level[v_in] - self.level[u_in] - dir as i64 * cl;
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            self.level[u] += sigma_level;
            u = self.thread[u];
        }
    }

    /// Verifies every structural invariant of the spanning tree.
    pub(crate) fn check_tree(&self) -> std::result::Result<(), String> {
        let total = self.m + self.n + 1;
        let mut order = Vec::with_capacity(total);
        let mut u = self.root;
        loop {
            order.push(u);
            if order.len() > total {
                return Err("thread does not close".into());
            }
            if self.rev_thread[self.thread[u]] != u {
                return Err(format!("rev_thread broken at {u}"));
            }
            u = self.thread[u];
            if u == self.root {
                break;
            }
        }
        if order.len() != total {
            return Err(format!("thread visits {} of {total} nodes", order.len()));
        }
        let mut position = vec![0usize; total];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let mut counted = vec![1usize; total];
        for &v in order.iter().rev() {
            if v == self.root {
                continue;
            }
            let p = self.parent[v];
            if position[p] >= position[v] {
                return Err(format!("node {v} precedes its parent in the thread"));
            }
            counted[p] += counted[v];
        }
        for v in 0..total {
            if counted[v] != self.succ_num[v] {
                return Err(format!("succ_num of {v} is {} not {}", self.succ_num[v], counted[v]));
            }
            let last = order[position[v] + counted[v] - 1];
            if last != self.last_succ[v] {
                return Err(format!("last_succ of {v} is {} not {last}", self.last_succ[v]));
            }
            if v == self.root {
                continue;
            }
            let (s, t) = self.arc_ends(self.pred[v]);
            let p = self.parent[v];
            let ok = match self.pred_dir[v] {
                UP => s == v && t == p,
                _ => s == p && t == v,
            };
            if !ok {
                return Err(format!("pred arc of {v} does not join it to its parent"));
            }
            if self.pred_flow[v] < 0.0 {
                return Err(format!("negative flow below {v}"));
            }
            let (cl, cs) = self.arc_cost(self.pred[v]);
            let rc = cs + self.pi[s] - self.pi[t];
            if cl + self.level[s] - self.level[t] != 0 || rc.abs() > 1e-9 * (1.0 + self.art_cost) {
                return Err(format!("tree arc above {v} has reduced cost {rc}"));
            }
        }
        Ok(())
    }
}
