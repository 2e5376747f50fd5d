//! Chow-Liu trees over binary rule variables.
//!
//! Smoothing adds uniform pseudo-data of total mass `4α` to the empirical
//! counts: every cell of a pairwise table gets `+α`, every univariate cell
//! `+2α`. All smoothed tables are then marginals of one distribution, so the
//! tree reproduces the smoothed univariate marginals exactly.

use std::collections::VecDeque;

use super::CircuitError;
use crate::context::RuleContextMatrix;
use crate::rules::RuleId;

/// Tree shape, rooted at variable 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStructure {
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    order: Vec<u32>,
    mutual_information: Vec<f64>,
}

impl TreeStructure {
    /// Builds a structure from a parent map. Exactly one variable (0) may be
    /// parentless and the map must be acyclic.
    pub fn from_parents(parent: Vec<Option<u32>>, mutual_information: Vec<f64>) -> Result<Self, CircuitError> {
        let n = parent.len();
        if n == 0 {
            return Err(CircuitError::Invalid("tree over zero variables".into()));
        }
        if parent[0].is_some() || parent.iter().skip(1).any(Option::is_none) {
            return Err(CircuitError::Invalid("variable 0 must be the only root".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                if *p as usize >= n {
                    return Err(CircuitError::Invalid(format!("parent {p} of {v} out of range")));
                }
                children[*p as usize].push(v as u32);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([0u32]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(children[v as usize].iter().copied());
        }
        if order.len() != n {
            return Err(CircuitError::Invalid("parent map is not a spanning tree".into()));
        }
        Ok(TreeStructure {
            parent,
            children,
            order,
            mutual_information,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn parent(&self, var: u32) -> Option<u32> {
        self.parent[var as usize]
    }

    pub fn children(&self, var: u32) -> &[u32] {
        &self.children[var as usize]
    }

    /// Breadth-first order from the root; parents precede children.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Mutual information of the edge `(parent(v), v)`; 0 for the root.
    pub fn edge_mutual_information(&self, var: u32) -> f64 {
        self.mutual_information[var as usize]
    }

    /// Edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (p.min(v as u32), p.max(v as u32))))
            .collect();
        e.sort_unstable();
        e
    }
}

/// Conditional probability tables of a tree-shaped Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// `P(root = 1)`
    pub root_p1: f64,
    /// `cpt[v][a] = P(x_v = 1 | x_parent(v) = a)`; unused for the root.
    pub cpt: Vec<[f64; 2]>,
}

/// Weighted sufficient statistics of binary data for a fixed tree.
#[derive(Debug, Clone)]
pub(crate) struct TreeStats {
    pub total: f64,
    /// weight of contexts with `v` active
    pub ones: Vec<f64>,
    /// weight of contexts with `v` and its parent both active
    pub both: Vec<f64>,
}

impl TreeStats {
    pub fn collect(structure: &TreeStructure, matrix: &RuleContextMatrix, weights: Option<&[f64]>) -> Self {
        let n = structure.n_vars();
        let mut stats = TreeStats {
            total: 0.0,
            ones: vec![0.0; n],
            both: vec![0.0; n],
        };
        for (c, col) in matrix.columns().iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[c]);
            stats.total += w;
            for r in col {
                let v = r.0;
                stats.ones[v as usize] += w;
                if let Some(p) = structure.parent(v) {
                    if col.binary_search(&RuleId(p)).is_ok() {
                        stats.both[v as usize] += w;
                    }
                }
            }
        }
        stats
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

impl TreeParams {
    pub(crate) fn estimate(structure: &TreeStructure, stats: &TreeStats, alpha: f64) -> Self {
        let n = structure.n_vars();
        let total = stats.total;
        let root_p1 = ratio(stats.ones[0] + 2.0 * alpha, total + 4.0 * alpha);
        let mut cpt = vec![[0.5, 0.5]; n];
        for v in 0..n as u32 {
            let Some(u) = structure.parent(v) else { continue };
            let (u, vi) = (u as usize, v as usize);
            let n11 = stats.both[vi];
            let n01 = (stats.ones[vi] - n11).max(0.0);
            let parent_on = stats.ones[u];
            let parent_off = (total - parent_on).max(0.0);
            cpt[vi] = [
                ratio(n01 + alpha, parent_off + 2.0 * alpha),
                ratio(n11 + alpha, parent_on + 2.0 * alpha),
            ];
        }
        TreeParams { root_p1, cpt }
    }

    /// Log-probability of one full assignment, given as a sorted active set.
    /// Direct O(n) evaluation; see [`TreeLogTable`] for the fast path.
    pub fn log_prob(&self, structure: &TreeStructure, active: &[RuleId]) -> f64 {
        let n = structure.n_vars();
        let mut x = vec![false; n];
        for r in active {
            x[r.index()] = true;
        }
        let mut total = bern_ln(self.root_p1, x[0]);
        for v in 1..n {
            let a = x[structure.parent(v as u32).unwrap() as usize] as usize;
            total += bern_ln(self.cpt[v][a], x[v]);
        }
        total
    }
}

fn bern_ln(p1: f64, x: bool) -> f64 {
    if x {
        p1.ln()
    } else {
        (-p1).ln_1p()
    }
}

/// Precomputed terms for evaluating `log P(x)` in time proportional to the
/// number of active variables.
#[derive(Debug, Clone)]
pub(crate) struct TreeLogTable {
    base: f64,
    child_shift: Vec<f64>,
    on: Vec<[f64; 2]>,
    off: Vec<[f64; 2]>,
    finite: bool,
}

impl TreeLogTable {
    pub fn new(structure: &TreeStructure, params: &TreeParams) -> Self {
        let n = structure.n_vars();
        let mut on = vec![[0.0; 2]; n];
        let mut off = vec![[0.0; 2]; n];
        on[0] = [params.root_p1.ln(); 2];
        off[0] = [(-params.root_p1).ln_1p(); 2];
        for v in 1..n {
            for a in 0..2 {
                on[v][a] = params.cpt[v][a].ln();
                off[v][a] = (-params.cpt[v][a]).ln_1p();
            }
        }
        let base = off[0][0] + (1..n).map(|v| off[v][0]).sum::<f64>();
        let child_shift: Vec<f64> = (0..n as u32)
            .map(|u| {
                structure
                    .children(u)
                    .iter()
                    .map(|&v| off[v as usize][1] - off[v as usize][0])
                    .sum()
            })
            .collect();
        let finite = on.iter().chain(&off).all(|t| t[0].is_finite() && t[1].is_finite());
        TreeLogTable {
            base,
            child_shift,
            on,
            off,
            finite,
        }
    }

    pub fn log_prob(&self, structure: &TreeStructure, params: &TreeParams, active: &[RuleId]) -> f64 {
        if !self.finite {
            return params.log_prob(structure, active);
        }
        let mut total = self.base;
        for r in active {
            let v = r.0;
            total += self.child_shift[v as usize];
            let a = structure
                .parent(v)
                .map_or(0, |p| active.binary_search(&RuleId(p)).is_ok() as usize);
            total += self.on[v as usize][a] - self.off[v as usize][a];
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChowLiuTree {
    pub structure: TreeStructure,
    pub params: TreeParams,
}

impl ChowLiuTree {
    pub fn n_vars(&self) -> usize {
        self.structure.n_vars()
    }

    pub fn log_prob(&self, active: &[RuleId]) -> f64 {
        self.params.log_prob(&self.structure, active)
    }
}

/// Mutual information (nats) of the α-smoothed 2x2 table built from
/// `ones_i`, `ones_j`, `both` over `total` contexts. Never negative.
pub fn smoothed_mutual_information(ones_i: f64, ones_j: f64, both: f64, total: f64, alpha: f64) -> f64 {
    let cells = [[total - ones_i - ones_j + both, ones_j - both], [ones_i - both, both]];
    let t = total + 4.0 * alpha;
    if t <= 0.0 {
        return 0.0;
    }
    let pi = [(total - ones_i + 2.0 * alpha) / t, (ones_i + 2.0 * alpha) / t];
    let pj = [(total - ones_j + 2.0 * alpha) / t, (ones_j + 2.0 * alpha) / t];
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let p = (cells[a][b].max(0.0) + alpha) / t;
            if p > 0.0 {
                mi += p * (p / (pi[a] * pj[b])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Maximum spanning tree over smoothed pairwise mutual information, rooted at
/// variable 0, with closed-form smoothed CPTs.
///
/// Prim's algorithm on the dense graph; co-occurrence counts of a vertex are
/// computed when it joins the tree. Among equal weights the edge with the
/// smaller `(min, max)` pair wins.
pub fn learn_structure(matrix: &RuleContextMatrix, alpha: f64) -> Result<ChowLiuTree, CircuitError> {
    check_alpha(alpha)?;
    let n = matrix.n_rules();
    if n == 0 {
        return Err(CircuitError::Invalid("no rule variables".into()));
    }
    if matrix.n_contexts() == 0 {
        return Err(CircuitError::Invalid("no contexts to learn from".into()));
    }
    let total = matrix.n_contexts() as f64;

    let mut occurrences: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (c, col) in matrix.columns().iter().enumerate() {
        for r in col {
            occurrences[r.index()].push(c as u32);
        }
    }
    let ones: Vec<f64> = occurrences.iter().map(|o| o.len() as f64).collect();

    let mut in_tree = vec![false; n];
    // best[v] = (mi, (min, max)) of the best edge into the tree
    let mut best: Vec<(f64, (u32, u32))> = vec![(f64::NEG_INFINITY, (u32::MAX, u32::MAX)); n];
    let mut parent: Vec<Option<u32>> = vec![None; n];
    let mut mi_of: Vec<f64> = vec![0.0; n];
    let mut co = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();

    let mut current = 0u32;
    in_tree[0] = true;
    for _ in 1..n {
        // co-occurrence row of `current`
        for &c in &occurrences[current as usize] {
            for r in matrix.column(c as usize) {
                if co[r.index()] == 0 {
                    touched.push(r.0);
                }
                co[r.index()] += 1;
            }
        }
        for v in 0..n as u32 {
            if in_tree[v as usize] {
                continue;
            }
            let (lo, hi) = (current.min(v), current.max(v));
            let mi = smoothed_mutual_information(
                ones[lo as usize],
                ones[hi as usize],
                co[v as usize] as f64,
                total,
                alpha,
            );
            let slot = &mut best[v as usize];
            if mi > slot.0 || (mi == slot.0 && (lo, hi) < slot.1) {
                *slot = (mi, (lo, hi));
            }
        }
        for r in touched.drain(..) {
            co[r as usize] = 0;
        }

        let mut next: Option<u32> = None;
        for v in 0..n as u32 {
            if in_tree[v as usize] {
                continue;
            }
            next = match next {
                None => Some(v),
                Some(w) => {
                    let (bv, bw) = (best[v as usize], best[w as usize]);
                    if bv.0 > bw.0 || (bv.0 == bw.0 && bv.1 < bw.1) {
                        Some(v)
                    } else {
                        Some(w)
                    }
                }
            };
        }
        let v = next.expect("a vertex outside the tree");
        let (mi, (lo, hi)) = best[v as usize];
        parent[v as usize] = Some(if lo == v { hi } else { lo });
        mi_of[v as usize] = mi;
        in_tree[v as usize] = true;
        current = v;
    }

    let structure = TreeStructure::from_parents(parent, mi_of)?;
    let stats = TreeStats::collect(&structure, matrix, None);
    let params = TreeParams::estimate(&structure, &stats, alpha);
    Ok(ChowLiuTree { structure, params })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), CircuitError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(CircuitError::Invalid(format!(
            "smoothing must be finite and non-negative, got {alpha}"
        )))
    }
}
