//! Smooth, decomposable probabilistic circuits over binary rule variables.
//!
//! Node values are kept in log-space throughout. Nodes are stored in
//! topological order (children before parents) and the root is the last node,
//! which is also the order of the text format.

mod chow_liu;
mod em;

pub use chow_liu::{learn_structure, smoothed_mutual_information, ChowLiuTree, TreeParams, TreeStructure};
pub use em::{em_fit, EmFit};

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::context::{ContextDistribution, RuleContextMatrix};
use crate::rules::RuleId;

/// Tolerance for sum-node weight normalization.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {0}")]
    Invalid(String),
    #[error("variable {0} is assigned both 0 and 1")]
    Contradiction(RuleId),
    #[error("variable {0} is outside the circuit scope of {1} variables")]
    UnknownVariable(RuleId, usize),
    #[error("scope mismatch: circuit has {circuit} variables, data has {data}")]
    ScopeMismatch { circuit: usize, data: usize },
    #[error("{components} mixture components requested but only {contexts} contexts available")]
    TooManyComponents { components: usize, contexts: usize },
    #[error("circuit file line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type NodeId = u32;

/// Leaf distribution over one variable, stored as `log P(x = 1)`.
///
/// `log P(x = 0)` is always derived from `log P(x = 1)` so that a circuit read
/// back from text evaluates bit-identically to the one that wrote it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf {
    var: u32,
    log_p1: f64,
    log_p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// indicator of `x = 1`
    Positive,
    /// indicator of `x = 0`
    Negative,
    /// Bernoulli with both outcomes possible
    Bernoulli,
}

impl Polarity {
    pub fn symbol(self) -> char {
        match self {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
            Polarity::Bernoulli => '*',
        }
    }
}

impl Leaf {
    pub fn from_log_p1(var: u32, log_p1: f64) -> Self {
        let log_p0 = (-log_p1.exp()).ln_1p();
        Leaf { var, log_p1, log_p0 }
    }

    pub fn bernoulli(var: u32, p1: f64) -> Self {
        Leaf::from_log_p1(var, p1.ln())
    }

    pub fn indicator(var: u32, value: bool) -> Self {
        Leaf::from_log_p1(var, if value { 0.0 } else { f64::NEG_INFINITY })
    }

    pub fn var(&self) -> u32 {
        self.var
    }

    pub fn log_p1(&self) -> f64 {
        self.log_p1
    }

    pub fn polarity(&self) -> Polarity {
        if self.log_p1 == 0.0 {
            Polarity::Positive
        } else if self.log_p1 == f64::NEG_INFINITY {
            Polarity::Negative
        } else {
            Polarity::Bernoulli
        }
    }

    #[inline]
    fn log_value(&self, x: Option<bool>) -> f64 {
        match x {
            None => 0.0,
            Some(true) => self.log_p1,
            Some(false) => self.log_p0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Sum {
        children: Vec<NodeId>,
        log_weights: Vec<f64>,
    },
    Product {
        children: Vec<NodeId>,
    },
    Leaf(Leaf),
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Sum { children, .. } | Node::Product { children } => children,
            Node::Leaf(_) => &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Circuit {
    n_vars: usize,
    n_components: usize,
    nodes: Vec<Node>,
    parent_offsets: Vec<u32>,
    parents: Vec<NodeId>,
    var_leaves: Vec<Vec<NodeId>>,
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl Circuit {
    /// Builds a circuit from raw nodes and checks every structural invariant.
    pub fn from_nodes(n_vars: usize, n_components: usize, nodes: Vec<Node>) -> Result<Self, CircuitError> {
        let circuit = Circuit::assemble(n_vars, n_components, nodes)?;
        circuit.validate()?;
        Ok(circuit)
    }

    /// Builds indices without the scope checks. Children must precede parents.
    fn assemble(n_vars: usize, n_components: usize, nodes: Vec<Node>) -> Result<Self, CircuitError> {
        if n_vars == 0 {
            return Err(CircuitError::Invalid("circuit over zero variables".into()));
        }
        if nodes.is_empty() {
            return Err(CircuitError::Invalid("circuit without nodes".into()));
        }
        let mut counts = vec![0u32; nodes.len() + 1];
        let mut var_leaves = vec![Vec::new(); n_vars];
        for (id, node) in nodes.iter().enumerate() {
            for &c in node.children() {
                if c as usize >= id {
                    return Err(CircuitError::Invalid(format!(
                        "node {id} references node {c}, which does not precede it"
                    )));
                }
                counts[c as usize + 1] += 1;
            }
            if let Node::Leaf(leaf) = node {
                if leaf.var as usize >= n_vars {
                    return Err(CircuitError::Invalid(format!(
                        "leaf {id} uses variable {} of {n_vars}",
                        leaf.var
                    )));
                }
                var_leaves[leaf.var as usize].push(id as NodeId);
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut parents = vec![0; *counts.last().unwrap() as usize];
        for (id, node) in nodes.iter().enumerate() {
            for &c in node.children() {
                parents[fill[c as usize] as usize] = id as NodeId;
                fill[c as usize] += 1;
            }
        }
        Ok(Circuit {
            n_vars,
            n_components,
            nodes,
            parent_offsets: counts,
            parents,
            var_leaves,
        })
    }

    /// Checks weight normalization, smoothness, decomposability and that the
    /// root covers every variable.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let words = self.n_vars.div_ceil(64);
        let mut scopes: Vec<u64> = vec![0; words * self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            let (done, rest) = scopes.split_at_mut(id * words);
            let scope = &mut rest[..words];
            let child_scope = |c: NodeId| &done[c as usize * words..(c as usize + 1) * words];
            match node {
                Node::Leaf(leaf) => {
                    if leaf.log_p1.is_nan() || leaf.log_p1 > 0.0 {
                        return Err(CircuitError::Invalid(format!(
                            "leaf {id} has log-probability {}",
                            leaf.log_p1
                        )));
                    }
                    scope[leaf.var as usize / 64] |= 1 << (leaf.var % 64);
                }
                Node::Product { children } => {
                    if children.is_empty() {
                        return Err(CircuitError::Invalid(format!("product {id} has no children")));
                    }
                    for &c in children {
                        for (s, cs) in scope.iter_mut().zip(child_scope(c)) {
                            if *s & cs != 0 {
                                return Err(CircuitError::Invalid(format!(
                                    "product {id} is not decomposable: children overlap"
                                )));
                            }
                            *s |= cs;
                        }
                    }
                }
                Node::Sum { children, log_weights } => {
                    if children.is_empty() || children.len() != log_weights.len() {
                        return Err(CircuitError::Invalid(format!(
                            "sum {id} has mismatched children and weights"
                        )));
                    }
                    if log_weights.iter().any(|w| w.is_nan() || *w > 0.0) {
                        return Err(CircuitError::Invalid(format!("sum {id} has an invalid log-weight")));
                    }
                    let total: f64 = log_weights.iter().map(|w| w.exp()).sum();
                    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                        return Err(CircuitError::Invalid(format!("sum {id} weights add up to {total}")));
                    }
                    scope.copy_from_slice(child_scope(children[0]));
                    for &c in &children[1..] {
                        if child_scope(c) != &*scope {
                            return Err(CircuitError::Invalid(format!("sum {id} is not smooth")));
                        }
                    }
                }
            }
        }
        let root = &scopes[(self.nodes.len() - 1) * words..];
        let covered: u32 = root.iter().map(|w| w.count_ones()).sum();
        if covered as usize != self.n_vars {
            return Err(CircuitError::Invalid(format!(
                "root covers {covered} of {} variables",
                self.n_vars
            )));
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        (self.nodes.len() - 1) as NodeId
    }

    fn node_parents(&self, id: NodeId) -> &[NodeId] {
        let (a, b) = (self.parent_offsets[id as usize], self.parent_offsets[id as usize + 1]);
        &self.parents[a as usize..b as usize]
    }

    /// Turns a list of `(variable, value)` pairs into a dense evidence vector.
    pub fn evidence(&self, assignment: &[(RuleId, bool)]) -> Result<Vec<Option<bool>>, CircuitError> {
        let mut evidence = vec![None; self.n_vars];
        for &(r, value) in assignment {
            let slot = evidence
                .get_mut(r.index())
                .ok_or(CircuitError::UnknownVariable(r, self.n_vars))?;
            match slot {
                Some(v) if *v != value => return Err(CircuitError::Contradiction(r)),
                _ => *slot = Some(value),
            }
        }
        Ok(evidence)
    }

    #[inline]
    fn eval_node(&self, id: usize, values: &[f64], evidence: &[Option<bool>]) -> f64 {
        match &self.nodes[id] {
            Node::Leaf(leaf) => leaf.log_value(evidence[leaf.var as usize]),
            Node::Product { children } => children.iter().map(|&c| values[c as usize]).sum(),
            Node::Sum { children, log_weights } => {
                if let [a, b] = children.as_slice() {
                    log_add(
                        log_weights[0] + values[*a as usize],
                        log_weights[1] + values[*b as usize],
                    )
                } else {
                    log_sum_exp(children.iter().zip(log_weights).map(|(&c, w)| w + values[c as usize]))
                }
            }
        }
    }

    /// Log-values of every node under `evidence`; unassigned leaves are 1.
    pub fn forward(&self, evidence: &[Option<bool>]) -> Vec<f64> {
        let mut values = vec![0.0; self.nodes.len()];
        for id in 0..self.nodes.len() {
            values[id] = self.eval_node(id, &values, evidence);
        }
        values
    }

    /// `log P(evidence)` by a full upward pass.
    pub fn log_value(&self, evidence: &[Option<bool>]) -> f64 {
        *self.forward(evidence).last().unwrap()
    }

    /// `log P(evidence)`, visiting only ancestors of assigned leaves.
    ///
    /// Every sub-circuit of a smooth, decomposable circuit with normalized
    /// weights is itself normalized, so a node whose scope holds no assigned
    /// variable evaluates to exactly 1 and can be skipped.
    pub fn log_marginal(&self, evidence: &[Option<bool>]) -> f64 {
        let mut marked = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = Vec::new();
        for (v, x) in evidence.iter().enumerate() {
            if x.is_some() {
                stack.extend(&self.var_leaves[v]);
            }
        }
        if stack.is_empty() {
            return 0.0;
        }
        let mut visit: Vec<NodeId> = Vec::new();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut marked[id as usize], true) {
                continue;
            }
            visit.push(id);
            stack.extend(self.node_parents(id));
        }
        visit.sort_unstable();
        let mut values = vec![0.0; self.nodes.len()];
        for &id in &visit {
            values[id as usize] = self.eval_node(id as usize, &values, evidence);
        }
        values[self.root() as usize]
    }

    /// Marginal probability of a partial assignment.
    pub fn query_marginal(&self, assignment: &[(RuleId, bool)]) -> Result<f64, CircuitError> {
        let evidence = self.evidence(assignment)?;
        Ok(self.log_marginal(&evidence).exp())
    }

    /// For every variable `v`, `P(evidence with x_v = 1)`, from one upward and
    /// one downward pass. An already assigned `v` is overridden with 1.
    ///
    /// Decomposability makes the circuit multilinear in the leaves of each
    /// variable, so the value with `x_v` set equals the sum over `v`'s leaves
    /// of (derivative of the root w.r.t. that leaf) times the leaf's value.
    pub fn extension_marginals(&self, evidence: &[Option<bool>]) -> Vec<f64> {
        let values = self.forward(evidence);
        let n = self.nodes.len();
        let mut grad = vec![f64::NEG_INFINITY; n];
        grad[n - 1] = 0.0;
        let mut prefix: Vec<f64> = Vec::new();
        for id in (0..n).rev() {
            let g = grad[id];
            if g == f64::NEG_INFINITY {
                continue;
            }
            match &self.nodes[id] {
                Node::Leaf(_) => {}
                Node::Sum { children, log_weights } => {
                    for (&c, w) in children.iter().zip(log_weights) {
                        grad[c as usize] = log_add(grad[c as usize], g + w);
                    }
                }
                Node::Product { children } => {
                    // product of the siblings of each child via prefix/suffix sums
                    prefix.clear();
                    let mut acc = 0.0;
                    for &c in children {
                        prefix.push(acc);
                        acc += values[c as usize];
                    }
                    let mut suffix = 0.0;
                    for (i, &c) in children.iter().enumerate().rev() {
                        let others = prefix[i] + suffix;
                        grad[c as usize] = log_add(grad[c as usize], g + others);
                        suffix += values[c as usize];
                    }
                }
            }
        }
        (0..self.n_vars)
            .map(|v| {
                let log_p =
                    self.var_leaves[v]
                        .iter()
                        .fold(f64::NEG_INFINITY, |acc, &l| match &self.nodes[l as usize] {
                            Node::Leaf(leaf) => log_add(acc, grad[l as usize] + leaf.log_p1),
                            _ => unreachable!(),
                        });
                log_p.exp()
            })
            .collect()
    }

    /// Compiles the exact empirical distribution of `matrix` under `dist`: a
    /// sum over distinct columns of point-mass products. Zero-weight columns
    /// are dropped.
    pub fn empirical(matrix: &RuleContextMatrix, dist: &ContextDistribution) -> Result<Circuit, CircuitError> {
        let n = matrix.n_rules();
        if n == 0 {
            return Err(CircuitError::Invalid("no rule variables".into()));
        }
        if dist.weights().len() != matrix.n_contexts() {
            return Err(CircuitError::ScopeMismatch {
                circuit: dist.weights().len(),
                data: matrix.n_contexts(),
            });
        }
        let mut groups: Vec<(&[RuleId], f64)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (c, col) in matrix.columns().iter().enumerate() {
            let slot = *index.entry(col.as_slice()).or_insert_with(|| {
                groups.push((col.as_slice(), 0.0));
                groups.len() - 1
            });
            groups[slot].1 += dist.weight(c);
        }
        groups.retain(|g| g.1 > 0.0);
        if groups.is_empty() {
            return Err(CircuitError::Invalid("distribution has no mass".into()));
        }
        let mut nodes = Vec::with_capacity(2 * n + groups.len() + 1);
        for v in 0..n as u32 {
            nodes.push(Node::Leaf(Leaf::indicator(v, false)));
            nodes.push(Node::Leaf(Leaf::indicator(v, true)));
        }
        let mut products = Vec::with_capacity(groups.len());
        let mut log_weights = Vec::with_capacity(groups.len());
        for (col, w) in &groups {
            let mut on = col.iter().peekable();
            let children = (0..n as u32)
                .map(|v| {
                    let active = on.next_if(|r| r.0 == v).is_some();
                    2 * v + active as u32
                })
                .collect();
            products.push(nodes.len() as NodeId);
            nodes.push(Node::Product { children });
            log_weights.push(w.ln());
        }
        nodes.push(Node::Sum {
            children: products,
            log_weights,
        });
        Circuit::assemble(n, groups.len(), nodes)
    }

    /// Compiles a mixture of tree-shaped Bayesian networks.
    pub fn compile(trees: &[ChowLiuTree], weights: &[f64]) -> Result<Circuit, CircuitError> {
        if trees.is_empty() {
            return Err(CircuitError::Invalid("no trees to compile".into()));
        }
        if trees.len() != weights.len() {
            return Err(CircuitError::Invalid(format!(
                "{} trees but {} mixture weights",
                trees.len(),
                weights.len()
            )));
        }
        let n = trees[0].n_vars();
        if let Some(t) = trees.iter().find(|t| t.n_vars() != n) {
            return Err(CircuitError::ScopeMismatch {
                circuit: n,
                data: t.n_vars(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CircuitError::Invalid(
                "mixture weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(CircuitError::Invalid("mixture weights add up to zero".into()));
        }

        let mut nodes: Vec<Node> = Vec::new();
        let mut indicators: Vec<[Option<NodeId>; 2]> = vec![[None; 2]; n];
        let roots: Vec<NodeId> = trees
            .iter()
            .map(|t| compile_tree(t, &mut nodes, &mut indicators))
            .collect();
        nodes.push(Node::Sum {
            children: roots,
            log_weights: weights.iter().map(|w| (w / total).ln()).collect(),
        });
        Circuit::assemble(n, trees.len(), nodes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.n_components, self.n_vars, self.nodes.len()).unwrap();
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf(leaf) => {
                    writeln!(out, "{id} L {} {} {}", leaf.var, leaf.polarity().symbol(), leaf.log_p1).unwrap()
                }
                Node::Product { children } => {
                    write!(out, "{id} P").unwrap();
                    for c in children {
                        write!(out, " {c}").unwrap();
                    }
                    out.push('\n');
                }
                Node::Sum { children, log_weights } => {
                    write!(out, "{id} S").unwrap();
                    for (c, w) in children.iter().zip(log_weights) {
                        write!(out, " {c} {w}").unwrap();
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit, CircuitError> {
        let err = |line: usize, message: String| CircuitError::Parse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty circuit file".into()))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| err(1, format!("bad header field {f:?}"))))
            .collect::<Result<_, _>>()?;
        let [n_components, n_vars, n_nodes] = header[..] else {
            return Err(err(1, "header must be \"K n_vars n_nodes\"".into()));
        };
        let mut nodes = Vec::with_capacity(n_nodes);
        for (line, text) in lines {
            if text.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() < 2 {
                return Err(err(line, "truncated node line".into()));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| err(line, format!("bad node id {:?}", fields[0])))?;
            if id != nodes.len() {
                return Err(err(line, format!("expected node id {}, found {id}", nodes.len())));
            }
            let id_of = |f: &str| {
                f.parse::<NodeId>()
                    .map_err(|_| err(line, format!("bad node reference {f:?}")))
            };
            let float = |f: &str| f.parse::<f64>().map_err(|_| err(line, format!("bad number {f:?}")));
            let node = match fields[1] {
                "L" => {
                    let [_, _, var, pol, log_p] = fields[..] else {
                        return Err(err(line, "leaf needs variable, polarity and log-probability".into()));
                    };
                    let var: u32 = var.parse().map_err(|_| err(line, format!("bad variable {var:?}")))?;
                    let leaf = Leaf::from_log_p1(var, float(log_p)?);
                    if pol.len() != 1 || !pol.starts_with(leaf.polarity().symbol()) {
                        return Err(err(
                            line,
                            format!("polarity {pol:?} disagrees with log-probability {log_p}"),
                        ));
                    }
                    Node::Leaf(leaf)
                }
                "P" => Node::Product {
                    children: fields[2..].iter().map(|f| id_of(f)).collect::<Result<_, _>>()?,
                },
                "S" => {
                    if !fields.len().is_multiple_of(2) {
                        return Err(err(line, "sum needs child/log-weight pairs".into()));
                    }
                    let mut children = Vec::new();
                    let mut log_weights = Vec::new();
                    for pair in fields[2..].chunks(2) {
                        children.push(id_of(pair[0])?);
                        log_weights.push(float(pair[1])?);
                    }
                    Node::Sum { children, log_weights }
                }
                other => return Err(err(line, format!("unknown node kind {other:?}"))),
            };
            nodes.push(node);
        }
        if nodes.len() != n_nodes {
            return Err(err(
                0,
                format!("header announces {n_nodes} nodes, file has {}", nodes.len()),
            ));
        }
        Circuit::from_nodes(n_vars, n_components, nodes)
    }
}

/// Appends the nodes of one tree and returns its root. Indicator leaves are
/// created on first use and shared between trees.
fn compile_tree(tree: &ChowLiuTree, nodes: &mut Vec<Node>, indicators: &mut [[Option<NodeId>; 2]]) -> NodeId {
    let s = &tree.structure;
    let n = s.n_vars();
    let mut given: Vec<[NodeId; 2]> = vec![[0; 2]; n];
    let mut root = 0;
    let push = |nodes: &mut Vec<Node>, node: Node| {
        nodes.push(node);
        (nodes.len() - 1) as NodeId
    };
    let weights = |p: f64| vec![(-p).ln_1p(), p.ln()];
    for &v in s.order().iter().rev() {
        let is_root = s.parent(v).is_none();
        let children = s.children(v);
        if children.is_empty() {
            if is_root {
                root = push(nodes, Node::Leaf(Leaf::bernoulli(v, tree.params.root_p1)));
            } else {
                let cpt = tree.params.cpt[v as usize];
                given[v as usize] = [
                    push(nodes, Node::Leaf(Leaf::bernoulli(v, cpt[0]))),
                    push(nodes, Node::Leaf(Leaf::bernoulli(v, cpt[1]))),
                ];
            }
            continue;
        }
        let products: Vec<NodeId> = (0..2)
            .map(|b| {
                let ind = match indicators[v as usize][b] {
                    Some(id) => id,
                    None => {
                        let id = push(nodes, Node::Leaf(Leaf::indicator(v, b == 1)));
                        indicators[v as usize][b] = Some(id);
                        id
                    }
                };
                let mut kids = vec![ind];
                kids.extend(children.iter().map(|&u| given[u as usize][b]));
                push(nodes, Node::Product { children: kids })
            })
            .collect();
        if is_root {
            root = push(
                nodes,
                Node::Sum {
                    children: products,
                    log_weights: weights(tree.params.root_p1),
                },
            );
        } else {
            let cpt = tree.params.cpt[v as usize];
            for a in 0..2 {
                given[v as usize][a] = push(
                    nodes,
                    Node::Sum {
                        children: products.clone(),
                        log_weights: weights(cpt[a]),
                    },
                );
            }
        }
    }
    root
}

/// Sum over contexts of the log-probability of the column's full assignment.
pub fn log_likelihood(circuit: &Circuit, matrix: &RuleContextMatrix) -> Result<f64, CircuitError> {
    if circuit.n_vars() != matrix.n_rules() {
        return Err(CircuitError::ScopeMismatch {
            circuit: circuit.n_vars(),
            data: matrix.n_rules(),
        });
    }
    let per_context: Vec<f64> = matrix
        .columns()
        .par_iter()
        .map(|col| {
            let mut evidence = vec![Some(false); circuit.n_vars()];
            for r in col {
                evidence[r.index()] = Some(true);
            }
            circuit.log_value(&evidence)
        })
        .collect();
    Ok(per_context.iter().sum())
}
