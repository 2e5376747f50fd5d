//! Expectation maximization for a mixture of Chow-Liu trees that share one
//! structure.
//!
//! The structure is learned once from the unweighted data and frozen. Each
//! M-step re-estimates every component's CPTs from responsibility-weighted
//! counts, with the same α pseudo-counts as the closed-form fit, and the
//! mixture weights as `(N_k + α) / (N + Kα)`.
//!
//! Pseudo-counts turn the M-step into a MAP update, which on its own can lower
//! the data log-likelihood. Every parameter row (root, CPT row, weight vector)
//! is therefore a generalized-EM step: it takes the smoothed estimate when that
//! does not lower the row's expected complete-data log-likelihood, and otherwise
//! the point closest to it on the segment from the unsmoothed maximizer that
//! keeps the row at its previous value. With `K = 1` the smoothed estimate is
//! always taken.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::chow_liu::{check_alpha, learn_structure, TreeLogTable, TreeStats};
use super::{ChowLiuTree, Circuit, CircuitError, TreeParams, TreeStructure};
use crate::context::RuleContextMatrix;

/// Result of [`em_fit`]: the compiled circuit plus the fitted parameters and
/// the training log-likelihood after initialization and after each iteration.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub circuit: Circuit,
    pub structure: TreeStructure,
    pub components: Vec<TreeParams>,
    pub weights: Vec<f64>,
    pub log_likelihood: Vec<f64>,
}

impl EmFit {
    pub fn trees(&self) -> Vec<ChowLiuTree> {
        self.components
            .iter()
            .map(|params| ChowLiuTree {
                structure: self.structure.clone(),
                params: params.clone(),
            })
            .collect()
    }
}

struct Mixture<'a> {
    structure: &'a TreeStructure,
    components: Vec<TreeParams>,
    log_weights: Vec<f64>,
}

impl Mixture<'_> {
    /// Per-context responsibilities (row-major, K per context) and the data
    /// log-likelihood.
    fn e_step(&self, matrix: &RuleContextMatrix) -> (Vec<f64>, f64) {
        let k = self.components.len();
        let tables: Vec<TreeLogTable> = self
            .components
            .iter()
            .map(|p| TreeLogTable::new(self.structure, p))
            .collect();
        let rows: Vec<(Vec<f64>, f64)> = matrix
            .columns()
            .par_iter()
            .map(|col| {
                let joint: Vec<f64> = (0..k)
                    .map(|j| self.log_weights[j] + tables[j].log_prob(self.structure, &self.components[j], col))
                    .collect();
                let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max == f64::NEG_INFINITY {
                    return (vec![1.0 / k as f64; k], max);
                }
                let z = max + joint.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                (joint.iter().map(|l| (l - z).exp()).collect(), z)
            })
            .collect();
        let mut resp = Vec::with_capacity(rows.len() * k);
        let mut ll = 0.0;
        for (r, z) in rows {
            resp.extend(r);
            ll += z;
        }
        (resp, ll)
    }

    /// `guarded` selects the generalized-EM step; the initial M-step has no
    /// previous parameters to protect and takes the smoothed estimates.
    fn m_step(&mut self, matrix: &RuleContextMatrix, resp: &[f64], alpha: f64, guarded: bool) {
        let k = self.components.len();
        let n = matrix.n_contexts() as f64;
        let mut weight_column = vec![0.0; matrix.n_contexts()];
        let mut mass = vec![0.0; k];
        for j in 0..k {
            for (c, w) in weight_column.iter_mut().enumerate() {
                *w = resp[c * k + j];
            }
            let stats = TreeStats::collect(self.structure, matrix, Some(&weight_column));
            mass[j] = stats.total;
            let target = TreeParams::estimate(self.structure, &stats, alpha);
            self.components[j] = if guarded {
                guard_tree(self.structure, &self.components[j], target, &stats)
            } else {
                target
            };
        }
        let target: Vec<f64> = mass.iter().map(|m| (m + alpha) / (n + k as f64 * alpha)).collect();
        let weights = if guarded {
            let old: Vec<f64> = self.log_weights.iter().map(|l| l.exp()).collect();
            let ml: Vec<f64> = mass.iter().map(|m| m / n).collect();
            guard_row(&old, &target, &ml, &mass)
        } else {
            target
        };
        self.log_weights = weights.iter().map(|w| w.ln()).collect();
    }
}

/// Expected complete-data log-likelihood of one categorical row.
fn row_objective(p: &[f64], counts: &[f64]) -> f64 {
    p.iter()
        .zip(counts)
        .map(|(&p, &n)| if n > 0.0 { n * p.ln() } else { 0.0 })
        .sum()
}

/// Returns `target` if it scores at least as well as `old` on `counts`;
/// otherwise the point nearest `target` on the segment `[ml, target]` that
/// still does. The objective is concave and maximized at `ml`, so that point
/// exists and bisection finds it.
fn guard_row(old: &[f64], target: &[f64], ml: &[f64], counts: &[f64]) -> Vec<f64> {
    let floor = row_objective(old, counts);
    if row_objective(target, counts) >= floor {
        return target.to_vec();
    }
    let at = |t: f64| -> Vec<f64> { ml.iter().zip(target).map(|(m, g)| m + t * (g - m)).collect() };
    if row_objective(ml, counts) < floor {
        return old.to_vec();
    }
    let (mut good, mut bad) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (good + bad);
        if row_objective(&at(mid), counts) >= floor {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let point = at(good);
    // stay strictly positive wherever the smoothed estimate is
    if point.iter().zip(target).any(|(p, t)| *p <= 0.0 && *t > 0.0) {
        return old.to_vec();
    }
    point
}

fn guard_bernoulli(old: f64, target: f64, ones: f64, zeros: f64) -> f64 {
    let (ones, zeros) = (ones.max(0.0), zeros.max(0.0));
    let total = ones + zeros;
    if total <= 0.0 {
        return target;
    }
    let ml = ones / total;
    guard_row(
        &[old, 1.0 - old],
        &[target, 1.0 - target],
        &[ml, 1.0 - ml],
        &[ones, zeros],
    )[0]
}

fn guard_tree(structure: &TreeStructure, old: &TreeParams, target: TreeParams, stats: &TreeStats) -> TreeParams {
    let mut out = target;
    out.root_p1 = guard_bernoulli(old.root_p1, out.root_p1, stats.ones[0], stats.total - stats.ones[0]);
    for v in 0..structure.n_vars() as u32 {
        let Some(u) = structure.parent(v) else { continue };
        let (u, vi) = (u as usize, v as usize);
        let both = stats.both[vi];
        let on_off = stats.ones[vi] - both;
        let row_counts = [
            (on_off, stats.total - stats.ones[u] - on_off),
            (both, stats.ones[u] - both),
        ];
        for (a, (ones, zeros)) in row_counts.into_iter().enumerate() {
            out.cpt[vi][a] = guard_bernoulli(old.cpt[vi][a], out.cpt[vi][a], ones, zeros);
        }
    }
    out
}

/// Fits a mixture of `k` Chow-Liu trees to the columns of `matrix`.
///
/// Initialization draws a soft assignment of contexts to components from a
/// ChaCha8 stream seeded with `seed` and applies one M-step. `iterations`
/// further E/M rounds follow. With `k = 1` and no iterations the result is
/// the closed-form Chow-Liu fit.
pub fn em_fit(
    matrix: &RuleContextMatrix,
    k: usize,
    iterations: usize,
    alpha: f64,
    seed: u64,
) -> Result<EmFit, CircuitError> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(CircuitError::Invalid(
            "at least one mixture component is required".into(),
        ));
    }
    if k > matrix.n_contexts() {
        return Err(CircuitError::TooManyComponents {
            components: k,
            contexts: matrix.n_contexts(),
        });
    }
    let tree = learn_structure(matrix, alpha)?;
    let structure = tree.structure;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resp = Vec::with_capacity(matrix.n_contexts() * k);
    for _ in 0..matrix.n_contexts() {
        let draws: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + f64::MIN_POSITIVE).collect();
        let total: f64 = draws.iter().sum();
        resp.extend(draws.iter().map(|d| d / total));
    }

    let mut mixture = Mixture {
        structure: &structure,
        components: vec![tree.params; k],
        log_weights: vec![0.0; k],
    };
    mixture.m_step(matrix, &resp, alpha, false);
    let mut trace = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let (r, ll) = mixture.e_step(matrix);
        trace.push(ll);
        mixture.m_step(matrix, &r, alpha, true);
        log::debug!("em iteration {}: log-likelihood {ll}", trace.len());
    }
    trace.push(mixture.e_step(matrix).1);

    let weights: Vec<f64> = mixture.log_weights.iter().map(|l| l.exp()).collect();
    let components = mixture.components;
    let trees: Vec<ChowLiuTree> = components
        .iter()
        .map(|params| ChowLiuTree {
            structure: structure.clone(),
            params: params.clone(),
        })
        .collect();
    let circuit = Circuit::compile(&trees, &weights)?;
    Ok(EmFit {
        circuit,
        structure,
        components,
        weights,
        log_likelihood: trace,
    })
}
