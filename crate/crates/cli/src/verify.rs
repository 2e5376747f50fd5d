//! The `verify` stage: oracle checks on the dataset's own firing sets plus a
//! seeded batch of small random instances.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rulecircuit::circuit::Circuit;
use rulecircuit::context::{ContextDistribution, RuleContextMatrix};
use rulecircuit::oracle::{verify_nilsson, verify_prop1, verify_prop2, verify_sandwich, CheckReport, NilssonInstance};
use rulecircuit::rules::{parse_rules, RuleId, RuleProgram};
use rulecircuit::rulesets::greedy_rulesets;
use rulecircuit::store::Vocabulary;

use crate::artifacts::write_atomic;
use crate::pipeline::{Pipeline, VERIFY_FILE};

/// Test triples whose candidate firing sets are checked against the matrix.
pub const DATASET_TRIPLES: usize = 200;
pub const RANDOM_MATRICES: usize = 200;
pub const NILSSON_INSTANCES: usize = 50;
const EXAMPLES_KEPT: usize = 5;

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    examples: Vec<String>,
}

#[derive(Default)]
pub struct VerifyOutcome {
    tallies: BTreeMap<String, Tally>,
}

impl VerifyOutcome {
    fn record(&mut self, scope: &str, report: &CheckReport) {
        let tally = self.tallies.entry(format!("{}/{scope}", report.property)).or_default();
        tally.checks += 1;
        if !report.passed {
            tally.failures += 1;
            if tally.examples.len() < EXAMPLES_KEPT {
                tally.examples.extend(report.details.iter().cloned());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.tallies.values().all(|t| t.failures == 0)
    }

    /// One `PASS name` or `FAIL name` line per property and scope.
    pub fn status_lines(&self) -> Vec<String> {
        self.tallies
            .iter()
            .map(|(name, t)| format!("{} {name}", if t.failures == 0 { "PASS" } else { "FAIL" }))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, t) in &self.tallies {
            writeln!(out, "{name}: {} checks, {} failures", t.checks, t.failures).unwrap();
            for e in &t.examples {
                writeln!(out, "  {e}").unwrap();
            }
            writeln!(out, "{} {name}", if t.failures == 0 { "PASS" } else { "FAIL" }).unwrap();
        }
        out
    }
}

/// A program of `n` distinct placeholder rules, for collections over
/// synthetic matrices.
fn placeholder_program(n: usize) -> RuleProgram {
    let mut text = String::new();
    for i in 0..n {
        writeln!(text, "1\t1\t1\th(X,Y) <= b{i}(X,Y)").unwrap();
    }
    parse_rules(&text, &Vocabulary::new(), &Vocabulary::new()).expect("placeholder rules parse")
}

fn random_matrix(rng: &mut ChaCha8Rng) -> RuleContextMatrix {
    let n_rules = rng.gen_range(1..=8usize);
    let n_contexts = rng.gen_range(1..=20usize);
    let density = rng.gen_range(0.1..0.7);
    let sets: Vec<Vec<u32>> = (0..n_contexts)
        .map(|_| (0..n_rules as u32).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    RuleContextMatrix::from_sets(n_rules, &sets).expect("valid random matrix")
}

fn random_subset(rng: &mut ChaCha8Rng, n_rules: usize) -> Vec<RuleId> {
    (0..n_rules as u32).filter(|_| rng.gen_bool(0.4)).map(RuleId).collect()
}

fn check_random(outcome: &mut VerifyOutcome, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_MATRICES {
        let matrix = random_matrix(&mut rng);
        let dist = ContextDistribution::uniform(matrix.n_contexts());
        let rules = random_subset(&mut rng, matrix.n_rules());
        outcome.record("random", &verify_prop1(&matrix, &dist, &rules));
        outcome.record("random", &verify_prop2(&matrix, &dist, &rules));
        let circuit = Circuit::empirical(&matrix, &dist)?;
        let delta = rng.gen_range(0.0..=1.0);
        let collection = greedy_rulesets(&circuit, &placeholder_program(matrix.n_rules()), delta)?;
        outcome.record(
            "random",
            &verify_sandwich(&matrix, &dist, &circuit, &collection, &rules)?,
        );
    }
    for _ in 0..NILSSON_INSTANCES {
        outcome.record("random", &verify_nilsson(&NilssonInstance::random(&mut rng))?);
    }
    Ok(())
}

/// Runs every check and writes the report. Returns the outcome so the caller
/// can decide on the exit status.
pub fn run(pipeline: &Pipeline) -> Result<VerifyOutcome> {
    let mut outcome = VerifyOutcome::default();
    let dataset = pipeline.load_dataset()?;
    let program = pipeline.load_program(&dataset)?;
    let matrix = pipeline.checked_matrix(&dataset)?;
    let dist = ContextDistribution::uniform(matrix.n_contexts());
    let sets = pipeline.sample_firing_sets(&dataset, &program, DATASET_TRIPLES)?;
    log::info!("checking {} distinct firing sets against the matrix", sets.len());
    for rules in &sets {
        outcome.record("dataset", &verify_prop1(&matrix, &dist, rules));
        outcome.record("dataset", &verify_prop2(&matrix, &dist, rules));
    }
    check_random(&mut outcome, pipeline.config().seed)?;
    write_atomic(&pipeline.path(VERIFY_FILE), outcome.to_text().as_bytes())?;
    Ok(outcome)
}
