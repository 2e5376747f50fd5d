//! The five pipeline stages plus `verify`, each reading the previous stage's
//! artifacts from the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use rulecircuit::circuit::{em_fit, Circuit};
use rulecircuit::context::{build_matrix, RuleContextMatrix};
use rulecircuit::eval::{sweep, to_csv, SweepEntry};
use rulecircuit::rules::{parse_rule_file, Direction, RuleId, RuleProgram};
use rulecircuit::rulesets::{greedy_rulesets, singleton_rulesets, Method, RulesetCollection};
use rulecircuit::scoring::{
    baseline_rules, collect_firings, restrict_firings, score_baseline_firings, score_pc1, score_pc2, score_pc3,
    write_predictions, ActiveRules, Firings, PredictionBlock, Query,
};
use rulecircuit::store::{Dataset, Triple};

use crate::artifacts::{file_digest, fingerprint, load_checked, write_artifact, write_atomic, Meta};
use crate::config::{RunConfig, ScoringMethod, CONFIG_FILE};

pub const MATRIX_FILE: &str = "matrix.tsv";
pub const CIRCUIT_FILE: &str = "circuit.txt";
pub const SINGLETONS_FILE: &str = "singletons.tsv";
pub const GREEDY_FILE: &str = "greedy.tsv";
pub const PREDICTIONS_DIR: &str = "predictions";
pub const METRICS_FILE: &str = "metrics.csv";
pub const VERIFY_FILE: &str = "verify.txt";

/// Stage names as used on the command line.
pub mod stage {
    pub const CONTEXTS: &str = "build-contexts";
    pub const CIRCUIT: &str = "learn-pc";
    pub const RULESETS: &str = "gen-rulesets";
    pub const PREDICT: &str = "predict";
    pub const EVALUATE: &str = "evaluate";
    pub const VERIFY: &str = "verify";
}

/// Expected fingerprint of every stage's output under one configuration.
#[derive(Debug, Clone)]
pub struct Fingerprints {
    pub contexts: (String, serde_json::Value),
    pub circuit: (String, serde_json::Value),
    pub rulesets: (String, serde_json::Value),
    pub predictions: (String, serde_json::Value),
    pub metrics: (String, serde_json::Value),
}

pub struct Pipeline {
    config: RunConfig,
    force: bool,
}

impl Pipeline {
    pub fn new(config: RunConfig, force: bool) -> Result<Pipeline> {
        let config = config.normalized();
        config.validate()?;
        Ok(Pipeline { config, force })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn output(&self) -> &Path {
        &self.config.output
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.output.join(name)
    }

    pub fn prediction_path(&self, method: ScoringMethod, top_n: usize) -> PathBuf {
        self.path(PREDICTIONS_DIR).join(format!("{method}_{top_n}.txt"))
    }

    /// Writes the resolved configuration next to the artifacts.
    pub fn write_config(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.config).expect("config serializes");
        write_atomic(&self.path(CONFIG_FILE), format!("{json}\n").as_bytes())
    }

    pub fn fingerprints(&self) -> Result<Fingerprints> {
        let c = &self.config;
        let digest = |p: &Option<PathBuf>, flag: &str| -> Result<String> { file_digest(&RunConfig::require(p, flag)?) };
        let optional = |p: &Option<PathBuf>| -> Result<Option<String>> { p.as_deref().map(file_digest).transpose() };

        let inputs = json!({
            "train": digest(&c.train, "train")?,
            "rules": digest(&c.rules, "rules")?,
            "min_confidence": c.min_confidence,
            "min_support": c.min_support,
            "materialize_inverse": c.materialize_inverse,
        });
        let contexts = (fingerprint(stage::CONTEXTS, None, &inputs), inputs);

        let inputs = json!({
            "components": c.components,
            "alpha": c.alpha,
            "em_iterations": c.em_iterations,
            "seed": c.seed,
        });
        let circuit = (fingerprint(stage::CIRCUIT, Some(&contexts.0), &inputs), inputs);

        let inputs = json!({ "delta": c.delta });
        let rulesets = (fingerprint(stage::RULESETS, Some(&circuit.0), &inputs), inputs);

        let inputs = json!({
            "test": digest(&c.test, "test")?,
            "valid": optional(&c.valid)?,
            "top_k": c.top_k,
        });
        let predictions = (fingerprint(stage::PREDICT, Some(&rulesets.0), &inputs), inputs);

        let inputs = json!({
            "dataset": c.dataset_name(),
            "methods": c.methods,
            "rule_counts": c.rule_counts,
        });
        let metrics = (fingerprint(stage::EVALUATE, Some(&predictions.0), &inputs), inputs);

        Ok(Fingerprints {
            contexts,
            circuit,
            rulesets,
            predictions,
            metrics,
        })
    }

    fn meta(
        stage: &str,
        own: &(String, serde_json::Value),
        upstream: Option<&(String, serde_json::Value)>,
        summary: serde_json::Value,
    ) -> Meta {
        Meta {
            stage: stage.to_string(),
            fingerprint: own.0.clone(),
            upstream: upstream.map(|u| u.0.clone()),
            inputs: own.1.clone(),
            summary,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let c = &self.config;
        let train = RunConfig::require(&c.train, "train")?;
        let test = RunConfig::require(&c.test, "test")?;
        Dataset::load(&train, c.valid.as_deref(), &test, c.materialize_inverse).context("loading dataset")
    }

    pub fn load_program(&self, dataset: &Dataset) -> Result<RuleProgram> {
        let c = &self.config;
        let path = RunConfig::require(&c.rules, "rules")?;
        let all = parse_rule_file(&path, dataset.entities(), dataset.relations())
            .with_context(|| format!("parsing rule file {}", path.display()))?;
        let program = all
            .filter(c.min_confidence, c.min_support)
            .context("filtering rules; lower --min-confidence or --min-support")?;
        log::info!(
            "kept {} of {} rules (confidence >= {}, support >= {})",
            program.len(),
            all.len(),
            c.min_confidence,
            c.min_support
        );
        Ok(program)
    }

    fn load_matrix(&self, fp: &Fingerprints, dataset: &Dataset) -> Result<RuleContextMatrix> {
        let path = self.path(MATRIX_FILE);
        let (text, _) = load_checked(&path, stage::CONTEXTS, &fp.contexts.0, self.force)?;
        RuleContextMatrix::from_text(&text, dataset.entities(), dataset.relations())
            .with_context(|| format!("parsing {}", path.display()))
    }

    fn load_circuit(&self, fp: &Fingerprints) -> Result<Circuit> {
        let path = self.path(CIRCUIT_FILE);
        let (text, _) = load_checked(&path, stage::CIRCUIT, &fp.circuit.0, self.force)?;
        Circuit::from_text(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn load_rulesets(&self, fp: &Fingerprints, name: &str, method: Method) -> Result<RulesetCollection> {
        let path = self.path(name);
        let (text, _) = load_checked(&path, stage::RULESETS, &fp.rulesets.0, self.force)?;
        RulesetCollection::from_text(&text, method).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn build_contexts(&self) -> Result<()> {
        let start = Instant::now();
        let fp = self.fingerprints()?;
        let dataset = self.load_dataset()?;
        let program = self.load_program(&dataset)?;
        let matrix = build_matrix(&program, &dataset.train);
        let empty = matrix.columns().iter().filter(|c| c.is_empty()).count();
        let never = matrix.rule_counts().iter().filter(|&&n| n == 0).count();
        log::info!(
            "{} contexts over {} rules ({empty} contexts explained by no rule, {never} rules never active) in {:.1?}",
            matrix.n_contexts(),
            matrix.n_rules(),
            start.elapsed()
        );
        let summary = json!({
            "rules": matrix.n_rules(),
            "contexts": matrix.n_contexts(),
            "empty_contexts": empty,
            "inactive_rules": never,
        });
        let text = matrix.to_text(dataset.entities(), dataset.relations());
        write_artifact(
            &self.path(MATRIX_FILE),
            text.as_bytes(),
            &Self::meta(stage::CONTEXTS, &fp.contexts, None, summary),
        )
    }

    pub fn learn_pc(&self) -> Result<()> {
        let start = Instant::now();
        let fp = self.fingerprints()?;
        let dataset = self.load_dataset()?;
        let matrix = self.load_matrix(&fp, &dataset)?;
        let c = &self.config;
        if c.components > matrix.n_contexts() {
            bail!(
                "{} mixture components requested but the matrix has only {} contexts; lower --components",
                c.components,
                matrix.n_contexts()
            );
        }
        let fit = em_fit(&matrix, c.components, c.em_iterations, c.alpha, c.seed).context("fitting the circuit")?;
        log::info!(
            "circuit with {} nodes, log-likelihood {:.4} -> {:.4} in {:.1?}",
            fit.circuit.nodes().len(),
            fit.log_likelihood[0],
            fit.log_likelihood[fit.log_likelihood.len() - 1],
            start.elapsed()
        );
        let summary = json!({
            "nodes": fit.circuit.nodes().len(),
            "weights": fit.weights,
            "log_likelihood": fit.log_likelihood,
        });
        write_artifact(
            &self.path(CIRCUIT_FILE),
            fit.circuit.to_text().as_bytes(),
            &Self::meta(stage::CIRCUIT, &fp.circuit, Some(&fp.contexts), summary),
        )
    }

    pub fn gen_rulesets(&self) -> Result<()> {
        let start = Instant::now();
        let fp = self.fingerprints()?;
        let dataset = self.load_dataset()?;
        let program = self.load_program(&dataset)?;
        let circuit = self.load_circuit(&fp)?;
        let singles = singleton_rulesets(&circuit, &program)?;
        let greedy = greedy_rulesets(&circuit, &program, self.config.delta)?;
        let largest = greedy.sets.iter().map(|s| s.rules.len()).max().unwrap_or(0);
        log::info!(
            "{} greedy sets (largest {largest}) using {} queries in {:.1?}",
            greedy.len(),
            greedy.query_count,
            start.elapsed()
        );
        for (name, coll) in [(SINGLETONS_FILE, &singles), (GREEDY_FILE, &greedy)] {
            let summary = json!({
                "sets": coll.len(),
                "queries": coll.query_count,
            });
            write_artifact(
                &self.path(name),
                coll.to_text().as_bytes(),
                &Self::meta(stage::RULESETS, &fp.rulesets, Some(&fp.circuit), summary),
            )?;
        }
        Ok(())
    }

    pub fn predict(&self) -> Result<()> {
        let start = Instant::now();
        let fp = self.fingerprints()?;
        let c = &self.config;
        let dataset = self.load_dataset()?;
        let program = self.load_program(&dataset)?;
        let n_rules = program.len();
        let uses_circuit = c.methods.iter().any(|m| *m != ScoringMethod::Baseline);
        let (circuit, singles, greedy) = if uses_circuit {
            let circuit = self.load_circuit(&fp)?;
            if circuit.n_vars() != n_rules {
                bail!(
                    "circuit covers {} rules but the filtered rule file has {n_rules}; rerun the earlier stages",
                    circuit.n_vars()
                );
            }
            let singles = self.load_rulesets(&fp, SINGLETONS_FILE, Method::Singleton)?;
            let greedy = self.load_rulesets(&fp, GREEDY_FILE, Method::Greedy { delta: c.delta })?;
            (Some(circuit), Some(singles), Some(greedy))
        } else {
            (None, None, None)
        };

        // Every candidate's full firing set once per query, restricted per run below.
        let all = ActiveRules::all(n_rules);
        let test = dataset.test.triples();
        let firings: Vec<(Firings, Firings)> = test
            .par_iter()
            .map(|t| {
                let head = Query::from_triple(t, Direction::Head).pattern;
                let tail = Query::from_triple(t, Direction::Tail).pattern;
                Ok((
                    collect_firings(&head, &program, &all, &dataset.train)?,
                    collect_firings(&tail, &program, &all, &dataset.train)?,
                ))
            })
            .collect::<Result<_, rulecircuit::scoring::ScoringError>>()?;
        log::info!("firings for {} test triples in {:.1?}", test.len(), start.elapsed());

        let singleton_marginals = singles.as_ref().map(|s| {
            let mut m = vec![0.0; n_rules];
            for set in &s.sets {
                m[set.rules[0].index()] = set.marginal;
            }
            m
        });
        let greedy_index = greedy.as_ref().map(|g| g.set_index(n_rules));

        for &method in &c.methods {
            for &top_n in &c.rule_counts {
                let run = Instant::now();
                let (rules, available) = match method {
                    ScoringMethod::Pc1 | ScoringMethod::Pc2 => {
                        let s = singles.as_ref().expect("loaded for circuit methods");
                        (s.top_rules(top_n), s.len())
                    }
                    ScoringMethod::Pc3 => {
                        let g = greedy.as_ref().expect("loaded for circuit methods");
                        (g.top_rules(top_n), g.len())
                    }
                    ScoringMethod::Baseline => (baseline_rules(&program, top_n)?, n_rules),
                };
                if top_n > available {
                    log::info!("{method}@{top_n}: only {available} available, using all of them");
                }
                let active = ActiveRules::new(n_rules, &rules);
                let blocks: Vec<PredictionBlock> = test
                    .par_iter()
                    .zip(&firings)
                    .map(|(t, (fh, ft))| {
                        let heads = self.score(
                            method,
                            t,
                            Direction::Head,
                            &restrict_firings(fh, &active),
                            &program,
                            circuit.as_ref(),
                            singleton_marginals.as_deref(),
                            greedy.as_ref().zip(greedy_index.as_deref()),
                        )?;
                        let tails = self.score(
                            method,
                            t,
                            Direction::Tail,
                            &restrict_firings(ft, &active),
                            &program,
                            circuit.as_ref(),
                            singleton_marginals.as_deref(),
                            greedy.as_ref().zip(greedy_index.as_deref()),
                        )?;
                        Ok(PredictionBlock::new(*t, &heads, &tails))
                    })
                    .collect::<Result<_>>()?;
                let text = write_predictions(&blocks, dataset.entities(), dataset.relations());
                let summary = json!({
                    "method": method,
                    "top_n": top_n,
                    "rules_used": rules.len(),
                });
                write_artifact(
                    &self.prediction_path(method, top_n),
                    text.as_bytes(),
                    &Self::meta(stage::PREDICT, &fp.predictions, Some(&fp.rulesets), summary),
                )?;
                log::debug!("{method}@{top_n} scored in {:.1?}", run.elapsed());
            }
        }
        log::info!("predictions written in {:.1?}", start.elapsed());
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn score(
        &self,
        method: ScoringMethod,
        triple: &Triple,
        direction: Direction,
        firings: &Firings,
        program: &RuleProgram,
        circuit: Option<&Circuit>,
        marginals: Option<&[f64]>,
        greedy: Option<(&RulesetCollection, &[Option<usize>])>,
    ) -> Result<rulecircuit::scoring::RankedPrediction> {
        let pattern = Query::from_triple(triple, direction).pattern;
        let k = self.config.top_k;
        Ok(match method {
            ScoringMethod::Pc1 => score_pc1(pattern, firings, marginals.expect("loaded"), k),
            ScoringMethod::Pc2 => score_pc2(pattern, firings, circuit.expect("loaded"), k)?,
            ScoringMethod::Pc3 => {
                let (coll, index) = greedy.expect("loaded");
                score_pc3(pattern, firings, coll, index, k)?
            }
            ScoringMethod::Baseline => score_baseline_firings(pattern, firings, program, k),
        })
    }

    /// Scores every configured prediction file. Rows that fail (missing file,
    /// stale fingerprint, parse error) are reported and skipped; the CSV holds
    /// the rest and the call returns an error naming the failures.
    pub fn evaluate(&self) -> Result<()> {
        let fp = self.fingerprints()?;
        let c = &self.config;
        let dataset = self.load_dataset()?;
        let name = c.dataset_name();
        let mut entries = Vec::new();
        let mut failures = Vec::new();
        for &method in &c.methods {
            for &top_n in &c.rule_counts {
                let path = self.prediction_path(method, top_n);
                if path.exists() {
                    if let Err(e) = load_checked(&path, stage::PREDICT, &fp.predictions.0, self.force) {
                        failures.push(format!("{method}@{top_n}: {e:#}"));
                        continue;
                    }
                }
                entries.push(SweepEntry {
                    dataset: name.clone(),
                    method: method.name().to_string(),
                    top_n,
                    path,
                });
            }
        }
        let results = sweep(
            &entries,
            dataset.entities(),
            dataset.relations(),
            &dataset.filter_stores(),
        );
        let mut rows = Vec::new();
        for (entry, result) in entries.iter().zip(results) {
            match result {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(format!("{}@{}: {e}", entry.method, entry.top_n)),
            }
        }
        for r in &rows {
            log::info!(
                "{} {}@{}: hits@1 {:.4} hits@3 {:.4} hits@10 {:.4} mrr {:.4}",
                r.dataset,
                r.method,
                r.top_n,
                r.hits1,
                r.hits3,
                r.hits10,
                r.mrr
            );
        }
        let summary = json!({ "rows": rows.len(), "failures": failures });
        write_artifact(
            &self.path(METRICS_FILE),
            to_csv(&rows).as_bytes(),
            &Self::meta(stage::EVALUATE, &fp.metrics, Some(&fp.predictions), summary),
        )?;
        if failures.is_empty() {
            Ok(())
        } else {
            for f in &failures {
                log::error!("{f}");
            }
            Err(anyhow!(
                "{} of {} metric rows failed",
                failures.len(),
                failures.len() + rows.len()
            ))
        }
    }

    /// Runs the five stages in order.
    pub fn run_all(&self) -> Result<()> {
        self.build_contexts()?;
        self.learn_pc()?;
        self.gen_rulesets()?;
        self.predict()?;
        self.evaluate()
    }

    /// Unique sorted firing sets of the candidates of the first `limit` test
    /// triples, used by the verification checks.
    pub fn sample_firing_sets(
        &self,
        dataset: &Dataset,
        program: &RuleProgram,
        limit: usize,
    ) -> Result<Vec<Vec<RuleId>>> {
        let all = ActiveRules::all(program.len());
        let mut sets = Vec::new();
        for t in dataset.test.triples().iter().take(limit) {
            for direction in [Direction::Head, Direction::Tail] {
                let pattern = Query::from_triple(t, direction).pattern;
                sets.extend(collect_firings(&pattern, program, &all, &dataset.train)?.into_values());
            }
        }
        sets.sort();
        sets.dedup();
        Ok(sets)
    }

    pub(crate) fn checked_matrix(&self, dataset: &Dataset) -> Result<RuleContextMatrix> {
        let fp = self.fingerprints()?;
        self.load_matrix(&fp, dataset)
    }
}
