//! Acceptance suite. Prints one `criterion N PASS|FAIL` line per criterion.
//!
//! The process exits non-zero when a criterion fails, except for those in
//! `KNOWN_RED`, whose statement has a counterexample documented in the README.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rulecircuit::circuit::{em_fit, Circuit};
use rulecircuit::context::{exact_marginal, lower_bound_marginal, ContextDistribution, RuleContextMatrix};
use rulecircuit::eval::{evaluate_file, to_csv, EvalRow};
use rulecircuit::oracle::{oracle_query_prob, verify_nilsson, verify_sandwich, NilssonInstance};
use rulecircuit::rules::{parse_rules, RuleId, RuleProgram};
use rulecircuit::rulesets::{greedy_rulesets, singleton_marginals, singleton_rulesets};
use rulecircuit::scoring::{pc2_probability, pc3_probability, upper_bound};
use rulecircuit::store::{EntityId, RelationId, StoreRole, Triple, TripleStore, Vocabulary};
use rulecircuit_cli::pipeline::{
    CIRCUIT_FILE, GREEDY_FILE, MATRIX_FILE, METRICS_FILE, PREDICTIONS_DIR, SINGLETONS_FILE,
};
use rulecircuit_cli::{Pipeline, RunConfig, ScoringMethod};

/// Criteria expected to fail; see the README for the counterexample.
const KNOWN_RED: &[u32] = &[4];

const NORMALIZATION_TOLERANCE: f64 = 1e-9;
const COMPLETION_TOLERANCE: f64 = 1e-12;
const MONOTONE_TOLERANCE: f64 = 1e-9;
const ORACLE_TOLERANCE: f64 = 1e-6;
const FIXTURE_TOLERANCE: f64 = 1e-12;

type Check = Result<String, String>;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + stream)
}

fn random_matrix(
    rng: &mut ChaCha8Rng,
    max_rules: usize,
    min_contexts: usize,
    max_contexts: usize,
) -> RuleContextMatrix {
    let n_rules = rng.gen_range(1..=max_rules);
    let n_contexts = rng.gen_range(min_contexts..=max_contexts);
    let density = rng.gen_range(0.1..0.8);
    let sets: Vec<Vec<u32>> = (0..n_contexts)
        .map(|_| (0..n_rules as u32).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    RuleContextMatrix::from_sets(n_rules, &sets).unwrap()
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> ContextDistribution {
    if rng.gen_bool(0.5) {
        ContextDistribution::uniform(n)
    } else {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        ContextDistribution::from_weights(raw.iter().map(|w| w / total).collect()).unwrap()
    }
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<RuleId> {
    (0..n as u32).filter(|_| rng.gen_bool(0.4)).map(RuleId).collect()
}

fn program(n: usize) -> RuleProgram {
    let mut text = String::new();
    for i in 0..n {
        writeln!(text, "1\t1\t1\th(X,Y) <= b{i}(X,Y)").unwrap();
    }
    parse_rules(&text, &Vocabulary::new(), &Vocabulary::new()).unwrap()
}

fn full_assignment(bits: usize, n: usize) -> Vec<Option<bool>> {
    (0..n).map(|v| Some(bits >> v & 1 == 1)).collect()
}

fn criterion_1() -> Check {
    let mut rng = rng(1);
    let mut worst_norm = 0.0f64;
    let mut worst_query = 0.0f64;
    for i in 0..100 {
        let m = random_matrix(&mut rng, 12, 1, 30);
        let circuit = if i % 2 == 0 {
            let k = rng.gen_range(1..=m.n_contexts().min(3));
            em_fit(&m, k, 3, rng.gen_range(0.01..2.0), rng.gen())
                .map_err(|e| e.to_string())?
                .circuit
        } else {
            let dist = random_distribution(&mut rng, m.n_contexts());
            Circuit::empirical(&m, &dist).map_err(|e| e.to_string())?
        };
        let n = m.n_rules();
        let values: Vec<f64> = (0..1usize << n)
            .map(|bits| circuit.log_value(&full_assignment(bits, n)).exp())
            .collect();
        let total: f64 = values.iter().sum();
        worst_norm = worst_norm.max((total - 1.0).abs());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(format!("matrix {i}: assignments sum to {total}"));
        }
        for _ in 0..5 {
            let partial: Vec<Option<bool>> = (0..n)
                .map(|_| match rng.gen_range(0..3) {
                    0 => None,
                    1 => Some(true),
                    _ => Some(false),
                })
                .collect();
            let brute: f64 = (0..1usize << n)
                .filter(|bits| {
                    partial
                        .iter()
                        .enumerate()
                        .all(|(v, p)| p.is_none_or(|b| (bits >> v & 1 == 1) == b))
                })
                .map(|bits| values[bits])
                .sum();
            let query: Vec<(RuleId, bool)> = partial
                .iter()
                .enumerate()
                .filter_map(|(v, p)| p.map(|b| (RuleId(v as u32), b)))
                .collect();
            let got = circuit.query_marginal(&query).map_err(|e| e.to_string())?;
            worst_query = worst_query.max((got - brute).abs());
            if (got - brute).abs() > COMPLETION_TOLERANCE {
                return Err(format!(
                    "matrix {i}: query {query:?} gives {got}, completions sum to {brute}"
                ));
            }
        }
    }
    Ok(format!(
        "100 circuits; max normalization error {worst_norm:.1e}, max query error {worst_query:.1e}"
    ))
}

fn criterion_2() -> Check {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    let mut fits = 0;
    for i in 0..20 {
        let m = random_matrix(&mut rng, 12, 8, 30);
        for k in [2, 4] {
            let fit = em_fit(&m, k, 50, rng.gen_range(0.01..2.0), rng.gen()).map_err(|e| e.to_string())?;
            fits += 1;
            for (step, pair) in fit.log_likelihood.windows(2).enumerate() {
                let drop = pair[0] - pair[1];
                worst = worst.max(drop);
                if drop > MONOTONE_TOLERANCE {
                    return Err(format!(
                        "matrix {i}, K={k}: step {step} lowers the log-likelihood by {drop}"
                    ));
                }
            }
        }
    }
    Ok(format!("{fits} fits of 50 iterations; largest decrease {worst:.1e}"))
}

fn criterion_3() -> Check {
    let mut rng = rng(3);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let m = random_matrix(&mut rng, 8, 1, 20);
        let dist = random_distribution(&mut rng, m.n_contexts());
        let circuit = Circuit::empirical(&m, &dist).map_err(|e| e.to_string())?;
        let rules = random_subset(&mut rng, m.n_rules());
        let pc2 = pc2_probability(&rules, &circuit).map_err(|e| e.to_string())?;
        let oracle = oracle_query_prob(&m, &dist, &rules);
        worst = worst.max((pc2 - oracle).abs());
        if (pc2 - oracle).abs() > ORACLE_TOLERANCE {
            return Err(format!("instance {i}: pc2 {pc2} vs oracle {oracle} for {rules:?}"));
        }
    }
    Ok(format!("1000 instances; max difference {worst:.1e}"))
}

fn criterion_4() -> Check {
    let mut rng = rng(4);
    let mut contained_violations = 0;
    let mut first = None;
    for i in 0..1000 {
        let m = random_matrix(&mut rng, 8, 1, 20);
        let dist = random_distribution(&mut rng, m.n_contexts());
        let rules = random_subset(&mut rng, m.n_rules());
        let lower = lower_bound_marginal(&m, &dist, &rules);
        let exact = exact_marginal(&m, &dist, &rules);
        if lower > exact + FIXTURE_TOLERANCE {
            contained_violations += 1;
            first.get_or_insert(format!("instance {i}: R={rules:?} lower {lower} > exact {exact}"));
        }
    }
    let mut sandwich_violations = 0;
    for i in 0..1000 {
        let m = random_matrix(&mut rng, 8, 1, 20);
        let dist = random_distribution(&mut rng, m.n_contexts());
        let circuit = Circuit::empirical(&m, &dist).map_err(|e| e.to_string())?;
        let collection =
            greedy_rulesets(&circuit, &program(m.n_rules()), rng.gen_range(0.0..=1.0)).map_err(|e| e.to_string())?;
        let mut rules = random_subset(&mut rng, m.n_rules());
        if rules.is_empty() {
            rules.push(RuleId(0));
        }
        let report = verify_sandwich(&m, &dist, &circuit, &collection, &rules).map_err(|e| e.to_string())?;
        if !report.passed {
            sandwich_violations += 1;
            first.get_or_insert(format!("instance {i}: {}", report.details.join("; ")));
        }
    }
    let summary = format!(
        "lower-bound inequality: {contained_violations}/1000 violations; sandwich: {sandwich_violations}/1000 violations"
    );
    if contained_violations + sandwich_violations == 0 {
        Ok(summary)
    } else {
        Err(format!("{summary}; first: {}", first.unwrap()))
    }
}

fn criterion_5() -> Check {
    let mut rng = rng(5);
    for i in 0..50 {
        let instance = NilssonInstance::random(&mut rng);
        let report = verify_nilsson(&instance).map_err(|e| e.to_string())?;
        if !report.passed {
            return Err(format!("instance {i}:\n{report}"));
        }
    }
    Ok("50 instances".into())
}

fn criterion_6() -> Check {
    let mut rng = rng(6);
    for i in 0..100 {
        let m = random_matrix(&mut rng, 12, 3, 30);
        let k = rng.gen_range(1..=3);
        let circuit = em_fit(&m, k, 2, rng.gen_range(0.05..2.0), rng.gen())
            .map_err(|e| e.to_string())?
            .circuit;
        let n = m.n_rules();
        let prog = program(n);
        let delta = rng.gen_range(0.0..=1.0);
        let coll = greedy_rulesets(&circuit, &prog, delta).map_err(|e| e.to_string())?;
        let mut seen: Vec<u32> = coll.sets.iter().flat_map(|s| s.rules.iter().map(|r| r.0)).collect();
        seen.sort_unstable();
        if seen != (0..n as u32).collect::<Vec<_>>() {
            return Err(format!(
                "run {i} (delta {delta}): sets {seen:?} do not partition {n} rules"
            ));
        }
        if coll.query_count > (n * n) as u64 {
            return Err(format!("run {i}: {} queries exceed |rules|^2", coll.query_count));
        }
        let singles = greedy_rulesets(&circuit, &prog, 1.0).map_err(|e| e.to_string())?;
        if singles.len() != n || singles.sets.iter().any(|s| s.rules.len() != 1) {
            return Err(format!("run {i}: delta 1 gave {} sets for {n} rules", singles.len()));
        }
        if singles.query_count != n as u64 {
            return Err(format!(
                "run {i}: delta 1 used {} queries for {n} rules",
                singles.query_count
            ));
        }
    }
    Ok("100 runs partition the rules; delta 1 yields |rules| singletons with exactly |rules| queries".into())
}

struct MetricCase {
    name: &'static str,
    known: Vec<(u32, u32)>,
    test: Vec<(u32, u32)>,
    file: &'static str,
    expected: &'static str,
}

fn metric_cases() -> Vec<MetricCase> {
    vec![
        MetricCase {
            name: "plain",
            known: vec![],
            test: vec![(0, 1), (2, 3), (4, 5)],
            file: "e0\tr\te1\nHeads: e0\t0.900000\te6\t0.500000\nTails: e7\t0.900000\te1\t0.800000\n\
                   e2\tr\te3\nHeads: e6\t0.900000\te7\t0.800000\te8\t0.700000\te2\t0.600000\nTails: e3\t0.900000\n\
                   e4\tr\te5\nHeads: e6\t0.900000\te4\t0.500000\nTails: e6\t0.900000\te7\t0.800000\te8\t0.700000\te5\t0.100000\n",
            expected: "plain,m,1,0.333333,0.666667,1.000000,0.583333",
        },
        MetricCase {
            name: "filtered",
            known: vec![(6, 1)],
            test: vec![(0, 1)],
            file: "e0\tr\te1\nHeads: e6\t0.900000\te0\t0.800000\nTails: e2\t0.900000\te1\t0.500000\n",
            expected: "filtered,m,1,0.500000,1.000000,1.000000,0.750000",
        },
        MetricCase {
            name: "missing",
            known: vec![],
            test: vec![(0, 1)],
            file: "e0\tr\te1\nHeads: e6\t0.900000\nTails: \n",
            expected: "missing,m,1,0.000000,0.000000,0.000000,0.000000",
        },
        MetricCase {
            name: "ties",
            known: vec![],
            test: vec![(0, 1)],
            file: "e0\tr\te1\nHeads: e6\t0.500000\te0\t0.500000\te7\t0.500000\nTails: e1\t0.700000\te2\t0.700000\n",
            expected: "ties,m,1,0.000000,1.000000,1.000000,0.416667",
        },
        MetricCase {
            name: "beyond-ten",
            known: vec![],
            test: vec![(0, 1)],
            file: "e0\tr\te1\nHeads: e10\t0.990000\te11\t0.980000\te12\t0.970000\te13\t0.960000\te14\t0.950000\t\
                   e15\t0.940000\te16\t0.930000\te17\t0.920000\te18\t0.910000\te19\t0.900000\te0\t0.500000\n\
                   Tails: e1\t0.900000\n",
            expected: "beyond-ten,m,1,0.500000,0.500000,0.500000,0.545455",
        },
    ]
}

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut entities = Vocabulary::new();
    for i in 0..20 {
        entities.intern(&format!("e{i}"));
    }
    let mut relations = Vocabulary::new();
    relations.intern("r");
    let (entities, relations) = (Arc::new(entities), Arc::new(relations));
    let store = |role, pairs: &[(u32, u32)]| {
        let triples = pairs
            .iter()
            .map(|&(h, t)| Triple::new(EntityId(h), RelationId(0), EntityId(t)));
        TripleStore::from_triples(role, entities.clone(), relations.clone(), triples)
    };
    for case in metric_cases() {
        let path = dir.path().join(format!("{}.txt", case.name));
        fs::write(&path, case.file).map_err(|e| e.to_string())?;
        let train = store(StoreRole::Train, &case.known);
        let test = store(StoreRole::Test, &case.test);
        let ranks = evaluate_file(&path, &entities, &relations, &[&train, &test]).map_err(|e| e.to_string())?;
        let row = EvalRow::from_ranks(case.name, "m", 1, &ranks).map_err(|e| e.to_string())?;
        let csv = to_csv(&[row]);
        let got = csv.lines().nth(1).unwrap_or_default();
        if got != case.expected {
            return Err(format!(
                "{}: ranks {ranks:?} gave {got}, expected {}",
                case.name, case.expected
            ));
        }
    }
    Ok("5 crafted prediction files".into())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= FIXTURE_TOLERANCE
}

fn ids(v: &serde_json::Value) -> Vec<RuleId> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| RuleId(x.as_u64().unwrap() as u32))
        .collect()
}

fn criterion_8() -> Check {
    let path = repo_root().join("data/fixture_f/expected.json");
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let expected: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let num = |v: &serde_json::Value| v.as_f64().unwrap();

    // the enumeration script must agree with the documented fixture values
    let documented = [0.6, 0.4, 0.8, 0.2];
    let script_marginals: Vec<f64> = expected["marginals"].as_array().unwrap().iter().map(num).collect();
    if script_marginals != documented {
        return Err(format!(
            "enumeration script marginals {script_marginals:?} differ from {documented:?}"
        ));
    }

    let sets: Vec<Vec<u32>> = expected["contexts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| ids(c).into_iter().map(|r| r.0).collect())
        .collect();
    let m = RuleContextMatrix::from_sets(4, &sets).map_err(|e| e.to_string())?;
    let dist = ContextDistribution::uniform(m.n_contexts());
    let circuit = Circuit::empirical(&m, &dist).map_err(|e| e.to_string())?;
    let prog = program(4);
    let mut checked = 0;

    let marginals = singleton_marginals(&circuit);
    for (r, (&got, want)) in marginals.iter().zip(&script_marginals).enumerate() {
        if !close(got, *want) {
            return Err(format!("marginal of r{}: {got} vs {want}", r + 1));
        }
        checked += 1;
    }
    let order: Vec<u32> = singleton_rulesets(&circuit, &prog)
        .map_err(|e| e.to_string())?
        .sets
        .iter()
        .map(|s| s.rules[0].0)
        .collect();
    let want_order: Vec<u32> = ids(&expected["singleton_order"]).iter().map(|r| r.0).collect();
    if order != want_order {
        return Err(format!("singleton order {order:?} vs {want_order:?}"));
    }
    checked += 1;
    for case in expected["lower_bound"].as_array().unwrap() {
        let got = lower_bound_marginal(&m, &dist, &ids(&case["rules"]));
        if !close(got, num(&case["value"])) {
            return Err(format!("lower bound {:?}: {got}", case["rules"]));
        }
        checked += 1;
    }
    let pc2 = pc2_probability(&ids(&expected["pc2"]["rules"]), &circuit).map_err(|e| e.to_string())?;
    if !close(pc2, num(&expected["pc2"]["value"])) || !close(pc2, 0.6) {
        return Err(format!("pc2 value {pc2}"));
    }
    checked += 1;
    for case in expected["query_prob"].as_array().unwrap() {
        let got = oracle_query_prob(&m, &dist, &ids(&case["rules"]));
        if !close(got, num(&case["value"])) {
            return Err(format!("oracle {:?}: {got}", case["rules"]));
        }
        checked += 1;
    }
    let greedy = greedy_rulesets(&circuit, &prog, num(&expected["greedy_delta"])).map_err(|e| e.to_string())?;
    let want_sets = expected["greedy"].as_array().unwrap();
    if greedy.len() != want_sets.len() {
        return Err(format!("{} greedy sets, expected {}", greedy.len(), want_sets.len()));
    }
    for (got, want) in greedy.sets.iter().zip(want_sets) {
        if got.rules != ids(&want["rules"]) || !close(got.marginal, num(&want["marginal"])) {
            return Err(format!("greedy set {:?} ({}) vs {want}", got.rules, got.marginal));
        }
        checked += 1;
    }
    let index = greedy.set_index(4);
    for case in expected["sandwich"].as_array().unwrap() {
        let firing = ids(&case["firing"]);
        let lower = pc3_probability(&firing, &greedy, &index).map_err(|e| e.to_string())?;
        let upper = upper_bound(&firing, &greedy, &circuit).map_err(|e| e.to_string())?;
        let exact = oracle_query_prob(&m, &dist, &firing);
        if !(close(lower, num(&case["lower"]))
            && close(exact, num(&case["exact"]))
            && close(upper, num(&case["upper"])))
        {
            return Err(format!(
                "sandwich {firing:?}: {lower} <= {exact} <= {upper}, expected {case}"
            ));
        }
        checked += 1;
    }
    Ok(format!("{checked} values match the enumeration script"))
}

fn nations_config(output: &Path) -> RunConfig {
    let data = repo_root().join("data/nations");
    RunConfig {
        train: Some(data.join("train.txt")),
        valid: Some(data.join("valid.txt")),
        test: Some(data.join("test.txt")),
        rules: Some(data.join("rules.txt")),
        output: output.to_path_buf(),
        ..RunConfig::default()
    }
}

type MetricRows = BTreeMap<(String, usize), (f64, f64)>;

fn metrics(path: &Path) -> Result<MetricRows, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(text
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (
                (f[1].to_string(), f[2].parse().unwrap()),
                (f[5].parse().unwrap(), f[6].parse().unwrap()),
            )
        })
        .collect())
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        methods: vec![ScoringMethod::Pc2, ScoringMethod::Baseline],
        rule_counts: vec![500],
        ..nations_config(dir.path())
    };
    let pipeline = Pipeline::new(cfg, false).map_err(|e| e.to_string())?;
    pipeline.write_config().map_err(|e| e.to_string())?;
    pipeline.run_all().map_err(|e| format!("{e:#}"))?;
    let rows = metrics(&dir.path().join(METRICS_FILE))?;
    let (pc2_hits, pc2_mrr) = rows[&("pc2".to_string(), 500)];
    let (base_hits, base_mrr) = rows[&("baseline".to_string(), 500)];
    let summary = format!(
        "pc2@500 hits@10 {pc2_hits:.4} mrr {pc2_mrr:.4}; baseline@500 hits@10 {base_hits:.4} mrr {base_mrr:.4}; \
         hits@10 ratio {:.2}",
        pc2_hits / base_hits
    );
    if pc2_hits >= base_hits && pc2_mrr >= base_mrr {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn criterion_10() -> Check {
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for (i, dir) in dirs.iter().enumerate() {
        let pipeline = Pipeline::new(nations_config(dir.path()), false).map_err(|e| e.to_string())?;
        // the second run uses a different worker count
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(if i == 0 { 1 } else { 3 })
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| pipeline.run_all()).map_err(|e| format!("{e:#}"))?;
    }
    let mut files: Vec<PathBuf> = [MATRIX_FILE, CIRCUIT_FILE, SINGLETONS_FILE, GREEDY_FILE, METRICS_FILE]
        .iter()
        .map(PathBuf::from)
        .collect();
    let mut predictions: Vec<PathBuf> = fs::read_dir(dirs[0].path().join(PREDICTIONS_DIR))
        .map_err(|e| e.to_string())?
        .map(|e| Path::new(PREDICTIONS_DIR).join(e.unwrap().file_name()))
        .collect();
    predictions.sort();
    files.extend(predictions);
    for f in &files {
        let a = fs::read(dirs[0].path().join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        let b = fs::read(dirs[1].path().join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        if a != b {
            return Err(format!("{} differs between runs", f.display()));
        }
    }
    Ok(format!("{} files byte-identical across two runs", files.len()))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Check, Duration);
    let criteria: [Criterion; 10] = [
        (
            1,
            "circuit normalization and completion sums",
            criterion_1,
            Duration::from_secs(60),
        ),
        (2, "EM monotonicity", criterion_2, Duration::from_secs(120)),
        (
            3,
            "PC2 equals the enumeration oracle",
            criterion_3,
            Duration::from_secs(60),
        ),
        (
            4,
            "lower bound, PC3 and upper bound",
            criterion_4,
            Duration::from_secs(120),
        ),
        (5, "Nilsson world enumeration", criterion_5, Duration::from_secs(60)),
        (6, "greedy walk contract", criterion_6, Duration::from_secs(60)),
        (
            7,
            "Hits@k and MRR on crafted files",
            criterion_7,
            Duration::from_secs(1),
        ),
        (8, "fixture regression", criterion_8, Duration::from_secs(60)),
        (
            9,
            "Nations PC2@500 versus baseline@500",
            criterion_9,
            Duration::from_secs(600),
        ),
        (
            10,
            "determinism of two full runs",
            criterion_10,
            Duration::from_secs(1200),
        ),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let note = if result.is_err() && KNOWN_RED.contains(&id) {
            " [known red]"
        } else {
            ""
        };
        println!("criterion {id} {status}{note}: {name}: {detail} ({elapsed:.2?})");
        if result.is_err() && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
