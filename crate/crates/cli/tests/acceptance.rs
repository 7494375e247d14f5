//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line each, and exits non-zero if any failed.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use logicenn::eval::{evaluate, rank_query, Side, TieMode};
use logicenn::kg::{generate_family_kg, KnowledgeGraph, Rule, RuleKind, Split, Triple};
use logicenn::model::ActivationPlan;
use logicenn::rules::{delta_pairs, delta_statistics, ground_rule, penalty_grounding_free, DeltaStat};
use logicenn::{train, EntityId, ModelParameters, RelationId, TrainingConfig};
use logicenn_testkit::{
    aggregate_oracle, brute_force_groundings, brute_force_rank, check_data_loss, check_grounding_free, check_penalty,
    gradient_summary, memorization_test, random_graph, random_params, random_rule, reference_forward,
    GroundTruthTable, MemorizationConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const PLANS: [ActivationPlan; 2] = [ActivationPlan::ReluAll, ActivationPlan::SigmoidFinalRelu];
const LAMBDA_GRID: [f64; 7] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0];

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn within(started: Instant, budget: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= budget {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {:.0}s, budget {}s", took.as_secs_f64(), budget.as_secs()))
    }
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let mut checks: Vec<(String, Box<dyn Fn(u64) -> Option<logicenn_testkit::GradientSample>>)> = Vec::new();
    for plan in PLANS {
        checks.push((format!("data/{plan}"), Box::new(move |s| check_data_loss(plan, s))));
        for kind in RuleKind::ALL {
            checks.push((format!("{kind}/{plan}"), Box::new(move |s| check_penalty(kind, plan, s))));
        }
    }
    for kind in [RuleKind::Implication, RuleKind::Equivalence] {
        checks.push((format!("{kind}/grounding-free"), Box::new(move |s| check_grounding_free(kind, s))));
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, check) in &checks {
        let s = gradient_summary(20, check);
        worst = worst.max(s.max_gradient_error);
        if s.accepted < 20 || s.max_gradient_error > 1e-4 || s.max_value_error > 1e-10 {
            failures.push(format!("{name}: {s:?}"));
        }
    }
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    within(
        started,
        Duration::from_secs(60),
        format!("{} checks x 20 seeds, max relative error {worst:.1e}", checks.len()),
    )
}

fn memorization() -> Outcome {
    let started = Instant::now();
    let mut accs = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let true_facts = rng.gen_range(60..=240);
        let table = GroundTruthTable::random(&mut rng, 10, 3, true_facts);
        let report = memorization_test(&table, &MemorizationConfig { seed, ..MemorizationConfig::default() });
        if report.accuracy < 0.99 {
            return Err(format!("table {seed} ({true_facts} true facts): {report:?}"));
        }
        accs.push(format!("{:.3}@{}", report.accuracy, report.epochs));
    }
    within(started, Duration::from_secs(600), format!("accuracy@epochs {}", accs.join(" ")))
}

/// 20 entities; every r1 fact is also an r2 fact, r2 has extra facts.
fn implication_graph(seed: u64) -> (KnowledgeGraph, Vec<Rule>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kg = KnowledgeGraph::new();
    for i in 0..20 {
        kg.intern_entity(&format!("e{i}"));
    }
    let add = |kg: &mut KnowledgeGraph, r: &str, h: usize, t: usize| {
        kg.add_named(Split::Train, &format!("e{h}"), r, &format!("e{t}")).ok();
    };
    for _ in 0..40 {
        let (h, t) = (rng.gen_range(0..20), rng.gen_range(0..20));
        add(&mut kg, "r1", h, t);
        add(&mut kg, "r2", h, t);
        let (h, t) = (rng.gen_range(0..20), rng.gen_range(0..20));
        add(&mut kg, "r2", h, t);
    }
    let (r1, r2) = (kg.relation_id("r1").unwrap(), kg.relation_id("r2").unwrap());
    let rules = vec![Rule::new(RuleKind::Implication, vec![r1, r2], 1.0).unwrap()];
    (kg, rules)
}

fn grounding_free_soundness() -> Outcome {
    let started = Instant::now();
    let mut checked = 0;
    let mut control = Vec::new();
    for (i, plan) in PLANS.into_iter().enumerate() {
        let (kg, rules) = implication_graph(i as u64);
        let (r1, r2) = (rules[0].relation(0), rules[0].relation(1));
        let mut config = TrainingConfig { lambda: 0.05, learning_rate: 0.01, max_epochs: 300, seed: i as u64, ..TrainingConfig::default() };
        config.architecture.activation = plan;
        let (params, _) = train(&kg, &rules, &config).map_err(|e| e.to_string())?;
        let (penalty, _) = penalty_grounding_free(RuleKind::Implication, &params, r1, r2, 0.0).map_err(|e| e.to_string())?;
        if penalty != 0.0 {
            return Err(format!("{plan}: trained model has grounding-free penalty {penalty:e} at slack 0"));
        }
        for h in (0..kg.num_entities()).map(EntityId) {
            for t in (0..kg.num_entities()).map(EntityId) {
                let f1 = params.score(h, r1, t).map_err(|e| e.to_string())?;
                let f2 = params.score(h, r2, t).map_err(|e| e.to_string())?;
                let (o1, o2) = (reference_forward(&params, h.0, r1.0, t.0), reference_forward(&params, h.0, r2.0, t.0));
                if f1 > f2 + 1e-9 || o1 > o2 + 1e-9 {
                    return Err(format!("{plan}: f_r1({}, {}) = {f1} > f_r2 = {f2}", h.0, t.0));
                }
                checked += 1;
            }
        }
        // the same setup without the rule violates the constraint
        let (free, _) = train(&kg, &rules, &TrainingConfig { lambda: 0.0, ..config }).map_err(|e| e.to_string())?;
        let (p0, _) = penalty_grounding_free(RuleKind::Implication, &free, r1, r2, 0.0).map_err(|e| e.to_string())?;
        control.push(format!("{p0:.2}"));
    }
    within(
        started,
        Duration::from_secs(120),
        format!("{checked} pairs over both plans; lambda=0 control penalties {}", control.join(", ")),
    )
}

struct FamilyRun {
    base_test: f64,
    best_test: f64,
    best_lambda: f64,
    deltas: Vec<DeltaStat>,
    base_deltas: Vec<DeltaStat>,
}

fn family_runs(config: &TrainingConfig) -> Result<Vec<FamilyRun>, String> {
    let mut runs = Vec::new();
    for seed in 0..5u64 {
        let (kg, rules) = generate_family_kg(20, seed).map_err(|e| e.to_string())?;
        let pairs = delta_pairs(&rules);
        let fit = |lambda: f64| -> Result<(f64, f64, Vec<DeltaStat>), String> {
            let c = TrainingConfig { lambda, seed, ..config.clone() };
            let (params, trace) = train(&kg, &rules, &c).map_err(|e| e.to_string())?;
            let valid = trace.best_validation_mrr.ok_or("no validation run")?;
            let test = evaluate(&params, &kg, kg.test(), &[1, 10], TieMode::Average).map_err(|e| e.to_string())?;
            let deltas = delta_statistics(&params, &pairs).map_err(|e| e.to_string())?;
            Ok((valid, test.filtered.mrr, deltas))
        };
        let (_, base_test, base_deltas) = fit(0.0)?;
        let mut best: Option<(f64, f64, f64, Vec<DeltaStat>)> = None;
        for lambda in LAMBDA_GRID {
            let (valid, test, deltas) = fit(lambda)?;
            if best.as_ref().is_none_or(|b| valid > b.0) {
                best = Some((valid, test, lambda, deltas));
            }
        }
        let (_, best_test, best_lambda, deltas) = best.unwrap();
        runs.push(FamilyRun { base_test, best_test, best_lambda, deltas, base_deltas });
    }
    Ok(runs)
}

fn rule_injection(runs: &[FamilyRun], started: Instant) -> Outcome {
    let gains: Vec<f64> = runs.iter().map(|r| r.best_test - r.base_test).collect();
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.3}->{:.3}(l={})", r.base_test, r.best_test, r.best_lambda))
        .collect();
    let detail = format!("mean filtered MRR gain {mean:.3} [{}]", per_seed.join(" "));
    if mean < 0.05 {
        return Err(detail);
    }
    within(started, Duration::from_secs(1200), detail)
}

fn delta_shape(runs: &[FamilyRun], config: &TrainingConfig) -> Outcome {
    let (xi_im, xi_eq) = (config.slack.get(RuleKind::Implication), config.slack.get(RuleKind::Equivalence));
    let mut worst_im = f64::NEG_INFINITY;
    let mut worst_eq = 0.0f64;
    let (mut var, mut base_var) = (0.0, 0.0);
    for run in runs {
        for (d, b) in run.deltas.iter().zip(&run.base_deltas) {
            match d.kind {
                RuleKind::Implication => {
                    worst_im = worst_im.max(d.mean);
                    if d.mean > xi_im + 1e-6 {
                        return Err(format!("implication pair {} mean {} > {xi_im}", d.pair_id, d.mean));
                    }
                }
                _ => {
                    worst_eq = worst_eq.max(d.mean.abs());
                    var += d.variance;
                    base_var += b.variance;
                    if d.mean.abs() > xi_eq + 1e-6 {
                        return Err(format!("equivalence pair {} |mean| {} > {xi_eq}", d.pair_id, d.mean.abs()));
                    }
                }
            }
        }
    }
    if worst_im == f64::NEG_INFINITY || var == 0.0 && base_var == 0.0 {
        return Err("no implication or equivalence pairs in the rule set".into());
    }
    Ok(format!(
        "max implication mean {worst_im:.3} (slack {xi_im}), max |equivalence mean| {worst_eq:.1e} (slack {xi_eq}); \
         equivalence variance {:.4} vs {:.4} without rules",
        var / runs.len() as f64,
        base_var / runs.len() as f64
    ))
}

fn ranking_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0;
    let mut max_agg = 0.0f64;
    for q in 0..200u64 {
        let ne = rng.gen_range(4..16);
        let kg = random_graph(&mut rng, ne, 3, 3 * ne, ne);
        let plan = PLANS[q as usize % 2];
        let mut p = random_params(&mut rng, plan, ne, 3, 4, &[8, 6]);
        if q % 3 == 0 {
            let row = p.entity_embeddings[..4].to_vec();
            p.entity_embeddings[4..8].copy_from_slice(&row);
        }
        let known: HashSet<(usize, usize, usize)> =
            kg.train().iter().chain(kg.valid()).chain(kg.test()).map(|t| (t.head.0, t.relation.0, t.tail.0)).collect();
        let pool: Vec<Triple> = kg.train().iter().chain(kg.test()).copied().collect();
        let t = pool[rng.gen_range(0..pool.len())];
        let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
        let score = |h, r, t| reference_forward(&p, h, r, t);
        let is_known = |h, r, t| known.contains(&(h, r, t));
        let query = (t.head.0, t.relation.0, t.tail.0);
        let head = side == Side::Head;
        let (raw_a, raw_p) = brute_force_rank(ne, query, head, false, score, is_known);
        let (fil_a, fil_p) = brute_force_rank(ne, query, head, true, score, is_known);
        let a = rank_query(&p, &kg, &t, side, TieMode::Average).map_err(|e| e.to_string())?;
        let b = rank_query(&p, &kg, &t, side, TieMode::Pessimistic).map_err(|e| e.to_string())?;
        if (a.raw, a.filtered, b.raw, b.filtered) != (raw_a, fil_a, raw_p, fil_p) {
            return Err(format!("query {q} {t} {side:?}: evaluator {a:?}/{b:?}, oracle {raw_a} {fil_a} {raw_p} {fil_p}"));
        }
        ties += usize::from(raw_a != raw_p);

        if !kg.test().is_empty() {
            let ks = [1, 3, 10];
            let report = evaluate(&p, &kg, kg.test(), &ks, TieMode::Average).map_err(|e| e.to_string())?;
            for (ranks, m) in [
                (report.queries.iter().map(|q| q.raw).collect::<Vec<_>>(), &report.raw),
                (report.queries.iter().map(|q| q.filtered).collect(), &report.filtered),
            ] {
                let o = aggregate_oracle(&ranks, &ks);
                max_agg = max_agg.max((o.mr - m.mr).abs()).max((o.mrr - m.mrr).abs());
                for (i, &k) in ks.iter().enumerate() {
                    max_agg = max_agg.max((o.hits[i] - m.hits_at(k).unwrap()).abs());
                }
            }
        }
    }
    if max_agg > 1e-12 {
        return Err(format!("aggregate difference {max_agg:e}"));
    }
    if ties == 0 {
        return Err("no tied query exercised".into());
    }
    Ok(format!("200 queries exact ({ties} with ties); aggregates within {max_agg:.0e}"))
}

fn grounding_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut total = 0;
    for g in 0..100 {
        let ne = rng.gen_range(1..=15);
        let nr = rng.gen_range(1..=4);
        let edges = rng.gen_range(0..=40);
        let kg = random_graph(&mut rng, ne, nr, edges, 0);
        for kind in RuleKind::ALL {
            let rule = random_rule(&mut rng, kind, nr);
            let engine = ground_rule(&rule, &kg, false).map_err(|e| e.to_string())?;
            let set: BTreeSet<_> = engine.iter().cloned().collect();
            if set.len() != engine.len() || set != brute_force_groundings(&rule, &kg) {
                return Err(format!("graph {g}, {kind}: engine and enumeration differ"));
            }
            total += engine.len();
        }
    }
    let mut kg = KnowledgeGraph::new();
    kg.add_named(Split::Train, "BarackObama", "isMarriedTo", "MichelleObama").unwrap();
    let rule = Rule::new(RuleKind::Symmetric, vec![kg.relation_id("isMarriedTo").unwrap()], 1.0).unwrap();
    let engine = ground_rule(&rule, &kg, false).map_err(|e| e.to_string())?;
    let conclusion = engine.first().map(|g| {
        let c = g.conclusion;
        (kg.entity_name(c.head).to_string(), kg.relation_name(c.relation).to_string(), kg.entity_name(c.tail).to_string())
    });
    let expected = Some(("MichelleObama".to_string(), "isMarriedTo".to_string(), "BarackObama".to_string()));
    if engine.len() != 1 || conclusion != expected {
        return Err(format!("married-couple example produced {conclusion:?}"));
    }
    Ok(format!("100 graphs x 10 kinds, {total} groundings equal as sets; married-couple example ok"))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_logicenn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    run_cli(&["generate", "--families", "6", "--seed", "3", "--out", &p("data")])?;
    let data = |f: &str| p(&format!("data/{f}"));
    let filter = format!("{},{},{}", data("train.txt"), data("valid.txt"), data("test.txt"));
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let ckpt = p(&format!("{run}.ckpt"));
        run_cli(&[
            "train", "--train", &data("train.txt"), "--valid", &data("valid.txt"), "--rules", &data("rules.txt"),
            "--out", &ckpt, "--epochs", "30", "--seed", "11", "--threads", "1",
        ])?;
        let metrics = run_cli(&[
            "evaluate", "--ckpt", &ckpt, "--test", &data("test.txt"), "--filter-with", &filter, "--threads", "1",
        ])?;
        let bytes = std::fs::read(&ckpt).map_err(|e| e.to_string())?;
        outputs.push((bytes, metrics));
    }
    if outputs[0].0 != outputs[1].0 {
        return Err("checkpoints differ".into());
    }
    if outputs[0].1 != outputs[1].1 {
        return Err("metric outputs differ".into());
    }
    Ok(format!("two runs: {}-byte checkpoints and metric tables identical", outputs[0].0.len()))
}

fn full_scale_preset() -> Outcome {
    let path = repo_root().join("presets/paper-fb15k-relu.conf");
    let c = TrainingConfig::from_file(&path).map_err(|e| e.to_string())?;
    let a = &c.architecture;
    let s = |k| c.slack.get(k);
    let expected = a.embedding_dim == 200
        && a.hidden == [1000, 2000, 200]
        && a.activation == ActivationPlan::ReluAll
        && c.learning_rate == 0.001
        && c.negatives == 8
        && c.lambda == 0.05
        && s(RuleKind::Equivalence) == 1.0
        && s(RuleKind::Symmetric) == 0.5
        && s(RuleKind::Implication) == 5.0
        && s(RuleKind::Composition) == 0.1
        && s(RuleKind::Inverse) == 3.0;
    if !expected {
        return Err(format!("unexpected values in {}:\n{}", path.display(), c.to_text()));
    }
    if c != TrainingConfig::preset("paper-fb15k-relu").map_err(|e| e.to_string())? {
        return Err("preset file and built-in preset differ".into());
    }
    let params = ModelParameters::init(a, 2, 1, &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| e.to_string())?;
    let f = params.score(EntityId(0), RelationId(0), EntityId(1)).map_err(|e| e.to_string())?;
    if !f.is_finite() {
        return Err("full-scale model gives a non-finite score".into());
    }
    Ok(format!("loaded; {} parameters at N_e=2, N_r=1", params.parameter_count()))
}

fn main() -> ExitCode {
    let family_config = match TrainingConfig::from_file(repo_root().join("presets/family.conf")) {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL cannot load presets/family.conf: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut family: Option<Result<Vec<FamilyRun>, String>> = None;
    let mut family_started = Instant::now();
    let mut family_runs_once = |family: &mut Option<Result<Vec<FamilyRun>, String>>| {
        if family.is_none() {
            family_started = Instant::now();
            *family = Some(family_runs(&family_config));
        }
        family_started
    };

    let mut failed = 0;
    for n in 1..=9 {
        let started = Instant::now();
        let (name, outcome) = match n {
            1 => ("gradient correctness", gradients()),
            2 => ("memorization", memorization()),
            3 => ("grounding-free soundness", grounding_free_soundness()),
            4 => {
                let t = family_runs_once(&mut family);
                let outcome = match family.as_ref().unwrap() {
                    Ok(runs) => rule_injection(runs, t),
                    Err(e) => Err(e.clone()),
                };
                ("rule-injection benefit", outcome)
            }
            5 => {
                family_runs_once(&mut family);
                let outcome = match family.as_ref().unwrap() {
                    Ok(runs) => delta_shape(runs, &family_config),
                    Err(e) => Err(e.clone()),
                };
                ("delta diagnostic shape", outcome)
            }
            6 => ("evaluator oracle equivalence", ranking_oracle()),
            7 => ("grounding oracle equivalence", grounding_oracle()),
            8 => ("determinism", determinism()),
            _ => ("full-scale preset", full_scale_preset()),
        };
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
