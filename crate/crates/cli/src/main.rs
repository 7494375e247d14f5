//! `logicenn` command-line front end: data generation, training, evaluation,
//! grounding inspection and rule diagnostics.

mod sidecar;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use logicenn::eval::{evaluate, rule_satisfaction_report, TieMode};
use logicenn::kg::{generate_family_kg_with, load_rules, write_rules, DuplicatePolicy, FamilyConfig, Split};
use logicenn::model::{load_checkpoint, save_checkpoint};
use logicenn::rules::ground_rule;
use logicenn::{train, Error, KnowledgeGraph, RuleKind, TrainingConfig};

use sidecar::{meta_path, read_meta, read_vocab, trace_path, vocab_path, write_meta, write_vocab};

#[derive(Parser)]
#[command(name = "logicenn", version, about = "Knowledge graph embeddings with logical rule injection")]
struct Cli {
    /// Log verbosity (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads for scoring and gradients [default: available cores].
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic family knowledge graph and its rules.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint with its sidecar files.
    Train(TrainArgs),
    /// Rank test triples and print MR/MRR/Hits@k.
    Evaluate(EvaluateArgs),
    /// Dump the groundings of a rule file over a training split.
    Ground(GroundArgs),
    /// Report rule penalties and relation-difference statistics of a checkpoint.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of families.
    #[arg(long)]
    families: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of derived triples held out for valid and test.
    #[arg(long, default_value_t = 0.5)]
    holdout: f64,
    /// Output directory (train.txt, valid.txt, test.txt, rules.txt).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Validation triples for early stopping [default: none].
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Rule file [default: none].
    #[arg(long)]
    rules: Option<PathBuf>,
    /// key = value config file [default: the desk preset].
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named preset instead of a config file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Checkpoint path; CKPT.vocab, CKPT.meta and CKPT.trace.tsv are written alongside.
    #[arg(long)]
    out: PathBuf,
    /// Train without rule penalties (λ = 0).
    #[arg(long)]
    no_rules: bool,
    /// Penalise implication/equivalence through the relation vectors only.
    #[arg(long, conflicts_with = "grounded")]
    grounding_free: bool,
    /// Ground implication/equivalence rules like the other kinds.
    #[arg(long)]
    grounded: bool,
    /// Rules below this confidence are dropped.
    #[arg(long, default_value_t = 0.8)]
    min_confidence: f64,
    /// Override the config seed [default: from config].
    #[arg(long)]
    seed: Option<u64>,
    /// Override max_epochs [default: from config].
    #[arg(long)]
    epochs: Option<usize>,
    /// Override λ [default: from config].
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the learning rate [default: from config].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Any config key, e.g. --set slack_sy=0.5 (repeatable, applied last).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated triple files whose triples are filtered out (usually train,valid,test).
    #[arg(long, value_delimiter = ',')]
    filter_with: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    hits: Vec<usize>,
    /// Tie handling: average or pessimistic.
    #[arg(long, default_value = "average")]
    ties: String,
    /// Also write per-query ranks here.
    #[arg(long)]
    ranks: Option<PathBuf>,
    /// Seed for embeddings of entities unseen during training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GroundArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also ground implication/equivalence (skipped in grounding-free mode).
    #[arg(long)]
    grounded: bool,
    #[arg(long, default_value_t = 0.8)]
    min_confidence: f64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training triples [default: the path recorded at training time].
    #[arg(long)]
    train: Option<PathBuf>,
    /// Groundings evaluated per rule at most [default: all].
    #[arg(long)]
    sample_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    min_confidence: f64,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Train(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            Error::Divergence { .. } | Error::NonFinite(_) => Failure::Train(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("cannot write {}: {e}", path.display()))
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error[usage]: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[usage]: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Ground(a) => ground_cmd(a),
        Command::Diagnose(a) => diagnose_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error[usage]: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error[data]: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Train(m)) => {
            eprintln!("error[train]: {m}");
            ExitCode::from(3)
        }
    }
}

fn generate(a: GenerateArgs) -> CliResult {
    let config = FamilyConfig {
        num_families: a.families,
        seed: a.seed,
        holdout_fraction: a.holdout,
    };
    let (kg, rules) = generate_family_kg_with(&config)?;
    fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;
    for split in Split::ALL {
        kg.write_triples(a.out.join(format!("{}.txt", split.name())), split)?;
    }
    write_rules(a.out.join("rules.txt"), &rules, &kg)?;
    println!(
        "{} entities, {} relations, {}/{}/{} train/valid/test triples, {} rules",
        kg.num_entities(),
        kg.num_relations(),
        kg.train().len(),
        kg.valid().len(),
        kg.test().len(),
        rules.len()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainingConfig, Failure> {
    let mut config = match (&a.config, &a.preset) {
        (Some(path), _) => TrainingConfig::from_file(path)?,
        (None, Some(name)) => TrainingConfig::preset(name)?,
        (None, None) => TrainingConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        config.max_epochs = epochs;
    }
    if let Some(lambda) = a.lambda {
        config.lambda = lambda;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if a.grounding_free {
        config.grounding_free = true;
    }
    if a.grounded {
        config.grounding_free = false;
    }
    for kv in &a.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.apply(key.trim(), value.trim())?;
    }
    if a.no_rules {
        config.lambda = 0.0;
    }
    config.validate()?;
    Ok(config)
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let config = train_config(&a)?;
    let mut kg = KnowledgeGraph::new();
    let report = kg.load_triples(&a.train, Split::Train, DuplicatePolicy::Deduplicate)?;
    if report.duplicates > 0 {
        log::warn!("{}: {} duplicate triples dropped", a.train.display(), report.duplicates);
    }
    if let Some(valid) = &a.valid {
        let report = kg.load_triples(valid, Split::Valid, DuplicatePolicy::Deduplicate)?;
        if !report.unseen_entities.is_empty() {
            log::warn!("{}: {} entities not seen in training", valid.display(), report.unseen_entities.len());
        }
    }
    let rules = match (&a.rules, a.no_rules) {
        (Some(path), false) => {
            let loaded = load_rules(path, &kg, a.min_confidence)?;
            log::info!(
                "{} rules loaded, {} below confidence {}, {} with unknown relations",
                loaded.rules.len(),
                loaded.below_threshold,
                a.min_confidence,
                loaded.unknown_relation
            );
            loaded.rules
        }
        _ => Vec::new(),
    };

    let (params, trace) = train(&kg, &rules, &config)?;
    save_checkpoint(&params, &a.out)?;
    write_vocab(&vocab_path(&a.out), &kg)?;
    write_meta(&meta_path(&a.out), &config, &a.train)?;
    let tpath = trace_path(&a.out);
    let mut out = BufWriter::new(File::create(&tpath).map_err(|e| io_failure(&tpath, e))?);
    trace
        .write_tsv(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_failure(&tpath, e))?;

    let last = trace.epochs.last();
    println!("epochs\t{}", trace.epochs.len());
    println!("final_loss\t{}", last.map_or(f64::NAN, |e| e.total));
    if let (Some(epoch), Some(mrr)) = (trace.best_epoch, trace.best_validation_mrr) {
        println!("best_epoch\t{epoch}");
        println!("best_valid_mrr\t{mrr}");
    }
    Ok(())
}

fn load_model(ckpt: &Path) -> Result<(logicenn::ModelParameters, KnowledgeGraph), Failure> {
    let params = load_checkpoint(ckpt)?;
    let kg = read_vocab(&vocab_path(ckpt))?;
    if kg.num_entities() != params.num_entities || kg.num_relations() != params.num_relations {
        return Err(Failure::Data(format!(
            "vocabulary of {} does not match the checkpoint ({} entities, {} relations)",
            ckpt.display(),
            params.num_entities,
            params.num_relations
        )));
    }
    Ok((params, kg))
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult {
    let ties = match a.ties.as_str() {
        "average" => TieMode::Average,
        "pessimistic" => TieMode::Pessimistic,
        other => return Err(Failure::Usage(format!("--ties must be average or pessimistic, got `{other}`"))),
    };
    if a.hits.is_empty() || a.hits.contains(&0) {
        return Err(Failure::Usage("--hits needs positive cutoffs".into()));
    }
    let (mut params, mut kg) = load_model(&a.ckpt)?;
    let known_relations = kg.num_relations();
    for path in &a.filter_with {
        kg.load_triples(path, Split::Train, DuplicatePolicy::Deduplicate)?;
    }
    let report = kg.load_triples(&a.test, Split::Test, DuplicatePolicy::Deduplicate)?;
    if kg.num_relations() > known_relations {
        return Err(Failure::Data("test or filter files mention relations the model was not trained on".into()));
    }
    if kg.num_entities() > params.num_entities {
        log::warn!(
            "{} entities unseen in training get random unit embeddings ({} in the test file)",
            kg.num_entities() - params.num_entities,
            report.unseen_entities.len()
        );
        params.grow_entities(kg.num_entities(), &mut ChaCha8Rng::seed_from_u64(a.seed));
    }
    if kg.test().is_empty() {
        return Err(Failure::Data(format!("{} contains no triples", a.test.display())));
    }
    let ranking = evaluate(&params, &kg, kg.test(), &a.hits, ties)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    ranking.write_metrics(&mut out).map_err(|e| Failure::Data(e.to_string()))?;
    if let Some(path) = &a.ranks {
        let mut f = BufWriter::new(File::create(path).map_err(|e| io_failure(path, e))?);
        writeln!(f, "head\trel\ttail\tside\traw\tfiltered")
            .and_then(|_| ranking.write_ranks(&mut f, &kg))
            .and_then(|_| f.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn ground_cmd(a: GroundArgs) -> CliResult {
    let mut kg = KnowledgeGraph::new();
    kg.load_triples(&a.train, Split::Train, DuplicatePolicy::Deduplicate)?;
    let loaded = load_rules(&a.rules, &kg, a.min_confidence)?;
    let mut f = BufWriter::new(File::create(&a.out).map_err(|e| io_failure(&a.out, e))?);
    let name = |t: &logicenn::Triple| {
        format!(
            "{},{},{}",
            kg.entity_name(t.head),
            kg.relation_name(t.relation),
            kg.entity_name(t.tail)
        )
    };
    let mut total = 0;
    let mut write = || -> io::Result<()> {
        writeln!(f, "rule\tkind\tpremises\tconclusion")?;
        for (i, rule) in loaded.rules.iter().enumerate() {
            let groundings = ground_rule(rule, &kg, !a.grounded).map_err(|e| io::Error::other(e.to_string()))?;
            for g in &groundings {
                let premises: Vec<String> = g.premises.iter().map(name).collect();
                let premises = if premises.is_empty() { "-".to_string() } else { premises.join(";") };
                writeln!(f, "{i}\t{}\t{premises}\t{}", rule.kind(), name(&g.conclusion))?;
            }
            total += groundings.len();
        }
        f.flush()
    };
    write().map_err(|e| io_failure(&a.out, e))?;
    println!("{} rules, {total} groundings", loaded.rules.len());
    Ok(())
}

fn diagnose_cmd(a: DiagnoseArgs) -> CliResult {
    let (params, mut kg) = load_model(&a.ckpt)?;
    let (config, recorded_train) = read_meta(&meta_path(&a.ckpt))?;
    let train_path = a
        .train
        .clone()
        .or(recorded_train)
        .ok_or_else(|| Failure::Usage("no --train given and none recorded with the checkpoint".into()))?;
    kg.load_triples(&train_path, Split::Train, DuplicatePolicy::Deduplicate)?;
    if kg.num_entities() != params.num_entities || kg.num_relations() != params.num_relations {
        return Err(Failure::Data(format!(
            "{} mentions entities or relations the model does not know",
            train_path.display()
        )));
    }
    let rules = load_rules(&a.rules, &kg, a.min_confidence)?.rules;
    let report = rule_satisfaction_report(&params, &kg, &rules, &config.slack, a.sample_cap.map(|c| (c, a.seed)))?;
    let lambda_term = config.lambda * report.kinds.iter().map(|k| k.with_slack).sum::<f64>();
    let mut f = BufWriter::new(File::create(&a.out).map_err(|e| io_failure(&a.out, e))?);
    let mut write = || -> io::Result<()> {
        report.write_tsv(&mut f)?;
        writeln!(f)?;
        writeln!(f, "lambda\t{}", config.lambda)?;
        writeln!(f, "lambda_term\t{lambda_term}")?;
        f.flush()
    };
    write().map_err(|e| io_failure(&a.out, e))?;
    println!("raw_penalty\t{}", report.total_raw());
    println!("lambda_term\t{lambda_term}");
    for kind in RuleKind::ALL {
        let k = report.kind(kind);
        if k.rules > 0 {
            println!("{kind}\t{}\t{}", k.groundings, k.raw);
        }
    }
    Ok(())
}
