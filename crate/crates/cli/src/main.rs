//! `gpar`: mine graph pattern rules, predict links and evaluate them.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpar_core::eval::KnownAnswers;
use gpar_core::miner::{format_value, mine_resumable};
use gpar_core::{
    evaluate, load_dataset, load_rules, rank_entities, save_rules, select_l, DatasetSplit, Direction,
    EntityId, Error, EvalOptions, KnowledgeGraph, Measure, MineConfig, PredictionRanking, RelationId,
    RuleSet, TiePolicy,
};

#[derive(Parser, Debug)]
#[command(name = "gpar", version, about = "Graph pattern rule mining and link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mine the top-K rules per relation and direction from a training file.
    Mine(MineArgs),
    /// Filtered MRR / HITS@n of a rule file on a test split.
    Evaluate(EvaluateArgs),
    /// Rank answers for one query, with rule explanations.
    Predict(PredictArgs),
    /// Show the rules that place one entity for a query.
    Explain(ExplainArgs),
    /// Pick the maximum pattern length by validation MRR.
    #[command(name = "select-l")]
    SelectL(SelectLArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct MiningFlags {
    /// conf, dmap or fdmap
    #[arg(long, default_value = "fdmap")]
    measure: Measure,
    /// Number of rules kept per relation and direction.
    #[arg(long = "K", default_value_t = 1000)]
    k: usize,
    /// Positive pairs sampled per relation for candidate generation.
    #[arg(long = "pair-cap")]
    pair_cap: Option<usize>,
    /// Seed for pair sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct MineArgs {
    #[arg(long)]
    train: PathBuf,
    /// Maximum pattern length.
    #[arg(long = "L", default_value_t = 2)]
    l: usize,
    #[command(flatten)]
    mining: MiningFlags,
    /// Rule file to write.
    #[arg(long, default_value = "rules.tsv")]
    out: PathBuf,
    /// Progress file; an interrupted run restarts from it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long = "tie-policy", default_value = "average")]
    tie_policy: TiePolicy,
    /// Report unfiltered ranks instead.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Write the metric report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-relation breakdown (TSV) here.
    #[arg(long = "per-relation")]
    per_relation: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QueryFlags {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Drop other known answers of the query (from all given splits).
    #[arg(long)]
    filtered: bool,
    #[arg(long = "tie-policy", default_value = "average")]
    tie_policy: TiePolicy,
    /// Query such as "A located_in ?" or "? located_in UK".
    query: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    query: QueryFlags,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    query: QueryFlags,
    /// Candidate answer to explain.
    entity: String,
}

#[derive(Args, Debug)]
struct SelectLArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    mining: MiningFlags,
    /// Candidate maximum lengths.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    candidates: Vec<usize>,
    #[arg(long = "tie-policy", default_value = "average")]
    tie_policy: TiePolicy,
    /// Write the winning rule set here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
}

/// Failure with its exit code: 1 for usage/configuration, 2 for data.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_data_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Mine(a) => cmd_mine(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
        Command::SelectL(a) => cmd_select_l(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

fn mine_config(flags: &MiningFlags, max_len: usize) -> Result<MineConfig, Failure> {
    let config = MineConfig {
        measure: flags.measure,
        max_len,
        top_k: flags.k,
        pair_sample_cap: flags.pair_cap,
        seed: flags.seed,
        threads: flags.threads,
    };
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn cmd_mine(a: MineArgs) -> Result<(), Failure> {
    let config = mine_config(&a.mining, a.l)?;
    let data = load_dataset(&a.train, None, None)?;
    let graph = data.train_graph();
    log::info!(
        "{} entities, {} relations, {} triples",
        graph.num_entities(),
        graph.num_relations(),
        graph.num_triples()
    );
    let rules = mine_resumable(&graph, &config, a.checkpoint.as_deref())?;
    save_rules(&rules, graph.vocab(), &a.out)?;
    log::info!("wrote {} rules to {}", rules.len(), a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.train, a.valid.as_deref(), Some(&a.test))?;
    let rules = load_rules(&a.rules, &data.vocab)?;
    let options = EvalOptions {
        tie_policy: a.tie_policy,
        filtered: !a.raw,
        threads: a.threads,
    };
    let report = evaluate(&data, &rules, &options)?;
    let mut text = report.to_text();
    text.push_str(&format!("rules\t{}\n", a.rules.display()));
    text.push_str(&format!("train\t{}\n", a.train.display()));
    if let Some(v) = &a.valid {
        text.push_str(&format!("valid\t{}\n", v.display()));
    }
    text.push_str(&format!("test\t{}\n", a.test.display()));
    print!("{text}");
    eprintln!("{report}");
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    if let Some(path) = &a.per_relation {
        write_file(path, &report.per_relation_tsv(&data.train_graph()))?;
    }
    Ok(())
}

struct ParsedQuery {
    anchor: EntityId,
    relation: RelationId,
    direction: Direction,
}

fn parse_query(text: &str, data: &DatasetSplit) -> Result<ParsedQuery, Failure> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let [h, r, t] = parts[..] else {
        return Err(usage(format!("query `{text}` must have three parts, e.g. `A located_in ?`")));
    };
    let relation = data.vocab.resolve_relation(r)?;
    match (h, t) {
        (h, "?") if h != "?" => Ok(ParsedQuery {
            anchor: data.vocab.resolve_entity(h)?,
            relation,
            direction: Direction::Tail,
        }),
        ("?", t) if t != "?" => Ok(ParsedQuery {
            anchor: data.vocab.resolve_entity(t)?,
            relation,
            direction: Direction::Head,
        }),
        _ => Err(usage(format!("query `{text}` needs exactly one `?`"))),
    }
}

struct Answering {
    data: DatasetSplit,
    graph: KnowledgeGraph,
    rules: RuleSet,
    query: ParsedQuery,
    ranking: PredictionRanking,
}

fn answer(flags: &QueryFlags) -> Result<Answering, Failure> {
    let data = load_dataset(&flags.train, flags.valid.as_deref(), flags.test.as_deref())?;
    let rules = load_rules(&flags.rules, &data.vocab)?;
    let query = parse_query(&flags.query, &data)?;
    let graph = data.train_graph();
    let filter: HashSet<EntityId> = if flags.filtered {
        let known = KnownAnswers::new(data.all_triples());
        // no target to exempt; the anchor itself is never an answer key
        known.filter_for(query.anchor, query.relation, query.direction, query.anchor)
    } else {
        HashSet::new()
    };
    let list = rules.rules(query.relation, query.direction);
    let ranking = rank_entities(&graph, list, query.anchor, query.direction, &filter);
    Ok(Answering {
        data,
        graph,
        rules,
        query,
        ranking,
    })
}

fn explanation_field(ranking: &PredictionRanking, e: EntityId) -> String {
    ranking
        .explain(e)
        .iter()
        .map(|(i, c)| format!("{}:{c}", i + 1))
        .collect::<Vec<_>>()
        .join(";")
}

fn cmd_predict(a: PredictArgs) -> Result<(), Failure> {
    let ans = answer(&a.query)?;
    let vocab = &ans.data.vocab;
    let mut out = format!(
        "#gpar-predict v1 rules={} tie_policy={} filtered={} top={}\n",
        a.query.rules.display(),
        a.query.tie_policy,
        a.query.filtered,
        a.top
    );
    for e in ans.ranking.ordered().take(a.top) {
        let rank = ans.ranking.rank_of(e, a.query.tie_policy)?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            a.query.query,
            rank,
            vocab.entity_name(e),
            explanation_field(&ans.ranking, e)
        )
        .expect("write to string");
    }
    print!("{out}");
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> Result<(), Failure> {
    let ans = answer(&a.query)?;
    let vocab = &ans.data.vocab;
    let entity = vocab.resolve_entity(&a.entity)?;
    let rank = ans
        .ranking
        .rank_of(entity, a.query.tie_policy)
        .map_err(|_| usage(format!("`{}` is filtered out of this query", a.entity)))?;
    println!("{}\t{}\trank {}", a.query.query, a.entity, rank);
    let contributions = ans.ranking.explain(entity);
    if contributions.is_empty() {
        println!("no supporting rules");
        return Ok(());
    }
    let list = ans.rules.rules(ans.query.relation, ans.query.direction);
    for &(i, count) in contributions {
        let rule = &list[i];
        println!(
            "rule {}\tcount {}\t{} {}\t{}",
            i + 1,
            count,
            ans.rules.header.measure,
            format_value(rule.value),
            rule.pattern.to_text(ans.graph.vocab())
        );
    }
    Ok(())
}

fn cmd_select_l(a: SelectLArgs) -> Result<(), Failure> {
    let max = a.candidates.iter().copied().max().unwrap_or(0);
    let config = mine_config(&a.mining, max.max(1))?;
    if a.candidates.contains(&0) {
        return Err(usage("candidate lengths must be at least 1"));
    }
    let data = load_dataset(&a.train, Some(&a.valid), a.test.as_deref())?;
    let options = EvalOptions {
        tie_policy: a.tie_policy,
        filtered: true,
        threads: a.mining.threads,
    };
    let sel = select_l(&data, &config, &a.candidates, &options)?;
    for (l, mrr) in &sel.scores {
        println!("L={l}\tvalid_mrr\t{}", format_value(*mrr));
    }
    println!("best_L\t{}", sel.best);
    if let Some(out) = &a.out {
        save_rules(&sel.rules, &data.vocab, out)?;
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.train, a.valid.as_deref(), a.test.as_deref())?;
    println!("entities\t{}", data.vocab.num_entities());
    println!("relations\t{}", data.vocab.num_relations());
    for (name, c) in ["train", "valid", "test"].iter().zip(data.counts) {
        println!("{name}\t{}", c.unique);
        if c.raw != c.unique {
            println!("{name}_raw\t{}", c.raw);
        }
    }
    Ok(())
}
