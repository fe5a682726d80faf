//! Filtered link-prediction evaluation (MRR, HITS@n) and selection of the
//! maximum pattern length on validation data.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{DatasetSplit, Direction, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::miner::{format_value, mine, MineConfig, RuleSet, RuleSetHeader};
use crate::pattern::Matcher;
use crate::predict::{rank_target, TiePolicy};

pub const REPORT_VERSION: &str = "#gpar-eval v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub tie_policy: TiePolicy,
    /// Remove other known answers from each ranking. Off gives raw ranks.
    pub filtered: bool,
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tie_policy: TiePolicy::Average,
            filtered: true,
            threads: 0,
        }
    }
}

/// Known answers of `(anchor, relation, direction)` over a set of triples.
#[derive(Debug, Default)]
pub struct KnownAnswers {
    map: HashMap<(EntityId, RelationId, Direction), HashSet<EntityId>>,
}

impl KnownAnswers {
    pub fn new<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut map: HashMap<_, HashSet<EntityId>> = HashMap::new();
        for t in triples {
            map.entry((t.head, t.relation, Direction::Tail))
                .or_default()
                .insert(t.tail);
            map.entry((t.tail, t.relation, Direction::Head))
                .or_default()
                .insert(t.head);
        }
        KnownAnswers { map }
    }

    /// Entities to drop from the ranking of a query, keeping the target.
    pub fn filter_for(
        &self,
        anchor: EntityId,
        relation: RelationId,
        direction: Direction,
        target: EntityId,
    ) -> HashSet<EntityId> {
        let mut set = self
            .map
            .get(&(anchor, relation, direction))
            .cloned()
            .unwrap_or_default();
        set.remove(&target);
        set
    }
}

/// Running MRR / HITS@n accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub queries: usize,
    reciprocal_sum: f64,
    hits: [usize; 3],
}

const HITS_AT: [f64; 3] = [1.0, 3.0, 10.0];

impl Metrics {
    pub fn push(&mut self, rank: f64) {
        self.queries += 1;
        self.reciprocal_sum += 1.0 / rank;
        for (h, n) in self.hits.iter_mut().zip(HITS_AT) {
            if rank <= n {
                *h += 1;
            }
        }
    }

    fn ratio(&self, x: f64) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            x / self.queries as f64
        }
    }

    pub fn mrr(&self) -> f64 {
        self.ratio(self.reciprocal_sum)
    }

    pub fn hits1(&self) -> f64 {
        self.ratio(self.hits[0] as f64)
    }

    pub fn hits3(&self) -> f64 {
        self.ratio(self.hits[1] as f64)
    }

    pub fn hits10(&self) -> f64 {
        self.ratio(self.hits[2] as f64)
    }
}

/// One evaluated query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedQuery {
    pub triple: Triple,
    pub direction: Direction,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: Metrics,
    pub per_relation: BTreeMap<(RelationId, Direction), Metrics>,
    pub options: EvalOptions,
    pub rules: RuleSetHeader,
    pub ranks: Vec<RankedQuery>,
}

impl EvalReport {
    /// `metric<TAB>value` lines.
    pub fn to_text(&self) -> String {
        let cap = self
            .rules
            .pair_sample_cap
            .map_or_else(|| "none".to_owned(), |c| c.to_string());
        let rows: [(&str, String); 13] = [
            ("measure", self.rules.measure.to_string()),
            ("L", self.rules.max_len.to_string()),
            ("K", self.rules.top_k.to_string()),
            ("pair_cap", cap),
            ("seed", self.rules.seed.to_string()),
            ("tie_policy", self.options.tie_policy.to_string()),
            ("filtered", self.options.filtered.to_string()),
            ("queries", self.overall.queries.to_string()),
            ("mrr", format_value(self.overall.mrr())),
            ("hits@1", format_value(self.overall.hits1())),
            ("hits@3", format_value(self.overall.hits3())),
            ("hits@10", format_value(self.overall.hits10())),
            ("relations", self.per_relation.len().to_string()),
        ];
        let mut out = format!("{REPORT_VERSION}\n");
        for (k, v) in rows {
            out.push_str(k);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Per (relation, direction) breakdown as TSV with a header row.
    pub fn per_relation_tsv(&self, graph: &KnowledgeGraph) -> String {
        let mut out = String::from("relation\tdirection\tqueries\tmrr\thits@1\thits@3\thits@10\n");
        for ((r, d), m) in &self.per_relation {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                graph.vocab().relation_name(*r),
                d,
                m.queries,
                format_value(m.mrr()),
                format_value(m.hits1()),
                format_value(m.hits3()),
                format_value(m.hits10()),
            ));
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.overall;
        writeln!(
            f,
            "{} {} queries (measure {}, L={}, K={}, ties {})",
            if self.options.filtered { "filtered" } else { "raw" },
            m.queries,
            self.rules.measure,
            self.rules.max_len,
            self.rules.top_k,
            self.options.tie_policy,
        )?;
        writeln!(f, "MRR      {:.4}", m.mrr())?;
        writeln!(f, "HITS@1   {:.4}", m.hits1())?;
        writeln!(f, "HITS@3   {:.4}", m.hits3())?;
        write!(f, "HITS@10  {:.4}", m.hits10())
    }
}

/// Ranks both queries of every target triple against `graph` using `rules`.
/// `known` supplies the triples whose other answers are filtered out.
pub fn evaluate_triples(
    graph: &KnowledgeGraph,
    rules: &RuleSet,
    targets: &[Triple],
    known: &KnownAnswers,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let empty = HashSet::new();
    let ranks: Vec<[RankedQuery; 2]> = pool.install(|| {
        targets
            .par_iter()
            .map_init(Matcher::new, |matcher, &triple| {
                let rank_one = |matcher: &mut Matcher, direction: Direction| -> Result<RankedQuery> {
                    let (anchor, target) = match direction {
                        Direction::Tail => (triple.head, triple.tail),
                        Direction::Head => (triple.tail, triple.head),
                    };
                    let filter = if options.filtered {
                        known.filter_for(anchor, triple.relation, direction, target)
                    } else {
                        empty.clone()
                    };
                    let list = rules.rules(triple.relation, direction);
                    let (better, size) =
                        rank_target(graph, matcher, list, anchor, direction, target, &filter)?;
                    Ok(RankedQuery {
                        triple,
                        direction,
                        rank: options.tie_policy.rank(better, size),
                    })
                };
                Ok([
                    rank_one(matcher, Direction::Tail)?,
                    rank_one(matcher, Direction::Head)?,
                ])
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut overall = Metrics::default();
    let mut per_relation: BTreeMap<(RelationId, Direction), Metrics> = BTreeMap::new();
    let ranks: Vec<RankedQuery> = ranks.into_iter().flatten().collect();
    for q in &ranks {
        overall.push(q.rank);
        per_relation
            .entry((q.triple.relation, q.direction))
            .or_default()
            .push(q.rank);
    }
    Ok(EvalReport {
        overall,
        per_relation,
        options: *options,
        rules: rules.header,
        ranks,
    })
}

/// Evaluates on the test split, filtering against train, valid and test.
pub fn evaluate(splits: &DatasetSplit, rules: &RuleSet, options: &EvalOptions) -> Result<EvalReport> {
    if splits.test.is_empty() {
        return Err(Error::EmptySplit("test".into()));
    }
    let graph = splits.train_graph();
    let known = KnownAnswers::new(splits.all_triples());
    evaluate_triples(&graph, rules, &splits.test, &known, options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LSelection {
    pub best: usize,
    /// Validation MRR per candidate length, in ascending length order.
    pub scores: Vec<(usize, f64)>,
    pub rules: RuleSet,
}

/// Mines with every candidate maximum length, scores each rule set by
/// validation MRR (filtered against train and valid) and keeps the best;
/// ties go to the shorter length.
pub fn select_l(
    splits: &DatasetSplit,
    config: &MineConfig,
    candidates: &[usize],
    options: &EvalOptions,
) -> Result<LSelection> {
    if splits.valid.is_empty() {
        return Err(Error::EmptySplit("valid".into()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate lengths".into()));
    }
    let mut lengths = candidates.to_vec();
    lengths.sort_unstable();
    lengths.dedup();
    let graph = splits.train_graph();
    let known = KnownAnswers::new(splits.train.iter().chain(&splits.valid));
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64, RuleSet)> = None;
    for l in lengths {
        let cfg = MineConfig { max_len: l, ..*config };
        let rules = mine(&graph, &cfg)?;
        let report = evaluate_triples(&graph, &rules, &splits.valid, &known, options)?;
        let mrr = report.overall.mrr();
        log::info!("L={l}: validation MRR {mrr:.4}");
        scores.push((l, mrr));
        if best.as_ref().is_none_or(|(_, b, _)| mrr > *b) {
            best = Some((l, mrr, rules));
        }
    }
    let (best, _, rules) = best.expect("at least one candidate");
    Ok(LSelection { best, scores, rules })
}
