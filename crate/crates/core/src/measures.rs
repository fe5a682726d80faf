//! Rule quality measures.
//!
//! `conf` treats a rule as a binary classifier: every entity the pattern
//! reaches from a query's anchor counts as a prediction. `dmap` and `fdmap`
//! treat the rule as a ranker over all entities by match count. Entities with
//! equal scores form a tie block occupying ranks `a+1 ..= a+b`, and each
//! member holds mass `1/b` on every rank of its block. Precision at `k` and
//! average precision are generalized over that mass.
//!
//! For a block with `c` relevant members, `r` relevant entities above it and
//! `a` entities above it, the relevant mass up to rank `k` inside the block is
//! `r + (k - a) c / b`, so the block contributes
//!
//! ```text
//! (c / b) * [ (r - a c / b) * (H(a + b) - H(a)) + c ]
//! ```
//!
//! to the sum over relevant entities, where `H` is the harmonic number.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, QuerySet, RelationId};
use crate::pattern::{Matcher, PathPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Conf,
    Dmap,
    Fdmap,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Conf => "conf",
            Measure::Dmap => "dmap",
            Measure::Fdmap => "fdmap",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conf" => Ok(Measure::Conf),
            "dmap" => Ok(Measure::Dmap),
            "fdmap" => Ok(Measure::Fdmap),
            other => Err(format!("unknown measure `{other}` (expected conf, dmap or fdmap)")),
        }
    }
}

/// A measure applied to one query direction, e.g. `dmap_tail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasureKind {
    pub measure: Measure,
    pub direction: Direction,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.measure, self.direction)
    }
}

/// Prefix sums of `1/k`.
#[derive(Debug, Clone)]
pub struct Harmonic {
    prefix: Vec<f64>,
}

impl Harmonic {
    pub fn new(n: usize) -> Self {
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for k in 1..=n {
            acc += 1.0 / k as f64;
            prefix.push(acc);
        }
        Harmonic { prefix }
    }

    /// `sum_{k=a+1}^{a+b} 1/k`
    #[inline]
    pub fn segment(&self, above: usize, size: usize) -> f64 {
        self.prefix[above + size] - self.prefix[above]
    }
}

/// Contribution of one tie block to the relevance-weighted precision sum.
#[inline]
fn block_term(above: usize, size: usize, relevant_in: usize, relevant_above: usize, h: f64) -> f64 {
    let b = size as f64;
    let c = relevant_in as f64;
    (c / b) * ((relevant_above as f64 - above as f64 * c / b) * h + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TieBlock {
    pub score: u64,
    /// Number of entities strictly above this block.
    pub above: usize,
    /// Members in ascending id order.
    pub members: Vec<EntityId>,
}

impl TieBlock {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// First rank (1-based) covered by the block.
    pub fn first_rank(&self) -> usize {
        self.above + 1
    }
}

/// Sparse form of a doubly stochastic rank-by-entity matrix: blocks of
/// equally scored entities in strictly decreasing score order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedRanking {
    blocks: Vec<TieBlock>,
    len: usize,
}

impl DistributedRanking {
    /// Ranks entities `0..n`; entities missing from `scores` score 0.
    pub fn from_scores(scores: &[(EntityId, u64)], n: usize) -> Self {
        let mut full = vec![0u64; n];
        for &(e, s) in scores {
            full[e.index()] = s;
        }
        Self::from_universe((0..n as u32).map(EntityId).map(|e| (e, full[e.index()])))
    }

    /// Ranks exactly the given `(entity, score)` pairs.
    pub fn from_universe(entries: impl IntoIterator<Item = (EntityId, u64)>) -> Self {
        let mut entries: Vec<(EntityId, u64)> = entries.into_iter().collect();
        entries.sort_unstable_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let len = entries.len();
        let mut blocks: Vec<TieBlock> = Vec::new();
        let mut above = 0;
        for (e, s) in entries {
            match blocks.last_mut() {
                Some(b) if b.score == s => b.members.push(e),
                _ => {
                    if let Some(b) = blocks.last() {
                        above += b.size();
                    }
                    blocks.push(TieBlock {
                        score: s,
                        above,
                        members: vec![e],
                    });
                }
            }
        }
        DistributedRanking { blocks, len }
    }

    pub fn blocks(&self) -> &[TieBlock] {
        &self.blocks
    }

    /// Number of ranked entities.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Mass that `entity` places on `rank` (1-based).
    pub fn mass(&self, rank: usize, entity: EntityId) -> f64 {
        for b in &self.blocks {
            if b.members.binary_search(&entity).is_ok() {
                let inside = rank > b.above && rank <= b.above + b.size();
                return if inside { 1.0 / b.size() as f64 } else { 0.0 };
            }
        }
        0.0
    }

    /// Distributed average precision for the given relevant entities.
    pub fn average_precision(&self, relevant: &[EntityId]) -> Result<f64> {
        if relevant.is_empty() {
            return Err(Error::EmptyRelevance);
        }
        let mut relevant: Vec<EntityId> = relevant.to_vec();
        relevant.sort_unstable();
        relevant.dedup();
        let mut relevant_above = 0;
        let mut total = 0.0;
        for b in &self.blocks {
            let c = b
                .members
                .iter()
                .filter(|e| relevant.binary_search(e).is_ok())
                .count();
            if c > 0 {
                let h: f64 = (b.above + 1..=b.above + b.size()).map(|k| 1.0 / k as f64).sum();
                total += block_term(b.above, b.size(), c, relevant_above, h);
            }
            relevant_above += c;
        }
        Ok(total / relevant.len() as f64)
    }
}

/// Score of `entity` in a sorted frontier.
#[inline]
pub(crate) fn score_in(frontier: &[(EntityId, u64)], entity: EntityId) -> u64 {
    frontier
        .binary_search_by_key(&entity, |(e, _)| *e)
        .map(|i| frontier[i].1)
        .unwrap_or(0)
}

/// Scores of a frontier sorted descending, plus universe size, for counting
/// entities above/at a score.
struct ScoreProfile<'a> {
    desc: &'a [u64],
    universe: usize,
}

impl ScoreProfile<'_> {
    #[inline]
    fn above(&self, s: u64) -> usize {
        if s == 0 {
            self.desc.len()
        } else {
            self.desc.partition_point(|&x| x > s)
        }
    }

    #[inline]
    fn at(&self, s: u64) -> usize {
        if s == 0 {
            self.universe - self.desc.len()
        } else {
            self.desc.partition_point(|&x| x >= s) - self.above(s)
        }
    }
}

/// Per-query quantities that every measure is built from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QueryScore {
    /// Answers with a nonzero score.
    pub hits: u64,
    /// Entities with a nonzero score.
    pub candidates: u64,
    pub ap: f64,
    pub filtered_ap: f64,
}

/// Computes all per-query measures from a frontier (sorted by entity, all
/// scores nonzero) and the query's sorted answer set over `n` entities.
pub fn score_query(
    frontier: &[(EntityId, u64)],
    answers: &[EntityId],
    n: usize,
    harmonic: &Harmonic,
) -> QueryScore {
    debug_assert!(!answers.is_empty());
    let mut desc: Vec<u64> = frontier.iter().map(|&(_, s)| s).collect();
    desc.sort_unstable_by(|a, b| b.cmp(a));
    let profile = ScoreProfile {
        desc: &desc,
        universe: n,
    };
    let mut answer_scores: Vec<u64> = answers.iter().map(|&e| score_in(frontier, e)).collect();
    answer_scores.sort_unstable_by(|a, b| b.cmp(a));
    let hits = answer_scores.iter().filter(|&&s| s > 0).count() as u64;

    // unfiltered: one pass over the distinct answer scores
    let mut total = 0.0;
    let mut i = 0;
    while i < answer_scores.len() {
        let s = answer_scores[i];
        let j = i + answer_scores[i..].partition_point(|&x| x == s);
        let above = profile.above(s);
        let size = profile.at(s);
        total += block_term(above, size, j - i, i, harmonic.segment(above, size));
        i = j;
    }
    let ap = total / answers.len() as f64;

    // filtered: each answer alone, the other answers removed
    let mut filtered_total = 0.0;
    for &s in &answer_scores {
        let others_above = answer_scores.partition_point(|&x| x > s);
        let others_at = answer_scores.partition_point(|&x| x >= s) - others_above - 1;
        let above = profile.above(s) - others_above;
        let size = profile.at(s) - others_at;
        filtered_total += block_term(above, size, 1, 0, harmonic.segment(above, size));
    }
    let filtered_ap = filtered_total / answers.len() as f64;

    QueryScore {
        hits,
        candidates: frontier.len() as u64,
        ap,
        filtered_ap,
    }
}

/// Aggregate of [`QueryScore`] over a relation's training queries.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PatternStats {
    pub hits: u64,
    pub candidates: u64,
    pub ap_sum: f64,
    pub filtered_ap_sum: f64,
    pub queries: usize,
}

impl PatternStats {
    pub fn add(&mut self, q: &QueryScore) {
        self.hits += q.hits;
        self.candidates += q.candidates;
        self.ap_sum += q.ap;
        self.filtered_ap_sum += q.filtered_ap;
        self.queries += 1;
    }

    /// Positive training pairs matched by the pattern.
    pub fn support(&self) -> u64 {
        self.hits
    }

    /// `conf` as an exact fraction (`0/0` means the pattern matched nothing).
    pub fn conf_ratio(&self) -> (u64, u64) {
        (self.hits, self.candidates)
    }

    pub fn value(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Conf => {
                if self.candidates == 0 {
                    0.0
                } else {
                    self.hits as f64 / self.candidates as f64
                }
            }
            Measure::Dmap => mean(self.ap_sum, self.queries),
            Measure::Fdmap => mean(self.filtered_ap_sum, self.queries),
        }
    }
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores a pattern against every query of a query set, in query order.
pub fn pattern_stats(
    graph: &KnowledgeGraph,
    matcher: &mut Matcher,
    pattern: &PathPattern,
    queries: &QuerySet,
    harmonic: &Harmonic,
) -> PatternStats {
    let n = graph.num_entities();
    let mut stats = PatternStats::default();
    for q in &queries.queries {
        let frontier = matcher.frontier(graph, pattern, q.anchor, queries.direction);
        stats.add(&score_query(&frontier, &q.answers, n, harmonic));
    }
    stats
}

fn stats_for(graph: &KnowledgeGraph, pattern: &PathPattern, relation: RelationId, direction: Direction) -> PatternStats {
    let queries = graph.queries(relation, direction);
    let harmonic = Harmonic::new(graph.num_entities());
    pattern_stats(graph, &mut Matcher::new(), pattern, &queries, &harmonic)
}

/// Standard confidence of `pattern => relation` for one direction.
pub fn conf(graph: &KnowledgeGraph, pattern: &PathPattern, relation: RelationId, direction: Direction) -> f64 {
    stats_for(graph, pattern, relation, direction).value(Measure::Conf)
}

/// Distributed mean average precision.
pub fn dmap(graph: &KnowledgeGraph, pattern: &PathPattern, relation: RelationId, direction: Direction) -> f64 {
    stats_for(graph, pattern, relation, direction).value(Measure::Dmap)
}

/// Filtered distributed mean average precision: per query, the mean over its
/// answers of the dAP of that answer alone once the other answers are
/// removed from the ranking.
pub fn fdmap(graph: &KnowledgeGraph, pattern: &PathPattern, relation: RelationId, direction: Direction) -> f64 {
    stats_for(graph, pattern, relation, direction).value(Measure::Fdmap)
}

/// Distributed ranking of all entities by a frontier.
pub fn distributed_ranking(frontier: &[(EntityId, u64)], n: usize) -> DistributedRanking {
    DistributedRanking::from_scores(frontier, n)
}

/// Lookup from entity to the index of its block.
pub fn block_index(ranking: &DistributedRanking) -> HashMap<EntityId, usize> {
    ranking
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.members.iter().map(move |&e| (e, i)))
        .collect()
}
