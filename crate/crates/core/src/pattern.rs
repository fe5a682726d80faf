//! Closed path patterns and injective matching.
//!
//! A pattern is a chain of steps from the designated variable `x` to the
//! designated variable `y` through implicit intermediate variables
//! `z1 .. z(len-1)`. The general notion of a graph pattern admits arbitrary
//! shapes; only branch-free paths between `x` and `y` are represented here.
//!
//! A matching function maps every variable to a distinct entity such that
//! every step is realized by a triple in the graph. The score of a pattern on
//! a pair `(h, t)` is the number of such functions with `x -> h`, `y -> t`.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, Orientation, RelationId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub relation: RelationId,
    pub orientation: Orientation,
}

impl Step {
    pub fn forward(relation: RelationId) -> Self {
        Step {
            relation,
            orientation: Orientation::Forward,
        }
    }

    pub fn backward(relation: RelationId) -> Self {
        Step {
            relation,
            orientation: Orientation::Backward,
        }
    }

    fn flip(self) -> Self {
        Step {
            relation: self.relation,
            orientation: self.orientation.flip(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathPattern {
    steps: Vec<Step>,
}

impl PathPattern {
    /// # Panics
    /// If `steps` is empty.
    pub fn new(steps: Vec<Step>) -> Self {
        assert!(!steps.is_empty(), "a path pattern needs at least one step");
        PathPattern { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same pattern read from `y` to `x`.
    pub fn reverse(&self) -> Self {
        PathPattern {
            steps: self.steps.iter().rev().map(|s| s.flip()).collect(),
        }
    }

    /// True if this pattern is the single edge `(x, relation, y)`.
    pub fn is_consequent_of(&self, relation: RelationId) -> bool {
        self.steps == [Step::forward(relation)]
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> PatternDisplay<'a> {
        PatternDisplay {
            pattern: self,
            vocab,
        }
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        self.display(vocab).to_string()
    }

    /// Parses the textual form produced by [`PathPattern::display`], e.g.
    /// `x <-[member_of]- z1 -[nationality]-> y`.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        Parser { text, pos: 0 }.pattern(vocab)
    }
}

pub struct PatternDisplay<'a> {
    pattern: &'a PathPattern,
    vocab: &'a Vocabulary,
}

impl fmt::Display for PatternDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("x")?;
        let n = self.pattern.steps.len();
        for (i, step) in self.pattern.steps.iter().enumerate() {
            let rel = self.vocab.relation_name(step.relation);
            match step.orientation {
                Orientation::Forward => write!(f, " -[{rel}]-> ")?,
                Orientation::Backward => write!(f, " <-[{rel}]- ")?,
            }
            if i + 1 == n {
                f.write_str("y")?;
            } else {
                write!(f, "z{}", i + 1)?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::PatternParse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            self.err(format!("expected `{token}`"))
        }
    }

    fn pattern(mut self, vocab: &Vocabulary) -> Result<PathPattern> {
        self.expect("x")?;
        let mut steps = Vec::new();
        loop {
            self.expect(" ")?;
            let orientation = if self.rest().starts_with("-[") {
                self.pos += 2;
                Orientation::Forward
            } else if self.rest().starts_with("<-[") {
                self.pos += 3;
                Orientation::Backward
            } else {
                return self.err("expected `-[` or `<-[`");
            };
            let close = match orientation {
                Orientation::Forward => "]-> ",
                Orientation::Backward => "]- ",
            };
            let Some(len) = self.rest().find(close) else {
                return self.err(format!("unterminated relation, expected `{}`", close.trim_end()));
            };
            let name = &self.rest()[..len];
            if name.is_empty() {
                return self.err("empty relation name");
            }
            let relation = vocab.resolve_relation(name)?;
            steps.push(Step {
                relation,
                orientation,
            });
            self.pos += len + close.len();
            if self.rest() == "y" {
                return Ok(PathPattern::new(steps));
            }
            let var = format!("z{}", steps.len());
            self.expect(&var)?;
        }
    }
}

/// Reusable DFS state for counting matches. One per worker thread.
#[derive(Debug, Default)]
pub struct Matcher {
    counts: Vec<u64>,
    touched: Vec<EntityId>,
    path: Vec<EntityId>,
}

/// Nonzero scores of one pattern from one anchor, sorted by entity.
pub type Frontier = Vec<(EntityId, u64)>;

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scores of every entity reachable from `anchor` through the pattern.
    /// For `Direction::Tail` the anchor plays `x` and the returned entities
    /// are candidate `y`s; for `Direction::Head` the roles swap.
    pub fn frontier(
        &mut self,
        graph: &KnowledgeGraph,
        pattern: &PathPattern,
        anchor: EntityId,
        direction: Direction,
    ) -> Frontier {
        if self.counts.len() < graph.num_entities() {
            self.counts.resize(graph.num_entities(), 0);
        }
        self.path.clear();
        self.path.push(anchor);
        let steps: Cow<'_, [Step]> = match direction {
            Direction::Tail => Cow::Borrowed(&pattern.steps),
            Direction::Head => Cow::Owned(pattern.reverse().steps),
        };
        self.descend(graph, &steps);
        let mut out: Frontier = self
            .touched
            .drain(..)
            .map(|e| {
                let c = std::mem::take(&mut self.counts[e.index()]);
                (e, c)
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn descend(&mut self, graph: &KnowledgeGraph, steps: &[Step]) {
        let current = *self.path.last().expect("path holds the anchor");
        let (step, rest) = steps.split_first().expect("nonempty steps");
        for next in graph.neighbors(current, step.relation, step.orientation) {
            if self.path.contains(&next) {
                continue;
            }
            if rest.is_empty() {
                let slot = &mut self.counts[next.index()];
                if *slot == 0 {
                    self.touched.push(next);
                }
                *slot += 1;
            } else {
                self.path.push(next);
                self.descend(graph, rest);
                self.path.pop();
            }
        }
    }

    /// Number of injective matching functions of `pattern` on `(head, tail)`.
    pub fn match_count(
        &mut self,
        graph: &KnowledgeGraph,
        pattern: &PathPattern,
        head: EntityId,
        tail: EntityId,
    ) -> u64 {
        if head == tail {
            return 0;
        }
        self.path.clear();
        self.path.push(head);
        self.count_to(graph, &pattern.steps, tail)
    }

    fn count_to(&mut self, graph: &KnowledgeGraph, steps: &[Step], target: EntityId) -> u64 {
        let current = *self.path.last().expect("path holds the anchor");
        let (step, rest) = steps.split_first().expect("nonempty steps");
        if rest.is_empty() {
            let hit = match step.orientation {
                Orientation::Forward => graph.contains(current, step.relation, target),
                Orientation::Backward => graph.contains(target, step.relation, current),
            };
            // target is distinct from the head by the caller's check and can
            // never sit in the interior of the path (see below)
            return u64::from(hit);
        }
        let mut total = 0;
        for next in graph.neighbors(current, step.relation, step.orientation) {
            if next == target || self.path.contains(&next) {
                continue;
            }
            self.path.push(next);
            total += self.count_to(graph, rest, target);
            self.path.pop();
        }
        total
    }
}

/// Convenience wrapper around [`Matcher::match_count`].
pub fn match_count(graph: &KnowledgeGraph, pattern: &PathPattern, head: EntityId, tail: EntityId) -> u64 {
    Matcher::new().match_count(graph, pattern, head, tail)
}

/// Convenience wrapper around [`Matcher::frontier`].
pub fn score_frontier(
    graph: &KnowledgeGraph,
    pattern: &PathPattern,
    anchor: EntityId,
    direction: Direction,
) -> Frontier {
    Matcher::new().frontier(graph, pattern, anchor, direction)
}

/// Controls which positive pairs seed candidate generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateConfig {
    pub max_len: usize,
    /// Upper bound on positive pairs scanned per relation; `None` scans all.
    pub pair_sample_cap: Option<usize>,
    pub seed: u64,
}

/// Every closed path pattern of length `1..=max_len` that matches at least
/// one training pair of `relation`, except the single edge `(x, relation, y)`
/// itself. Returned in ascending `Ord` order without duplicates.
pub fn enumerate_candidates(
    graph: &KnowledgeGraph,
    relation: RelationId,
    config: &CandidateConfig,
) -> Vec<PathPattern> {
    let pairs = sample_pairs(graph.pairs(relation), config, relation);
    let mut found: HashSet<PathPattern> = HashSet::new();
    let mut prefix: Vec<Step> = Vec::with_capacity(config.max_len);
    let mut path: Vec<EntityId> = Vec::with_capacity(config.max_len + 1);
    for (h, t) in pairs {
        if h == t || config.max_len == 0 {
            continue;
        }
        // last hop into t, keyed by the entity it leaves from
        let mut into_tail: HashMap<EntityId, Vec<Step>> = HashMap::new();
        for &(r, from) in graph.incident(t, Orientation::Backward) {
            into_tail.entry(from).or_default().push(Step::forward(r));
        }
        for &(r, from) in graph.incident(t, Orientation::Forward) {
            into_tail.entry(from).or_default().push(Step::backward(r));
        }
        path.clear();
        path.push(h);
        prefix.clear();
        collect_paths(graph, relation, config.max_len, t, &into_tail, &mut path, &mut prefix, &mut found);
    }
    let mut out: Vec<PathPattern> = found.into_iter().collect();
    out.sort_unstable();
    out
}

#[allow(clippy::too_many_arguments)]
fn collect_paths(
    graph: &KnowledgeGraph,
    relation: RelationId,
    max_len: usize,
    tail: EntityId,
    into_tail: &HashMap<EntityId, Vec<Step>>,
    path: &mut Vec<EntityId>,
    prefix: &mut Vec<Step>,
    found: &mut HashSet<PathPattern>,
) {
    let current = *path.last().unwrap();
    if let Some(last_hops) = into_tail.get(&current) {
        for &hop in last_hops {
            let mut steps = prefix.clone();
            steps.push(hop);
            let p = PathPattern::new(steps);
            if !p.is_consequent_of(relation) {
                found.insert(p);
            }
        }
    }
    if prefix.len() + 1 >= max_len {
        return;
    }
    for orientation in [Orientation::Forward, Orientation::Backward] {
        for &(r, next) in graph.incident(current, orientation) {
            if next == tail || path.contains(&next) {
                continue;
            }
            path.push(next);
            prefix.push(Step {
                relation: r,
                orientation,
            });
            collect_paths(graph, relation, max_len, tail, into_tail, path, prefix, found);
            prefix.pop();
            path.pop();
        }
    }
}

fn sample_pairs(
    pairs: &[(EntityId, EntityId)],
    config: &CandidateConfig,
    relation: RelationId,
) -> Vec<(EntityId, EntityId)> {
    match config.pair_sample_cap {
        Some(cap) if cap < pairs.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ u64::from(relation.0).rotate_left(32));
            let mut picked: Vec<(EntityId, EntityId)> =
                pairs.choose_multiple(&mut rng, cap).copied().collect();
            picked.sort_unstable();
            picked
        }
        _ => pairs.to_vec(),
    }
}
