//! Answering queries with a ranked rule list.
//!
//! Entities are ordered lexicographically by their score vectors over the
//! rules: the first rule (highest priority) on which two entities differ
//! decides, and entities equal on every rule stay tied. The order is built by
//! partition refinement, so a rule's frontier is only computed while some
//! block is still tied.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph};
use crate::measures::score_in;
use crate::miner::Rule;
use crate::pattern::Matcher;

/// How a target inside a tie block is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Middle of the block: `s + (b + 1) / 2`.
    #[default]
    Average,
    /// Bottom of the block: `s + b`.
    Pessimistic,
    /// Top of the block: `s + 1`.
    Optimistic,
}

impl TiePolicy {
    /// Rank given `better` strictly better entities and a tie block of
    /// `size` entities including the target.
    pub fn rank(self, better: usize, size: usize) -> f64 {
        debug_assert!(size >= 1);
        match self {
            TiePolicy::Average => better as f64 + (size as f64 + 1.0) / 2.0,
            TiePolicy::Pessimistic => (better + size) as f64,
            TiePolicy::Optimistic => (better + 1) as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TiePolicy::Average => "average",
            TiePolicy::Pessimistic => "pessimistic",
            TiePolicy::Optimistic => "optimistic",
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(TiePolicy::Average),
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            "optimistic" => Ok(TiePolicy::Optimistic),
            other => Err(format!(
                "unknown tie policy `{other}` (expected average, pessimistic or optimistic)"
            )),
        }
    }
}

/// Full answer ordering for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRanking {
    pub anchor: EntityId,
    pub direction: Direction,
    /// Tie blocks, best first; members in ascending id order.
    pub blocks: Vec<Vec<EntityId>>,
    /// Nonzero `(rule index, match count)` pairs observed for an entity while
    /// it was still tied with others, in rule order. Rule indices are 0-based.
    explanations: HashMap<EntityId, Vec<(usize, u64)>>,
}

impl PredictionRanking {
    /// Strictly-better count and tie-block size for `entity`.
    pub fn position(&self, entity: EntityId) -> Option<(usize, usize)> {
        let mut better = 0;
        for block in &self.blocks {
            if block.binary_search(&entity).is_ok() {
                return Some((better, block.len()));
            }
            better += block.len();
        }
        None
    }

    pub fn rank_of(&self, target: EntityId, policy: TiePolicy) -> Result<f64> {
        let (better, size) = self.position(target).ok_or(Error::TargetFiltered)?;
        Ok(policy.rank(better, size))
    }

    /// Rules that placed `entity`, highest priority first.
    pub fn explain(&self, entity: EntityId) -> &[(usize, u64)] {
        self.explanations.get(&entity).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Entities in ranked order, ties in id order.
    pub fn ordered(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.blocks.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Orders every entity not in `filter` for the query `(anchor, ?)` (tail) or
/// `(?, anchor)` (head).
pub fn rank_entities(
    graph: &KnowledgeGraph,
    rules: &[Rule],
    anchor: EntityId,
    direction: Direction,
    filter: &HashSet<EntityId>,
) -> PredictionRanking {
    let universe: Vec<EntityId> = graph.entities().filter(|e| !filter.contains(e)).collect();
    let mut blocks: Vec<Vec<EntityId>> = if universe.is_empty() { vec![] } else { vec![universe] };
    let mut explanations: HashMap<EntityId, Vec<(usize, u64)>> = HashMap::new();
    let mut matcher = Matcher::new();
    for (i, rule) in rules.iter().enumerate() {
        if blocks.iter().all(|b| b.len() <= 1) {
            break;
        }
        let frontier = matcher.frontier(graph, &rule.pattern, anchor, direction);
        if frontier.is_empty() {
            continue;
        }
        let mut refined = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.len() <= 1 {
                refined.push(block);
                continue;
            }
            let mut scored: Vec<(u64, EntityId)> = block
                .into_iter()
                .map(|e| (score_in(&frontier, e), e))
                .collect();
            for &(s, e) in &scored {
                if s > 0 {
                    explanations.entry(e).or_default().push((i, s));
                }
            }
            scored.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut start = 0;
            while start < scored.len() {
                let s = scored[start].0;
                let end = start + scored[start..].partition_point(|x| x.0 == s);
                refined.push(scored[start..end].iter().map(|x| x.1).collect());
                start = end;
            }
        }
        blocks = refined;
    }
    PredictionRanking {
        anchor,
        direction,
        blocks,
        explanations,
    }
}

/// Entities sharing the target's block so far.
enum TargetBlock {
    /// Everything except these.
    AllBut(HashSet<EntityId>),
    /// Exactly these, sorted.
    Only(Vec<EntityId>),
}

/// Strictly-better count and tie size of `target` without building the full
/// ranking; refinement stops as soon as the target stands alone.
pub fn rank_target(
    graph: &KnowledgeGraph,
    matcher: &mut Matcher,
    rules: &[Rule],
    anchor: EntityId,
    direction: Direction,
    target: EntityId,
    filter: &HashSet<EntityId>,
) -> Result<(usize, usize)> {
    if filter.contains(&target) {
        return Err(Error::TargetFiltered);
    }
    let mut better = 0;
    let mut size = graph.num_entities() - filter.len();
    let mut block = TargetBlock::AllBut(filter.clone());
    for rule in rules {
        if size <= 1 {
            break;
        }
        let frontier = matcher.frontier(graph, &rule.pattern, anchor, direction);
        if frontier.is_empty() {
            continue;
        }
        let target_score = score_in(&frontier, target);
        match &mut block {
            TargetBlock::AllBut(excluded) => {
                let inside = frontier.iter().filter(|(e, _)| !excluded.contains(e));
                if target_score == 0 {
                    let moved: Vec<EntityId> = inside.map(|&(e, _)| e).collect();
                    better += moved.len();
                    size -= moved.len();
                    excluded.extend(moved);
                } else {
                    let mut same = Vec::new();
                    for &(e, s) in inside {
                        if s > target_score {
                            better += 1;
                        } else if s == target_score {
                            same.push(e);
                        }
                    }
                    size = same.len();
                    block = TargetBlock::Only(same);
                }
            }
            TargetBlock::Only(members) => {
                let mut same = Vec::new();
                for &e in members.iter() {
                    let s = score_in(&frontier, e);
                    if s > target_score {
                        better += 1;
                    } else if s == target_score {
                        same.push(e);
                    }
                }
                size = same.len();
                *members = same;
            }
        }
    }
    Ok((better, size))
}
