//! Graph pattern association rules for knowledge-graph link prediction.
//!
//! Rules have the form `pattern(x, y) => relation(x, y)` where the pattern is
//! a closed path between `x` and `y`. Rules are scored either as binary
//! classifiers (standard confidence) or as entity rankers whose ties are
//! spread uniformly over the ranks they occupy (distributed MAP and its
//! filtered variant). Queries are answered by ordering entities
//! lexicographically over the scores of the top-ranked rules.

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod kg;
pub mod measures;
pub mod miner;
pub mod pattern;
pub mod predict;

pub use error::{Error, Result};
pub use eval::{evaluate, select_l, EvalOptions, EvalReport, LSelection, Metrics};
pub use kg::{
    load_dataset, DatasetSplit, Direction, EntityId, KnowledgeGraph, Orientation, Query, QuerySet,
    RelationId, Triple, Vocabulary,
};
pub use measures::{DistributedRanking, Measure, MeasureKind};
pub use miner::{load_rules, mine, save_rules, MineConfig, Rule, RuleSet};
pub use pattern::{enumerate_candidates, match_count, score_frontier, CandidateConfig, Matcher, PathPattern, Step};
pub use predict::{rank_entities, rank_target, PredictionRanking, TiePolicy};
