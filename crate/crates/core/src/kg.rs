//! Triple storage: interning, dataset loading, the indexed graph and the
//! training queries derived from it.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Which end of a triple a query leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Head,
    Tail,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Head, Direction::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Head => "head",
            Direction::Tail => "tail",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(Direction::Head),
            "tail" => Ok(Direction::Tail),
            other => Err(format!("expected `head` or `tail`, got `{other}`")),
        }
    }
}

/// String tables for entities and relations. Ids are assigned in order of
/// first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: IndexSet<String>,
    relations: IndexSet<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(i) = self.entities.get_index_of(name) {
            return EntityId(i as u32);
        }
        let (i, _) = self.entities.insert_full(name.to_owned());
        EntityId(i as u32)
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(i) = self.relations.get_index_of(name) {
            return RelationId(i as u32);
        }
        let (i, _) = self.relations.insert_full(name.to_owned());
        RelationId(i as u32)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get_index_of(name).map(|i| EntityId(i as u32))
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get_index_of(name).map(|i| RelationId(i as u32))
    }

    /// Like [`Vocabulary::entity_id`] but reports near-misses on failure.
    pub fn resolve_entity(&self, name: &str) -> Result<EntityId> {
        self.entity_id(name).ok_or_else(|| Error::UnknownSymbol {
            kind: "entity",
            name: name.to_owned(),
            suggestions: near_misses(name, self.entities.iter()),
        })
    }

    pub fn resolve_relation(&self, name: &str) -> Result<RelationId> {
        self.relation_id(name).ok_or_else(|| Error::UnknownSymbol {
            kind: "relation",
            name: name.to_owned(),
            suggestions: near_misses(name, self.relations.iter()),
        })
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()]
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }
}

fn near_misses<'a>(name: &str, candidates: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut scored: Vec<(usize, &String)> = candidates
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|(d, c)| *d <= (c.len().max(name.len()) / 3).max(2))
        .collect();
    scored.sort();
    scored.into_iter().take(3).map(|(_, c)| c.clone()).collect()
}

/// Raw and deduplicated line counts for one split file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub raw: usize,
    pub unique: usize,
}

/// Train/valid/test triples sharing one vocabulary.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub vocab: Arc<Vocabulary>,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub counts: [SplitCounts; 3],
}

impl DatasetSplit {
    /// Builds a split from in-memory string triples. Handy for fixtures.
    pub fn from_strings(
        train: &[(&str, &str, &str)],
        valid: &[(&str, &str, &str)],
        test: &[(&str, &str, &str)],
    ) -> Self {
        let mut vocab = Vocabulary::new();
        let mut intern = |rows: &[(&str, &str, &str)]| {
            let raw = rows.len();
            let triples = dedup(
                rows.iter()
                    .map(|(h, r, t)| {
                        Triple::new(
                            vocab.intern_entity(h),
                            vocab.intern_relation(r),
                            vocab.intern_entity(t),
                        )
                    })
                    .collect(),
            );
            let counts = SplitCounts {
                raw,
                unique: triples.len(),
            };
            (triples, counts)
        };
        let (train, c0) = intern(train);
        let (valid, c1) = intern(valid);
        let (test, c2) = intern(test);
        DatasetSplit {
            vocab: Arc::new(vocab),
            train,
            valid,
            test,
            counts: [c0, c1, c2],
        }
    }

    /// Graph over the training triples only.
    pub fn train_graph(&self) -> KnowledgeGraph {
        KnowledgeGraph::new(Arc::clone(&self.vocab), &self.train)
    }

    /// Every known triple across all splits.
    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

/// Loads three TSV split files. `valid` and `test` may be omitted, in which
/// case those splits are empty; any file that is given must hold at least one
/// triple.
pub fn load_dataset(
    train_path: &Path,
    valid_path: Option<&Path>,
    test_path: Option<&Path>,
) -> Result<DatasetSplit> {
    let mut vocab = Vocabulary::new();
    let (train, c0) = read_split(train_path, &mut vocab)?;
    let (valid, c1) = match valid_path {
        Some(p) => read_split(p, &mut vocab)?,
        None => (Vec::new(), SplitCounts::default()),
    };
    let (test, c2) = match test_path {
        Some(p) => read_split(p, &mut vocab)?,
        None => (Vec::new(), SplitCounts::default()),
    };
    Ok(DatasetSplit {
        vocab: Arc::new(vocab),
        train,
        valid,
        test,
        counts: [c0, c1, c2],
    })
}

fn read_split(path: &Path, vocab: &mut Vocabulary) -> Result<(Vec<Triple>, SplitCounts)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let triples = parse_triples(&text, path, vocab)?;
    let raw = triples.len();
    if raw == 0 {
        return Err(Error::EmptySplit(path.display().to_string()));
    }
    let triples = dedup(triples);
    if triples.len() < raw {
        log::info!(
            "{}: dropped {} duplicate triples",
            path.display(),
            raw - triples.len()
        );
    }
    let counts = SplitCounts {
        raw,
        unique: triples.len(),
    };
    Ok((triples, counts))
}

/// Parses `head<TAB>relation<TAB>tail` lines, interning as it goes. Blank
/// lines are skipped.
pub fn parse_triples(text: &str, path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: PathBuf::from(path),
                line: i + 1,
                message: format!(
                    "expected 3 non-empty tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let head = vocab.intern_entity(fields[0]);
        let relation = vocab.intern_relation(fields[1]);
        let tail = vocab.intern_entity(fields[2]);
        out.push(Triple::new(head, relation, tail));
    }
    Ok(out)
}

fn dedup(triples: Vec<Triple>) -> Vec<Triple> {
    let mut seen = HashSet::with_capacity(triples.len());
    triples.into_iter().filter(|t| seen.insert(*t)).collect()
}

/// Writes triples back out in the loader's format.
pub fn write_triples(triples: &[Triple], vocab: &Vocabulary) -> String {
    let mut s = String::new();
    for t in triples {
        s.push_str(vocab.entity_name(t.head));
        s.push('\t');
        s.push_str(vocab.relation_name(t.relation));
        s.push('\t');
        s.push_str(vocab.entity_name(t.tail));
        s.push('\n');
    }
    s
}

/// Compressed adjacency for one edge orientation: for every entity, its
/// incident `(relation, neighbor)` pairs sorted by relation then neighbor.
#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<usize>,
    edges: Vec<(RelationId, EntityId)>,
}

impl Adjacency {
    fn build(num_entities: usize, pairs: impl Iterator<Item = (EntityId, RelationId, EntityId)>) -> Self {
        let mut buckets: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new(); num_entities];
        for (from, r, to) in pairs {
            buckets[from.index()].push((r, to));
        }
        let mut offsets = Vec::with_capacity(num_entities + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for mut b in buckets {
            b.sort_unstable();
            b.dedup();
            edges.extend(b);
            offsets.push(edges.len());
        }
        Adjacency { offsets, edges }
    }

    #[inline]
    fn all(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.edges[self.offsets[e.index()]..self.offsets[e.index() + 1]]
    }

    #[inline]
    fn by_relation(&self, e: EntityId, r: RelationId) -> &[(RelationId, EntityId)] {
        let all = self.all(e);
        let lo = all.partition_point(|(x, _)| *x < r);
        let hi = lo + all[lo..].partition_point(|(x, _)| *x == r);
        &all[lo..hi]
    }
}

/// Edge orientation relative to the entity being expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// `(e, r, neighbor)`
    Forward,
    /// `(neighbor, r, e)`
    Backward,
}

impl Orientation {
    pub fn flip(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Backward,
            Orientation::Backward => Orientation::Forward,
        }
    }
}

/// Immutable indexed triple set.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    vocab: Arc<Vocabulary>,
    forward: Adjacency,
    backward: Adjacency,
    by_relation: Vec<Vec<(EntityId, EntityId)>>,
    num_triples: usize,
}

impl KnowledgeGraph {
    /// Builds the graph. The entity universe is the whole vocabulary, so
    /// entities that never occur in `triples` are still rankable.
    pub fn new(vocab: Arc<Vocabulary>, triples: &[Triple]) -> Self {
        let n = vocab.num_entities();
        let forward = Adjacency::build(n, triples.iter().map(|t| (t.head, t.relation, t.tail)));
        let backward = Adjacency::build(n, triples.iter().map(|t| (t.tail, t.relation, t.head)));
        let mut by_relation = vec![Vec::new(); vocab.num_relations()];
        for t in triples {
            by_relation[t.relation.index()].push((t.head, t.tail));
        }
        for pairs in &mut by_relation {
            pairs.sort_unstable();
            pairs.dedup();
        }
        let num_triples = forward.edges.len();
        KnowledgeGraph {
            vocab,
            forward,
            backward,
            by_relation,
            num_triples,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_arc(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    pub fn num_triples(&self) -> usize {
        self.num_triples
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.num_entities() as u32).map(EntityId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> {
        (0..self.num_relations() as u32).map(RelationId)
    }

    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.forward
            .by_relation(head, relation)
            .binary_search(&(relation, tail))
            .is_ok()
    }

    /// Neighbors of `e` along `relation` in the given orientation.
    pub fn neighbors(
        &self,
        e: EntityId,
        relation: RelationId,
        orientation: Orientation,
    ) -> impl ExactSizeIterator<Item = EntityId> + '_ {
        let adj = match orientation {
            Orientation::Forward => &self.forward,
            Orientation::Backward => &self.backward,
        };
        adj.by_relation(e, relation).iter().map(|(_, n)| *n)
    }

    /// All `(relation, neighbor)` pairs incident to `e` in one orientation.
    pub fn incident(&self, e: EntityId, orientation: Orientation) -> &[(RelationId, EntityId)] {
        match orientation {
            Orientation::Forward => self.forward.all(e),
            Orientation::Backward => self.backward.all(e),
        }
    }

    /// Sorted, distinct `(head, tail)` pairs of one relation.
    pub fn pairs(&self, relation: RelationId) -> &[(EntityId, EntityId)] {
        self.by_relation
            .get(relation.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.relations().flat_map(move |r| {
            self.pairs(r).iter().map(move |&(h, t)| Triple::new(h, r, t))
        })
    }

    /// Training queries for `relation` missing the `direction` end, with
    /// their answer sets, ordered by anchor id.
    pub fn queries(&self, relation: RelationId, direction: Direction) -> QuerySet {
        let mut keyed: Vec<(EntityId, EntityId)> = self
            .pairs(relation)
            .iter()
            .map(|&(h, t)| match direction {
                Direction::Tail => (h, t),
                Direction::Head => (t, h),
            })
            .collect();
        keyed.sort_unstable();
        let mut queries: Vec<Query> = Vec::new();
        for (anchor, answer) in keyed {
            match queries.last_mut() {
                Some(q) if q.anchor == anchor => q.answers.push(answer),
                _ => queries.push(Query {
                    anchor,
                    answers: vec![answer],
                }),
            }
        }
        QuerySet {
            relation,
            direction,
            queries,
        }
    }
}

/// One training query: the known end and its (sorted, nonempty) answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub anchor: EntityId,
    pub answers: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub relation: RelationId,
    pub direction: Direction,
    pub queries: Vec<Query>,
}

impl QuerySet {
    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::f1;

    fn e(g: &KnowledgeGraph, s: &str) -> EntityId {
        g.vocab().entity_id(s).unwrap()
    }

    fn r(g: &KnowledgeGraph, s: &str) -> RelationId {
        g.vocab().relation_id(s).unwrap()
    }

    #[test]
    fn f1_counts() {
        let g = f1().train_graph();
        assert_eq!(g.num_entities(), 7);
        assert_eq!(g.num_relations(), 3);
        assert_eq!(g.num_triples(), 8);
    }

    #[test]
    fn f1_adjacency_and_membership() {
        let g = f1().train_graph();
        let member_of = r(&g, "member_of");
        let fwd: Vec<_> = g.neighbors(e(&g, "p1"), member_of, Orientation::Forward).collect();
        assert_eq!(fwd, vec![e(&g, "A")]);
        assert!(g.contains(e(&g, "p1"), member_of, e(&g, "A")));
        assert!(!g.contains(e(&g, "A"), member_of, e(&g, "p1")));
        let back: Vec<_> = g.neighbors(e(&g, "A"), member_of, Orientation::Backward).collect();
        assert_eq!(back, vec![e(&g, "p1"), e(&g, "p2"), e(&g, "p3")]);
    }

    #[test]
    fn f1_queries() {
        let g = f1().train_graph();
        let li = r(&g, "located_in");
        let tail = g.queries(li, Direction::Tail);
        assert_eq!(
            tail.queries,
            vec![
                Query { anchor: e(&g, "A"), answers: vec![e(&g, "UK")] },
                Query { anchor: e(&g, "B"), answers: vec![e(&g, "FR")] },
            ]
        );
        let head = g.queries(li, Direction::Head);
        assert_eq!(
            head.queries,
            vec![
                Query { anchor: e(&g, "UK"), answers: vec![e(&g, "A")] },
                Query { anchor: e(&g, "FR"), answers: vec![e(&g, "B")] },
            ]
        );
    }

    #[test]
    fn unused_relation_has_no_queries() {
        let split = DatasetSplit::from_strings(
            &[("a", "r", "b")],
            &[],
            &[("a", "unused", "b")],
        );
        let g = split.train_graph();
        let unused = g.vocab().relation_id("unused").unwrap();
        assert!(g.queries(unused, Direction::Tail).is_empty());
        assert!(g.pairs(unused).is_empty());
    }

    #[test]
    fn duplicate_lines_are_collapsed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.txt");
        fs::write(&p, "a\tr\tb\nb\tr\tc\na\tr\tb\n").unwrap();
        let d = load_dataset(&p, None, None).unwrap();
        assert_eq!(d.train.len(), 2);
        assert_eq!(d.counts[0], SplitCounts { raw: 3, unique: 2 });
    }

    #[test]
    fn empty_train_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.txt");
        fs::write(&p, "").unwrap();
        let err = load_dataset(&p, None, None).unwrap_err();
        assert!(err.to_string().contains("empty split"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.txt");
        fs::write(&p, "a\tr\tb\na r b\n").unwrap();
        match load_dataset(&p, None, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Path::new("/nonexistent/train.txt"), None, None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn unknown_symbol_lists_near_misses() {
        let g = f1().train_graph();
        let err = g.vocab().resolve_relation("located_inn").unwrap_err();
        assert!(err.to_string().contains("located_in"), "{err}");
    }

    #[test]
    fn test_entities_are_in_the_universe() {
        let split = DatasetSplit::from_strings(&[("a", "r", "b")], &[], &[("a", "r", "zz")]);
        let g = split.train_graph();
        assert_eq!(g.num_entities(), 3);
        assert!(g.vocab().entity_id("zz").is_some());
    }
}
