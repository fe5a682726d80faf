//! Top-K rule mining per (relation, direction), and the rule file format.
//!
//! ```text
//! #gpar-rules v1 measure=dmap L=2 K=1000
//! #config pair_cap=none seed=0
//! located_in    tail    0.57142857142857140    2    x <-[member_of]- z1 -[nationality]-> y
//! ```
//!
//! Within one (relation, direction) the order of lines is the rule rank.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{Direction, KnowledgeGraph, RelationId, Vocabulary};
use crate::measures::{pattern_stats, Harmonic, Measure};
use crate::pattern::{enumerate_candidates, CandidateConfig, Matcher, PathPattern};

pub const RULES_MAGIC: &str = "#gpar-rules";
pub const RULES_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MineConfig {
    pub measure: Measure,
    /// Maximum pattern length.
    pub max_len: usize,
    pub top_k: usize,
    pub pair_sample_cap: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            measure: Measure::Fdmap,
            max_len: 2,
            top_k: 1000,
            pair_sample_cap: None,
            seed: 0,
            threads: 0,
        }
    }
}

impl MineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(Error::InvalidConfig("L must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.pair_sample_cap == Some(0) {
            return Err(Error::InvalidConfig("pair cap must be at least 1".into()));
        }
        Ok(())
    }

    fn candidate_config(&self) -> CandidateConfig {
        CandidateConfig {
            max_len: self.max_len,
            pair_sample_cap: self.pair_sample_cap,
            seed: self.seed,
        }
    }
}

/// The part of a mining run that determines its output; threads are left
/// out so that runs differing only in parallelism produce identical files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSetHeader {
    pub measure: Measure,
    pub max_len: usize,
    pub top_k: usize,
    pub pair_sample_cap: Option<usize>,
    pub seed: u64,
}

impl From<&MineConfig> for RuleSetHeader {
    fn from(c: &MineConfig) -> Self {
        RuleSetHeader {
            measure: c.measure,
            max_len: c.max_len,
            top_k: c.top_k,
            pair_sample_cap: c.pair_sample_cap,
            seed: c.seed,
        }
    }
}

impl RuleSetHeader {
    fn lines(&self) -> String {
        let cap = self
            .pair_sample_cap
            .map_or_else(|| "none".to_owned(), |c| c.to_string());
        format!(
            "{RULES_MAGIC} {RULES_VERSION} measure={} L={} K={}\n#config pair_cap={cap} seed={}\n",
            self.measure, self.max_len, self.top_k, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub pattern: PathPattern,
    pub relation: RelationId,
    pub direction: Direction,
    pub value: f64,
    /// Positive training pairs the antecedent matches.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub header: RuleSetHeader,
    lists: BTreeMap<(RelationId, Direction), Vec<Rule>>,
}

impl RuleSet {
    pub fn new(header: RuleSetHeader) -> Self {
        RuleSet {
            header,
            lists: BTreeMap::new(),
        }
    }

    /// Rules for one (relation, direction), highest priority first.
    pub fn rules(&self, relation: RelationId, direction: Direction) -> &[Rule] {
        self.lists
            .get(&(relation, direction))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(RelationId, Direction), &Vec<Rule>)> {
        self.lists.iter()
    }

    pub fn len(&self) -> usize {
        self.lists.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert_list(&mut self, relation: RelationId, direction: Direction, rules: Vec<Rule>) {
        if !rules.is_empty() {
            self.lists.insert((relation, direction), rules);
        }
    }

    /// Keeps only the first `k` rules of every list.
    pub fn truncate(&mut self, k: usize) {
        for list in self.lists.values_mut() {
            list.truncate(k);
        }
        self.header.top_k = k;
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = self.header.lines();
        for rules in self.lists.values() {
            for rule in rules {
                push_rule_line(&mut out, rule, vocab);
            }
        }
        out
    }

    pub fn from_text(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, first)) => parse_header(first)?,
            None => {
                return Err(Error::RuleFormat {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        let mut set = RuleSet::new(header);
        for (i, line) in lines {
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix("#config ") {
                parse_config(rest, &mut set.header, lineno)?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rule = parse_rule_line(line, vocab, lineno)?;
            set.lists
                .entry((rule.relation, rule.direction))
                .or_default()
                .push(rule);
        }
        Ok(set)
    }
}

fn push_rule_line(out: &mut String, rule: &Rule, vocab: &Vocabulary) {
    out.push_str(vocab.relation_name(rule.relation));
    out.push('\t');
    out.push_str(rule.direction.as_str());
    out.push('\t');
    out.push_str(&format_value(rule.value));
    out.push('\t');
    out.push_str(&rule.support.to_string());
    out.push('\t');
    out.push_str(&rule.pattern.to_text(vocab));
    out.push('\n');
}

/// Plain decimal with 17 significant digits, which round-trips any `f64`.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    let sci = format!("{:.16e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut s = String::new();
    if v < 0.0 {
        s.push('-');
    }
    if exp < 0 {
        s.push_str("0.");
        for _ in 0..(-exp - 1) {
            s.push('0');
        }
        s.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            s.push_str(&digits);
            s.extend(std::iter::repeat_n('0', int_len - digits.len()));
        } else {
            s.push_str(&digits[..int_len]);
            s.push('.');
            s.push_str(&digits[int_len..]);
        }
    }
    s
}

fn parse_header(line: &str) -> Result<RuleSetHeader> {
    let bad = |message: &str| Error::RuleFormat {
        line: 1,
        message: message.to_owned(),
    };
    let mut tokens = line.split(' ');
    if tokens.next() != Some(RULES_MAGIC) {
        return Err(bad("expected `#gpar-rules` header"));
    }
    match tokens.next() {
        Some(RULES_VERSION) => {}
        Some(other) => return Err(Error::Version(other.to_owned())),
        None => return Err(bad("missing version")),
    }
    let mut measure = None;
    let mut max_len = None;
    let mut top_k = None;
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match key {
            "measure" => measure = Some(value.parse::<Measure>().map_err(|e| bad(&e))?),
            "L" => max_len = Some(value.parse::<usize>().map_err(|_| bad("bad L"))?),
            "K" => top_k = Some(value.parse::<usize>().map_err(|_| bad("bad K"))?),
            _ => return Err(bad(&format!("unknown header key `{key}`"))),
        }
    }
    Ok(RuleSetHeader {
        measure: measure.ok_or_else(|| bad("missing measure"))?,
        max_len: max_len.ok_or_else(|| bad("missing L"))?,
        top_k: top_k.ok_or_else(|| bad("missing K"))?,
        pair_sample_cap: None,
        seed: 0,
    })
}

fn parse_config(rest: &str, header: &mut RuleSetHeader, line: usize) -> Result<()> {
    let bad = |message: String| Error::RuleFormat { line, message };
    for tok in rest.split(' ') {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        match key {
            "pair_cap" => {
                header.pair_sample_cap = match value {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| bad(format!("bad pair_cap `{v}`")))?),
                }
            }
            "seed" => header.seed = value.parse().map_err(|_| bad(format!("bad seed `{value}`")))?,
            _ => {}
        }
    }
    Ok(())
}

fn parse_rule_line(line: &str, vocab: &Vocabulary, lineno: usize) -> Result<Rule> {
    let bad = |message: String| Error::RuleFormat {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(bad(format!("expected 5 tab-separated fields, found {}", fields.len())));
    }
    let relation = vocab.resolve_relation(fields[0])?;
    let direction: Direction = fields[1].parse().map_err(bad)?;
    let value: f64 = fields[2]
        .parse()
        .map_err(|_| bad(format!("bad measure value `{}`", fields[2])))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(bad(format!("measure value {value} outside [0, 1]")));
    }
    let support: u64 = fields[3]
        .parse()
        .map_err(|_| bad(format!("bad support `{}`", fields[3])))?;
    let pattern = PathPattern::parse(fields[4], vocab).map_err(|e| match e {
        Error::UnknownSymbol { .. } => e,
        other => bad(other.to_string()),
    })?;
    Ok(Rule {
        pattern,
        relation,
        direction,
        value,
        support,
    })
}

pub fn save_rules(rules: &RuleSet, vocab: &Vocabulary, path: &Path) -> Result<()> {
    fs::write(path, rules.to_text(vocab)).map_err(|e| Error::io(path, e))
}

pub fn load_rules(path: &Path, vocab: &Vocabulary) -> Result<RuleSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RuleSet::from_text(&text, vocab)
}

/// Total order of rules within a list: value descending, then shorter
/// patterns, then canonical text.
fn rule_order(a: &(f64, String, &Rule), b: &(f64, String, &Rule)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.2.pattern.len().cmp(&b.2.pattern.len()))
        .then_with(|| a.1.cmp(&b.1))
}

/// Mines and ranks the rules of one relation, both directions.
pub fn mine_relation(
    graph: &KnowledgeGraph,
    relation: RelationId,
    config: &MineConfig,
    harmonic: &Harmonic,
) -> Vec<(Direction, Vec<Rule>)> {
    let candidates = enumerate_candidates(graph, relation, &config.candidate_config());
    let query_sets = Direction::BOTH.map(|d| graph.queries(relation, d));
    let work: Vec<(usize, &PathPattern)> = (0..query_sets.len())
        .flat_map(|qi| candidates.iter().map(move |p| (qi, p)))
        .collect();
    let scored: Vec<Rule> = work
        .par_iter()
        .map_init(Matcher::new, |matcher, &(qi, pattern)| {
            let qs = &query_sets[qi];
            let stats = pattern_stats(graph, matcher, pattern, qs, harmonic);
            Rule {
                pattern: pattern.clone(),
                relation,
                direction: qs.direction,
                value: stats.value(config.measure),
                support: stats.support(),
            }
        })
        .collect();

    let vocab = graph.vocab();
    Direction::BOTH
        .iter()
        .map(|&direction| {
            let mut keyed: Vec<(f64, String, &Rule)> = scored
                .iter()
                .filter(|r| r.direction == direction && r.support > 0)
                .map(|r| (r.value, r.pattern.to_text(vocab), r))
                .collect();
            keyed.sort_by(rule_order);
            keyed.truncate(config.top_k);
            (direction, keyed.into_iter().map(|(_, _, r)| r.clone()).collect())
        })
        .collect()
}

/// Mines the top-K rules for every relation and direction.
pub fn mine(graph: &KnowledgeGraph, config: &MineConfig) -> Result<RuleSet> {
    mine_resumable(graph, config, None)
}

/// Like [`mine`], but when `checkpoint` is given every finished relation is
/// appended to that file, and relations already recorded there are skipped
/// on the next run with the same configuration.
pub fn mine_resumable(
    graph: &KnowledgeGraph,
    config: &MineConfig,
    checkpoint: Option<&Path>,
) -> Result<RuleSet> {
    config.validate()?;
    let header = RuleSetHeader::from(config);
    let mut set = RuleSet::new(header);
    let mut done: BTreeSet<RelationId> = BTreeSet::new();
    let mut sink = match checkpoint {
        Some(path) => Some(open_checkpoint(path, graph.vocab(), &header, &mut set, &mut done)?),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let harmonic = Harmonic::new(graph.num_entities());
    let relations: Vec<RelationId> = graph
        .relations()
        .filter(|r| !graph.pairs(*r).is_empty())
        .collect();
    let total = relations.len();
    for (i, &relation) in relations.iter().enumerate() {
        if done.contains(&relation) {
            continue;
        }
        let lists = pool.install(|| mine_relation(graph, relation, config, &harmonic));
        if let Some((path, w)) = sink.as_mut() {
            let mut chunk = String::new();
            for (_, rules) in &lists {
                for rule in rules {
                    push_rule_line(&mut chunk, rule, graph.vocab());
                }
            }
            chunk.push_str(&format!("#done\t{}\n", graph.vocab().relation_name(relation)));
            w.write_all(chunk.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        for (direction, rules) in lists {
            set.insert_list(relation, direction, rules);
        }
        log::info!(
            "mined {}/{} relations ({})",
            i + 1,
            total,
            graph.vocab().relation_name(relation)
        );
    }
    Ok(set)
}

fn open_checkpoint(
    path: &Path,
    vocab: &Vocabulary,
    header: &RuleSetHeader,
    set: &mut RuleSet,
    done: &mut BTreeSet<RelationId>,
) -> Result<(std::path::PathBuf, BufWriter<File>)> {
    if path.exists() {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        // only relations whose `#done` marker made it to disk count
        let text = match raw.rfind("\n#done\t") {
            Some(at) => match raw[at + 1..].find('\n') {
                Some(nl) => &raw[..at + 1 + nl + 1],
                None => &raw[..at + 1],
            },
            None => {
                let end: usize = raw
                    .lines()
                    .take_while(|l| l.starts_with('#'))
                    .map(|l| l.len() + 1)
                    .sum();
                &raw[..end.min(raw.len())]
            }
        };
        let previous = RuleSet::from_text(text, vocab)?;
        if previous.header != *header {
            return Err(Error::InvalidConfig(format!(
                "checkpoint {} was written with a different configuration",
                path.display()
            )));
        }
        for line in text.lines() {
            if let Some(name) = line.strip_prefix("#done\t") {
                done.insert(vocab.resolve_relation(name)?);
            }
        }
        for ((relation, direction), rules) in previous.lists {
            if done.contains(&relation) {
                set.insert_list(relation, direction, rules);
            }
        }
        // rewrite without any partially written tail
        let mut clean = header.lines();
        for (_, rules) in set.iter() {
            for rule in rules {
                push_rule_line(&mut clean, rule, vocab);
            }
        }
        for r in done.iter() {
            clean.push_str(&format!("#done\t{}\n", vocab.relation_name(*r)));
        }
        fs::write(path, clean).map_err(|e| Error::io(path, e))?;
        log::info!("resuming from checkpoint with {} relations done", done.len());
    } else {
        fs::write(path, header.lines()).map_err(|e| Error::io(path, e))?;
    }
    let file = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok((path.to_path_buf(), BufWriter::new(file)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::f1;

    fn config(measure: Measure, max_len: usize, top_k: usize) -> MineConfig {
        MineConfig {
            measure,
            max_len,
            top_k,
            ..MineConfig::default()
        }
    }

    #[test]
    fn f1_dmap_top_rule() {
        let g = f1().train_graph();
        let set = mine(&g, &config(Measure::Dmap, 2, 1000)).unwrap();
        let li = g.vocab().relation_id("located_in").unwrap();
        let rules = set.rules(li, Direction::Tail);
        assert_eq!(
            rules[0].pattern.to_text(g.vocab()),
            "x <-[member_of]- z1 -[nationality]-> y"
        );
        assert!((rules[0].value - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(rules[0].support, 1);
        for (_, list) in set.iter() {
            assert!(list.iter().all(|r| !r.pattern.is_consequent_of(r.relation)));
            assert!(list.windows(2).all(|w| w[0].value >= w[1].value));
        }
    }

    #[test]
    fn k1_keeps_best_rule() {
        let g = f1().train_graph();
        let full = mine(&g, &config(Measure::Dmap, 3, 1000)).unwrap();
        let one = mine(&g, &config(Measure::Dmap, 3, 1)).unwrap();
        for (key, list) in one.iter() {
            assert_eq!(list.len(), 1);
            assert_eq!(list[0], full.rules(key.0, key.1)[0]);
        }
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(4.0 / 7.0), "0.57142857142857140");
        assert_eq!(format_value(1.0), "1.0000000000000000");
        assert_eq!(format_value(0.5), "0.50000000000000000");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(0.0078125), "0.0078125000000000000");
        for v in [1.0 / 3.0, 2.0 / 5.0, 1e-300, 0.999_999_999_999_999_9] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let g = f1().train_graph();
        let set = mine(&g, &config(Measure::Fdmap, 3, 1000)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rules.tsv");
        save_rules(&set, g.vocab(), &path).unwrap();
        assert_eq!(load_rules(&path, g.vocab()).unwrap(), set);
    }

    #[test]
    fn single_line_rule_file() {
        let g = f1().train_graph();
        let text = "#gpar-rules v1 measure=conf L=2 K=1000\n\
                    located_in\ttail\t0.5\t1\tx <-[member_of]- z1 -[nationality]-> y\n";
        let set = RuleSet::from_text(text, g.vocab()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.header.measure, Measure::Conf);
    }

    #[test]
    fn corrupt_value_names_line() {
        let g = f1().train_graph();
        let text = "#gpar-rules v1 measure=conf L=2 K=1000\n\
                    located_in\ttail\tabc\t1\tx <-[member_of]- z1 -[nationality]-> y\n";
        match RuleSet::from_text(text, g.vocab()) {
            Err(Error::RuleFormat { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let g = f1().train_graph();
        let err = RuleSet::from_text("#gpar-rules v9 measure=conf L=2 K=1\n", g.vocab()).unwrap_err();
        assert!(matches!(err, Error::Version(v) if v == "v9"));
    }

    #[test]
    fn invalid_config() {
        let g = f1().train_graph();
        assert!(matches!(
            mine(&g, &config(Measure::Conf, 2, 0)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            mine(&g, &config(Measure::Conf, 0, 10)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn checkpoint_resume_matches_fresh_run() {
        let g = f1().train_graph();
        let cfg = config(Measure::Dmap, 3, 1000);
        let fresh = mine(&g, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        let first = mine_resumable(&g, &cfg, Some(&ckpt)).unwrap();
        assert_eq!(first, fresh);

        // keep only the first finished relation plus a torn line
        let text = fs::read_to_string(&ckpt).unwrap();
        let cut = text.find("#done").unwrap();
        let end = cut + text[cut..].find('\n').unwrap() + 1;
        fs::write(&ckpt, format!("{}located_in\ttail\t0.1", &text[..end])).unwrap();
        let resumed = mine_resumable(&g, &cfg, Some(&ckpt)).unwrap();
        assert_eq!(resumed, fresh);

        let other = config(Measure::Conf, 3, 1000);
        assert!(matches!(
            mine_resumable(&g, &other, Some(&ckpt)),
            Err(Error::InvalidConfig(_))
        ));
    }
}
