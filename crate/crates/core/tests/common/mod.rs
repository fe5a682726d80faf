//! Brute-force reference implementations. They use neither the adjacency
//! index nor the block-wise formulas of the library.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use gpar_core::{EntityId, KnowledgeGraph, Orientation, PathPattern, RelationId, Step, Triple, Vocabulary};
use rand::Rng;

/// Random graph over `n` entities and `r` relations where every ordered pair
/// carries each relation independently with probability `density`.
pub fn random_graph(rng: &mut impl Rng, n: usize, r: usize, density: f64) -> (KnowledgeGraph, Vec<Triple>) {
    let mut vocab = Vocabulary::new();
    for i in 0..n {
        vocab.intern_entity(&format!("e{i}"));
    }
    for k in 0..r {
        vocab.intern_relation(&format!("r{k}"));
    }
    let mut triples = Vec::new();
    for k in 0..r {
        for h in 0..n {
            for t in 0..n {
                if rng.gen_bool(density) {
                    triples.push(Triple::new(EntityId(h as u32), RelationId(k as u32), EntityId(t as u32)));
                }
            }
        }
    }
    (KnowledgeGraph::new(Arc::new(vocab), &triples), triples)
}

/// Every path pattern of length `1..=max_len` over `r` relations.
pub fn all_patterns(r: usize, max_len: usize) -> Vec<PathPattern> {
    let steps: Vec<Step> = (0..r as u32)
        .flat_map(|k| [Step::forward(RelationId(k)), Step::backward(RelationId(k))])
        .collect();
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<Step>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for s in &steps {
                let mut p = prefix.clone();
                p.push(*s);
                out.push(PathPattern::new(p.clone()));
                next.push(p);
            }
        }
        frontier = next;
    }
    out
}

/// Counts injective assignments of all pattern variables to entities,
/// keyed by the images of `x` and `y`. Variables are assigned in path order
/// over the whole entity range; each pattern triple is checked against the
/// plain triple set once both of its variables are bound.
pub fn naive_counts(triples: &[Triple], n: usize, pattern: &PathPattern) -> HashMap<(u32, u32), u64> {
    let set: HashSet<(u32, u32, u32)> = triples.iter().map(|t| (t.head.0, t.relation.0, t.tail.0)).collect();
    let mut counts = HashMap::new();
    let mut assignment: Vec<u32> = Vec::new();
    assign(&set, n as u32, pattern.steps(), &mut assignment, &mut counts);
    counts
}

fn assign(
    set: &HashSet<(u32, u32, u32)>,
    n: u32,
    steps: &[Step],
    assignment: &mut Vec<u32>,
    counts: &mut HashMap<(u32, u32), u64>,
) {
    let var = assignment.len();
    if var == steps.len() + 1 {
        *counts.entry((assignment[0], assignment[var - 1])).or_default() += 1;
        return;
    }
    for e in 0..n {
        if assignment.contains(&e) {
            continue;
        }
        if var > 0 {
            let prev = assignment[var - 1];
            let step = steps[var - 1];
            let triple = match step.orientation {
                Orientation::Forward => (prev, step.relation.0, e),
                Orientation::Backward => (e, step.relation.0, prev),
            };
            if !set.contains(&triple) {
                continue;
            }
        }
        assignment.push(e);
        assign(set, n, steps, assignment, counts);
        assignment.pop();
    }
}

/// Dense rank-by-entity matrix straight from the 1/b definition.
/// `m[i][j]` is the mass of entity `j` on rank `i + 1`.
pub fn dense_drank(scores: &[u64]) -> Vec<Vec<f64>> {
    let n = scores.len();
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        let above = scores.iter().filter(|&&s| s > scores[j]).count();
        let same = scores.iter().filter(|&&s| s == scores[j]).count();
        for row in m.iter_mut().skip(above).take(same) {
            row[j] = 1.0 / same as f64;
        }
    }
    m
}

/// Distributed AP evaluated on the dense matrix.
pub fn dense_dap(scores: &[u64], relevant: &[usize]) -> f64 {
    let m = dense_drank(scores);
    let n = scores.len();
    let mut cumulative = 0.0;
    let mut precision = vec![0.0; n];
    for k in 0..n {
        cumulative += relevant.iter().map(|&j| m[k][j]).sum::<f64>();
        precision[k] = cumulative / (k + 1) as f64;
    }
    let total: f64 = relevant
        .iter()
        .map(|&j| (0..n).map(|k| precision[k] * m[k][j]).sum::<f64>())
        .sum();
    total / relevant.len() as f64
}

/// Classical average precision of a strict ranking by descending score.
pub fn classical_ap(scores: &[u64], relevant: &[usize]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].cmp(&scores[*a]));
    let mut hits = 0;
    let mut sum = 0.0;
    for (k, j) in order.iter().enumerate() {
        if relevant.contains(j) {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Filtered dAP of one query: per answer, drop the other answers and rank
/// the rest densely; averaged over answers.
pub fn dense_filtered_dap(scores: &[u64], answers: &[usize]) -> f64 {
    let mut total = 0.0;
    for &e in answers {
        let kept: Vec<usize> = (0..scores.len()).filter(|j| *j == e || !answers.contains(j)).collect();
        let sub: Vec<u64> = kept.iter().map(|&j| scores[j]).collect();
        let pos = kept.iter().position(|&j| j == e).unwrap();
        total += dense_dap(&sub, &[pos]);
    }
    total / answers.len() as f64
}
