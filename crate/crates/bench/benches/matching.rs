use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gpar_bench::synthetic;
use gpar_core::{enumerate_candidates, CandidateConfig, Direction, Matcher, RelationId};

fn frontiers(c: &mut Criterion) {
    let graph = synthetic(2000, 8, 20_000, 1).train_graph();
    let cfg = CandidateConfig { max_len: 3, pair_sample_cap: Some(200), seed: 0 };
    let patterns = enumerate_candidates(&graph, RelationId(0), &cfg);
    let anchors: Vec<_> = graph.entities().take(200).collect();
    let mut matcher = Matcher::new();
    c.bench_function("frontier_len3_200_anchors", |b| {
        b.iter(|| {
            let mut total = 0usize;
            for p in patterns.iter().take(50) {
                for &a in &anchors {
                    total += matcher.frontier(&graph, p, a, Direction::Tail).len();
                }
            }
            black_box(total)
        })
    });
}

fn candidates(c: &mut Criterion) {
    let graph = synthetic(2000, 8, 20_000, 2).train_graph();
    let cfg = CandidateConfig { max_len: 3, pair_sample_cap: Some(500), seed: 0 };
    c.bench_function("enumerate_candidates_len3", |b| {
        b.iter(|| black_box(enumerate_candidates(&graph, RelationId(1), &cfg).len()))
    });
}

criterion_group!(benches, frontiers, candidates);
criterion_main!(benches);
