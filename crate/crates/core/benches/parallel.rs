use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use milestone_core::baseline::{score_candidates_with, StubEmbedder};
use milestone_core::detector::Detector;
use milestone_core::gateway::{simulated_limiter, Gateway, MockBackend, MockScript};
use milestone_core::prompting::PuzzleSpec;
use milestone_core::segmentation::{chunk_with, TokenCounter, DEFAULT_TOKEN_BUDGET};
use milestone_core::synth::study_teams;
use milestone_core::transcript::Transcript;
use milestone_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn transcripts() -> Vec<Transcript> {
    study_teams(7).into_iter().map(|t| t.transcript).collect()
}

fn chunking(c: &mut Criterion) {
    let ts = transcripts();
    let counter = TokenCounter::bundled();
    let mut group = c.benchmark_group("chunk_with");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                ts.iter()
                    .map(|t| chunk_with(t, &counter, DEFAULT_TOKEN_BUDGET, exec).unwrap().len())
                    .sum::<usize>()
            })
        });
    }
    group.finish();
}

fn baseline_scoring(c: &mut Criterion) {
    let ts = transcripts();
    let spec = PuzzleSpec::bundled();
    let embedder = StubEmbedder::new(0);
    let mut group = c.benchmark_group("score_candidates");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                for m in &spec.milestones {
                    score_candidates_with(&ts[0], m, &embedder, exec).unwrap();
                }
            })
        });
    }
    group.finish();
}

fn detection(c: &mut Criterion) {
    let ts = transcripts();
    let spec = PuzzleSpec::bundled();
    let counter = Arc::new(TokenCounter::Words);
    let mut group = c.benchmark_group("run_teams");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let backend = Arc::new(MockBackend::new(MockScript::default()));
                let gateway = Gateway::new(backend, simulated_limiter(10_000), counter.clone());
                let detector = Detector::new(&spec, &gateway, &counter, DEFAULT_TOKEN_BUDGET);
                detector.run_teams(&ts, 2, exec).len()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, chunking, baseline_scoring, detection);
criterion_main!(benches);
