use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csat_core::audio::{AudioConfig, LfbeExtractor};
use csat_core::corpus::FoldAssignment;
use csat_core::crossval::{crossval_spearman, ScoredConversation};
use csat_core::csat::{BlstmTrainConfig, CsatModelConfig, ModelKind};
use csat_core::synthetic::{analytic_correlation, generate_synthetic, GeneratorConfig};
use csat_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn scored(n: usize) -> (Vec<ScoredConversation>, FoldAssignment) {
    let synth = generate_synthetic(&GeneratorConfig::tail_link(1, n), Execution::Parallel).unwrap();
    let data: Vec<ScoredConversation> = synth
        .corpus
        .strip_feedback()
        .conversations
        .into_iter()
        .map(|c| ScoredConversation {
            scores: c.annotated_scores().unwrap(),
            id: c.id,
            csat: c.csat,
        })
        .collect();
    let assignment: BTreeMap<String, usize> = data.iter().enumerate().map(|(i, c)| (c.id.clone(), i % 5)).collect();
    (data, FoldAssignment { k: 5, seed: 0, assignment })
}

fn crossval(c: &mut Criterion) {
    let (data, folds) = scored(200);
    let mut group = c.benchmark_group("crossval_blstm");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = CsatModelConfig {
            model: ModelKind::Blstm,
            train: BlstmTrainConfig {
                epochs: 2,
                execution: exec,
                ..Default::default()
            },
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| crossval_spearman(&cfg, black_box(&data), &folds, exec).unwrap())
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthetic");
    group.sample_size(10);
    let cfg = GeneratorConfig::mean_link(3, 2000);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("generate_2000", name), |b| {
            b.iter(|| generate_synthetic(black_box(&cfg), exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("oracle_50x400", name), |b| {
            b.iter(|| analytic_correlation(black_box(&cfg), 400, 50, exec).unwrap())
        });
    }
    group.finish();
}

fn lfbe(c: &mut Criterion) {
    let ex = LfbeExtractor::new(&AudioConfig::default(), 16000).unwrap();
    let clips: Vec<Vec<f64>> = (0..64)
        .map(|k| (0..16000).map(|i| (0.01 * (i * (k + 1)) as f64).sin()).collect())
        .collect();
    let mut group = c.benchmark_group("lfbe_64_clips");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.try_map(&clips, |s| ex.extract(s)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, crossval, generation, lfbe);
criterion_main!(benches);
