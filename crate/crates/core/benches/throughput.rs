//! Sequential against parallel execution for the data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use synsum_core::learning::structure_of;
use synsum_core::notegen::{plan_corpus, DescriptorBank};
use synsum_core::reference::{synsum_network, synsum_spec};
use synsum_core::{
    evaluate, learn_network_with, sample_dataset_with, Dataset, EvidenceSetting, Execution, InferenceEngine,
    LearnConfig, MentionPolicy, NoteContext, SampleConfig,
};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sampling(c: &mut Criterion) {
    let net = synsum_network();
    let mut group = c.benchmark_group("sample");
    let count = 10_000;
    group.throughput(Throughput::Elements(count as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, count), |b| {
            b.iter(|| sample_dataset_with(&net, SampleConfig { seed: black_box(1), count }, exec).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let spec = synsum_spec();
    let net = synsum_network();
    let test = Dataset::new(
        &spec,
        sample_dataset_with(&net, SampleConfig { seed: 2, count: 500 }, Execution::Parallel).unwrap(),
    );
    let engine = InferenceEngine::new(net);
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.throughput(Throughput::Elements(test.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, test.len()), |b| {
            b.iter(|| evaluate(&engine, &test, &EvidenceSetting::ALL, exec).unwrap())
        });
    }
    group.finish();
}

fn learning(c: &mut Criterion) {
    let spec = synsum_spec();
    let net = synsum_network();
    let train = Dataset::new(
        &spec,
        sample_dataset_with(&net, SampleConfig { seed: 3, count: 8000 }, Execution::Parallel).unwrap(),
    );
    let structure = structure_of(&spec);
    let mut group = c.benchmark_group("learn");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, train.len()), |b| {
            b.iter(|| learn_network_with(&train, &structure, &LearnConfig::default(), exec).unwrap())
        });
    }
    group.finish();
}

fn planning(c: &mut Criterion) {
    let net = synsum_network();
    let ctx = NoteContext::new(&net).unwrap();
    let records = sample_dataset_with(&net, SampleConfig { seed: 4, count: 10_000 }, Execution::Parallel).unwrap();
    let (policy, bank) = (MentionPolicy::default(), DescriptorBank::default());
    let mut group = c.benchmark_group("plan");
    group.throughput(Throughput::Elements(records.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, records.len()), |b| {
            b.iter(|| plan_corpus(&ctx, &records, &policy, &bank, black_box(5), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, evaluation, learning, planning);
criterion_main!(benches);
