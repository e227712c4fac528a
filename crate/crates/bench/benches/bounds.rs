use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use posthoc_core::bounds::{bound_count_bruteforce, bound_count_linear, prefix_bounds};
use posthoc_core::harness::sim::{simulate_dataset, SimConfig};
use posthoc_core::templates::{ari_template, hommel_value_sorted, simes_template};
use posthoc_core::{extract_clusters, one_sample_z, p_from_z, sign_flip_null, Connectivity, Sidedness};
use std::hint::black_box;

fn dataset() -> (posthoc_core::SubjectStack, posthoc_core::StatMap, posthoc_core::PValueVector) {
    let data = simulate_dataset(&SimConfig::two_cluster(1)).unwrap();
    let zmap = one_sample_z(&data.stack, &vec![1.0; data.stack.n_subjects()]).unwrap();
    let p = p_from_z(&zmap, Sidedness::TwoSided);
    (data.stack, zmap, p)
}

fn bounds(c: &mut Criterion) {
    let (_, _, p) = dataset();
    let sorted = p.sorted();
    let m = sorted.len();
    let simes = simes_template(m, 0.05, m).unwrap();
    let mut g = c.benchmark_group("bound");
    for s in [100, 1000, 5000] {
        let set = &sorted[..s];
        g.bench_with_input(BenchmarkId::new("linear", s), set, |b, set| {
            b.iter(|| bound_count_linear(black_box(set), &simes).unwrap())
        });
        if s <= 1000 {
            g.bench_with_input(BenchmarkId::new("bruteforce", s), set, |b, set| {
                b.iter(|| bound_count_bruteforce(black_box(set), &simes).unwrap())
            });
        }
    }
    g.bench_function("prefix_all", |b| b.iter(|| prefix_bounds(black_box(&sorted), &simes).unwrap()));
    g.finish();

    c.bench_function("hommel", |b| b.iter(|| hommel_value_sorted(black_box(&sorted), 0.05).unwrap()));
    c.bench_function("ari_template", |b| b.iter(|| ari_template(black_box(&p), 0.05, m).unwrap()));
}

fn null_rows(c: &mut Criterion) {
    let (stack, _, _) = dataset();
    let mut g = c.benchmark_group("sign_flip_null");
    g.sample_size(10);
    g.bench_function("b16", |b| b.iter(|| sign_flip_null(black_box(&stack), 16, 7, Sidedness::TwoSided).unwrap()));
    g.finish();
}

fn labeling(c: &mut Criterion) {
    let (_, zmap, _) = dataset();
    let mut g = c.benchmark_group("clusters");
    for conn in [Connectivity::Six, Connectivity::TwentySix] {
        g.bench_function(format!("{conn:?}"), |b| b.iter(|| extract_clusters(black_box(&zmap), 2.5, conn).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bounds, null_rows, labeling);
criterion_main!(benches);
