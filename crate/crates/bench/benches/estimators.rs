use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wavica::estimators::{b2_ustat, c2_plugin, d2_brute, d2_fast, delta2_ustat, two_sample_split};
use wavica::WaveletSpec;
use wavica_bench::uniform_sample;

fn plug_in(c: &mut Criterion) {
    let mut group = c.benchmark_group("c2_plugin");
    for (order, level) in [(1, 3), (2, 3), (4, 2)] {
        let spec = WaveletSpec::new(order, level).unwrap();
        let table = spec.table().unwrap();
        let s = uniform_sample(2000, 2, 1);
        group.bench_with_input(BenchmarkId::new(format!("D{}", 2 * order), level), &s, |b, s| {
            b.iter(|| c2_plugin(black_box(s), spec, &table).unwrap())
        });
    }
    group.finish();
}

fn u_statistics(c: &mut Criterion) {
    let spec = WaveletSpec::new(2, 2).unwrap();
    let table = spec.table().unwrap();
    let s = uniform_sample(2000, 2, 2);
    c.bench_function("b2_ustat/D4/n2000", |b| b.iter(|| b2_ustat(black_box(&s), spec, &table).unwrap()));

    let (r, p) = two_sample_split(&s).unwrap();
    c.bench_function("delta2_ustat/D4/n2000", |b| {
        b.iter(|| delta2_ustat(black_box(&r), black_box(&p), spec, &table).unwrap())
    });

    let mut group = c.benchmark_group("d2");
    for n in [250, 1000, 4000] {
        let s = uniform_sample(n, 2, 3);
        group.bench_with_input(BenchmarkId::new("fast", n), &s, |b, s| {
            b.iter(|| d2_fast(black_box(s), spec, &table).unwrap())
        });
    }
    let small = uniform_sample(10, 2, 4);
    group.bench_function("brute/10", |b| b.iter(|| d2_brute(black_box(&small), spec, &table).unwrap()));
    group.finish();
}

criterion_group!(benches, plug_in, u_statistics);
criterion_main!(benches);
