use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fedcs::accountant::log_moment;
use fedcs::bpdn::{solve_chunk, SolverOptions};
use fedcs::codec::{Codec, SensingConfig};
use fedcs::dct::Dct;
use fedcs::secure_agg::{self, RingParams};

fn signal(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect()
}

fn dct(c: &mut Criterion) {
    let mut g = c.benchmark_group("dct");
    // 728 and 1024 are smooth, 1018 = 2·509 is not.
    for len in [728, 1018, 1024, 4096] {
        let t = Dct::new(len).unwrap();
        let x = signal(len);
        let mut out = vec![0.0; len];
        g.bench_with_input(BenchmarkId::new("forward", len), &len, |b, _| b.iter(|| t.forward_into(black_box(&x), &mut out)));
        g.bench_with_input(BenchmarkId::new("inverse", len), &len, |b, _| b.iter(|| t.inverse_into(black_box(&x), &mut out)));
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_chunk");
    g.sample_size(20);
    let codec = Codec::new(SensingConfig::new(728, 73, 1, 3).unwrap()).unwrap();
    let y = codec.compress(&signal(728)).unwrap();
    for max_iters in [20, 100] {
        let opts = SolverOptions { lambda: 1e-3, max_iters, continuation: Some(0.1), ..Default::default() };
        g.bench_with_input(BenchmarkId::new("max_iters", max_iters), &opts, |b, o| {
            b.iter(|| solve_chunk(&codec, black_box(&y.coeffs), o).unwrap())
        });
    }
    g.finish();
}

fn accountant(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_moment");
    for lambda in [1, 16, 64] {
        g.bench_with_input(BenchmarkId::new("lambda", lambda), &lambda, |b, &l| {
            b.iter(|| log_moment(black_box(l), 1.54, 1.0 / 60.0).unwrap())
        });
    }
    g.finish();
}

fn masking(c: &mut Criterion) {
    let ring = RingParams::new(1 << 10, 20).unwrap();
    let (k, dim) = (100, 1000);
    let masks = secure_agg::gen_masks(k, dim, &ring, 1);
    let v = signal(dim);
    let shares: Vec<_> = masks.iter().map(|m| secure_agg::encrypt(&v, m, &ring).unwrap()).collect();
    c.bench_function("secure_agg/gen_masks_100x1000", |b| b.iter(|| secure_agg::gen_masks(k, dim, &ring, black_box(2))));
    c.bench_function("secure_agg/aggregate_100x1000", |b| b.iter(|| secure_agg::aggregate(black_box(&shares), k).unwrap()));
}

criterion_group!(benches, dct, solver, accountant, masking);
criterion_main!(benches);
