use criterion::{criterion_group, criterion_main, Criterion};
use qpipe_bench::sample_tensor;
use qpipe_core::quant::{
    build_histogram, dequantize, directed_search, estimate_laplace, pack_codes, quantize,
    unpack_codes, Bitwidth,
};
use qpipe_core::wire::{decode_frame, encode_frame};
use std::hint::black_box;

fn bench_quantize(c: &mut Criterion) {
    let t = sample_tensor(8192);
    let mut group = c.benchmark_group("quantize_8k");
    for q in [Bitwidth::B2, Bitwidth::B8, Bitwidth::B16] {
        group.bench_function(format!("q{}", q.bits()), |b| {
            b.iter(|| quantize(black_box(&t), q, None).unwrap())
        });
    }
    group.finish();

    let qt = quantize(&t, Bitwidth::B8, None).unwrap();
    c.bench_function("dequantize_8k_q8", |b| {
        b.iter(|| dequantize(black_box(&qt)).unwrap())
    });
}

fn bench_pack(c: &mut Criterion) {
    let t = sample_tensor(8192);
    let mut group = c.benchmark_group("pack_8k");
    for q in [Bitwidth::B2, Bitwidth::B6, Bitwidth::B16] {
        let codes = quantize(&t, q, None).unwrap().codes;
        group.bench_function(format!("pack_q{}", q.bits()), |b| {
            b.iter(|| pack_codes(black_box(&codes), q).unwrap())
        });
        let packed = pack_codes(&codes, q).unwrap();
        group.bench_function(format!("unpack_q{}", q.bits()), |b| {
            b.iter(|| unpack_codes(black_box(&packed), q, codes.len()).unwrap())
        });
    }
    group.finish();
}

fn bench_directed_search(c: &mut Criterion) {
    let t = sample_tensor(8192);
    let d_r = build_histogram(&t, 2048).unwrap();
    let p0 = estimate_laplace(&t).unwrap();
    c.bench_function("directed_search_2048bins_100steps", |b| {
        b.iter(|| directed_search(black_box(&d_r), black_box(&p0), 100).unwrap())
    });
    c.bench_function("build_histogram_8k_2048bins", |b| {
        b.iter(|| build_histogram(black_box(&t), 2048).unwrap())
    });
}

fn bench_frame(c: &mut Criterion) {
    let t = sample_tensor(8192);
    let qt = quantize(&t, Bitwidth::B4, None).unwrap();
    c.bench_function("encode_frame_8k_q4", |b| {
        b.iter(|| encode_frame(0, 0, black_box(&qt)).unwrap())
    });
    let bytes = encode_frame(0, 0, &qt).unwrap();
    c.bench_function("decode_frame_8k_q4", |b| {
        b.iter(|| decode_frame(black_box(&bytes)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_quantize,
    bench_pack,
    bench_directed_search,
    bench_frame
);
criterion_main!(benches);
