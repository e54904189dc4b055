use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hbf_papr::dft::Dft;
use hbf_papr::hbf::{digital_twin, digital_twin_direct};
use hbf_papr::tone::{
    blockwise_peaks, build_sinc, dense_ls_project_band, sparse_reduce, threshold_excess, windowed_kernel,
};
use hbf_papr::{Pipeline, PipelineParams};
use hbf_papr_bench::Fixture;

fn tone_reservation(c: &mut Criterion) {
    let fx = Fixture::reference(1).unwrap();
    let kernel = build_sinc(fx.cfg.n_fft, fx.cfg.n_sc).unwrap();
    let dft = Dft::new(fx.cfg.n_fft);
    let twin = digital_twin(&fx.precoder, &fx.symbols[0]).unwrap();
    let x = twin.stream_slice(0).to_vec();
    let rms = (x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64).sqrt();
    let y = threshold_excess(&x, 1.76 * rms);
    let peaks = blockwise_peaks(&y, fx.cfg.n_b).unwrap();
    let short = windowed_kernel(&kernel, 65).unwrap();

    let mut g = c.benchmark_group("reduce_one_antenna");
    g.bench_function("sparse", |b| {
        b.iter(|| sparse_reduce(black_box(&x), &peaks, &kernel).unwrap())
    });
    g.bench_function("sparse_windowed", |b| {
        b.iter(|| sparse_reduce(black_box(&x), &peaks, &short).unwrap())
    });
    g.bench_function("dense", |b| {
        b.iter(|| {
            let dx = dense_ls_project_band(black_box(&y), &kernel, &dft).unwrap();
            x.iter().zip(&dx).map(|(a, d)| a - d).collect::<Vec<_>>()
        })
    });
    g.finish();
}

fn twin(c: &mut Criterion) {
    let fx = Fixture::reference(1).unwrap();
    let z = &fx.symbols[0];
    let mut g = c.benchmark_group("digital_twin");
    g.sample_size(20);
    g.bench_function("fft", |b| b.iter(|| digital_twin(&fx.precoder, black_box(z)).unwrap()));
    g.bench_function("direct", |b| {
        b.iter(|| digital_twin_direct(&fx.precoder, black_box(z)).unwrap())
    });
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline_symbol");
    g.sample_size(10);
    for (name, fx) in [
        ("desk", Fixture::desk(1).unwrap()),
        ("reference", Fixture::reference(1).unwrap()),
    ] {
        let p = Pipeline::new(&fx.cfg, fx.precoder.clone(), PipelineParams::trained()).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| p.process_symbol(black_box(&fx.symbols[0])).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tone_reservation, twin, pipeline);
criterion_main!(benches);
