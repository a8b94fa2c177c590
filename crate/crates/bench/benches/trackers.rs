use beamtrack_bench::{channel, default_codebook, network, rng, small_dataset, windows};
use beamtrack_core::channel::{beam_sweep, measure};
use beamtrack_core::particle_filter::{pf_init, pf_step};
use beamtrack_core::rnn::{backward, forward_trace, train, TrainConfig};
use beamtrack_core::PfConfig;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

fn sweep(c: &mut Criterion) {
    let cb = default_codebook();
    let state = channel(12.3);
    let mut r = rng(1);
    c.bench_function("beam_sweep_181", |b| {
        b.iter(|| beam_sweep(black_box(&state), &cb, 1.0, 0.0, 1e-4, &mut r).unwrap())
    });
}

fn particle_filter(c: &mut Criterion) {
    let cb = default_codebook();
    let state = channel(12.3);
    let cfg = PfConfig::default();
    let mut r = rng(2);
    let spectrum = beam_sweep(&state, &cb, 1.0, 0.0, 1e-4, &mut r).unwrap();
    let ps = pf_init(&cfg, &spectrum, &cb, &mut r).unwrap();
    let beam = cb.vector(spectrum.main_index());
    let z = measure(cb.geometry(), &state, beam, 1.0, 0.05, &mut r).unwrap();
    c.bench_function("pf_step_100", |b| {
        b.iter_batched(
            || ps.clone(),
            |ps| pf_step(ps, z, beam, &cfg, 1.0, cb.geometry(), &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn lstm(c: &mut Criterion) {
    let (l, hidden, steps) = (8, 16, 8);
    let net = network(l, hidden);
    let xs = windows(l, steps);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let mut target = vec![0.0; 2 * l + 1];
    target[l] = 1.0;
    c.bench_function("network_forward_L8_h16_ctx8", |b| {
        b.iter(|| forward_trace(&net, black_box(&refs)).unwrap())
    });
    let cache = forward_trace(&net, &refs).unwrap();
    let mut grads = net.zeros_like();
    c.bench_function("network_backward_L8_h16_ctx8", |b| {
        b.iter(|| backward(&net, black_box(&cache), &target, &mut grads))
    });
}

fn training(c: &mut Criterion) {
    let data = small_dataset();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let net = network(data.half_width, cfg.hidden_dim);
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function(format!("epoch_{}_pairs", data.pair_count()), |b| {
        b.iter_batched(
            || net.clone(),
            |net| train(net, &data, &cfg, &mut rng(3)).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, sweep, particle_filter, lstm, training);
criterion_main!(benches);
