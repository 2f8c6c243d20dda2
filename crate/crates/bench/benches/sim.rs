use criterion::{criterion_group, criterion_main, Criterion};
use icrw_core::channel::{pathloss_db, FadingLink, PairKey, DEFAULT_SINUSOIDS};
use icrw_core::engine::run;
use icrw_core::icrw::classify_risk;
use icrw_core::{rng, BehaviorMode, ChannelModel, LinkClass, ScenarioConfig, TapProfile, VehicleId};
use std::hint::black_box;

fn risk(c: &mut Criterion) {
    c.bench_function("classify_risk", |b| {
        b.iter(|| {
            let mut n = 0u32;
            for i in 0..100 {
                let tt = i as f64 * 0.05;
                n += classify_risk(black_box(tt), black_box(tt + 0.7), 1.2, 1.0, 1.0, 2.0) as u32;
            }
            n
        })
    });
    c.bench_function("pathloss_db", |b| b.iter(|| pathloss_db(black_box(87.5))));
}

fn fading(c: &mut Criterion) {
    let profile = TapProfile::urban_nlos();
    let mut r = rng::stream(1, "bench", &[]);
    let link = FadingLink::new(
        PairKey::new(VehicleId(0), VehicleId(1)),
        LinkClass::Nlos,
        &profile,
        DEFAULT_SINUSOIDS,
        0.0,
        &mut r,
    )
    .unwrap();
    c.bench_function("gain_direct", |b| {
        let mut t = 0.0;
        b.iter(|| {
            t += 0.1;
            link.gain_linear(black_box(t))
        })
    });
    c.bench_function("gain_lattice", |b| {
        let mut l = link.clone();
        let mut step = 0;
        b.iter(|| {
            step += 1;
            l.gain_linear_at_step(black_box(step), 0.1)
        })
    });
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_60s");
    g.sample_size(10);
    let base = ScenarioConfig {
        sim_duration: 60.0,
        ..ScenarioConfig::default()
    };
    for (name, mode, channel) in [
        ("careful", BehaviorMode::Careful, ChannelModel::Ideal),
        ("ideal", BehaviorMode::Icrw, ChannelModel::Ideal),
        ("emulated", BehaviorMode::Icrw, ScenarioConfig::parse("channel.kind = emu").unwrap().channel),
    ] {
        let cfg = ScenarioConfig {
            behavior_mode: mode,
            channel,
            ..base.clone()
        };
        g.bench_function(name, |b| b.iter(|| run(&cfg).unwrap().collisions.len()));
    }
    g.finish();
}

criterion_group!(benches, risk, fading, simulation);
criterion_main!(benches);
