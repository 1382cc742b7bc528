use criterion::{criterion_group, criterion_main, Criterion};
use rmlayer_core::event_bus::{replay, ReplayMode, TraceEntry};
use rmlayer_core::latency::{derive_numerology, target_budget};
use rmlayer_core::{Controller, ControllerConfig, Profile};

fn demo_trace(c: &mut Criterion) {
    let profile = Profile::embedded();
    let trace: Vec<TraceEntry> = (0..64).map(|i| TraceEntry::new(1000, i % 4)).collect();
    c.bench_function("controller_64_events", |b| {
        b.iter(|| {
            let mut ctl = Controller::new(&profile, ControllerConfig::default());
            for e in replay(&trace, ReplayMode::FastForward) {
                ctl.process_event(&e).unwrap();
            }
        })
    });
}

fn budget(c: &mut Criterion) {
    let profile = Profile::embedded();
    let n = derive_numerology(30, 20).unwrap();
    c.bench_function("target_budget", |b| b.iter(|| target_budget(&n, &profile.latency).unwrap()));
}

criterion_group!(benches, demo_trace, budget);
criterion_main!(benches);
