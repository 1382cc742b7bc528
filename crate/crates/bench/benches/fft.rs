use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rmlayer_testbench::{fixed_input, float_input};
use rmlayer_core::fft::{FftSize, FixedFftPlan, FloatFftPlan};

fn float_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_float");
    for size in FftSize::CONTROLLER_SIZES {
        let plan = FloatFftPlan::new(size);
        let input = float_input(size);
        group.throughput(Throughput::Elements(size.points() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(size), &input, |b, x| {
            b.iter(|| plan.forward(x).unwrap())
        });
    }
    group.finish();
}

fn fixed_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_fixed");
    for size in FftSize::CONTROLLER_SIZES {
        let plan = FixedFftPlan::new(size);
        let input = fixed_input(size);
        group.throughput(Throughput::Elements(size.points() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(size), &input, |b, x| {
            b.iter(|| plan.forward(x).unwrap())
        });
    }
    group.finish();
}

fn plan_creation(c: &mut Criterion) {
    c.bench_function("plan_float_4096", |b| b.iter(|| FloatFftPlan::new(FftSize::P4096)));
}

criterion_group!(benches, float_forward, fixed_forward, plan_creation);
criterion_main!(benches);
