use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mark0_core::{run_seed, Economy, ScenarioConfig, StepContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for firms in [1000usize, 5000] {
        let mut config = ScenarioConfig::preset("floating").unwrap();
        config.parameters.n_firms = firms;
        let p = &config.parameters;
        let ctx = StepContext {
            params: p,
            central_bank: &config.central_bank,
            hooks: &config.interventions,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut economy = Economy::seeded(p, &config.central_bank, config.run.start, &mut rng);
        // Settle away from the uniform initial state first.
        for _ in 0..200 {
            let drivers = config.shocks.drivers(economy.month, p.zeta0);
            economy.step(&ctx, &drivers, &mut rng).unwrap();
        }
        group.throughput(Throughput::Elements(firms as u64));
        group.bench_with_input(BenchmarkId::from_parameter(firms), &firms, |b, _| {
            b.iter_batched_ref(
                || (economy.clone(), rng.clone()),
                |(e, r)| {
                    let drivers = config.shocks.drivers(e.month, p.zeta0);
                    e.step(&ctx, &drivers, r).unwrap()
                },
                criterion::BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let mut config = ScenarioConfig::preset("anchored").unwrap();
    config.parameters.n_firms = 1000;
    config.run.equilibration_months = 200;
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    group.bench_function("1000 firms, 344 months", |b| b.iter(|| run_seed(&config, 7, None).unwrap()));
    group.finish();
}

criterion_group!(benches, step, full_run);
criterion_main!(benches);
