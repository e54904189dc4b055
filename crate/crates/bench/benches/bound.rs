use criterion::{criterion_group, criterion_main, Criterion};

use hbf_papr::bound::solve_bound;
use hbf_papr::hbf::digital_twin;
use hbf_papr::{BoundProblem, BoundVariant};
use hbf_papr_bench::Fixture;

fn bounds(c: &mut Criterion) {
    let fx = Fixture::desk(1).unwrap();
    let x = digital_twin(&fx.precoder, &fx.symbols[0]).unwrap().into_data();
    let max_power = fx.cfg.evm_budget * fx.symbols[0].frobenius_norm();
    let mut g = c.benchmark_group("solve_bound_desk");
    g.sample_size(10);
    for v in BoundVariant::ALL {
        let problem = BoundProblem::new(x.clone(), fx.precoder.matrix().clone(), fx.cfg.n_sc, max_power, v).unwrap();
        g.bench_function(v.name(), |b| b.iter(|| solve_bound(&problem, 1e-3, 20_000).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bounds);
criterion_main!(benches);
