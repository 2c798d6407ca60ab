use criterion::{criterion_group, criterion_main, Criterion};

use rcsp::explorer::{explore_system, SystemBounds};
use rcsp::ll::ConfigLL;
use rcsp::parse_program;

fn chain3() -> ConfigLL {
    let src = include_str!("../programs/chain3.rcsp");
    ConfigLL::initial(&parse_program(src).unwrap())
}

fn system(c: &mut Criterion) {
    let start = chain3();
    let mut g = c.benchmark_group("chain3 depth 20");
    g.sample_size(10);
    for parallel in [false, true] {
        let b = SystemBounds { parallel, ..SystemBounds::new(20, 1) };
        let label = if parallel { "parallel" } else { "sequential" };
        g.bench_function(label, |bench| bench.iter(|| explore_system(&start, &b).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, system);
criterion_main!(benches);
