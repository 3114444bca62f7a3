use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use vrpsa::pipeline::{check_budget, phase1_routes, FleetMode};
use vrpsa::{expand_graph, prune_network, solve_vrpsa, GenParams, PipelineConfig};
use vrpsa_bench::{benchmark, random_intervals};

fn budget(c: &mut Criterion) {
    let iv = random_intervals(2_000, 1_000.0, 7);
    c.bench_function("check_budget/2000", |b| b.iter(|| check_budget(black_box(&iv), 20)));
}

fn expansion(c: &mut Criterion) {
    let inst = benchmark("P-n16-k8", &GenParams::default());
    let cs = inst.customer_nodes();
    c.bench_function("prune_expand/P-n16-k8", |b| {
        b.iter(|| {
            let pn = prune_network(&inst.network, &cs, inst.depot, inst.eta1, inst.eta2).unwrap();
            expand_graph(&pn, inst.layers, &cs, inst.depot).unwrap()
        })
    });
}

fn routing(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for name in ["P-n16-k8", "P-n22-k8"] {
        let inst = benchmark(name, &GenParams::default());
        g.bench_function(format!("phase1/{name}"), |b| {
            b.iter(|| phase1_routes(&inst, FleetMode::AvOnly, 0).unwrap())
        });
        g.bench_function(format!("solve/{name}"), |b| {
            b.iter(|| solve_vrpsa(&inst, &PipelineConfig::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, budget, expansion, routing);
criterion_main!(benches);
