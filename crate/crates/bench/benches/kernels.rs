use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mgdesign::builder::{build_master, Levels};
use mgdesign::ccg::rank_events;
use mgdesign::design::Design;
use mgdesign::linearize::{polygon_soc, pwl_quadratic, Radius};
use mgdesign::milp::{MilpBlock, Tag};
use mgdesign::reliability_eval::{analytic_indices, monte_carlo_oracle};
use mgdesign::solver::{solve, SolveParams};
use mgdesign::synthetic::{three_bus_chain, toy_feeder};

fn linearizations(c: &mut Criterion) {
    c.bench_function("polygon_and_pwl_rows", |b| {
        b.iter(|| {
            let mut block = MilpBlock::new();
            for _ in 0..100 {
                let p = block.free("p");
                let q = block.free("q");
                polygon_soc(&mut block, p, q, Radius::Const(black_box(250.0)), 12, Tag::LineRating).unwrap();
                pwl_quadratic(&mut block, p, 250.0, 10, Tag::PwlTangent).unwrap();
            }
            block.num_rows()
        })
    });
}

fn ranking(c: &mut Criterion) {
    let cfg = toy_feeder();
    c.bench_function("rank_events_toy", |b| b.iter(|| rank_events(black_box(&cfg))));
}

fn reliability(c: &mut Criterion) {
    let toy = toy_feeder();
    let design = Design::empty(&toy);
    c.bench_function("analytic_indices_toy", |b| b.iter(|| analytic_indices(&toy, black_box(&design), &[]).unwrap()));
    let chain = three_bus_chain();
    let empty = Design::empty(&chain);
    c.bench_function("monte_carlo_chain_2000y", |b| {
        b.iter(|| monte_carlo_oracle(&chain, &empty, &[], 2_000, black_box(5)).unwrap())
    });
}

fn base_solve(c: &mut Criterion) {
    let cfg = toy_feeder();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("toy_base_master", |b| {
        b.iter(|| {
            let m = build_master(&cfg, Levels::BASE, &[]).unwrap();
            solve(&m.block, &SolveParams::default()).unwrap().objective
        })
    });
    g.finish();
}

criterion_group!(kernels, linearizations, ranking, reliability, base_solve);
criterion_main!(kernels);
