use criterion::{criterion_group, criterion_main, Criterion};
use prunekit::harness::{base_pose_grid, TreeCase};
use prunekit::kinematics::{default_chain, ik_diverse_set, IkParams};
use prunekit::planner::{cut_request, plan_with, PlanSettings, PlannerConfig, Strategy};
use prunekit::treemodel::{synth_tree, SynthParams};

fn planning(c: &mut Criterion) {
    let chain = default_chain();
    let target = chain.forward_kinematics(&chain.home()).unwrap();
    c.bench_function("ik_diverse_set_16", |b| {
        b.iter(|| ik_diverse_set(&chain, &target, 16, 3, &IkParams::default()))
    });
    c.bench_function("jacobian", |b| {
        b.iter(|| chain.jacobian_and_pose(chain.home().as_slice()))
    });
    c.bench_function("forward_kinematics", |b| {
        b.iter(|| chain.ee_transform(chain.home().as_slice()))
    });

    let (graph, _) = synth_tree(2, &SynthParams::default()).unwrap();
    let placed = chain.with_base(base_pose_grid(&graph).unwrap()[0]);
    let case = TreeCase::new("tree", graph);
    let settings = PlanSettings::default();
    let request = cut_request(
        Some(&case.graph),
        &case.cuts[0],
        &placed.home(),
        &settings,
        0,
    );
    let cfg = PlannerConfig::default();
    let mut group = c.benchmark_group("plan_one_cut");
    group.sample_size(10);
    for (name, strategy) in [
        ("holistic", Strategy::holistic()),
        ("two_stage", Strategy::two_stage()),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| plan_with(&case.world, &placed, &request, &strategy, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, planning);
criterion_main!(benches);
