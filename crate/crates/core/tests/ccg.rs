use mgdesign::builder::{all_events, EventId, Levels};
use mgdesign::ccg::{evaluate_fixed_design, rank_events, run, CcgOptions};
use mgdesign::design::Design;
use mgdesign::model::{validate_scenario, DerKind, ScenarioConfig};
use mgdesign::solver::SolveParams;
use mgdesign::synthetic::toy_feeder;
use mgdesign::Error;

fn quick(cfg: &ScenarioConfig) -> CcgOptions {
    let mut o = CcgOptions::from_cfg(cfg);
    o.n0 = 1;
    o
}

fn spiked(kw: f64) -> ScenarioConfig {
    let mut cfg = toy_feeder();
    cfg.days[0].demand_kw[5][2] += kw;
    validate_scenario(cfg).unwrap()
}

fn unit<'a>(d: &'a Design, kind: DerKind, bus: &str) -> Option<&'a mgdesign::design::DerInstallation> {
    d.units.iter().find(|u| u.kind == kind && u.bus == bus && u.installed)
}

#[test]
fn single_event_universe_converges_immediately() {
    let cfg = toy_feeder();
    let id = rank_events(&cfg)[0];
    let mut o = quick(&cfg);
    o.events = Some(vec![id]);
    let out = run(&cfg, Levels::FULL, &o).unwrap();
    assert_eq!(out.state.iterations, 1);
    assert!(out.state.converged);
    assert!(out.state.relative_gap() <= o.eps, "gap {}", out.state.relative_gap());
    assert_eq!(out.events.len(), 1);
}

#[test]
fn infeasible_designs_add_the_top_ranked_failing_event() {
    let cfg = spiked(200.0);
    let out = run(&cfg, Levels::FULL, &quick(&cfg)).unwrap();
    let log = &out.state.log;
    assert_eq!(log.len(), 2);
    assert!(log[0].ub.is_infinite());
    assert_eq!(log[0].infeasible_events, 12);
    assert_eq!(log[0].added, Some(EventId { day: 0, hour: 18 }));
    assert!(out.state.converged);
    assert_eq!(log[1].infeasible_events, 0);

    let dg = unit(&out.design, DerKind::Dg, "b1").expect("generator at b1");
    assert!((dg.s_max_kva - 179.0).abs() < 5.0, "DG {}", dg.s_max_kva);
    let st = unit(&out.design, DerKind::Storage, "b3").expect("storage at b3");
    assert!((st.s_max_kva - 196.0).abs() < 8.0, "storage {}", st.s_max_kva);
    assert!((st.e_max_kwh.unwrap() - 589.0).abs() < 25.0);
}

#[test]
fn unservable_spike_makes_the_master_infeasible() {
    let cfg = spiked(250.0);
    match run(&cfg, Levels::FULL, &quick(&cfg)) {
        Err(Error::MasterInfeasible { .. }) => {}
        other => panic!("expected an infeasible master, got {other:?}"),
    }
}

#[test]
fn default_warm_start_is_islanding_feasible_at_once() {
    let cfg = toy_feeder();
    let o = CcgOptions::from_cfg(&cfg);
    assert_eq!(o.n0, 24);
    let out = run(&cfg, Levels::FULL, &o).unwrap();
    assert_eq!(out.state.log[0].infeasible_events, 0);
    assert!(out.state.converged);
}

#[test]
fn iteration_log_is_deterministic() {
    let cfg = toy_feeder();
    let a = run(&cfg, Levels::FULL, &quick(&cfg)).unwrap();
    let b = run(&cfg, Levels::FULL, &quick(&cfg)).unwrap();
    let strip = |s: &mgdesign::ccg::CcgState| {
        s.log
            .iter()
            .map(|r| (r.iteration, r.lb, r.ub, r.added, r.infeasible_events, r.installed_kva))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.state), strip(&b.state));
    assert_eq!(a.design, b.design);
}

#[test]
fn fixed_evaluation_reproduces_the_islanding_cost() {
    let cfg = toy_feeder();
    let out = run(&cfg, Levels::FULL, &quick(&cfg)).unwrap();
    let ev = evaluate_fixed_design(&cfg, &out.design, Levels::FULL, &SolveParams::default(), 1).unwrap();
    assert!(ev.islandable());
    let from_run: f64 = out.events.iter().map(|e| e.cost).sum();
    let rel = (ev.costs.resilience - from_run).abs() / from_run.abs().max(1.0);
    assert!(rel < 1e-6, "{} vs {from_run}", ev.costs.resilience);
}

#[test]
fn passive_feeder_pays_full_interruption_cost() {
    let cfg = toy_feeder();
    let ev = evaluate_fixed_design(&cfg, &Design::empty(&cfg), Levels::FULL, &SolveParams::default(), 1).unwrap();
    assert_eq!(ev.infeasible_events().len(), all_events(&cfg).len());
    // Each clock hour falls in the k-th hour of exactly one event start,
    // so summing over starts and durations gives p·E[D]·Σ demand·c.
    let isl = &cfg.islanding;
    let c = &cfg.reliability.cost_not_supplied;
    let mut expected = 0.0;
    for day in &cfg.days {
        let dmd: f64 = day.demand_kw.iter().map(|row| row.iter().zip(c).map(|(p, c)| p * c).sum::<f64>()).sum();
        expected += day.weight * dmd;
    }
    expected *= isl.occurrence_probability * isl.expected_duration();
    let rel = (ev.costs.resilience - expected).abs() / expected;
    assert!(rel < 1e-9, "{} vs {expected}", ev.costs.resilience);
}

#[test]
fn invalid_options_are_rejected() {
    let cfg = toy_feeder();
    let mut o = quick(&cfg);
    o.n0 = 0;
    assert!(matches!(run(&cfg, Levels::FULL, &o), Err(Error::InvalidArgument(_))));
    assert!(matches!(run(&cfg, Levels::BASE, &quick(&cfg)), Err(Error::InvalidArgument(_))));
}
