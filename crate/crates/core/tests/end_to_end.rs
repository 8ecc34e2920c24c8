use std::collections::BTreeMap;

use inet_core::fixtures::{add_noise, simulate_pendulum, simulate_wave1d, PendulumSpec, WaveSpec};
use inet_core::forms::{AxisRef, ComplexId, Domain, INet};
use inet_core::interpret::{Family, Interpretation};
use inet_core::pipeline::{evaluate_inet, DataEvaluator, EvalConfig, RegionSpec};
use inet_core::search::{astar, root_hypothesis, SearchConfig};
use inet_core::topology::{AxisKind, AxisSpec, Orientation::*};
use inet_core::{Dataset32, Dataset64};

fn pendulum_context() -> INet {
    let mut n = INet::new(vec![AxisRef { name: "t".into(), kind: AxisKind::Time }]);
    n.add_measured("theta", &[0], &[Primary], BTreeMap::new()).unwrap();
    n
}

fn torque(mut n: INet) -> INet {
    let th = n.measured().next().unwrap().id;
    let (om, _) = n.add_topological(th, 0).unwrap();
    let lat = ComplexId { domain: Domain::Latent(0), orientations: vec![Secondary] };
    n.add_latent(th, lat.clone(), &[1]).unwrap();
    let (l, _) = n.add_latent(om, lat, &[0]).unwrap();
    n.add_topological(l, 0).unwrap();
    n
}

#[test]
fn pendulum_search_ranks_torque_and_energy_forms_first() {
    let spec = PendulumSpec::default();
    let d = simulate_pendulum(&spec).unwrap();
    let mut data = Dataset64::new(vec![AxisSpec::time(d.len(), spec.dt)]);
    data.insert("theta", Family::vertices(1), d.values).unwrap();
    let cfg = SearchConfig::default();
    let ev = DataEvaluator { data: &data, config: EvalConfig::default() };
    let out = astar(root_hypothesis(&pendulum_context(), &cfg).unwrap(), &ev, &cfg);
    let classes: Vec<&str> = out.ranked.iter().take(2).map(|i| out.outputs[i].class_key.as_str()).collect();
    assert_eq!(classes, ["d/dt[d/dt[theta]] ; sin(theta)", "1 ; cos(theta) ; d/dt[theta]^2"]);
}

#[test]
fn single_precision_pipeline_recovers_torque_ratio() {
    let spec = PendulumSpec { t_end: 5.0, ..Default::default() };
    let d = simulate_pendulum(&spec).unwrap();
    let mut data = Dataset32::new(vec![AxisSpec::time(d.len(), spec.dt)]);
    data.insert("theta", Family::vertices(1), d.values.iter().map(|&v| v as f32).collect()).unwrap();
    let e = evaluate_inet(&torque(pendulum_context()), &data, &EvalConfig::default()).unwrap();
    let fit = &e.constraints[0].regions[0].fit;
    let sin = fit.column_by_text("sin(theta)").unwrap();
    let acc = fit.column_by_text("d/dt[d/dt[theta]]").unwrap();
    let ratio = fit.slot_coefficient(sin) / fit.slot_coefficient(acc);
    // f32 differences of 1e-3-spaced samples lose about four digits
    assert!((ratio + 9.81).abs() < 0.05 * 9.81, "{ratio}");
}

#[test]
fn wave_balance_fits_speed_per_region() {
    let spec = WaveSpec::default();
    let d = simulate_wave1d(&spec).unwrap();
    let mut data = Dataset64::new(vec![AxisSpec::time(spec.nt, spec.dt), AxisSpec::space("x", spec.nx, spec.dx)]);
    data.insert("u", Family::vertices(2), add_noise(&d.values, 0.01, 1)).unwrap();
    let mut n = INet::new(vec![AxisRef { name: "t".into(), kind: AxisKind::Time }, AxisRef { name: "x".into(), kind: AxisKind::Space }]);
    let u = n.add_measured("u", &[0, 0], &[Primary, Primary], BTreeMap::new()).unwrap();
    let (v, _) = n.add_topological(u, 0).unwrap();
    let (e, _) = n.add_topological(u, 1).unwrap();
    let lat = ComplexId { domain: Domain::Latent(0), orientations: vec![Secondary, Secondary] };
    let (p, _) = n.add_latent(v, lat.clone(), &[0, 1]).unwrap();
    let (s, _) = n.add_latent(e, lat, &[1, 0]).unwrap();
    n.add_topological(p, 0).unwrap();
    n.add_topological(s, 1).unwrap();
    let cfg = EvalConfig {
        interpretation: Interpretation::integral(25, 3),
        regions: Some(RegionSpec { axis: "x".into(), edges: vec![0.5] }),
        ..Default::default()
    };
    let ev = evaluate_inet(&n, &data, &cfg).unwrap();
    for (region, want) in ev.constraints[0].regions.iter().zip([1.0, 4.0]) {
        let f = &region.fit;
        let c2 = (f.slot_coefficient(f.column_by_text("d/dx[d/dx[u]]").unwrap()) / f.slot_coefficient(f.column_by_text("d/dt[d/dt[u]]").unwrap())).abs();
        assert!((c2 - want).abs() < 0.05 * want, "{c2} vs {want}");
    }
}
