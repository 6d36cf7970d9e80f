mod common;

use airnet::fixtures;
use airnet::linalg::lu_solve;
use airnet::network::Network;
use airnet::report::compare;
use airnet::scenario::{run_simulation, synthetic_weather};
use airnet::{solve, AirflowSystem, BoundaryState, SolverConfig, Strategy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_case(seed: u64) -> (Network, BoundaryState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zones = rng.random_range(1..=6);
    fixtures::random_crack_network(&mut rng, zones)
}

fn tight() -> SolverConfig {
    SolverConfig {
        tolerance: 1e-11,
        max_newton_iters: 5000,
        ..SolverConfig::default()
    }
}

fn zeros(net: &Network) -> Vec<f64> {
    vec![0.0; net.zones.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_pressures_pass_independent_recheck(seed in any::<u64>(), s in 0usize..4) {
        let (net, bc) = random_case(seed);
        let cfg = SolverConfig::default();
        let out = solve(&net, &bc, &zeros(&net), Strategy::ALL[s], &cfg).unwrap();
        prop_assert!(out.max_residual <= cfg.tolerance);
        prop_assert!(common::max_residual(&net, &bc, &out.pressures) <= cfg.tolerance * (1.0 + 1e-9));
    }

    #[test]
    fn solution_is_a_picard_fixed_point(seed in any::<u64>()) {
        let (net, bc) = random_case(seed);
        let out = solve(&net, &bc, &zeros(&net), Strategy::PicardWalton, &tight()).unwrap();
        let sys = AirflowSystem::new(&net, &bc, 1e-3).unwrap();
        let lin = sys.picard_system(&out.pressures).unwrap();
        let next = lu_solve(&lin.matrix, &lin.rhs).unwrap().solution.unwrap();
        for (a, b) in next.iter().zip(&out.pressures) {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn strategies_agree(seed in any::<u64>()) {
        let (net, bc) = random_case(seed);
        let results: Vec<Vec<f64>> = Strategy::ALL
            .iter()
            .map(|&s| solve(&net, &bc, &zeros(&net), s, &tight()).unwrap().pressures)
            .collect();
        for other in &results[1..] {
            for (a, b) in other.iter().zip(&results[0]) {
                prop_assert!((a - b).abs() <= f64::max(1e-6, 1e-9 * b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn solution_does_not_depend_on_start(seed in any::<u64>(), s in 0usize..4) {
        let (net, bc) = random_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let start: Vec<f64> = (0..net.zones.len()).map(|_| rng.random_range(-40.0..40.0)).collect();
        let strategy = Strategy::ALL[s];
        let cold = solve(&net, &bc, &zeros(&net), strategy, &tight()).unwrap();
        let warm = solve(&net, &bc, &start, strategy, &tight()).unwrap();
        for (a, b) in warm.pressures.iter().zip(&cold.pressures) {
            prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn balanced_opening_matches_closed_form(mean in 260.0f64..330.0, dt in 2.0f64..120.0) {
        let net = fixtures::two_zone_opening_with(mean, dt);
        let bc = BoundaryState::calm(mean);
        // The closed form has no linear band around the neutral plane.
        let cfg = SolverConfig { dp_lin: 1e-8, ..tight() };
        let out = solve(&net, &bc, &zeros(&net), Strategy::PicardWalton, &cfg).unwrap();
        let flow = out.link_flows.iter().find(|l| l.id == "opening").unwrap();

        // Sharp-edged stratified exchange with zero net flow: the neutral
        // plane divides the height so that √ρ·h^{3/2} balances on each side.
        let (rho_hot, rho_cold) = (common::density(mean + 0.5 * dt), common::density(mean - 0.5 * dt));
        let (w, h, cd) = (1.0, 1.0, 0.6);
        let r = (rho_cold / rho_hot).powf(1.0 / 3.0);
        let upper = h * r / (1.0 + r);
        let expected = cd * w * (2.0 * rho_hot).sqrt() * 2.0 / 3.0
            * (common::G * (rho_cold - rho_hot)).sqrt()
            * upper.powf(1.5);

        prop_assert!((flow.forward - expected).abs() <= 1e-4 * expected, "{} vs {expected}", flow.forward);
        prop_assert!((flow.reverse - expected).abs() <= 1e-4 * expected, "{} vs {expected}", flow.reverse);
    }
}

#[test]
fn picard_initialization_cuts_newton_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = SolverConfig::default();
    let mut nr = Vec::new();
    let mut pnr = Vec::new();
    for _ in 0..120 {
        let zones = rng.random_range(2..=6);
        let (net, bc) = fixtures::random_crack_network(&mut rng, zones);
        nr.push(
            solve(&net, &bc, &zeros(&net), Strategy::Newton, &cfg)
                .unwrap()
                .newton_iters as f64,
        );
        pnr.push(
            solve(&net, &bc, &zeros(&net), Strategy::PicardNewton, &cfg)
                .unwrap()
                .newton_iters as f64,
        );
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mean_nr, mean_pnr) = (mean(&nr), mean(&pnr));
    assert!(median(&mut pnr) < median(&mut nr));
    assert!(mean_nr / mean_pnr >= 2.0, "NR {mean_nr} PNR {mean_pnr}");
}

#[test]
fn simulation_is_deterministic() {
    let net = fixtures::dwelling();
    let weather = synthetic_weather(2, 30, 11);
    let cfg = SolverConfig::default();
    for s in Strategy::ALL {
        let a = run_simulation(&net, &weather, s, &cfg, true).unwrap();
        let b = run_simulation(&net, &weather, s, &cfg, true).unwrap();
        assert_eq!(a, b);
    }
    let a = compare(&net, &weather, &Strategy::ALL, &cfg, false).unwrap();
    let b = compare(&net, &weather, &Strategy::ALL, &cfg, false).unwrap();
    assert_eq!(a.long_csv(), b.long_csv());
    assert_eq!(a.summary_json(), b.summary_json());
}

#[test]
fn warm_and_cold_starts_reach_the_same_states() {
    let net = fixtures::three_storey();
    let weather = synthetic_weather(1, 30, 5);
    let cfg = tight();
    for s in Strategy::ALL {
        let warm = run_simulation(&net, &weather, s, &cfg, true).unwrap();
        let cold = run_simulation(&net, &weather, s, &cfg, false).unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            for (a, b) in w.pressures.iter().zip(&c.pressures) {
                assert!((a - b).abs() <= 1e-6, "{s} {}: {a} vs {b}", w.timestamp);
            }
        }
        let total = |r: &[airnet::scenario::TimestepRecord]| {
            r.iter().map(|x| x.newton_iters).sum::<usize>()
        };
        assert!(total(&warm) <= total(&cold), "{s}");
    }
}

#[test]
fn mechanical_supply_is_balanced_by_envelope() {
    // The dwelling's bathroom extract must leave through the cracks: the sum
    // of all exterior link flows equals the net mechanical flow.
    let net = fixtures::dwelling();
    let bc = BoundaryState::new(3.0, 45.0, 280.0);
    let out = solve(&net, &bc, &zeros(&net), Strategy::PicardWalton, &tight()).unwrap();
    let mut inflow = 0.0;
    for (link, flow) in net.links.iter().zip(&out.link_flows) {
        let from_outside = net.zone_index(&link.from).is_none();
        let to_outside = net.zone_index(&link.to).is_none();
        if from_outside {
            inflow += flow.net;
        }
        if to_outside {
            inflow -= flow.net;
        }
    }
    let mech: f64 = net.zones.iter().map(|z| z.mech_flow).sum();
    assert!((inflow + mech).abs() < 1e-9, "{inflow} {mech}");
}
