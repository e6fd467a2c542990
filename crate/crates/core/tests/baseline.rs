use evcharge::baseline::{
    brute_force_dp, brute_force_oracle, check_schedule, naive_schedule, objective, solve_centralized, Instance,
    PgdOptions, ScheduleMatrix,
};
use evcharge::env::GridConfig;
use evcharge::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A_MAX: f64 = 6.6;

fn grid(n: usize, h: usize, baseline: Vec<f64>) -> GridConfig {
    GridConfig {
        n_agents: n,
        horizon: h,
        baseline_load: baseline,
        ..GridConfig::default()
    }
}

/// Initial level leaving exactly `need_kw_steps` of charging to do.
fn b0_for(g: &GridConfig, need_kw_steps: f64) -> f64 {
    let s = g.ev;
    s.target() - s.tolerance_kwh - need_kw_steps * s.efficiency * g.step_hours
}

fn random_tiny(seed: u64) -> (GridConfig, Instance) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 4;
    let baseline: Vec<f64> = (0..h).map(|_| rng.random_range(0.0..8.0)).collect();
    let g = grid(2, h, baseline);
    let mut windows = Vec::new();
    let mut initial = Vec::new();
    for _ in 0..2 {
        let arr = rng.random_range(0..=2);
        let dep = rng.random_range(arr + 1..=h);
        let units = rng.random_range(0..=((dep - arr) * 20 * 4 / 5));
        windows.push((arr, dep));
        initial.push(b0_for(&g, units as f64 * A_MAX / 20.0));
    }
    (g, Instance { windows, initial_kwh: initial })
}

#[test]
fn symmetric_two_step_instance_splits_evenly() {
    let g = grid(1, 2, vec![]);
    let inst = Instance {
        windows: vec![(0, 2)],
        initial_kwh: vec![b0_for(&g, A_MAX)],
    };
    let sol = solve_centralized(&g, &inst, 1e-9, PgdOptions::default()).unwrap();
    for p in &sol.schedule.powers[0] {
        assert!((p - A_MAX / 2.0).abs() < 1e-6, "{p}");
    }
}

#[test]
fn zero_need_gives_zero_schedule() {
    let base = vec![3.0, 5.0, 1.0];
    let g = grid(2, 3, base.clone());
    let inst = Instance {
        windows: vec![(0, 3), (1, 3)],
        initial_kwh: vec![59.0, 60.0],
    };
    let sol = solve_centralized(&g, &inst, 1e-9, PgdOptions::default()).unwrap();
    assert!(sol.schedule.powers.iter().flatten().all(|&p| p == 0.0));
    let expect: f64 = base.iter().map(|&l| g.price.network_cost(l).unwrap()).sum();
    assert!((sol.objective - expect).abs() < 1e-12);
}

#[test]
fn matches_grid_search_on_tiny_instances() {
    for seed in 0..20 {
        let (g, inst) = random_tiny(seed);
        let pgd = solve_centralized(&g, &inst, 1e-9, PgdOptions { seed, ..PgdOptions::default() }).unwrap();
        let bf = brute_force_oracle(&g, &inst, 21).unwrap();
        check_schedule(&g, &inst, &pgd.schedule, 1e-6).unwrap();
        check_schedule(&g, &inst, &bf.schedule, 1e-9).unwrap();
        let rel = (pgd.objective - bf.objective).abs() / bf.objective;
        assert!(rel < 0.01, "seed {seed}: pgd {} vs grid {}", pgd.objective, bf.objective);
        assert!(pgd.objective <= bf.objective + 1e-9);
    }
}

#[test]
fn dynamic_program_agrees_with_enumeration() {
    for seed in 0..10 {
        let (g, inst) = random_tiny(seed + 100);
        let g3 = GridConfig {
            horizon: 3,
            baseline_load: g.baseline_load[..3].to_vec(),
            ..g
        };
        let inst = Instance {
            windows: inst.windows.iter().map(|&(a, d)| (a.min(2), d.min(3).max(a.min(2) + 1))).collect(),
            initial_kwh: vec![b0_for(&g3, 2.0 * A_MAX / 4.0), b0_for(&g3, 3.0 * A_MAX / 4.0)],
        };
        let full = brute_force_oracle(&g3, &inst, 5).unwrap();
        let dp = brute_force_dp(&g3, &inst, 5).unwrap();
        assert!((full.objective - dp.objective).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn on_off_grid_picks_cheaper_step() {
    let g = grid(1, 2, vec![4.0, 1.0]);
    let inst = Instance {
        windows: vec![(0, 2)],
        initial_kwh: vec![b0_for(&g, A_MAX)],
    };
    let bf = brute_force_oracle(&g, &inst, 2).unwrap();
    assert_eq!(bf.schedule.powers[0], vec![0.0, A_MAX]);
}

#[test]
fn infeasible_instances_are_reported() {
    let g = grid(2, 4, vec![]);
    let inst = Instance {
        windows: vec![(0, 1), (0, 4)],
        initial_kwh: vec![b0_for(&g, 2.0 * A_MAX), 55.0],
    };
    let e = solve_centralized(&g, &inst, 1e-9, PgdOptions::default()).unwrap_err();
    match e {
        Error::Infeasible(msg) => assert!(msg.contains("agent 0") && !msg.contains("agent 1")),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(brute_force_oracle(&g, &inst, 3), Err(Error::Infeasible(_))));
}

#[test]
fn oracle_beats_hand_built_schedules() {
    let (g, inst) = random_tiny(7);
    let bf = brute_force_oracle(&g, &inst, 21).unwrap();
    let naive = naive_schedule(&g, &inst).unwrap();
    // naive snapped up to the grid stays feasible
    let snapped = ScheduleMatrix {
        powers: naive
            .powers
            .iter()
            .map(|r| r.iter().map(|p| ((p / (A_MAX / 20.0)) - 1e-9).ceil().max(0.0) * A_MAX / 20.0).collect())
            .collect(),
    };
    check_schedule(&g, &inst, &snapped, 1e-9).unwrap();
    assert!(bf.objective <= objective(&g, &snapped).unwrap() + 1e-12);
}

#[test]
fn solver_never_loses_to_naive_schedule() {
    for seed in 0..25u64 {
        let mut g = GridConfig::with_agents(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        g.baseline_load = (0..g.horizon).map(|_| rng.random_range(0.0..15.0)).collect();
        let inst = Instance::sample(&g, seed).unwrap();
        let sol = solve_centralized(&g, &inst, 1e-6, PgdOptions { seed, ..PgdOptions::default() }).unwrap();
        check_schedule(&g, &inst, &sol.schedule, 1e-6).unwrap();
        let naive = objective(&g, &naive_schedule(&g, &inst).unwrap()).unwrap();
        assert!(sol.objective <= naive + 1e-9, "seed {seed}");
        assert!(sol.restart_spread() <= 1e-6, "seed {seed}: spread {}", sol.restart_spread());
    }
}
