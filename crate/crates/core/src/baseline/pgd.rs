use super::{BaselineSolution, Instance, Prepared, ScheduleMatrix};
use crate::env::GridConfig;
use crate::par::Exec;
use crate::rng::{Component, SeedStreams};
use crate::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once no coordinate moves by more than this (kW).
    pub step_tol: f64,
    pub seed: u64,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 200_000,
            step_tol: 1e-12,
            seed: 0,
        }
    }
}

/// Euclidean projection of `y` onto `{x ∈ [0, u]^n : Σx = s}` via bisection on
/// the shift `λ` in `clip(y − λ, 0, u)`.
pub(crate) fn project_capped_simplex(y: &mut [f64], u: f64, s: f64) {
    if y.is_empty() {
        return;
    }
    if s <= 0.0 {
        y.fill(0.0);
        return;
    }
    if s >= u * y.len() as f64 {
        y.fill(u);
        return;
    }
    let total = |lam: f64, y: &[f64]| y.iter().map(|v| (v - lam).clamp(0.0, u)).sum::<f64>();
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - u;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid, y) > s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    let lam = 0.5 * (lo + hi);
    for v in y.iter_mut() {
        *v = (*v - lam).clamp(0.0, u);
    }
}

fn run_once(p: &Prepared, start: ScheduleMatrix, opts: &PgdOptions) -> (ScheduleMatrix, usize, bool) {
    let n = p.n_agents();
    let l_max = p.specs.iter().map(|s| s.max_power_kw).sum::<f64>()
        + p.baseline.iter().cloned().fold(0.0, f64::max);
    let curvature = 6.0 * p.price.a * l_max + 2.0 * p.price.b;
    let step = 1.0 / (n as f64 * curvature);

    let mut x = start;
    let mut grad = vec![0.0; p.horizon];
    for it in 1..=opts.max_iterations {
        for (h, g) in grad.iter_mut().enumerate() {
            *g = p.price.marginal_cost(x.load_at(h) + p.baseline[h]);
        }
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let (arr, dep) = p.windows[i];
            let row = &mut x.powers[i][arr..dep];
            let before: Vec<f64> = row.to_vec();
            for (k, v) in row.iter_mut().enumerate() {
                *v -= step * grad[arr + k];
            }
            project_capped_simplex(row, p.specs[i].max_power_kw, p.need[i]);
            moved = row.iter().zip(&before).fold(moved, |m, (a, b)| m.max((a - b).abs()));
        }
        if moved <= opts.step_tol {
            return (x, it, true);
        }
    }
    (x, opts.max_iterations, false)
}

/// Projected gradient descent with random restarts; returns the best restart.
pub fn solve_centralized(grid: &GridConfig, inst: &Instance, tol: f64, opts: PgdOptions) -> Result<BaselineSolution> {
    let p = Prepared::new(grid, inst)?;
    p.check_feasible()?;
    if opts.restarts == 0 || !(tol > 0.0) {
        return Err(Error::Config("need at least one restart and a positive tolerance".into()));
    }
    let streams = SeedStreams::new(opts.seed);
    let runs = Exec::default().map_range(opts.restarts, |r| {
        let mut rng = streams.stream(Component::Baseline, r as u32);
        let mut s = ScheduleMatrix::zeros(p.n_agents(), p.horizon);
        for i in 0..p.n_agents() {
            let (arr, dep) = p.windows[i];
            let u = p.specs[i].max_power_kw;
            let row = &mut s.powers[i][arr..dep];
            for v in row.iter_mut() {
                *v = rng.random_range(0.0..=u);
            }
            project_capped_simplex(row, u, p.need[i]);
        }
        let (x, iters, converged) = run_once(&p, s, &opts);
        let obj = p.objective(&x);
        (x, iters, converged, obj)
    });
    let restart_objectives: Vec<f64> = runs.iter().map(|r| r.3).collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
        .map(|(k, _)| k)
        .unwrap();
    let best_obj = restart_objectives[best];
    let spread_ok = restart_objectives.iter().all(|o| o - best_obj <= tol);
    let iterations = runs.iter().map(|r| r.1).sum();
    let all_converged = runs.iter().all(|r| r.2);
    let (schedule, _, _, objective) = runs.into_iter().nth(best).unwrap();
    Ok(BaselineSolution {
        schedule,
        objective,
        iterations,
        restart_objectives,
        converged: all_converged && spread_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn projection_lands_on_the_set(y in prop::collection::vec(-5.0..10.0f64, 1..12), frac in 0.0..1.0f64) {
            let u = 6.6;
            let s = frac * u * y.len() as f64;
            let mut x = y.clone();
            project_capped_simplex(&mut x, u, s);
            prop_assert!(x.iter().all(|&v| (0.0..=u).contains(&v)));
            prop_assert!((x.iter().sum::<f64>() - s).abs() < 1e-9 * (1.0 + s));
        }
    }

    #[test]
    fn projection_is_identity_on_members() {
        let mut x = vec![1.0, 2.0, 3.0];
        project_capped_simplex(&mut x, 6.6, 6.0);
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
