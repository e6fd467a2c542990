use super::{BaselineSolution, Instance, Prepared, ScheduleMatrix};
use crate::env::GridConfig;
use crate::{Error, Result};

/// Largest enumeration the exhaustive path accepts.
pub const EXHAUSTIVE_LIMIT: f64 = 1e8;
const DP_LIMIT: f64 = 2e9;

/// Exact minimum over schedules whose cells take values `k·a_max/(g−1)`.
///
/// Small instances are enumerated cell by cell. Larger ones are solved by
/// dynamic programming over steps with the per-agent count of grid units
/// delivered so far as state, which yields the same argmin.
pub fn brute_force_oracle(grid: &GridConfig, inst: &Instance, grid_points: usize) -> Result<BaselineSolution> {
    let p = Prepared::new(grid, inst)?;
    if grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }
    let cells: usize = p.windows.iter().map(|(a, d)| d - a).sum();
    let mut units = Vec::with_capacity(p.n_agents());
    for i in 0..p.n_agents() {
        let unit = p.specs[i].max_power_kw / (grid_points - 1) as f64;
        let k = (p.need[i] / unit - 1e-9).ceil().max(0.0) as usize;
        let w = p.windows[i].1 - p.windows[i].0;
        if k > w * (grid_points - 1) {
            return Err(Error::Infeasible(format!(
                "agent {i}: no grid schedule reaches the requirement ({k} units over {w} steps)"
            )));
        }
        units.push(k);
    }
    if (grid_points as f64).powi(cells as i32) <= EXHAUSTIVE_LIMIT {
        exhaustive(&p, grid_points, cells)
    } else {
        dynamic(&p, grid_points, &units)
    }
}

/// Forces the dynamic-programming path regardless of instance size.
pub fn brute_force_dp(grid: &GridConfig, inst: &Instance, grid_points: usize) -> Result<BaselineSolution> {
    let p = Prepared::new(grid, inst)?;
    if grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }
    let units = (0..p.n_agents())
        .map(|i| {
            let unit = p.specs[i].max_power_kw / (grid_points - 1) as f64;
            (p.need[i] / unit - 1e-9).ceil().max(0.0) as usize
        })
        .collect::<Vec<_>>();
    dynamic(&p, grid_points, &units)
}

fn level(p: &Prepared, i: usize, k: usize, g: usize) -> f64 {
    p.specs[i].max_power_kw * k as f64 / (g - 1) as f64
}

fn exhaustive(p: &Prepared, g: usize, cells: usize) -> Result<BaselineSolution> {
    let slots: Vec<(usize, usize)> = (0..p.n_agents())
        .flat_map(|i| (p.windows[i].0..p.windows[i].1).map(move |h| (i, h)))
        .collect();
    debug_assert_eq!(slots.len(), cells);
    let mut digits = vec![0usize; cells];
    let mut s = ScheduleMatrix::zeros(p.n_agents(), p.horizon);
    let mut best: Option<(f64, ScheduleMatrix)> = None;
    let mut visited = 0usize;
    loop {
        for (&(i, h), &k) in slots.iter().zip(&digits) {
            s.powers[i][h] = level(p, i, k, g);
        }
        visited += 1;
        let ok = (0..p.n_agents()).all(|i| s.powers[i].iter().sum::<f64>() >= p.need[i] - 1e-9);
        if ok {
            let obj = p.objective(&s);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, s.clone()));
            }
        }
        let mut pos = 0;
        while pos < cells {
            digits[pos] += 1;
            if digits[pos] < g {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
        if pos == cells {
            break;
        }
    }
    let (objective, schedule) =
        best.ok_or_else(|| Error::Infeasible("no grid schedule satisfies every requirement".into()))?;
    Ok(BaselineSolution {
        schedule,
        objective,
        iterations: visited,
        restart_objectives: vec![objective],
        converged: true,
    })
}

fn dynamic(p: &Prepared, g: usize, units: &[usize]) -> Result<BaselineSolution> {
    let n = p.n_agents();
    let radix: Vec<usize> = units.iter().map(|k| k + 1).collect();
    let states: usize = radix.iter().product();
    let work = states as f64 * (g as f64).powi(n as i32) * p.horizon as f64;
    if work > DP_LIMIT {
        return Err(Error::Size(format!("grid search needs about {work:.3e} evaluations")));
    }
    let decode = |mut idx: usize| -> Vec<usize> {
        radix
            .iter()
            .map(|r| {
                let d = idx % r;
                idx /= r;
                d
            })
            .collect()
    };
    let encode = |acc: &[usize]| -> usize { acc.iter().zip(&radix).rev().fold(0, |a, (d, r)| a * r + d) };

    // value[h][state]: best cost of steps h.. given `state` units delivered so far.
    let mut value = vec![vec![f64::INFINITY; states]; p.horizon + 1];
    let mut choice = vec![vec![0usize; states]; p.horizon];
    value[p.horizon][encode(units)] = 0.0;
    let combos = g.pow(n as u32);
    for h in (0..p.horizon).rev() {
        for st in 0..states {
            let acc = decode(st);
            let mut best = f64::INFINITY;
            let mut arg = 0;
            'combo: for c in 0..combos {
                let mut rest = c;
                let mut load = p.baseline[h];
                let mut next = acc.clone();
                for i in 0..n {
                    let k = rest % g;
                    rest /= g;
                    if k > 0 && !(p.windows[i].0..p.windows[i].1).contains(&h) {
                        continue 'combo;
                    }
                    next[i] += k;
                    if next[i] > units[i] {
                        continue 'combo;
                    }
                    load += level(p, i, k, g);
                }
                let tail = value[h + 1][encode(&next)];
                if !tail.is_finite() {
                    continue;
                }
                let total = p.price.network_cost(load).unwrap_or(f64::INFINITY) + tail;
                if total < best {
                    best = total;
                    arg = c;
                }
            }
            value[h][st] = best;
            choice[h][st] = arg;
        }
    }
    let start = encode(&vec![0; n]);
    if !value[0][start].is_finite() {
        return Err(Error::Infeasible("no grid schedule satisfies every requirement".into()));
    }
    let mut s = ScheduleMatrix::zeros(n, p.horizon);
    let mut acc = vec![0; n];
    for h in 0..p.horizon {
        let mut c = choice[h][encode(&acc)];
        for i in 0..n {
            let k = c % g;
            c /= g;
            acc[i] += k;
            s.powers[i][h] = level(p, i, k, g);
        }
    }
    let objective = p.objective(&s);
    Ok(BaselineSolution {
        schedule: s,
        objective,
        iterations: states * combos * p.horizon,
        restart_objectives: vec![objective],
        converged: true,
    })
}
