//! Direct minimization of the discrete cost over piecewise-constant controls,
//! with the catch-up simulator as the dynamics oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dist, sub};
use crate::models::SweepingModel;
use crate::scalar::Scalar;
use crate::sweeping::{simulate, terminal_cost, ControlSignal, Mesh, Trajectory};

/// How control parameters map onto the mesh intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parametrization {
    /// One control for the whole horizon.
    Constant,
    /// `2^b` equal blocks of intervals, constant on each block.
    Blocks(u32),
}

#[derive(Clone, Debug)]
pub struct DiscreteOptions<S> {
    pub parametrization: Parametrization,
    /// Simulator calls shared by all starts.
    pub budget: usize,
    /// Seeded random starts added to the vertices and the centre of `U`.
    pub random_starts: usize,
    pub seed: u64,
    /// Initial compass step as a fraction of each parameter range.
    pub initial_step: S,
    /// Search stops once the step falls below this fraction of the range.
    pub min_step: S,
    /// Pair `(x, u)` against which the localization penalty is reported.
    pub reference: Option<(Trajectory<S>, ControlSignal<S>)>,
}

impl<S: Scalar> Default for DiscreteOptions<S> {
    fn default() -> Self {
        Self {
            parametrization: Parametrization::Constant,
            budget: 2000,
            random_starts: 2,
            seed: 0,
            initial_step: S::from_f64(0.25),
            min_step: S::from_f64(1e-7),
            reference: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution<S> {
    pub control: ControlSignal<S>,
    pub trajectory: Trajectory<S>,
    pub cost: S,
    pub sim_calls: usize,
    pub starts: usize,
    /// `sum_k h (|x' - xr'|^2 + |u - ur|^2)` against the reference pair.
    pub penalty: Option<S>,
    /// False when some start ran out of budget before its step shrank.
    pub converged: bool,
}

struct Problem<'a, S: Scalar, M> {
    model: &'a M,
    mesh: &'a Mesh<S>,
    blocks: usize,
    lo: Vec<S>,
    hi: Vec<S>,
}

impl<S: Scalar, M: SweepingModel<S>> Problem<'_, S, M> {
    fn signal(&self, z: &[S]) -> ControlSignal<S> {
        let cs = self.model.control_set();
        let p = self.lo.len();
        let n = self.mesh.num_intervals();
        let per_block: Vec<Vec<S>> = (0..self.blocks).map(|b| cs.from_params(&z[b * p..(b + 1) * p])).collect();
        let values = (0..n).map(|k| per_block[k * self.blocks / n].clone()).collect();
        ControlSignal { mesh: self.mesh.clone(), values }
    }

    fn eval(&self, z: &[S]) -> Result<Option<S>> {
        match simulate(self.model, &self.signal(z)) {
            Ok(t) => Ok(Some(terminal_cost(&t))),
            Err(e) if e.is_numerical() => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn dim(&self) -> usize {
        self.lo.len() * self.blocks
    }

    fn bounds(&self, i: usize) -> (S, S) {
        let p = self.lo.len();
        (self.lo[i % p], self.hi[i % p])
    }

    /// Compass search from `z` with at most `budget` evaluations.
    fn search(&self, mut z: Vec<S>, budget: usize, opts: &DiscreteOptions<S>) -> Result<(Vec<S>, Option<S>, usize, bool)> {
        let d = self.dim();
        let ranges: Vec<S> = (0..d).map(|i| self.bounds(i).1 - self.bounds(i).0).collect();
        let mut frac = opts.initial_step;
        let mut best = self.eval(&z)?;
        let mut calls = 1;
        while frac >= opts.min_step {
            let mut improved = false;
            for i in 0..d {
                if ranges[i].is_zero() {
                    continue;
                }
                for sign in [S::one(), -S::one()] {
                    if calls >= budget {
                        return Ok((z, best, calls, false));
                    }
                    let (lo, hi) = self.bounds(i);
                    let cand_i = (z[i] + sign * frac * ranges[i]).max(lo).min(hi);
                    if cand_i == z[i] {
                        continue;
                    }
                    let mut cand = z.clone();
                    cand[i] = cand_i;
                    let v = self.eval(&cand)?;
                    calls += 1;
                    let better = match (v, best) {
                        (Some(v), Some(b)) => v < b,
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if better {
                        z = cand;
                        best = v;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                frac = frac * S::half();
            }
        }
        Ok((z, best, calls, true))
    }
}

/// Minimizes `|x_m(T)|^2 / 2` over controls on `mesh` by multistart compass
/// search; starts run on separate threads.
pub fn solve_discrete<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    mesh: &Mesh<S>,
    opts: &DiscreteOptions<S>,
) -> Result<DiscreteSolution<S>> {
    if mesh.horizon() != model.horizon() {
        return Err(Error::MeshMismatch("mesh horizon differs from the model horizon".into()));
    }
    let blocks = match opts.parametrization {
        Parametrization::Constant => 1,
        Parametrization::Blocks(b) => {
            let nb = 1usize << b.min(24);
            if nb > mesh.num_intervals() {
                return Err(Error::MeshMismatch(format!("{nb} blocks exceed {} intervals", mesh.num_intervals())));
            }
            nb
        }
    };
    let cs = model.control_set();
    let (lo, hi) = cs.param_bounds();
    let prob = Problem { model, mesh, blocks, lo: lo.clone(), hi: hi.clone() };
    let repeat = |r: &[S]| -> Vec<S> { (0..blocks).flat_map(|_| r.iter().copied()).collect() };
    let mut starts: Vec<Vec<S>> = cs.vertices().iter().map(|v| repeat(&cs.params_of(v))).collect();
    starts.push(repeat(&cs.params_of(&cs.center())));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let z: Vec<S> = (0..prob.dim())
            .map(|i| {
                let (l, h) = prob.bounds(i);
                l + (h - l) * S::from_f64(rng.gen::<f64>())
            })
            .collect();
        starts.push(z);
    }
    let per_start = (opts.budget / starts.len()).max(2);
    let results: Vec<Result<(Vec<S>, Option<S>, usize, bool)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .map(|z| {
                let prob = &prob;
                scope.spawn(move || prob.search(z.clone(), per_start, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("search thread panicked")).collect()
    });
    let mut best: Option<(Vec<S>, S)> = None;
    let mut calls = 0;
    let mut converged = true;
    for r in results {
        let (z, v, c, conv) = r?;
        calls += c;
        converged &= conv;
        if let Some(v) = v {
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((z, v));
            }
        }
    }
    let (z, _) = best.ok_or_else(|| Error::NoConvergence("every start failed to simulate".into()))?;
    let control = prob.signal(&z);
    let trajectory = simulate(model, &control)?;
    let cost = terminal_cost(&trajectory);
    let penalty = match &opts.reference {
        Some((xr, ur)) => Some(localization_penalty(&trajectory, &control, xr, ur)?),
        None => None,
    };
    Ok(DiscreteSolution { control, trajectory, cost, sim_calls: calls, starts: starts.len(), penalty, converged })
}

/// `sum_k h_k (|v_k - vr_k|^2 + |u_k - ur_k|^2)` with the reference sampled
/// on the same mesh.
pub fn localization_penalty<S: Scalar>(
    x: &Trajectory<S>,
    u: &ControlSignal<S>,
    xr: &Trajectory<S>,
    ur: &ControlSignal<S>,
) -> Result<S> {
    let mesh = &x.mesh;
    let tol = S::from_f64(1e-12) * mesh.horizon();
    let mut total = S::zero();
    for k in 0..mesh.num_intervals() {
        let (a, b) = (mesh.node(k), mesh.node(k + 1));
        let h = b - a;
        let vr = sub(&xr.state_at(b), &xr.state_at(a)).into_iter().map(|v| v / h).collect::<Vec<_>>();
        let dv = dist(&x.velocity(k), &vr);
        let mid = (a + b) * S::half();
        let kr = ur.mesh.interval_of(mid);
        if (ur.mesh.horizon() - mesh.horizon()).abs() > tol {
            return Err(Error::MeshMismatch("reference horizon differs".into()));
        }
        let du = dist(u.value(k), ur.value(kr));
        total += h * (dv * dv + du * du);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow<S> {
    pub m: u32,
    pub cost: S,
    /// `|x_m(T) - x_ref(T)|`.
    pub endpoint_error: S,
    /// `5 h_m` times the largest speed of the model.
    pub bound: S,
}

/// Simulates the constant control `u` on dyadic meshes `2^m`, one thread per
/// exponent, and compares endpoints with `reference`.
pub fn convergence_study<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    u: &[S],
    reference: &[S],
    exponents: &[u32],
) -> Result<Vec<ConvergenceRow<S>>> {
    let rows: Vec<Result<ConvergenceRow<S>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = exponents
            .iter()
            .map(|&m| {
                scope.spawn(move || {
                    let mesh = Mesh::dyadic(model.horizon(), m)?;
                    let h = mesh.step(0);
                    let traj = simulate(model, &ControlSignal::constant(mesh, u))?;
                    Ok(ConvergenceRow {
                        m,
                        cost: terminal_cost(&traj),
                        endpoint_error: dist(traj.terminal(), reference),
                        bound: S::from_f64(5.0) * h * model.max_speed(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ControlSet, PedestrianScenario};
    use approx::assert_abs_diff_eq;

    fn far_apart() -> PedestrianScenario<f64> {
        PedestrianScenario::new(
            2,
            1e-3,
            1.0,
            vec![-5.0, 100.0],
            vec![2.0, 4.0],
            ControlSet::new_box(vec![-10.0, -100.0], vec![10.0, 100.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn free_agents_reach_origin() {
        // x(T) = (-R, R) at u = ((5 - R) / 2, (R - 100) / 4), J = R^2
        let s = far_apart();
        let mesh = Mesh::dyadic(1.0, 4).unwrap();
        let sol = solve_discrete(&s, &mesh, &DiscreteOptions::default()).unwrap();
        assert!(sol.cost < 1e-6 + 1e-8, "cost {}", sol.cost);
        assert_abs_diff_eq!(sol.control.value(0)[0], 2.5, epsilon = 1e-4);
        assert_abs_diff_eq!(sol.control.value(0)[1], -25.0, epsilon = 1e-3);
        assert!(sol.sim_calls <= 2000);
        assert!(sol.converged);
    }

    #[test]
    fn clipped_minimizer() {
        let mut s = far_apart();
        s.control_set = ControlSet::new_box(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
        let mesh = Mesh::dyadic(1.0, 3).unwrap();
        let sol = solve_discrete(&s, &mesh, &DiscreteOptions::default()).unwrap();
        // second agent clipped at u = -10: x(T) = 100 - 40 = 60
        assert_abs_diff_eq!(sol.cost, 0.5 * 60.0 * 60.0, epsilon = 1e-6);
    }

    #[test]
    fn blocks_and_penalty() {
        let s = far_apart();
        let mesh = Mesh::dyadic(1.0, 4).unwrap();
        let u = ControlSignal::constant(mesh.clone(), &[2.5, -25.0]);
        let xr = simulate(&s, &u).unwrap();
        let opts = DiscreteOptions {
            parametrization: Parametrization::Blocks(1),
            reference: Some((xr.clone(), u.clone())),
            ..Default::default()
        };
        let sol = solve_discrete(&s, &mesh, &opts).unwrap();
        assert!(sol.cost < 1e-6 + 1e-8);
        assert!(sol.penalty.unwrap() >= 0.0);
        assert_eq!(localization_penalty(&xr, &u, &xr, &u).unwrap(), 0.0);
        let too_many = DiscreteOptions { parametrization: Parametrization::Blocks(5), ..Default::default() };
        assert!(solve_discrete(&s, &mesh, &too_many).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let s = far_apart();
        let mesh = Mesh::dyadic(1.0, 3).unwrap();
        let opts = DiscreteOptions { random_starts: 3, seed: 11, ..Default::default() };
        assert_eq!(solve_discrete(&s, &mesh, &opts).unwrap(), solve_discrete(&s, &mesh, &opts).unwrap());
    }

    #[test]
    fn convergence_rows_for_free_motion() {
        let s = far_apart();
        let rows = convergence_study(&s, &[1.0, 1.0], &[-3.0, 104.0], &[3, 5]).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!(r.endpoint_error < 1e-12);
            assert!(r.bound > 0.0);
        }
    }
}
