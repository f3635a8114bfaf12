//! Catch-up discretization `x_{k+1} = P_C(x_k + h g(x_k, u_k))` and
//! recovery of the multipliers `eta` from a discrete path.

mod mesh;

pub use mesh::{ControlSignal, EtaProfile, Mesh, Trajectory};

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::models::SweepingModel;
use crate::polyhedra::{Polyhedron, Projection};
use crate::scalar::Scalar;

/// One catch-up step: project `x + h g` onto `P`.
pub fn catchup_step<S: Scalar>(p: &Polyhedron<S>, g: &[S], x: &[S], h: S, tol: S) -> Result<Vec<S>> {
    Ok(step_with_hint(p, g, x, h, &[], tol)?.point)
}

fn step_with_hint<S: Scalar>(
    p: &Polyhedron<S>,
    g: &[S],
    x: &[S],
    h: S,
    hint: &[usize],
    tol: S,
) -> Result<Projection<S>> {
    let mut y = x.to_vec();
    linalg::axpy(&mut y, h, g);
    p.project_with_hint(&y, hint, tol)
}

fn check_horizon<S: Scalar>(model_t: S, mesh: &Mesh<S>) -> Result<()> {
    let tol = S::default_tol() * (S::one() + model_t.abs());
    if (mesh.horizon() - model_t).abs() > tol {
        return Err(Error::MeshMismatch(format!(
            "mesh horizon {} differs from scenario horizon {}",
            mesh.horizon(),
            model_t
        )));
    }
    Ok(())
}

/// Catch-up trajectory for the control signal `u`.
pub fn simulate<S: Scalar, M: SweepingModel<S>>(model: &M, u: &ControlSignal<S>) -> Result<Trajectory<S>> {
    Ok(simulate_resolved(model, u)?.0)
}

/// Like [`simulate`], also returning the model with contact-triggered
/// heading switches fixed at the detected contact time.
pub fn simulate_resolved<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    u: &ControlSignal<S>,
) -> Result<(Trajectory<S>, M)> {
    check_horizon(model.horizon(), &u.mesh)?;
    let tol = S::default_tol();
    let cset = model.control_set();
    for (k, v) in u.values.iter().enumerate() {
        cset.check(v, tol, k)?;
    }
    let mut model = model.clone();
    let p = model.sweeping_set().clone();
    let x0 = model.initial_state().to_vec();
    if !p.contains(&x0, tol)? {
        return Err(Error::scenario("x0", "initial state lies outside the sweeping set"));
    }
    let feas_tol = tol * (S::one() + linalg::norm_inf(&x0));
    let mut contact = !p.active_set(&x0, feas_tol)?.is_empty();
    if contact {
        model.note_contact(S::zero());
    }
    let mesh = &u.mesh;
    let mut nodes = Vec::with_capacity(mesh.nodes().len());
    nodes.push(x0);
    let mut hint: Vec<usize> = Vec::new();
    for k in 0..mesh.num_intervals() {
        let t = mesh.node(k);
        let x = nodes.last().expect("nonempty");
        let g = model.perturbation(x, u.value(k), t)?;
        let pr = step_with_hint(&p, &g, x, mesh.step(k), &hint, tol)?;
        if !pr.working_set.is_empty() {
            hint = pr.working_set.clone();
        }
        if !contact && !pr.working_set.is_empty() {
            contact = true;
            model.note_contact(mesh.node(k + 1));
        }
        nodes.push(pr.point);
    }
    Ok((Trajectory::new(mesh.clone(), nodes)?, model))
}

/// First contact time per constraint: the left node of the first interval
/// that ends on the constraint (zero if active at the start).
pub fn contact_times<S: Scalar>(traj: &Trajectory<S>, p: &Polyhedron<S>, tol: S) -> Vec<Option<S>> {
    (0..p.num_constraints())
        .map(|j| {
            traj.nodes
                .iter()
                .position(|x| p.slack(j, x).abs() <= tol)
                .map(|i| traj.mesh.node(i.saturating_sub(1)))
        })
        .collect()
}

/// Multipliers with `g - x' = sum_j eta^j a_j` on every interval.
///
/// Activity is read at the right node of each interval, i.e. after the
/// projection that produced it.
pub fn recover_eta<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    u: &ControlSignal<S>,
    tol: S,
) -> Result<EtaProfile<S>> {
    if !traj.mesh.matches(&u.mesh, S::default_tol()) {
        return Err(Error::MeshMismatch("trajectory and control use different meshes".into()));
    }
    let p = model.sweeping_set();
    let mut values = Vec::with_capacity(traj.mesh.num_intervals());
    let mut residuals = Vec::with_capacity(traj.mesh.num_intervals());
    let scale = S::one() + traj.nodes.iter().fold(S::zero(), |m, x| m.max(linalg::norm_inf(x)));
    let act_tol = tol * scale;
    for k in 0..traj.mesh.num_intervals() {
        let g = model.perturbation(&traj.nodes[k], u.value(k), traj.mesh.node(k))?;
        let w = linalg::sub(&g, &traj.velocity(k));
        let d = p.nearest_normal_decomposition(&traj.nodes[k + 1], &w, act_tol)?;
        let rel = d.residual / (S::one() + linalg::norm(&g));
        if rel > tol.max(S::from_f64(1e-6)) {
            return Err(Error::InconsistentTrajectory { interval: k, residual: d.residual.to_f64() });
        }
        values.push(d.coefficients);
        residuals.push(d.residual);
    }
    let terminal = values.last().cloned().unwrap_or_default();
    Ok(EtaProfile { mesh: traj.mesh.clone(), values, terminal, residuals })
}

/// `J = |x(T)|^2 / 2`
pub fn terminal_cost<S: Scalar>(traj: &Trajectory<S>) -> S {
    let x = traj.terminal();
    dot(x, x) * S::half()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ControlSet, PedestrianScenario};
    use crate::scalar::{rational, Rational};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ex44() -> PedestrianScenario<f64> {
        PedestrianScenario::new(
            2,
            3.0,
            6.0,
            vec![-60.0, -48.0],
            vec![8.0, 2.0],
            ControlSet::new_segment(vec![1.0, 1.0], -1.8, 1.8).unwrap(),
        )
        .unwrap()
    }

    fn ex45<S: Scalar>() -> PedestrianScenario<S> {
        let f = |v: f64| S::from_f64(v);
        PedestrianScenario::new(
            3,
            f(3.0),
            f(6.0),
            vec![f(-60.0), f(-48.0), f(-42.0)],
            vec![f(8.0), f(4.0), f(2.0)],
            ControlSet::new_box(vec![f(-2.0); 3], vec![f(2.0); 3]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn catchup_interior_and_zero_steps() {
        let p = ex44();
        let x = catchup_step(p.sweeping_set(), &[1.0, 1.0], &[-60.0, -48.0], 0.5, 1e-9).unwrap();
        assert_eq!(x, vec![-59.5, -47.5]);
        let y = catchup_step(p.sweeping_set(), &[0.0, 0.0], &[-3.0, 3.0], 0.1, 1e-9).unwrap();
        assert_eq!(y, vec![-3.0, 3.0]);
    }

    #[test]
    fn catchup_projects_onto_contact_hyperplane() {
        let p = ex44();
        let x = catchup_step(p.sweeping_set(), &[14.4, 3.6], &[-3.0, 3.0], 0.01, 1e-9).unwrap();
        // y = (-2.856, 3.036); moving both by half the overlap 0.108
        assert_abs_diff_eq!(x[0], -2.91, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.09, epsilon = 1e-12);
    }

    #[test]
    fn simulate_two_pedestrians_reaches_contact() {
        let s = ex44();
        let mesh = Mesh::dyadic(6.0, 10).unwrap();
        let u = ControlSignal::constant(mesh, &[1.8, 1.8]);
        let tr = simulate(&s, &u).unwrap();
        let x = tr.terminal();
        assert_abs_diff_eq!(x[0], -3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(terminal_cost(&tr), 9.0, epsilon = 1e-8);
        let ct = contact_times(&tr, s.sweeping_set(), 1e-9);
        assert!((ct[0].unwrap() - 5.0 / 9.0).abs() <= 6.0 / 1024.0);
    }

    #[test]
    fn simulate_zero_control_is_constant() {
        let s = ex44();
        let tr = simulate(&s, &ControlSignal::constant(Mesh::dyadic(6.0, 4).unwrap(), &[0.0, 0.0])).unwrap();
        assert!(tr.nodes.iter().all(|x| x == &vec![-60.0, -48.0]));
    }

    #[test]
    fn simulate_three_pedestrians_block_velocity() {
        // after first contact all three move together at 28/3
        let s = ex45::<f64>();
        let tr = simulate(&s, &ControlSignal::constant(Mesh::dyadic(6.0, 10).unwrap(), &[2.0; 3])).unwrap();
        let k = tr.mesh.num_intervals() - 1;
        for v in tr.velocity(k) {
            assert_abs_diff_eq!(v, 28.0 / 3.0, epsilon = 1e-9);
        }
        let x = tr.terminal();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[2], 12.0, epsilon = 1e-9);
    }

    #[test]
    fn simulate_exact_in_rationals() {
        let s = ex45::<Rational>();
        let two = rational(2, 1);
        let tr = simulate(&s, &ControlSignal::constant(Mesh::dyadic(rational(6, 1), 5).unwrap(), &[two; 3])).unwrap();
        assert_eq!(tr.terminal(), &[rational(0, 1), rational(6, 1), rational(12, 1)]);
    }

    #[test]
    fn simulate_rejects_bad_input() {
        let s = ex44();
        let u = ControlSignal::constant(Mesh::dyadic(5.0, 3).unwrap(), &[1.0, 1.0]);
        assert!(matches!(simulate(&s, &u), Err(Error::MeshMismatch(_))));
        let u = ControlSignal::constant(Mesh::dyadic(6.0, 3).unwrap(), &[1.0, 0.5]);
        assert!(matches!(simulate(&s, &u), Err(Error::ControlOutsideSet { .. })));
    }

    #[test]
    fn recover_eta_block_contact() {
        let s = ex45::<f64>();
        let u = ControlSignal::constant(Mesh::dyadic(6.0, 8).unwrap(), &[2.0; 3]);
        let tr = simulate(&s, &u).unwrap();
        let eta = recover_eta(&s, &tr, &u, 1e-9).unwrap();
        assert!(eta.max_residual() < 1e-9);
        // before the first contact pedestrians 2 and 3 push with eta = 2
        assert_abs_diff_eq!(eta.values[0][1], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(eta.values[0][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eta.terminal[0], 20.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(eta.terminal[1], 16.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn recover_eta_flags_inconsistent_pairs() {
        let s = ex44();
        let mesh = Mesh::dyadic(6.0, 4).unwrap();
        let u = ControlSignal::constant(mesh.clone(), &[1.0, 1.0]);
        let tr = simulate(&s, &ControlSignal::constant(mesh, &[-1.0, -1.0])).unwrap();
        assert!(matches!(recover_eta(&s, &tr, &u, 1e-9), Err(Error::InconsistentTrajectory { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn simulated_nodes_stay_feasible(u in prop::collection::vec(-2.0..2.0f64, 3), m in 3u32..8) {
            let s = ex45::<f64>();
            let sig = ControlSignal::constant(Mesh::dyadic(6.0, m).unwrap(), &u);
            let tr = simulate(&s, &sig).unwrap();
            for x in &tr.nodes {
                prop_assert!(s.sweeping_set().contains(x, 1e-9).unwrap());
            }
            let eta = recover_eta(&s, &tr, &sig, 1e-9).unwrap();
            prop_assert!(eta.max_residual() < 1e-6);
            for (k, e) in eta.values.iter().enumerate() {
                for j in 0..2 {
                    prop_assert!(e[j] >= 0.0);
                    if s.sweeping_set().slack(j, &tr.nodes[k + 1]) > 1e-7 {
                        prop_assert_eq!(e[j], 0.0);
                    }
                }
            }
        }
    }
}
