//! Reduced (closed-form) and discrete (simulation-based) optimal control.

mod discrete;
mod pedestrian;
mod quadratic;
mod robot;

pub use discrete::{
    convergence_study, solve_discrete, ConvergenceRow, DiscreteOptions, DiscreteSolution, Parametrization,
};
pub use pedestrian::{
    pedestrian_closed_form, pedestrian_contact_time, pedestrian_velocity_match, EtaHistory,
};
pub use quadratic::AffineCost;
pub use robot::{robot_contact_quadratic, robot_eta_formula, robot_y_quadratic};

use crate::error::Result;
use crate::linalg::{axpy, sub};
use crate::models::{Scenario, SweepingModel};
use crate::optimality::{verify_certificate, Atom, DualCertificate, ResidualReport};
use crate::scalar::Scalar;
use crate::sweeping::{ControlSignal, EtaProfile, Mesh, Trajectory};

/// Interval of constant multipliers and velocity in a closed-form motion.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase<S> {
    pub start: S,
    pub end: S,
    pub eta: Vec<S>,
    pub velocity: Vec<S>,
    pub x_start: Vec<S>,
}

/// Piecewise-affine motion as a list of phases covering `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePlan<S> {
    pub phases: Vec<Phase<S>>,
    /// First time each constraint becomes active.
    pub contact_times: Vec<Option<S>>,
}

impl<S: Scalar> PhasePlan<S> {
    pub fn phase_index(&self, t: S) -> usize {
        let last = self.phases.len() - 1;
        self.phases.iter().position(|p| t < p.end).unwrap_or(last).min(last)
    }

    pub fn state_at(&self, t: S) -> Vec<S> {
        let ph = &self.phases[self.phase_index(t)];
        let mut x = ph.x_start.clone();
        axpy(&mut x, t - ph.start, &ph.velocity);
        x
    }

    pub fn terminal(&self) -> Vec<S> {
        let ph = self.phases.last().expect("nonempty plan");
        let mut x = ph.x_start.clone();
        axpy(&mut x, ph.end - ph.start, &ph.velocity);
        x
    }

    pub fn breakpoints(&self) -> Vec<S> {
        self.phases.iter().skip(1).map(|p| p.start).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseReport<S> {
    pub label: String,
    pub accepted: bool,
    pub detail: String,
    pub cost: Option<S>,
    pub contact_time: Option<S>,
}

/// `J(r) = a r^2 + b r + c` in the free control parameter `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedCost<S> {
    pub a: S,
    pub b: S,
    pub c: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSolution<S> {
    /// Constant optimal control.
    pub control: Vec<S>,
    /// `(constraint, time)` pairs sorted by time.
    pub contact_schedule: Vec<(usize, S)>,
    pub phases: Vec<Phase<S>>,
    /// Heading switch time fixed by the solution, if the model has one.
    pub switch_time: Option<S>,
    pub cost: S,
    pub reduced_cost: Option<ReducedCost<S>>,
    pub cases: Vec<CaseReport<S>>,
    pub trajectory: Trajectory<S>,
    pub control_signal: ControlSignal<S>,
    pub certificate: DualCertificate<S>,
}

impl<S: Scalar> ReducedSolution<S> {
    /// Contact time of the first constraint that becomes active after 0,
    /// or of the first one overall.
    pub fn main_contact_time(&self) -> Option<S> {
        self.contact_schedule
            .iter()
            .map(|c| c.1)
            .find(|t| *t > S::zero())
            .or_else(|| self.contact_schedule.first().map(|c| c.1))
    }

    /// Runs the certificate checks against `scn`.
    pub fn verify(&self, scn: &Scenario<S>, tol: S) -> Result<ResidualReport> {
        let model = resolved_model(scn, self.switch_time);
        verify_certificate(&model, &self.trajectory, &self.control_signal, &self.certificate, tol)
    }
}

/// Scenario with contact-triggered heading switches fixed at `t`.
pub fn resolved_model<S: Scalar>(scn: &Scenario<S>, switch_time: Option<S>) -> Scenario<S> {
    match (scn, switch_time) {
        (Scenario::Robot(r), Some(t)) => Scenario::Robot(r.with_switch_at(t)),
        _ => scn.clone(),
    }
}

#[derive(Clone, Debug)]
pub struct ReducedOptions<S> {
    /// Value of `q^1` fixing the free constant in the dual arc `q` when
    /// it is determined by complementarity only.
    pub dual_anchor: S,
    /// Dyadic exponent of the output mesh (phase breakpoints are added).
    pub mesh_exponent: u32,
}

impl<S: Scalar> Default for ReducedOptions<S> {
    fn default() -> Self {
        Self { dual_anchor: S::one(), mesh_exponent: 6 }
    }
}

/// Closed-form solution following the contact-phase analysis of each model.
pub fn solve_reduced<S: Scalar>(scn: &Scenario<S>, opts: &ReducedOptions<S>) -> Result<ReducedSolution<S>> {
    match scn {
        Scenario::Robot(r) => robot::solve_robot(r, opts),
        Scenario::Pedestrian(p) => pedestrian::solve_pedestrian(p, opts),
    }
}

/// Assembles trajectory and certificate from a plan and a constant dual arc.
///
/// `lambda = 1`, `p = -x(T) - sum_j eta^j(T) a_j` on `[0, T]`, and
/// `gamma` is a single atom `p - q` at `T`.
pub(crate) fn assemble<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    plan: PhasePlan<S>,
    control: Vec<S>,
    q: Vec<S>,
    opts: &ReducedOptions<S>,
) -> Result<(Trajectory<S>, ControlSignal<S>, DualCertificate<S>, S)> {
    let t_end = model.horizon();
    let merge_tol = if S::default_tol().is_zero() { S::zero() } else { S::from_f64(1e-12) * t_end };
    let mesh = Mesh::dyadic(t_end, opts.mesh_exponent)?.with_breakpoints(&plan.breakpoints(), merge_tol);
    let nodes: Vec<Vec<S>> = mesh.nodes().iter().map(|&t| plan.state_at(t)).collect();
    let traj = Trajectory::new(mesh.clone(), nodes)?;
    let values: Vec<Vec<S>> = (0..mesh.num_intervals())
        .map(|k| plan.phases[plan.phase_index(mesh.node(k))].eta.clone())
        .collect();
    let terminal = plan.phases.last().expect("nonempty plan").eta.clone();
    let n = mesh.num_intervals();
    let eta = EtaProfile { mesh: mesh.clone(), values, terminal: terminal.clone(), residuals: vec![S::zero(); n] };
    let xt = traj.terminal().to_vec();
    let mut pt: Vec<S> = xt.iter().map(|&v| -v).collect();
    let set = model.sweeping_set();
    for (j, &e) in terminal.iter().enumerate() {
        axpy(&mut pt, -e, set.normal(j));
    }
    let gamma = vec![Atom { time: t_end, mass: sub(&pt, &q) }];
    let cert = DualCertificate {
        lambda: S::one(),
        eta,
        p: vec![pt; n + 1],
        q: vec![q.clone(); n],
        q_terminal: q,
        gamma,
    };
    let cost = crate::sweeping::terminal_cost(&traj);
    let signal = ControlSignal::constant(mesh, &control);
    Ok((traj, signal, cert, cost))
}

pub(crate) fn contact_schedule<S: Scalar>(plan: &PhasePlan<S>) -> Vec<(usize, S)> {
    let mut out: Vec<(usize, S)> =
        plan.contact_times.iter().enumerate().filter_map(|(j, t)| t.map(|t| (j, t))).collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    out
}
