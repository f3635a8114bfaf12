//! Concrete sweeping models: mobile robots and pedestrians at a doorway.

mod control_set;
mod pedestrian;
mod robot;

pub use control_set::ControlSet;
pub use pedestrian::{pedestrian_g, pedestrian_sweeping_set, PedestrianScenario};
pub use robot::{
    admissible_velocities_contains, ordering_holds, robot_g, robot_sweeping_set, verify_set_representation,
    Direction, DirectionSchedule, RobotScenario, SetRepresentationReport, SwitchTime,
};

use crate::error::Result;
use crate::polyhedra::Polyhedron;
use crate::scalar::Scalar;

/// Data of a controlled sweeping process `-x' in N(x; C) - g(x, u)`.
pub trait SweepingModel<S: Scalar>: Clone + Send + Sync {
    fn state_dim(&self) -> usize;
    fn horizon(&self) -> S;
    fn initial_state(&self) -> &[S];
    fn sweeping_set(&self) -> &Polyhedron<S>;
    fn control_set(&self) -> &ControlSet<S>;

    fn control_dim(&self) -> usize {
        self.control_set().dim()
    }

    /// Perturbation `g(x, u)` at time `t`; fails if `u` is outside `U`.
    fn perturbation(&self, x: &[S], u: &[S], t: S) -> Result<Vec<S>>;

    /// `grad_u g(x, u, t)^T q`. Both models are linear in `u`.
    fn control_gradient_transpose(&self, q: &[S], t: S) -> Vec<S>;

    /// Lets a model react to the first contact of a simulated path.
    fn note_contact(&mut self, _t: S) {}

    /// Largest speed `|g|` over the vertices of `U`, per agent.
    fn max_speed(&self) -> S;
}

/// Either model, as read from a scenario file.
#[derive(Clone, Debug, PartialEq)]
pub enum Scenario<S> {
    Robot(RobotScenario<S>),
    Pedestrian(PedestrianScenario<S>),
}

impl<S: Scalar> Scenario<S> {
    pub fn model_name(&self) -> &'static str {
        match self {
            Scenario::Robot(_) => "robot",
            Scenario::Pedestrian(_) => "pedestrian",
        }
    }

    pub fn agents(&self) -> usize {
        match self {
            Scenario::Robot(r) => r.n,
            Scenario::Pedestrian(p) => p.n,
        }
    }

    pub fn radius(&self) -> S {
        match self {
            Scenario::Robot(r) => r.radius,
            Scenario::Pedestrian(p) => p.radius,
        }
    }

    /// `D_ij(x)`: sum-norm gap for robots, ordered gap for pedestrians.
    pub fn distance_gap(&self, x: &[S], i: usize, j: usize) -> S {
        match self {
            Scenario::Robot(r) => r.distance_gap(x, i, j),
            Scenario::Pedestrian(p) => p.distance_gap(x, i, j),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            Scenario::Robot($s) => $e,
            Scenario::Pedestrian($s) => $e,
        }
    };
}

impl<S: Scalar> SweepingModel<S> for Scenario<S> {
    fn state_dim(&self) -> usize {
        delegate!(self, s => s.state_dim())
    }
    fn horizon(&self) -> S {
        delegate!(self, s => s.horizon())
    }
    fn initial_state(&self) -> &[S] {
        delegate!(self, s => s.initial_state())
    }
    fn sweeping_set(&self) -> &Polyhedron<S> {
        delegate!(self, s => s.sweeping_set())
    }
    fn control_set(&self) -> &ControlSet<S> {
        delegate!(self, s => s.control_set())
    }
    fn perturbation(&self, x: &[S], u: &[S], t: S) -> Result<Vec<S>> {
        delegate!(self, s => s.perturbation(x, u, t))
    }
    fn control_gradient_transpose(&self, q: &[S], t: S) -> Vec<S> {
        delegate!(self, s => s.control_gradient_transpose(q, t))
    }
    fn note_contact(&mut self, t: S) {
        delegate!(self, s => s.note_contact(t))
    }
    fn max_speed(&self) -> S {
        delegate!(self, s => s.max_speed())
    }
}

pub(crate) fn validate_common<S: Scalar>(
    n: usize,
    radius: S,
    horizon: S,
    speeds: &[S],
    control_set: &ControlSet<S>,
) -> Result<()> {
    use crate::error::Error;
    if n < 2 {
        return Err(Error::scenario("n", "at least two agents are required"));
    }
    if radius < S::zero() {
        return Err(Error::scenario("R", "radius must be nonnegative"));
    }
    if horizon <= S::zero() {
        return Err(Error::scenario("T", "horizon must be positive"));
    }
    if speeds.len() != n {
        return Err(Error::scenario("speeds", format!("expected {n} entries, found {}", speeds.len())));
    }
    if speeds.iter().any(|&s| s < S::zero()) {
        return Err(Error::scenario("speeds", "speeds must be nonnegative"));
    }
    if control_set.dim() != n {
        return Err(Error::scenario(
            "control_set",
            format!("control dimension {} does not match n = {n}", control_set.dim()),
        ));
    }
    Ok(())
}
