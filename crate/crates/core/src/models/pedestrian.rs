use super::{validate_common, ControlSet, SweepingModel};
use crate::error::{Error, Result};
use crate::polyhedra::Polyhedron;
use crate::scalar::Scalar;

/// Pedestrians on a line heading to an exit, ordered by position.
#[derive(Clone, Debug, PartialEq)]
pub struct PedestrianScenario<S> {
    pub n: usize,
    pub radius: S,
    pub horizon: S,
    pub x0: Vec<S>,
    pub speeds: Vec<S>,
    pub control_set: ControlSet<S>,
    set: Polyhedron<S>,
}

/// Rows `e_j - e_{j+1}`, offsets `-2R`.
pub fn pedestrian_sweeping_set<S: Scalar>(n: usize, radius: S) -> Result<Polyhedron<S>> {
    if n < 2 {
        return Err(Error::scenario("n", "at least two agents are required"));
    }
    let normals = (0..n - 1)
        .map(|j| {
            let mut a = vec![S::zero(); n];
            a[j] = S::one();
            a[j + 1] = -S::one();
            a
        })
        .collect();
    Polyhedron::new(normals, vec![-(radius + radius); n - 1])
}

impl<S: Scalar> PedestrianScenario<S> {
    pub fn new(
        n: usize,
        radius: S,
        horizon: S,
        x0: Vec<S>,
        speeds: Vec<S>,
        control_set: ControlSet<S>,
    ) -> Result<Self> {
        validate_common(n, radius, horizon, &speeds, &control_set)?;
        if x0.len() != n {
            return Err(Error::scenario("x0", format!("expected {n} entries, found {}", x0.len())));
        }
        let set = pedestrian_sweeping_set(n, radius)?;
        if !set.contains(&x0, S::default_tol())? {
            return Err(Error::scenario("x0", "initial positions overlap"));
        }
        Ok(Self { n, radius, horizon, x0, speeds, control_set, set })
    }

    /// `x^j - x^i - 2R` for `i < j`.
    pub fn distance_gap(&self, x: &[S], i: usize, j: usize) -> S {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        x[b] - x[a] - (self.radius + self.radius)
    }
}

/// `(s_1 u^1, ..., s_n u^n)`
pub fn pedestrian_g<S: Scalar>(scn: &PedestrianScenario<S>, u: &[S]) -> Result<Vec<S>> {
    scn.control_set.check(u, S::default_tol(), 0)?;
    Ok(scn.speeds.iter().zip(u).map(|(&s, &v)| s * v).collect())
}

impl<S: Scalar> SweepingModel<S> for PedestrianScenario<S> {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn horizon(&self) -> S {
        self.horizon
    }
    fn initial_state(&self) -> &[S] {
        &self.x0
    }
    fn sweeping_set(&self) -> &Polyhedron<S> {
        &self.set
    }
    fn control_set(&self) -> &ControlSet<S> {
        &self.control_set
    }
    fn perturbation(&self, _x: &[S], u: &[S], _t: S) -> Result<Vec<S>> {
        pedestrian_g(self, u)
    }
    fn control_gradient_transpose(&self, q: &[S], _t: S) -> Vec<S> {
        self.speeds.iter().zip(q).map(|(&s, &v)| s * v).collect()
    }
    fn max_speed(&self) -> S {
        self.control_set
            .vertices()
            .iter()
            .flat_map(|v| v.iter().zip(&self.speeds).map(|(&u, &s)| (s * u).abs()).collect::<Vec<_>>())
            .fold(S::zero(), |m, v| m.max(v))
    }
}
