use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{validate_common, ControlSet, SweepingModel};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::polyhedra::Polyhedron;
use crate::scalar::Scalar;

/// Unit heading stored as its cosine and sine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction<S> {
    pub cos: S,
    pub sin: S,
}

impl<S: Scalar> Direction<S> {
    /// Heading from an angle in degrees. Multiples of 45 degrees are exact,
    /// so diagonal headings have `cos == sin` bit for bit.
    pub fn from_degrees(deg: f64) -> Self {
        let k = deg / 45.0;
        if (k - k.round()).abs() < 1e-12 {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let table = [(1.0, 0.0), (h, h), (0.0, 1.0), (-h, h), (-1.0, 0.0), (-h, -h), (0.0, -1.0), (h, -h)];
            let (c, s) = table[(k.round() as i64).rem_euclid(8) as usize];
            return Direction { cos: S::from_f64(c), sin: S::from_f64(s) };
        }
        let (s, c) = deg.to_radians().sin_cos();
        Direction { cos: S::from_f64(c), sin: S::from_f64(s) }
    }

    pub fn degrees(&self) -> f64 {
        self.sin.to_f64().atan2(self.cos.to_f64()).to_degrees().rem_euclid(360.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwitchTime<S> {
    At(S),
    /// Switch at the first contact of the motion.
    AtContact,
}

/// Piecewise-constant heading with at most one switch.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSchedule<S> {
    pub initial: Direction<S>,
    pub switch: Option<(SwitchTime<S>, Direction<S>)>,
}

impl<S: Scalar> DirectionSchedule<S> {
    pub fn constant(d: Direction<S>) -> Self {
        Self { initial: d, switch: None }
    }

    /// Heading on `[t, t + dt)`; unresolved contact switches are ignored.
    pub fn at(&self, t: S) -> Direction<S> {
        match &self.switch {
            Some((SwitchTime::At(ts), after)) if t >= *ts => *after,
            _ => self.initial,
        }
    }

    pub fn after_switch(&self) -> Direction<S> {
        self.switch.map_or(self.initial, |(_, d)| d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotScenario<S> {
    pub n: usize,
    pub radius: S,
    pub horizon: S,
    pub x0: Vec<S>,
    pub speeds: Vec<S>,
    pub directions: Vec<DirectionSchedule<S>>,
    pub control_set: ControlSet<S>,
    set: Polyhedron<S>,
}

/// Rows `(.., 1, 1, -1, -1, ..)` at agents `j, j+1`, offsets `-2R`.
pub fn robot_sweeping_set<S: Scalar>(n: usize, radius: S) -> Result<Polyhedron<S>> {
    if n < 2 {
        return Err(Error::scenario("n", "at least two agents are required"));
    }
    let normals = (0..n - 1)
        .map(|j| {
            let mut a = vec![S::zero(); 2 * n];
            a[2 * j] = S::one();
            a[2 * j + 1] = S::one();
            a[2 * j + 2] = -S::one();
            a[2 * j + 3] = -S::one();
            a
        })
        .collect();
    Polyhedron::new(normals, vec![-(radius + radius); n - 1])
}

impl<S: Scalar> RobotScenario<S> {
    pub fn new(
        n: usize,
        radius: S,
        horizon: S,
        x0: Vec<S>,
        speeds: Vec<S>,
        directions: Vec<DirectionSchedule<S>>,
        control_set: ControlSet<S>,
    ) -> Result<Self> {
        validate_common(n, radius, horizon, &speeds, &control_set)?;
        if x0.len() != 2 * n {
            return Err(Error::scenario("x0", format!("expected {} entries, found {}", 2 * n, x0.len())));
        }
        if directions.len() != n {
            return Err(Error::scenario(
                "angles_deg",
                format!("expected {n} headings, found {}", directions.len()),
            ));
        }
        let set = robot_sweeping_set(n, radius)?;
        if !set.contains(&x0, S::default_tol())? {
            return Err(Error::scenario("x0", "initial state violates the noncollision constraints"));
        }
        if !ordering_holds(&x0) {
            return Err(Error::scenario("x0", "agents must be ordered componentwise"));
        }
        Ok(Self { n, radius, horizon, x0, speeds, directions, control_set, set })
    }

    pub fn center(&self, x: &[S], i: usize) -> (S, S) {
        (x[2 * i], x[2 * i + 1])
    }

    /// Sum-norm gap `|dx| + |dy| - 2R` between agents `i` and `j`.
    pub fn distance_gap(&self, x: &[S], i: usize, j: usize) -> S {
        let (a, b) = (self.center(x, i), self.center(x, j));
        (a.0 - b.0).abs() + (a.1 - b.1).abs() - (self.radius + self.radius)
    }

    fn gap_gradient(&self, x: &[S], i: usize, j: usize) -> Result<Vec<S>> {
        let mut grad = vec![S::zero(); 2 * self.n];
        for k in 0..2 {
            let d = x[2 * j + k] - x[2 * i + k];
            if d.is_zero() {
                return Err(Error::GradientUndefined { i: i + 1, j: j + 1 });
            }
            let sg = d.signum();
            grad[2 * j + k] = sg;
            grad[2 * i + k] = -sg;
        }
        Ok(grad)
    }

    /// Replaces contact-triggered switches by a switch at `t`.
    pub fn with_switch_at(&self, t: S) -> Self {
        let mut out = self.clone();
        for d in &mut out.directions {
            if let Some((SwitchTime::AtContact, after)) = d.switch {
                d.switch = Some((SwitchTime::At(t), after));
            }
        }
        out
    }

    pub fn has_pending_switch(&self) -> bool {
        self.directions.iter().any(|d| matches!(d.switch, Some((SwitchTime::AtContact, _))))
    }
}

/// `x^{(j+1)k} > x^{jk}` for all consecutive agents and both coordinates.
pub fn ordering_holds<S: Scalar>(x: &[S]) -> bool {
    let n = x.len() / 2;
    (0..n.saturating_sub(1)).all(|j| x[2 * j + 2] > x[2 * j] && x[2 * j + 3] > x[2 * j + 1])
}

/// `(s_i u^i cos th_i(t), s_i u^i sin th_i(t))` per agent.
pub fn robot_g<S: Scalar>(scn: &RobotScenario<S>, u: &[S], t: S) -> Result<Vec<S>> {
    scn.control_set.check(u, S::default_tol(), 0)?;
    let mut g = Vec::with_capacity(2 * scn.n);
    for i in 0..scn.n {
        let d = scn.directions[i].at(t);
        let v = scn.speeds[i] * u[i];
        g.push(v * d.cos);
        g.push(v * d.sin);
    }
    Ok(g)
}

impl<S: Scalar> SweepingModel<S> for RobotScenario<S> {
    fn state_dim(&self) -> usize {
        2 * self.n
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
    fn perturbation(&self, _x: &[S], u: &[S], t: S) -> Result<Vec<S>> {
        robot_g(self, u, t)
    }
    fn control_gradient_transpose(&self, q: &[S], t: S) -> Vec<S> {
        (0..self.n)
            .map(|i| {
                let d = self.directions[i].at(t);
                self.speeds[i] * (d.cos * q[2 * i] + d.sin * q[2 * i + 1])
            })
            .collect()
    }
    fn note_contact(&mut self, t: S) {
        if self.has_pending_switch() {
            *self = self.with_switch_at(t);
        }
    }
    fn max_speed(&self) -> S {
        self.control_set
            .vertices()
            .iter()
            .flat_map(|v| (0..self.n).map(move |i| (self.speeds[i] * v[i]).abs()))
            .fold(S::zero(), |m, v| m.max(v))
    }
}

/// First-order noncollision test `D_ij(x) + h grad D_ij(x) . v >= 0`.
pub fn admissible_velocities_contains<S: Scalar>(
    scn: &RobotScenario<S>,
    x: &[S],
    v: &[S],
    h: S,
) -> Result<bool> {
    if h <= S::zero() {
        return Err(Error::scenario("h", "step must be positive"));
    }
    let tol = S::default_tol();
    for i in 0..scn.n {
        for j in i + 1..scn.n {
            let grad = scn.gap_gradient(x, i, j)?;
            if scn.distance_gap(x, i, j) + h * dot(&grad, v) < -tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetRepresentationReport {
    pub tested: usize,
    /// Draws rejected because they break the ordering hypothesis.
    pub excluded: usize,
    pub inside: usize,
    pub disagreements: usize,
}

/// Compares membership in `C`, in `Q0 = {D_ij >= 0, i < j}` and in the
/// linearization `K(x0)` on random ordered points.
pub fn verify_set_representation<S: Scalar>(
    scn: &RobotScenario<S>,
    samples: usize,
    seed: u64,
) -> Result<SetRepresentationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scn.n;
    let r = scn.radius.to_f64();
    let spread = 4.0 * r.max(1.0) * n as f64;
    let x_ref = &scn.x0;
    let grads: Vec<((usize, usize), Vec<S>, S)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| Ok(((i, j), scn.gap_gradient(x_ref, i, j)?, scn.distance_gap(x_ref, i, j))))
        .collect::<Result<_>>()?;
    let tol = S::default_tol();
    let mut report = SetRepresentationReport { tested: 0, excluded: 0, inside: 0, disagreements: 0 };
    let max_draws = samples.saturating_mul(1 << (2 * n).min(20)).max(samples);
    let mut draws = 0;
    while report.tested < samples && draws < max_draws {
        draws += 1;
        let x: Vec<S> = (0..2 * n)
            .map(|k| {
                let base = x_ref[k].to_f64() + (k / 2) as f64 * r;
                S::from_f64(base + rng.gen_range(-spread..spread))
            })
            .collect();
        if !ordering_holds(&x) {
            report.excluded += 1;
            continue;
        }
        report.tested += 1;
        let in_c = scn.set.contains(&x, tol)?;
        let in_q0 = grads.iter().all(|((i, j), _, _)| scn.distance_gap(&x, *i, *j) >= -tol);
        let in_k = grads.iter().all(|(_, grad, d0)| {
            let step: Vec<S> = x.iter().zip(x_ref).map(|(&a, &b)| a - b).collect();
            *d0 + dot(grad, &step) >= -tol
        });
        if in_c {
            report.inside += 1;
        }
        if in_c != in_q0 || in_c != in_k {
            report.disagreements += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ex34() -> RobotScenario<f64> {
        let d = DirectionSchedule::constant(Direction::from_degrees(225.0));
        RobotScenario::new(
            2,
            6.0,
            6.0,
            vec![-30.0, -30.0, -20.0, -20.0],
            vec![3.0, 1.0],
            vec![d.clone(), d],
            ControlSet::new_segment(vec![2.0, 1.0], -1.685, 1.685).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sweeping_set_rows() {
        let p = robot_sweeping_set(2, 6.0).unwrap();
        assert_eq!(p.normal(0), &[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(p.offset(0), -12.0);
        let p3 = robot_sweeping_set(3, 6.0).unwrap();
        assert_eq!(p3.normal(1), &[0.0, 0.0, 1.0, 1.0, -1.0, -1.0]);
        assert_eq!(robot_sweeping_set(2, 0.0).unwrap().offset(0), 0.0);
        assert!(robot_sweeping_set::<f64>(1, 1.0).is_err());
    }

    #[test]
    fn rows_sum_to_zero_with_four_nonzeros() {
        let p = robot_sweeping_set(5, 1.0).unwrap();
        for a in p.normals() {
            assert_eq!(a.iter().sum::<f64>(), 0.0);
            assert_eq!(a.iter().filter(|v| **v != 0.0).count(), 4);
        }
    }

    #[test]
    fn perturbation_values() {
        let s = ex34();
        let g = robot_g(&s, &[-3.37, -1.685], 0.0).unwrap();
        assert_abs_diff_eq!(g[0], 7.1488, epsilon = 1e-3);
        assert_abs_diff_eq!(g[1], 7.1488, epsilon = 1e-3);
        assert_eq!(robot_g(&s, &[0.0, 0.0], 0.0).unwrap(), vec![0.0; 4]);
        assert!(robot_g(&s, &[-3.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn axis_aligned_perturbation() {
        let d = DirectionSchedule::constant(Direction::from_degrees(0.0));
        let s = RobotScenario::new(
            2,
            0.5,
            1.0,
            vec![0.0, 0.0, 2.0, 2.0],
            vec![1.0, 1.0],
            vec![d.clone(), d],
            ControlSet::new_box(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
        )
        .unwrap();
        assert_eq!(robot_g(&s, &[1.0, 1.0], 0.0).unwrap(), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn diagonal_headings_are_exact() {
        let d: Direction<f64> = Direction::from_degrees(225.0);
        assert_eq!(d.cos, d.sin);
        assert!(d.cos < 0.0);
        assert_abs_diff_eq!(Direction::<f64>::from_degrees(30.0).cos, 3f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn switch_schedule() {
        let sched = DirectionSchedule {
            initial: Direction::from_degrees(0.0),
            switch: Some((SwitchTime::At(2.0), Direction::from_degrees(90.0))),
        };
        assert_eq!(sched.at(1.0).cos, 1.0);
        assert_eq!(sched.at(2.0).sin, 1.0);
    }

    #[test]
    fn gap_examples() {
        let s = ex34();
        assert_eq!(s.distance_gap(&s.x0, 0, 1), 8.0);
        assert_eq!(s.distance_gap(&[1.0, 1.0, 1.0, 1.0], 0, 1), -12.0);
    }

    #[test]
    fn scenario_validation() {
        let d = DirectionSchedule::constant(Direction::from_degrees(225.0));
        let u = ControlSet::new_segment(vec![2.0, 1.0], -1.0, 1.0).unwrap();
        let bad = RobotScenario::new(2, 6.0, 6.0, vec![-30.0, -30.0, -25.0, -25.0], vec![3.0, 1.0], vec![d.clone(), d.clone()], u.clone());
        assert!(matches!(bad, Err(Error::InvalidScenario { ref key, .. }) if key == "x0"));
        let unordered = RobotScenario::new(2, 1.0, 6.0, vec![0.0, 10.0, 5.0, 0.0], vec![3.0, 1.0], vec![d.clone(), d], u);
        assert!(unordered.is_err());
    }

    #[test]
    fn admissible_velocity_signs() {
        // two robots in contact along the diagonal, R = 1
        let d = DirectionSchedule::constant(Direction::from_degrees(45.0));
        let s = RobotScenario::new(
            2,
            1.0,
            1.0,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![d.clone(), d],
            ControlSet::new_box(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
        )
        .unwrap();
        let x = s.x0.clone();
        assert!(admissible_velocities_contains(&s, &x, &[0.0; 4], 0.1).unwrap());
        // robot 2 moves away: grad = (-1,-1,1,1), grad.v = 2 > 0
        assert!(admissible_velocities_contains(&s, &x, &[0.0, 0.0, 1.0, 1.0], 0.1).unwrap());
        assert!(!admissible_velocities_contains(&s, &x, &[0.0, 0.0, -1.0, -1.0], 0.1).unwrap());
        assert!(admissible_velocities_contains(&s, &[0.0, 0.0, 0.0, 1.0], &[0.0; 4], 0.1).is_err());
    }

    #[test]
    fn set_representation_agrees() {
        let rep = verify_set_representation(&ex34(), 1000, 7).unwrap();
        assert_eq!(rep.tested, 1000);
        assert_eq!(rep.disagreements, 0);
        assert!(rep.inside > 0 && rep.inside < rep.tested);
        assert!(rep.excluded > 0);
    }

    proptest! {
        #[test]
        fn ordered_membership_matches_gap(a in -50.0..50.0f64, b in -50.0..50.0f64, dx in 0.01..20.0f64, dy in 0.01..20.0f64) {
            let p = robot_sweeping_set(2, 6.0).unwrap();
            let x = [a, b, a + dx, b + dy];
            let s = ex34();
            prop_assert_eq!(p.contains(&x, 0.0).unwrap(), s.distance_gap(&x, 0, 1) >= 0.0);
        }

        #[test]
        fn perturbation_is_linear(r1 in -1.685..1.685f64, r2 in -1.685..1.685f64, al in 0.0..1.0f64) {
            let s = ex34();
            let u1 = [2.0 * r1, r1];
            let u2 = [2.0 * r2, r2];
            let um = [2.0 * (al * r1 + (1.0 - al) * r2), al * r1 + (1.0 - al) * r2];
            let g1 = robot_g(&s, &u1, 0.0).unwrap();
            let g2 = robot_g(&s, &u2, 0.0).unwrap();
            let gm = robot_g(&s, &um, 0.0).unwrap();
            for k in 0..4 {
                prop_assert!((gm[k] - (al * g1[k] + (1.0 - al) * g2[k])).abs() < 1e-12);
            }
        }
    }
}
