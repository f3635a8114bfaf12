use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Time grid `0 = t_0 < ... < t_N = T`.
///
/// Simulation uses dyadic grids `t_k = kT/2^m`. Closed-form solutions add
/// their phase breakpoints so that every interval lies in one phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<S> {
    nodes: Vec<S>,
    exponent: Option<u32>,
}

impl<S: Scalar> Mesh<S> {
    pub fn dyadic(horizon: S, m: u32) -> Result<Self> {
        if horizon <= S::zero() {
            return Err(Error::scenario("T", "horizon must be positive"));
        }
        if m > 24 {
            return Err(Error::scenario("mesh-exp", "exponent too large"));
        }
        let n = 1usize << m;
        let denom = S::from_usize(n);
        let nodes = (0..=n).map(|k| horizon * S::from_usize(k) / denom).collect();
        Ok(Self { nodes, exponent: Some(m) })
    }

    pub fn from_nodes(nodes: Vec<S>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::MeshMismatch("a mesh needs at least two nodes".into()));
        }
        if !nodes[0].is_zero() {
            return Err(Error::MeshMismatch("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MeshMismatch("nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes, exponent: None })
    }

    /// Inserts extra nodes; points closer than `tol` to a node are merged.
    pub fn with_breakpoints(&self, points: &[S], tol: S) -> Self {
        let t_end = self.horizon();
        let mut nodes = self.nodes.clone();
        for &p in points {
            if p <= S::zero() || p >= t_end {
                continue;
            }
            if nodes.iter().any(|&t| (t - p).abs() <= tol) {
                continue;
            }
            let k = nodes.iter().position(|&t| t > p).unwrap_or(nodes.len());
            nodes.insert(k, p);
        }
        let exponent = if nodes.len() == self.nodes.len() { self.exponent } else { None };
        Self { nodes, exponent }
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> S {
        self.nodes[k]
    }

    pub fn exponent(&self) -> Option<u32> {
        self.exponent
    }

    pub fn horizon(&self) -> S {
        *self.nodes.last().expect("nonempty mesh")
    }

    pub fn num_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn step(&self, k: usize) -> S {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_step(&self) -> S {
        (0..self.num_intervals()).fold(S::zero(), |m, k| m.max(self.step(k)))
    }

    /// Interval `k` with `t_k <= t < t_{k+1}`; `T` maps to the last one.
    pub fn interval_of(&self, t: S) -> usize {
        let last = self.num_intervals() - 1;
        match self.nodes.iter().position(|&tk| tk > t) {
            Some(0) => 0,
            Some(k) => (k - 1).min(last),
            None => last,
        }
    }

    pub fn matches(&self, other: &Mesh<S>, tol: S) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(&a, &b)| (a - b).abs() <= tol)
    }
}

/// Control values, one per mesh interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal<S> {
    pub mesh: Mesh<S>,
    pub values: Vec<Vec<S>>,
}

impl<S: Scalar> ControlSignal<S> {
    pub fn new(mesh: Mesh<S>, values: Vec<Vec<S>>) -> Result<Self> {
        if values.len() != mesh.num_intervals() {
            return Err(Error::MeshMismatch(format!(
                "{} control values for {} intervals",
                values.len(),
                mesh.num_intervals()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Mesh<S>, u: &[S]) -> Self {
        let values = vec![u.to_vec(); mesh.num_intervals()];
        Self { mesh, values }
    }

    pub fn value(&self, k: usize) -> &[S] {
        &self.values[k]
    }

    /// Same control resampled on another mesh (right-continuous).
    pub fn resample(&self, mesh: &Mesh<S>) -> Self {
        let values = (0..mesh.num_intervals())
            .map(|k| self.values[self.mesh.interval_of(mesh.node(k))].clone())
            .collect();
        Self { mesh: mesh.clone(), values }
    }
}

/// Piecewise-affine path through the mesh nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub mesh: Mesh<S>,
    pub nodes: Vec<Vec<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(mesh: Mesh<S>, nodes: Vec<Vec<S>>) -> Result<Self> {
        if nodes.len() != mesh.nodes().len() {
            return Err(Error::MeshMismatch(format!(
                "{} states for {} nodes",
                nodes.len(),
                mesh.nodes().len()
            )));
        }
        Ok(Self { mesh, nodes })
    }

    pub fn terminal(&self) -> &[S] {
        self.nodes.last().expect("nonempty trajectory")
    }

    pub fn velocity(&self, k: usize) -> Vec<S> {
        let h = self.mesh.step(k);
        linalg::sub(&self.nodes[k + 1], &self.nodes[k]).into_iter().map(|v| v / h).collect()
    }

    pub fn state_at(&self, t: S) -> Vec<S> {
        let k = self.mesh.interval_of(t);
        let dt = t - self.mesh.node(k);
        let v = self.velocity(k);
        let mut x = self.nodes[k].clone();
        linalg::axpy(&mut x, dt, &v);
        x
    }
}

/// Normal-cone multipliers `eta^j >= 0`, one vector per interval plus the
/// terminal value at `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaProfile<S> {
    pub mesh: Mesh<S>,
    pub values: Vec<Vec<S>>,
    pub terminal: Vec<S>,
    /// Decomposition residual per interval.
    pub residuals: Vec<S>,
}

impl<S: Scalar> EtaProfile<S> {
    pub fn max_residual(&self) -> S {
        self.residuals.iter().fold(S::zero(), |m, &r| m.max(r))
    }

    pub fn value(&self, k: usize) -> &[S] {
        &self.values[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Rational};

    #[test]
    fn dyadic_nodes() {
        let m = Mesh::dyadic(6.0, 2).unwrap();
        assert_eq!(m.nodes(), &[0.0, 1.5, 3.0, 4.5, 6.0]);
        assert_eq!(m.exponent(), Some(2));
        assert_eq!(m.step(1), 1.5);
        let r: Mesh<Rational> = Mesh::dyadic(rational(6, 1), 3).unwrap();
        assert_eq!(r.node(1), rational(3, 4));
        assert!(Mesh::dyadic(0.0, 2).is_err());
    }

    #[test]
    fn breakpoints_inserted_and_merged() {
        let m = Mesh::dyadic(6.0, 1).unwrap().with_breakpoints(&[0.6, 3.0 + 1e-15, 0.0, 6.0], 1e-12);
        assert_eq!(m.nodes(), &[0.0, 0.6, 3.0, 6.0]);
        assert_eq!(m.exponent(), None);
    }

    #[test]
    fn interval_lookup_is_right_continuous() {
        let m = Mesh::dyadic(4.0, 2).unwrap();
        assert_eq!(m.interval_of(0.0), 0);
        assert_eq!(m.interval_of(1.0), 1);
        assert_eq!(m.interval_of(3.9), 3);
        assert_eq!(m.interval_of(4.0), 3);
    }

    #[test]
    fn from_nodes_validation() {
        assert!(Mesh::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Mesh::from_nodes(vec![0.5, 1.0]).is_err());
        assert!(Mesh::from_nodes(vec![0.0, 0.6, 6.0]).is_ok());
    }

    #[test]
    fn trajectory_interpolation() {
        let m = Mesh::from_nodes(vec![0.0, 1.0, 3.0]).unwrap();
        let tr = Trajectory::new(m, vec![vec![0.0], vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(tr.velocity(0), vec![2.0]);
        assert_eq!(tr.state_at(0.5), vec![1.0]);
        assert_eq!(tr.state_at(2.0), vec![2.0]);
    }

    #[test]
    fn resample_control() {
        let coarse = Mesh::dyadic(2.0, 1).unwrap();
        let u = ControlSignal::new(coarse, vec![vec![1.0], vec![2.0]]).unwrap();
        let fine = Mesh::dyadic(2.0, 2).unwrap();
        let r = u.resample(&fine);
        assert_eq!(r.values, vec![vec![1.0], vec![1.0], vec![2.0], vec![2.0]]);
    }
}
