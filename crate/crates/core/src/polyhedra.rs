//! Convex polyhedra `{x : <a_j, x> <= c_j}`, projections and normal cones.

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm};
use crate::scalar::Scalar;

/// Intersection of finitely many closed half-spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron<S> {
    dim: usize,
    normals: Vec<Vec<S>>,
    offsets: Vec<S>,
}

/// Indices of constraints that hold with equality at a point.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Projection<S> {
    pub point: Vec<S>,
    /// Constraints carrying a positive multiplier at the solution.
    pub working_set: Vec<usize>,
    /// `y - point = sum_j multipliers[j] * a_j`, one entry per constraint.
    pub multipliers: Vec<S>,
}

/// Nonnegative combination of active normals approximating a vector.
#[derive(Clone, Debug)]
pub struct ConeDecomposition<S> {
    /// One coefficient per constraint; zero off the active set.
    pub coefficients: Vec<S>,
    pub active: ActiveSet,
    pub residual: S,
}

impl<S: Scalar> Polyhedron<S> {
    pub fn new(normals: Vec<Vec<S>>, offsets: Vec<S>) -> Result<Self> {
        if normals.len() != offsets.len() {
            return Err(Error::InvalidPolyhedron(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let dim = normals.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidPolyhedron("no constraints or empty normals".into()));
        }
        for (j, a) in normals.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::InvalidPolyhedron(format!(
                    "normal {j} has length {}, expected {dim}",
                    a.len()
                )));
            }
            if a.iter().all(|v| v.is_zero()) {
                return Err(Error::InvalidPolyhedron(format!("normal {j} is zero")));
            }
        }
        Ok(Self { dim, normals, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.offsets.len()
    }

    pub fn normal(&self, j: usize) -> &[S] {
        &self.normals[j]
    }

    pub fn normals(&self) -> &[Vec<S>] {
        &self.normals
    }

    pub fn offset(&self, j: usize) -> S {
        self.offsets[j]
    }

    pub fn offsets(&self) -> &[S] {
        &self.offsets
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    /// `c_j - <a_j, x>`; nonnegative exactly when constraint `j` holds.
    pub fn slack(&self, j: usize, x: &[S]) -> S {
        self.offsets[j] - dot(&self.normals[j], x)
    }

    /// Largest constraint violation at `x`, zero inside.
    pub fn violation(&self, x: &[S]) -> S {
        (0..self.num_constraints()).fold(S::zero(), |m, j| m.max(-self.slack(j, x)))
    }

    pub fn contains(&self, x: &[S], tol: S) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.violation(x) <= tol)
    }

    pub fn active_set(&self, x: &[S], tol: S) -> Result<ActiveSet> {
        self.check_dim(x)?;
        let v = self.violation(x);
        if v > tol {
            return Err(Error::OutsideSet { violation: v.to_f64() });
        }
        Ok(self.active_unchecked(x, tol))
    }

    fn active_unchecked(&self, x: &[S], tol: S) -> ActiveSet {
        let indices = (0..self.num_constraints())
            .filter(|&j| self.slack(j, x).abs() <= tol)
            .collect();
        ActiveSet { indices }
    }

    /// Euclidean projection onto the polyhedron.
    pub fn project(&self, y: &[S], tol: S) -> Result<Projection<S>> {
        self.project_with_hint(y, &[], tol)
    }

    /// Projection that first tries the equality-constrained solve on `hint`.
    ///
    /// A consecutive step of a sweeping scheme usually keeps its working
    /// set, so the hint saves the full active-set iteration.
    pub fn project_with_hint(&self, y: &[S], hint: &[usize], tol: S) -> Result<Projection<S>> {
        self.check_dim(y)?;
        let s = self.num_constraints();
        if self.violation(y) <= S::zero() {
            return Ok(Projection { point: y.to_vec(), working_set: Vec::new(), multipliers: vec![S::zero(); s] });
        }
        if !hint.is_empty() {
            if let Some(p) = self.equality_projection(y, hint, tol) {
                return Ok(p);
            }
        }
        let lambda = self.ldp_multipliers(y, tol)?;
        let working: Vec<usize> = (0..s).filter(|&j| lambda[j] > S::zero()).collect();
        if let Some(p) = self.equality_projection(y, &working, tol) {
            return Ok(p);
        }
        let mut point = y.to_vec();
        for j in &working {
            axpy(&mut point, -lambda[*j], &self.normals[*j]);
        }
        let scale = S::one() + linalg::norm_inf(y);
        if self.violation(&point) > tol * scale {
            return Err(Error::NoConvergence("projection left the polyhedron".into()));
        }
        Ok(Projection { point, working_set: working, multipliers: lambda })
    }

    /// Projects onto the affine set where `set` constraints are equalities
    /// and accepts the result only if it satisfies the KKT conditions.
    fn equality_projection(&self, y: &[S], set: &[usize], tol: S) -> Option<Projection<S>> {
        let g: Vec<Vec<S>> = set
            .iter()
            .map(|&i| set.iter().map(|&j| dot(&self.normals[i], &self.normals[j])).collect())
            .collect();
        let b: Vec<S> = set.iter().map(|&i| dot(&self.normals[i], y) - self.offsets[i]).collect();
        let rel = if tol.is_zero() { S::zero() } else { S::from_f64(1e-12) };
        let mu = linalg::solve(&g, &b, rel)?;
        if mu.iter().any(|&m| m < S::zero()) {
            return None;
        }
        let mut point = y.to_vec();
        let mut multipliers = vec![S::zero(); self.num_constraints()];
        for (k, &j) in set.iter().enumerate() {
            axpy(&mut point, -mu[k], &self.normals[j]);
            multipliers[j] = mu[k];
        }
        let scale = S::one() + linalg::norm_inf(y);
        if self.violation(&point) > tol * scale {
            return None;
        }
        let working_set = set.iter().copied().filter(|&j| multipliers[j] > S::zero()).collect();
        Some(Projection { point, working_set, multipliers })
    }

    /// Least-distance programming: `min ||z||` s.t. `<a_j, z> <= c_j - <a_j, y>`.
    fn ldp_multipliers(&self, y: &[S], tol: S) -> Result<Vec<S>> {
        let n = self.dim;
        let s = self.num_constraints();
        // row scaling is skipped for exact scalars to keep arithmetic exact
        let norms: Vec<S> = if tol.is_zero() {
            vec![S::one(); s]
        } else {
            self.normals.iter().map(|a| norm(a)).collect()
        };
        let h: Vec<S> = (0..s).map(|j| -self.slack(j, y) / norms[j]).collect();
        let sigma = h.iter().fold(S::one(), |m, v| m.max(v.abs()));
        let cols: Vec<Vec<S>> = (0..s)
            .map(|j| {
                let mut c: Vec<S> = self.normals[j].iter().map(|&v| -v / norms[j]).collect();
                c.push(h[j] / sigma);
                c
            })
            .collect();
        let mut f = vec![S::zero(); n + 1];
        f[n] = S::one();
        let nnls_tol = if tol.is_zero() { S::zero() } else { S::from_f64(1e-14) };
        let u = linalg::nnls(&cols, &f, nnls_tol)
            .ok_or_else(|| Error::NoConvergence("active-set iteration limit".into()))?;
        let mut r: Vec<S> = f.iter().map(|&v| -v).collect();
        for (c, &uc) in cols.iter().zip(&u) {
            axpy(&mut r, uc, c);
        }
        let rn = r[n];
        let infeasible_gap = if tol.is_zero() { S::zero() } else { S::from_f64(1e-10) };
        if -rn <= infeasible_gap {
            return Err(Error::Infeasible);
        }
        // z = -r[..n] / rn scaled back by sigma; lambda_j a_j sums to y - x
        Ok((0..s).map(|j| u[j] * sigma / (-rn) / norms[j]).collect())
    }

    /// Best nonnegative combination of the normals active at `x` matching `v`.
    pub fn nearest_normal_decomposition(
        &self,
        x: &[S],
        v: &[S],
        tol: S,
    ) -> Result<ConeDecomposition<S>> {
        let active = self.active_set(x, tol)?;
        self.check_dim(v)?;
        let cols: Vec<Vec<S>> = active.indices.iter().map(|&j| self.normals[j].clone()).collect();
        let nnls_tol = if tol.is_zero() { S::zero() } else { S::from_f64(1e-14) };
        let eta = linalg::nnls(&cols, v, nnls_tol)
            .ok_or_else(|| Error::NoConvergence("normal cone decomposition".into()))?;
        let mut coefficients = vec![S::zero(); self.num_constraints()];
        let mut r = v.to_vec();
        for (k, &j) in active.indices.iter().enumerate() {
            coefficients[j] = eta[k];
            axpy(&mut r, -eta[k], &self.normals[j]);
        }
        Ok(ConeDecomposition { coefficients, active, residual: norm(&r) })
    }

    /// Coefficients `eta >= 0` with `v = sum eta_j a_j` over the active set.
    pub fn decompose_normal(&self, x: &[S], v: &[S], tol: S) -> Result<ConeDecomposition<S>> {
        let d = self.nearest_normal_decomposition(x, v, tol)?;
        if d.residual > tol * (S::one() + norm(v)) {
            return Err(Error::NotInNormalCone { residual: d.residual.to_f64() });
        }
        Ok(d)
    }

    /// Linear independence of the active normals at `x`.
    pub fn check_licq(&self, x: &[S], tol: S) -> Result<bool> {
        let active = self.active_set(x, tol)?;
        let rows: Vec<Vec<S>> = active.indices.iter().map(|&j| self.normals[j].clone()).collect();
        let rel = if tol.is_zero() { S::zero() } else { S::from_f64(1e-10) };
        Ok(linalg::rank(&rows, rel) == rows.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Rational};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_box(n: usize) -> Polyhedron<f64> {
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            normals.push(e.clone());
            offsets.push(1.0);
            e[i] = -1.0;
            normals.push(e);
            offsets.push(1.0);
        }
        Polyhedron::new(normals, offsets).unwrap()
    }

    #[test]
    fn rejects_inconsistent_lengths() {
        assert!(Polyhedron::new(vec![vec![1.0, 0.0]], vec![1.0, 2.0]).is_err());
        assert!(Polyhedron::new(vec![vec![1.0, 0.0], vec![1.0]], vec![1.0, 2.0]).is_err());
        assert!(Polyhedron::new(vec![vec![0.0, 0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn contains_and_dimension_errors() {
        let p = unit_box(2);
        assert!(p.contains(&[0.5, -1.0], 1e-9).unwrap());
        assert!(!p.contains(&[1.1, 0.0], 1e-9).unwrap());
        assert!(matches!(p.contains(&[0.0], 1e-9), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn active_set_at_corner() {
        let p = unit_box(2);
        assert_eq!(p.active_set(&[1.0, -1.0], 1e-9).unwrap().indices, vec![0, 3]);
        assert!(p.active_set(&[2.0, 0.0], 1e-9).is_err());
    }

    #[test]
    fn halfspace_projection_matches_formula() {
        let a = vec![1.0, 2.0, -2.0];
        let p = Polyhedron::new(vec![a.clone()], vec![1.0]).unwrap();
        let y = [3.0, 1.0, 0.5];
        let x = p.project(&y, 1e-9).unwrap().point;
        let t = (dot(&a, &y) - 1.0) / dot(&a, &a);
        for i in 0..3 {
            assert_abs_diff_eq!(x[i], y[i] - t * a[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn box_projection_is_clamp() {
        let p = unit_box(3);
        let y = [2.0, -0.3, -5.0];
        let pr = p.project(&y, 1e-9).unwrap();
        assert_eq!(pr.point.len(), 3);
        assert_abs_diff_eq!(pr.point[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.point[1], -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(pr.point[2], -1.0, epsilon = 1e-12);
        assert_eq!(pr.working_set, vec![0, 5]);
    }

    #[test]
    fn projection_of_interior_point_is_identity() {
        let p = unit_box(2);
        let pr = p.project(&[0.2, 0.3], 1e-9).unwrap();
        assert_eq!(pr.point, vec![0.2, 0.3]);
        assert!(pr.working_set.is_empty());
    }

    #[test]
    fn infeasible_polyhedron_reported() {
        let p = Polyhedron::new(vec![vec![1.0], vec![-1.0]], vec![-1.0, -1.0]).unwrap();
        assert!(matches!(p.project(&[0.0], 1e-9), Err(Error::Infeasible)));
        let q = Polyhedron::new(
            vec![vec![rational(1, 1)], vec![rational(-1, 1)]],
            vec![rational(-1, 1), rational(-1, 1)],
        )
        .unwrap();
        assert!(matches!(q.project(&[rational(0, 1)], rational(0, 1)), Err(Error::Infeasible)));
    }

    #[test]
    fn exact_rational_projection_onto_chain() {
        // x2 - x1 >= 2, x3 - x2 >= 2 written as <e_j - e_{j+1}, x> <= -2
        let one = rational(1, 1);
        let zero = rational(0, 1);
        let p = Polyhedron::new(
            vec![vec![one, -one, zero], vec![zero, one, -one]],
            vec![rational(-2, 1), rational(-2, 1)],
        )
        .unwrap();
        let y = [rational(0, 1), rational(0, 1), rational(0, 1)];
        let pr = p.project(&y, zero).unwrap();
        assert_eq!(pr.point, vec![rational(-2, 1), zero, rational(2, 1)]);
        assert_eq!(pr.multipliers, vec![rational(2, 1), rational(2, 1)]);
    }

    #[test]
    fn decompose_on_single_facet() {
        let p = unit_box(2);
        let x = [1.0, 0.0];
        let d = p.decompose_normal(&x, &[3.0, 0.0], 1e-9).unwrap();
        assert_abs_diff_eq!(d.coefficients[0], 3.0, epsilon = 1e-12);
        assert!(d.coefficients[1..].iter().all(|&c| c == 0.0));
        assert!(p.decompose_normal(&x, &[0.0, 1.0], 1e-9).is_err());
        assert!(p.decompose_normal(&x, &[-1.0, 0.0], 1e-9).is_err());
    }

    #[test]
    fn decompose_at_interior_point() {
        let p = unit_box(2);
        let d = p.decompose_normal(&[0.0, 0.0], &[0.0, 0.0], 1e-9).unwrap();
        assert!(d.active.is_empty());
        assert!(p.decompose_normal(&[0.0, 0.0], &[1.0, 0.0], 1e-9).is_err());
    }

    #[test]
    fn licq_detects_duplicates() {
        let p = Polyhedron::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]], vec![1.0, 2.0]).unwrap();
        assert!(!p.check_licq(&[1.0, 0.0], 1e-9).unwrap());
        assert!(unit_box(2).check_licq(&[1.0, 1.0], 1e-9).unwrap());
        assert!(unit_box(2).check_licq(&[0.0, 0.0], 1e-9).unwrap());
    }

    fn feasible_instance() -> impl Strategy<Value = (Polyhedron<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..=5, 1usize..=6).prop_flat_map(|(n, s)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), s),
                prop::collection::vec(0.0..2.0f64, s),
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
            )
                .prop_filter_map("zero normal", |(normals, slack, interior, y)| {
                    if normals.iter().any(|a| norm(a) < 1e-3) {
                        return None;
                    }
                    let offsets = normals.iter().zip(&slack).map(|(a, s)| dot(a, &interior) + s).collect();
                    Some((Polyhedron::new(normals, offsets).ok()?, y, interior))
                })
        })
    }

    proptest! {
        #[test]
        fn projection_kkt((p, y, interior) in feasible_instance()) {
            let pr = p.project(&y, 1e-9).unwrap();
            let x = &pr.point;
            prop_assert!(p.contains(x, 1e-8).unwrap());
            // variational inequality against a known feasible point
            let r = linalg::sub(&y, x);
            let d = linalg::sub(&interior, x);
            prop_assert!(dot(&r, &d) <= 1e-8 * (1.0 + norm(&r) * norm(&d)));
            let again = p.project(x, 1e-9).unwrap();
            prop_assert!(linalg::dist(&again.point, x) <= 1e-9);
        }

        #[test]
        fn projection_is_nonexpansive((p, y, _i) in feasible_instance(), shift in prop::collection::vec(-1.0..1.0f64, 5)) {
            let y2: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let x1 = p.project(&y, 1e-9).unwrap().point;
            let x2 = p.project(&y2, 1e-9).unwrap().point;
            prop_assert!(linalg::dist(&x1, &x2) <= linalg::dist(&y, &y2) + 1e-8);
        }
    }

    #[test]
    fn rational_decomposition_exact() {
        let one = rational(1, 1);
        let zero = rational(0, 1);
        let p: Polyhedron<Rational> = Polyhedron::new(
            vec![vec![one, zero], vec![zero, one]],
            vec![one, one],
        )
        .unwrap();
        let d = p.decompose_normal(&[one, one], &[rational(1, 2), rational(3, 4)], zero).unwrap();
        assert_eq!(d.coefficients, vec![rational(1, 2), rational(3, 4)]);
        assert_eq!(d.residual, zero);
    }
}
