//! `J(r) = |a0 + A r|^2 / 2` over a polygon in at most two parameters.

use crate::linalg::{self, axpy, dot};
use crate::scalar::Scalar;

/// Affine terminal state `a0 + sum_i r_i cols[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCost<S> {
    pub a0: Vec<S>,
    pub cols: Vec<Vec<S>>,
}

/// Linear constraint `<a, r> <= b` on the parameters.
pub type Constraint<S> = (Vec<S>, S);

impl<S: Scalar> AffineCost<S> {
    /// Fits the affine map from values at `r0` and `r1` (one parameter).
    pub fn through(r0: S, x0: &[S], r1: S, x1: &[S]) -> Self {
        let d = r1 - r0;
        let col: Vec<S> = x1.iter().zip(x0).map(|(&b, &a)| (b - a) / d).collect();
        let a0: Vec<S> = x0.iter().zip(&col).map(|(&a, &c)| a - c * r0).collect();
        Self { a0, cols: vec![col] }
    }

    pub fn point(&self, r: &[S]) -> Vec<S> {
        let mut x = self.a0.clone();
        for (c, &ri) in self.cols.iter().zip(r) {
            axpy(&mut x, ri, c);
        }
        x
    }

    pub fn value(&self, r: &[S]) -> S {
        let x = self.point(r);
        dot(&x, &x) * S::half()
    }

    /// `(a, b, c)` with `J(r) = a r^2 + b r + c` (one parameter).
    pub fn coefficients(&self) -> (S, S, S) {
        let c1 = &self.cols[0];
        (dot(c1, c1) * S::half(), dot(&self.a0, c1), dot(&self.a0, &self.a0) * S::half())
    }

    fn grad_parts(&self, base: &[S], dir: &[S]) -> (S, S) {
        let ad = self.point_dir(dir);
        let x = self.point(base);
        (dot(&ad, &x), dot(&ad, &ad))
    }

    fn point_dir(&self, d: &[S]) -> Vec<S> {
        let mut x = vec![S::zero(); self.a0.len()];
        for (c, &di) in self.cols.iter().zip(d) {
            axpy(&mut x, di, c);
        }
        x
    }

    /// Exact minimizer over `{r : <a_i, r> <= b_i}` by enumerating the
    /// stationary point, the minimizers on each edge line and the vertices.
    pub fn minimize(&self, cons: &[Constraint<S>], tol: S) -> Option<Vec<S>> {
        let p = self.cols.len();
        assert!(p == 1 || p == 2, "one or two parameters supported");
        let feasible = |r: &[S]| cons.iter().all(|(a, b)| dot(a, r) <= *b + tol);
        let mut cands: Vec<Vec<S>> = Vec::new();
        let gram: Vec<Vec<S>> = self.cols.iter().map(|ci| self.cols.iter().map(|cj| dot(ci, cj)).collect()).collect();
        let rhs: Vec<S> = self.cols.iter().map(|c| -dot(c, &self.a0)).collect();
        let rel = if tol.is_zero() { S::zero() } else { S::from_f64(1e-13) };
        if let Some(r) = linalg::solve(&gram, &rhs, rel) {
            cands.push(r);
        }
        for (a, b) in cons {
            let aa = dot(a, a);
            if aa.is_zero() {
                continue;
            }
            let r0: Vec<S> = a.iter().map(|&ai| ai * *b / aa).collect();
            if p == 1 {
                cands.push(r0);
                continue;
            }
            let d = vec![-a[1], a[0]];
            let (num, den) = self.grad_parts(&r0, &d);
            let s = if den.is_zero() { S::zero() } else { -num / den };
            cands.push(vec![r0[0] + s * d[0], r0[1] + s * d[1]]);
        }
        if p == 2 {
            for i in 0..cons.len() {
                for j in i + 1..cons.len() {
                    let m = vec![cons[i].0.clone(), cons[j].0.clone()];
                    if let Some(r) = linalg::solve(&m, &[cons[i].1, cons[j].1], rel) {
                        cands.push(r);
                    }
                }
            }
        }
        let mut best: Option<(S, Vec<S>)> = None;
        for r in cands.into_iter().filter(|r| feasible(r)) {
            let v = self.value(&r);
            if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, r));
            }
        }
        best.map(|(_, r)| r)
    }
}
