use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// Compact convex control set: a box or a segment through the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSet<S> {
    /// `lo_i <= u_i <= hi_i`
    Box { lo: Vec<S>, hi: Vec<S> },
    /// `u = link * r` with `lo <= r <= hi`
    Segment { link: Vec<S>, lo: S, hi: S },
}

impl<S: Scalar> ControlSet<S> {
    pub fn new_box(lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::scenario("control_set.bounds", "lower and upper bounds differ in length"));
        }
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::scenario("control_set.bounds", format!("empty interval at coordinate {}", i + 1)));
        }
        Ok(ControlSet::Box { lo, hi })
    }

    pub fn new_segment(link: Vec<S>, lo: S, hi: S) -> Result<Self> {
        if link.is_empty() || link.iter().all(|v| v.is_zero()) {
            return Err(Error::scenario("control_set.link", "link coefficients must not all vanish"));
        }
        if lo > hi {
            return Err(Error::scenario("control_set.bounds", "empty parameter interval"));
        }
        Ok(ControlSet::Segment { link, lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Box { lo, .. } => lo.len(),
            ControlSet::Segment { link, .. } => link.len(),
        }
    }

    /// Number of free parameters describing a point of the set.
    pub fn param_dim(&self) -> usize {
        match self {
            ControlSet::Box { lo, .. } => lo.len(),
            ControlSet::Segment { .. } => 1,
        }
    }

    pub fn param_bounds(&self) -> (Vec<S>, Vec<S>) {
        match self {
            ControlSet::Box { lo, hi } => (lo.clone(), hi.clone()),
            ControlSet::Segment { lo, hi, .. } => (vec![*lo], vec![*hi]),
        }
    }

    pub fn from_params(&self, r: &[S]) -> Vec<S> {
        match self {
            ControlSet::Box { .. } => r.to_vec(),
            ControlSet::Segment { link, .. } => link.iter().map(|&k| k * r[0]).collect(),
        }
    }

    /// Parameters of the nearest point of the set.
    pub fn params_of(&self, u: &[S]) -> Vec<S> {
        match self {
            ControlSet::Box { lo, hi } => {
                u.iter().zip(lo.iter().zip(hi)).map(|(&v, (&l, &h))| v.max(l).min(h)).collect()
            }
            ControlSet::Segment { link, lo, hi } => {
                vec![(dot(u, link) / dot(link, link)).max(*lo).min(*hi)]
            }
        }
    }

    pub fn project(&self, u: &[S]) -> Vec<S> {
        self.from_params(&self.params_of(u))
    }

    /// Checks `u` against the set, naming the violated bound.
    pub fn check(&self, u: &[S], tol: S, interval: usize) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.len() });
        }
        match self {
            ControlSet::Box { lo, hi } => {
                for (i, &v) in u.iter().enumerate() {
                    if v < lo[i] - tol {
                        return Err(outside(interval, i, v, lo[i]));
                    }
                    if v > hi[i] + tol {
                        return Err(outside(interval, i, v, hi[i]));
                    }
                }
            }
            ControlSet::Segment { link, lo, hi } => {
                let r = dot(u, link) / dot(link, link);
                for (i, (&v, &k)) in u.iter().zip(link).enumerate() {
                    if (v - k * r).abs() > tol {
                        return Err(outside(interval, i, v, k * r));
                    }
                }
                let i = link.iter().position(|k| !k.is_zero()).unwrap_or(0);
                if r < *lo - tol {
                    return Err(outside(interval, i, u[i], link[i] * *lo));
                }
                if r > *hi + tol {
                    return Err(outside(interval, i, u[i], link[i] * *hi));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: &[S], tol: S) -> bool {
        self.check(u, tol, 0).is_ok()
    }

    pub fn vertices(&self) -> Vec<Vec<S>> {
        match self {
            ControlSet::Box { lo, hi } => {
                let d = lo.len();
                (0..1usize << d)
                    .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
                    .collect()
            }
            ControlSet::Segment { link, lo, hi } => {
                vec![link.iter().map(|&k| k * *lo).collect(), link.iter().map(|&k| k * *hi).collect()]
            }
        }
    }

    pub fn center(&self) -> Vec<S> {
        let (lo, hi) = self.param_bounds();
        let mid: Vec<S> = lo.iter().zip(&hi).map(|(&l, &h)| (l + h) * S::half()).collect();
        self.from_params(&mid)
    }

    /// `max_{u in U} <psi, u>` by vertex enumeration, with a maximizer.
    pub fn maximize_linear(&self, psi: &[S]) -> (S, Vec<S>) {
        let mut best: Option<(S, Vec<S>)> = None;
        for v in self.vertices() {
            let val = dot(psi, &v);
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, v));
            }
        }
        best.expect("control set has at least one vertex")
    }
}

fn outside<S: Scalar>(interval: usize, coord: usize, value: S, bound: S) -> Error {
    Error::ControlOutsideSet { interval, coord: coord + 1, value: value.to_f64(), bound: bound.to_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve;
    use proptest::prelude::*;

    #[test]
    fn box_vertices_and_center() {
        let u = ControlSet::new_box(vec![-2.0; 3], vec![2.0; 3]).unwrap();
        let v = u.vertices();
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|p| u.contains(p, 0.0)));
        assert_eq!(u.center(), vec![0.0; 3]);
    }

    #[test]
    fn segment_membership() {
        let u = ControlSet::new_segment(vec![2.0, 1.0], -1.685, 1.685).unwrap();
        assert!(u.contains(&[-3.37, -1.685], 1e-9));
        assert!(!u.contains(&[-3.37, -1.6], 1e-9));
        assert!(!u.contains(&[4.0, 2.0], 1e-9));
        assert_eq!(u.vertices().len(), 2);
    }

    #[test]
    fn check_names_the_bound() {
        let u = ControlSet::new_box(vec![-1.8, -1.8], vec![1.8, 1.8]).unwrap();
        match u.check(&[1.0, 2.5], 1e-9, 4) {
            Err(Error::ControlOutsideSet { interval, coord, bound, .. }) => {
                assert_eq!((interval, coord), (4, 2));
                assert_eq!(bound, 1.8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn maximize_linear_picks_signed_vertex() {
        let u = ControlSet::new_box(vec![-2.0; 3], vec![2.0; 3]).unwrap();
        let (val, arg) = u.maximize_linear(&[8.0, 28.0, 26.0]);
        assert_eq!(arg, vec![2.0, 2.0, 2.0]);
        assert_eq!(val, 124.0);
        let seg = ControlSet::new_segment(vec![1.0, 1.0], -1.8, 1.8).unwrap();
        assert_eq!(seg.maximize_linear(&[-1.0, 0.5]).1, vec![-1.8, -1.8]);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(ControlSet::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(ControlSet::new_segment(vec![0.0, 0.0], 0.0, 1.0).is_err());
    }

    proptest! {
        // a sampled point of a box in dimension <= 3 is a convex combination
        // of the vertices: solve for the multilinear (barycentric) weights
        #[test]
        fn box_points_are_vertex_combinations(t in prop::collection::vec(0.0..1.0f64, 1..=3)) {
            let d = t.len();
            let u = ControlSet::new_box(vec![-1.0; d], vec![3.0; d]).unwrap();
            let p: Vec<f64> = t.iter().map(|&ti| -1.0 + 4.0 * ti).collect();
            let verts = u.vertices();
            let weights: Vec<f64> = (0..verts.len())
                .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { t[i] } else { 1.0 - t[i] }).product())
                .collect();
            prop_assert!(weights.iter().all(|&w| w >= 0.0));
            prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..d {
                let c: f64 = verts.iter().zip(&weights).map(|(v, w)| v[i] * w).sum();
                prop_assert!((c - p[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn segment_points_are_vertex_combinations(r in -1.0..1.0f64) {
            let u = ControlSet::new_segment(vec![2.0, 1.0], -1.0, 1.0).unwrap();
            let p = u.from_params(&[r]);
            let v = u.vertices();
            // p = a v0 + (1 - a) v1
            let a = solve(&[vec![v[0][0] - v[1][0]]], &[p[0] - v[1][0]], 1e-14).unwrap()[0];
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a * v[0][1] + (1.0 - a) * v[1][1] - p[1]).abs() < 1e-12);
        }
    }
}
