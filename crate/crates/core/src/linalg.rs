//! Small dense helpers on `&[S]` vectors.

use crate::scalar::Scalar;

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

pub fn norm_inf<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, v| m.max(v.abs()))
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<S: Scalar>(a: &[S], k: S) -> Vec<S> {
    a.iter().map(|&x| x * k).collect()
}

/// `y += k * x`
pub fn axpy<S: Scalar>(y: &mut [S], k: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

pub fn dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    norm(&sub(a, b))
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `rel_tol` times the largest
/// entry of `a`. Pass zero for exact scalars.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S], rel_tol: S) -> Option<Vec<S>> {
    let n = b.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(S::zero(), |acc, v| acc.max(v.abs()));
    if n == 0 {
        return Some(Vec::new());
    }
    if scale.is_zero() {
        return None;
    }
    let thresh = rel_tol * scale;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].abs() <= thresh || m[piv][col].is_zero() {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }
    let mut x = vec![S::zero(); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    Some(x)
}

/// Numerical rank of the matrix whose rows are `rows`.
///
/// Full pivoting; a pivot counts when it exceeds `rel_tol` times the
/// largest entry magnitude.
pub fn rank<S: Scalar>(rows: &[Vec<S>], rel_tol: S) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut m = rows.to_vec();
    let nr = m.len();
    let nc = m[0].len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(S::zero(), |acc, v| acc.max(v.abs()));
    if scale.is_zero() {
        return 0;
    }
    let thresh = rel_tol * scale;
    let mut rank = 0;
    let mut col_perm: Vec<usize> = (0..nc).collect();
    for k in 0..nr.min(nc) {
        let mut best = (k, k, S::zero());
        for (i, row) in m.iter().enumerate().skip(k) {
            for (j, &cj) in col_perm.iter().enumerate().skip(k) {
                let v = row[cj].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        if best.2 <= thresh || best.2.is_zero() {
            break;
        }
        m.swap(k, best.0);
        col_perm.swap(k, best.1);
        let pc = col_perm[k];
        for r in k + 1..nr {
            let f = m[r][pc] / m[k][pc];
            if f.is_zero() {
                continue;
            }
            for &c in &col_perm[k..] {
                let v = m[k][c];
                m[r][c] -= f * v;
            }
        }
        rank += 1;
    }
    rank
}

/// Nonnegative least squares `min ||E u - f||, u >= 0` (Lawson–Hanson).
///
/// `cols` holds the columns of `E`. Returns `None` if the iteration limit
/// is reached.
pub fn nnls<S: Scalar>(cols: &[Vec<S>], f: &[S], tol: S) -> Option<Vec<S>> {
    let n = cols.len();
    let mut u = vec![S::zero(); n];
    let mut passive = vec![false; n];
    let mut excluded = vec![false; n];
    let gram_tol = if tol.is_zero() { S::zero() } else { S::from_f64(1e-13) };
    let residual = |u: &[S]| -> Vec<S> {
        let mut r = f.to_vec();
        for (c, &uc) in cols.iter().zip(u) {
            if !uc.is_zero() {
                axpy(&mut r, -uc, c);
            }
        }
        r
    };
    let ls = |set: &[usize]| -> Option<Vec<S>> {
        let g: Vec<Vec<S>> = set
            .iter()
            .map(|&i| set.iter().map(|&j| dot(&cols[i], &cols[j])).collect())
            .collect();
        let b: Vec<S> = set.iter().map(|&i| dot(&cols[i], f)).collect();
        solve(&g, &b, gram_tol)
    };
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = residual(&u);
        let w: Vec<S> = cols.iter().map(|c| dot(c, &r)).collect();
        let cand = (0..n)
            .filter(|&i| !passive[i] && !excluded[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(t) = cand else {
            return Some(u);
        };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > 3 * n + 10 {
                return None;
            }
            let set: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let Some(z) = ls(&set) else {
                passive[t] = false;
                excluded[t] = true;
                break;
            };
            if z.iter().all(|&v| v > tol) {
                u.iter_mut().for_each(|v| *v = S::zero());
                for (k, &i) in set.iter().enumerate() {
                    u[i] = z[k];
                }
                excluded.iter_mut().for_each(|e| *e = false);
                break;
            }
            let mut alpha = S::one();
            for (k, &i) in set.iter().enumerate() {
                if z[k] <= tol {
                    let denom = u[i] - z[k];
                    if denom > S::zero() {
                        alpha = alpha.min(u[i] / denom);
                    } else {
                        alpha = S::zero();
                    }
                }
            }
            for (k, &i) in set.iter().enumerate() {
                let ui = u[i];
                u[i] = ui + alpha * (z[k] - ui);
                if u[i] <= tol {
                    u[i] = S::zero();
                    passive[i] = false;
                }
            }
            if set.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Rational};
    use approx::assert_abs_diff_eq;

    #[test]
    fn solve_two_by_two() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[3.0, 5.0], 1e-14).unwrap();
        assert_abs_diff_eq!(x[0], 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.4, epsilon = 1e-14);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(&a, &[1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn rank_counts_dependent_rows() {
        let rows = vec![vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(rank(&rows, 1e-10), 2);
        let exact: Vec<Vec<Rational>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| <Rational as Scalar>::from_f64(v)).collect())
            .collect();
        assert_eq!(rank(&exact, rational(0, 1)), 2);
    }

    #[test]
    fn nnls_clips_negative_coefficient() {
        // columns e1 and -e2, target (1, 1): best is u = (1, 0)
        let cols = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let u = nnls(&cols, &[1.0, 1.0], 1e-12).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nnls_exact_in_rationals() {
        let cols = vec![
            vec![rational(1, 1), rational(1, 1)],
            vec![rational(1, 1), rational(-1, 1)],
        ];
        let u = nnls(&cols, &[rational(3, 1), rational(1, 1)], rational(0, 1)).unwrap();
        assert_eq!(u, vec![rational(2, 1), rational(1, 1)]);
    }
}
