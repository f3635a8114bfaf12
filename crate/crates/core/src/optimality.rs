//! Necessary optimality conditions for controlled polyhedral sweeping,
//! checked numerically on a candidate `(x, u)` and multiplier set.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm};
use crate::models::SweepingModel;
use crate::scalar::Scalar;
use crate::sweeping::{ControlSignal, EtaProfile, Trajectory};

/// Point mass of the measure `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<S> {
    pub time: S,
    pub mass: Vec<S>,
}

/// Multipliers `(lambda, eta, p, q, gamma)` on the trajectory mesh.
///
/// `p` is sampled at the nodes. `q` is right-continuous with one value per
/// interval plus `q(T)`. `gamma` is purely atomic.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate<S> {
    pub lambda: S,
    pub eta: EtaProfile<S>,
    pub p: Vec<Vec<S>>,
    pub q: Vec<Vec<S>>,
    pub q_terminal: Vec<S>,
    pub gamma: Vec<Atom<S>>,
}

impl<S: Scalar> DualCertificate<S> {
    fn q_at_node(&self, k: usize) -> &[S] {
        if k < self.q.len() {
            &self.q[k]
        } else {
            &self.q_terminal
        }
    }

    /// `gamma([t, T])`
    pub fn gamma_tail(&self, t: S, time_tol: S) -> Vec<S> {
        let dim = self.q_terminal.len();
        let mut acc = vec![S::zero(); dim];
        for a in self.gamma.iter().filter(|a| a.time >= t - time_tol) {
            axpy(&mut acc, S::one(), &a.mass);
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualEntry {
    pub id: &'static str,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.id).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ResidualEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<18} {:>14.6e} {:>10.1e} {}",
                e.id,
                e.residual,
                e.tol,
                if e.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn check_meshes<S: Scalar>(traj: &Trajectory<S>, u: &ControlSignal<S>, cert: &DualCertificate<S>) -> Result<()> {
    let tol = S::default_tol() * (S::one() + traj.mesh.horizon());
    let n = traj.mesh.num_intervals();
    if !traj.mesh.matches(&u.mesh, tol) || !traj.mesh.matches(&cert.eta.mesh, tol) {
        return Err(Error::MeshMismatch("trajectory, control and certificate meshes differ".into()));
    }
    if cert.p.len() != n + 1 || cert.q.len() != n || cert.eta.values.len() != n {
        return Err(Error::MeshMismatch("certificate arrays do not match the mesh".into()));
    }
    Ok(())
}

fn max_of<S: Scalar>(it: impl Iterator<Item = S>) -> S {
    it.fold(S::zero(), |m, v| m.max(v))
}

/// `sup_k |x'_k + sum_j eta_k^j a_j - g(x_k, u_k)|`, together with any
/// negative part of `eta` or `lambda`.
pub fn check_primal<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    u: &ControlSignal<S>,
    cert: &DualCertificate<S>,
) -> Result<S> {
    let p = model.sweeping_set();
    let mut worst = S::zero();
    for k in 0..traj.mesh.num_intervals() {
        let g = model.perturbation(&traj.nodes[k], u.value(k), traj.mesh.node(k))?;
        let mut r = traj.velocity(k);
        for (j, a) in p.normals().iter().enumerate() {
            axpy(&mut r, cert.eta.values[k][j], a);
        }
        worst = worst.max(linalg::dist(&r, &g));
    }
    let negative = max_of(
        cert.eta.values.iter().chain(std::iter::once(&cert.eta.terminal)).flatten().map(|&e| -e),
    );
    Ok(worst.max(negative).max(-cert.lambda))
}

/// Residuals of `eta^j > 0 => <a_j, x> = c_j` and `eta^j > 0 => <a_j, q> = c_j`,
/// including the terminal values.
pub fn check_complementarity<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    cert: &DualCertificate<S>,
    tol: S,
) -> (S, S) {
    let p = model.sweeping_set();
    let s = p.num_constraints();
    let n = traj.mesh.num_intervals();
    let mut slack_res = S::zero();
    let mut dual_res = S::zero();
    for k in 0..=n {
        // the path is affine on each interval, so its endpoints bound the slack
        let (eta, xa, xb, q) = if k < n {
            (&cert.eta.values[k], &traj.nodes[k], &traj.nodes[k + 1], &cert.q[k])
        } else {
            (&cert.eta.terminal, &traj.nodes[n], &traj.nodes[n], &cert.q_terminal)
        };
        for j in 0..s {
            let e = eta[j].abs();
            let slack = p.slack(j, xa).max(p.slack(j, xb));
            slack_res = slack_res.max(e * (slack - tol).max(S::zero()));
            dual_res = dual_res.max(e * (dot(p.normal(j), q) - p.offset(j)).abs());
        }
    }
    (slack_res, dual_res)
}

/// `sup_t |p(t) - p(T)|`; both models have `grad_x g = 0`, so `p` is constant.
pub fn check_adjoint<S: Scalar>(cert: &DualCertificate<S>) -> S {
    let pt = cert.p.last().expect("nonempty adjoint");
    max_of(cert.p.iter().map(|pk| linalg::dist(pk, pt)))
}

/// `sup_t |q(t) - p(t) + gamma([t, T])|` over nodes that carry no atom,
/// together with the distance of any atom time from `[0, T]`.
pub fn check_measure_link<S: Scalar>(traj: &Trajectory<S>, cert: &DualCertificate<S>) -> S {
    let t_end = traj.mesh.horizon();
    let time_tol = S::default_tol() * (S::one() + t_end);
    let mut worst = max_of(cert.gamma.iter().map(|a| (-a.time).max(a.time - t_end)));
    for (k, &t) in traj.mesh.nodes().iter().enumerate() {
        if cert.gamma.iter().any(|a| (a.time - t).abs() <= time_tol) {
            continue;
        }
        let mut r = linalg::sub(cert.q_at_node(k), &cert.p[k]);
        axpy(&mut r, S::one(), &cert.gamma_tail(t, time_tol));
        worst = worst.max(norm(&r));
    }
    worst
}

/// `sup_k (max_{u in U} <psi_k, u> - <psi_k, u_k>)` with `psi = grad_u g^T q`.
pub fn check_maximization<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    cert: &DualCertificate<S>,
    u: &ControlSignal<S>,
    traj: &Trajectory<S>,
) -> S {
    let cset = model.control_set();
    max_of((0..traj.mesh.num_intervals()).map(|k| {
        let psi = model.control_gradient_transpose(&cert.q[k], traj.mesh.node(k));
        let (best, _) = cset.maximize_linear(&psi);
        best - dot(&psi, u.value(k))
    }))
}

/// Residual of `-p(T) = lambda x(T) + sum_{j in I(x(T))} eta^j(T) a_j` and
/// of membership of the sum in the normal cone.
pub fn check_transversality<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    cert: &DualCertificate<S>,
    tol: S,
) -> (S, S) {
    let p = model.sweeping_set();
    let x = traj.terminal();
    let active: Vec<usize> = (0..p.num_constraints()).filter(|&j| p.slack(j, x).abs() <= tol).collect();
    let mut r = cert.p.last().expect("nonempty adjoint").clone();
    axpy(&mut r, cert.lambda, x);
    for &j in &active {
        axpy(&mut r, cert.eta.terminal[j], p.normal(j));
    }
    let cone = max_of(active.iter().map(|&j| -cert.eta.terminal[j])).max(p.violation(x));
    (norm(&r), cone)
}

/// `lambda + |q(0)| + |p(T)|`
pub fn check_nontriviality<S: Scalar>(cert: &DualCertificate<S>) -> S {
    let q0 = cert.q.first().unwrap_or(&cert.q_terminal);
    cert.lambda + norm(q0) + norm(cert.p.last().expect("nonempty adjoint"))
}

/// Number of atoms before `T` placed where no constraint is active.
pub fn check_nonatomicity<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    cert: &DualCertificate<S>,
    tol: S,
) -> usize {
    let p = model.sweeping_set();
    let t_end = traj.mesh.horizon();
    let time_tol = S::default_tol() * (S::one() + t_end);
    cert.gamma
        .iter()
        .filter(|a| a.time < t_end - time_tol && a.mass.iter().any(|m| !m.is_zero()))
        .filter(|a| {
            let x = traj.state_at(a.time);
            (0..p.num_constraints()).all(|j| p.slack(j, &x).abs() > tol)
        })
        .count()
}

/// Runs every check and collects the residuals.
pub fn verify_certificate<S: Scalar, M: SweepingModel<S>>(
    model: &M,
    traj: &Trajectory<S>,
    u: &ControlSignal<S>,
    cert: &DualCertificate<S>,
    tol: S,
) -> Result<ResidualReport> {
    check_meshes(traj, u, cert)?;
    let (c2, c3) = check_complementarity(model, traj, cert, tol);
    let (c7, c8) = check_transversality(model, traj, cert, tol);
    let state = max_of(traj.nodes.iter().map(|x| model.sweeping_set().violation(x)));
    let nontrivial = check_nontriviality(cert);
    let atoms = check_nonatomicity(model, traj, cert, tol);
    let t = tol.to_f64();
    let le = |id, r: S| ResidualEntry { id, residual: r.to_f64(), tol: t, pass: r <= tol };
    let entries = vec![
        le("state", state),
        le("1-primal", check_primal(model, traj, u, cert)?),
        le("2-compl-state", c2),
        le("3-compl-dual", c3),
        le("4-adjoint", check_adjoint(cert)),
        le("5-measure", check_measure_link(traj, cert)),
        le("6-maximum", check_maximization(model, cert, u, traj)),
        le("7-transversal", c7),
        le("8-normal-cone", c8),
        ResidualEntry { id: "9-nontrivial", residual: nontrivial.to_f64(), tol: t, pass: nontrivial > tol },
        ResidualEntry { id: "nonatomicity", residual: atoms as f64, tol: 0.0, pass: atoms == 0 },
    ];
    Ok(ResidualReport { entries })
}
