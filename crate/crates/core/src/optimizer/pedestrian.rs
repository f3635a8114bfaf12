use super::{assemble, contact_schedule, AffineCost, CaseReport, Phase, PhasePlan, ReducedCost, ReducedOptions, ReducedSolution};
use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot};
use crate::models::{ControlSet, PedestrianScenario, SweepingModel};
use crate::scalar::Scalar;

fn activity_tol<S: Scalar>(x: &[S]) -> S {
    S::default_tol() * (S::one() + linalg::norm_inf(x))
}

/// Event-driven exact motion for the constant velocity field `g`.
///
/// On each phase the multipliers solve the velocity matching system of the
/// active chain, restricted to nonnegative values; the next event is the
/// earliest contact of a currently separated pair.
pub(crate) fn plan_with_velocity<S: Scalar>(
    scn: &PedestrianScenario<S>,
    g: &[S],
    horizon: S,
) -> Result<PhasePlan<S>> {
    let p = scn.sweeping_set();
    let s = p.num_constraints();
    let exact = S::default_tol().is_zero();
    let mut t = S::zero();
    let mut x = scn.x0.clone();
    let mut phases = Vec::new();
    let mut contact_times = vec![None; s];
    for _ in 0..4 * s + 4 {
        let tol = if exact { S::zero() } else { activity_tol(&x) };
        let active: Vec<usize> = (0..s).filter(|&j| p.slack(j, &x) <= tol).collect();
        let cols: Vec<Vec<S>> = active.iter().map(|&j| p.normal(j).to_vec()).collect();
        let nnls_tol = if exact { S::zero() } else { S::from_f64(1e-14) };
        let coef = linalg::nnls(&cols, g, nnls_tol)
            .ok_or_else(|| Error::NoConvergence("velocity matching system".into()))?;
        let mut eta = vec![S::zero(); s];
        let mut v = g.to_vec();
        for (k, &j) in active.iter().enumerate() {
            eta[j] = coef[k];
            axpy(&mut v, -coef[k], p.normal(j));
            if contact_times[j].is_none() {
                contact_times[j] = Some(t);
            }
        }
        let mut next = horizon;
        for j in (0..s).filter(|j| !active.contains(j)) {
            let rate = dot(p.normal(j), &v);
            if rate > S::zero() {
                let th = t + p.slack(j, &x) / rate;
                if th < next {
                    next = th;
                }
            }
        }
        phases.push(Phase { start: t, end: next, eta, velocity: v.clone(), x_start: x.clone() });
        axpy(&mut x, next - t, &v);
        t = next;
        if t >= horizon {
            return Ok(PhasePlan { phases, contact_times });
        }
    }
    Err(Error::NoConvergence("too many contact events".into()))
}

/// Exact motion of the pedestrians under the constant control `u`.
pub fn pedestrian_closed_form<S: Scalar>(scn: &PedestrianScenario<S>, u: &[S]) -> Result<PhasePlan<S>> {
    scn.control_set.check(u, S::default_tol(), 0)?;
    let g: Vec<S> = scn.speeds.iter().zip(u).map(|(&s, &v)| s * v).collect();
    plan_with_velocity(scn, &g, scn.horizon)
}

/// Velocity matching at an active pair `(i, i+1)`:
/// `2 eta^i = eta^{i+1} + eta^{i-1} - s_{i+1} u^{i+1} + s_i u^i`.
pub fn pedestrian_velocity_match<S: Scalar>(
    scn: &PedestrianScenario<S>,
    u: &[S],
    i: usize,
    eta_prev: S,
    eta_next: S,
) -> S {
    (eta_next + eta_prev - scn.speeds[i + 1] * u[i + 1] + scn.speeds[i] * u[i]) * S::half()
}

/// Multipliers of the neighbours of a pair before it comes into contact.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaHistory<S> {
    /// Last event time before the contact.
    pub theta: S,
    /// `eta` on `[theta, t_i)`, one entry per constraint.
    pub eta_at_theta: Vec<S>,
    /// `int_0^theta eta`, one entry per constraint.
    pub integral: Vec<S>,
}

impl<S: Scalar> EtaHistory<S> {
    /// History of the first `phases` phases of a plan.
    pub fn from_plan(plan: &PhasePlan<S>, phases: usize) -> Self {
        let s = plan.phases[0].eta.len();
        let mut integral = vec![S::zero(); s];
        for ph in &plan.phases[..phases] {
            axpy(&mut integral, ph.end - ph.start, &ph.eta);
        }
        let ph = &plan.phases[phases.min(plan.phases.len() - 1)];
        let theta = if phases == 0 { S::zero() } else { plan.phases[phases - 1].end };
        Self { theta, eta_at_theta: ph.eta.clone(), integral }
    }
}

/// Contact time of the pair `(i, i+1)` given the neighbouring multipliers.
///
/// `None` when the pair does not close within the horizon.
pub fn pedestrian_contact_time<S: Scalar>(
    scn: &PedestrianScenario<S>,
    u: &[S],
    i: usize,
    hist: &EtaHistory<S>,
) -> Result<Option<S>> {
    let s = scn.n - 1;
    if i >= s {
        return Err(Error::DimensionMismatch { expected: s, found: i + 1 });
    }
    let gap = scn.x0[i + 1] - scn.x0[i] - (scn.radius + scn.radius);
    if gap.is_zero() {
        return Ok(Some(S::zero()));
    }
    let nb = |v: &[S]| -> S {
        let prev = if i > 0 { v[i - 1] } else { S::zero() };
        let next = if i + 1 < s { v[i + 1] } else { S::zero() };
        prev + next
    };
    let e_theta = nb(&hist.eta_at_theta);
    let num = gap + hist.theta * e_theta - nb(&hist.integral);
    let den = e_theta - scn.speeds[i + 1] * u[i + 1] + scn.speeds[i] * u[i];
    if den <= S::zero() {
        return Ok(None);
    }
    let t = num / den;
    Ok(if t <= scn.horizon { Some(t) } else { None })
}

pub(crate) fn solve_pedestrian<S: Scalar>(
    scn: &PedestrianScenario<S>,
    opts: &ReducedOptions<S>,
) -> Result<ReducedSolution<S>> {
    match &scn.control_set {
        ControlSet::Segment { link, lo, hi } => solve_segment(scn, link, *lo, *hi, opts),
        ControlSet::Box { .. } => solve_box(scn, opts),
    }
}

fn fmt_s<S: Scalar>(v: S) -> String {
    format!("{:.6}", v.to_f64())
}

/// Minimizes the piecewise quadratic `J(r)` for `u = link * r`.
///
/// The motion is rate independent: `x(t; r) = Y(r t)` for the unit motion
/// `Y`, so `J` is quadratic between the values `r = tau_e / T` given by
/// the event times of `Y`.
fn solve_segment<S: Scalar>(
    scn: &PedestrianScenario<S>,
    link: &[S],
    lo: S,
    hi: S,
    opts: &ReducedOptions<S>,
) -> Result<ReducedSolution<S>> {
    let t_end = scn.horizon;
    let mut pieces: Vec<(S, S)> = Vec::new();
    for sign in [S::one(), -S::one()] {
        let reach = if sign > S::zero() { hi } else { -lo };
        if reach <= S::zero() {
            continue;
        }
        let g: Vec<S> = scn.speeds.iter().zip(link).map(|(&s, &k)| s * k * sign).collect();
        let unit = plan_with_velocity(scn, &g, t_end * reach)?;
        let mut cuts = vec![S::zero()];
        cuts.extend(unit.breakpoints().into_iter().map(|tau| tau / t_end));
        cuts.push(reach);
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                let (a, b) = (sign * w[0], sign * w[1]);
                pieces.push(if a < b { (a, b) } else { (b, a) });
            }
        }
    }
    if pieces.is_empty() {
        pieces.push((lo, hi));
    }
    let terminal_at = |r: S| -> Result<Vec<S>> {
        let u: Vec<S> = link.iter().map(|&k| k * r).collect();
        Ok(pedestrian_closed_form(scn, &u)?.terminal())
    };
    let tol = if S::default_tol().is_zero() { S::zero() } else { S::from_f64(1e-12) };
    let mut cases = Vec::new();
    let mut best: Option<(S, S, ReducedCost<S>, usize)> = None;
    for (a, b) in pieces {
        let cost = if a < b {
            AffineCost::through(a, &terminal_at(a)?, b, &terminal_at(b)?)
        } else {
            let x = terminal_at(a)?;
            AffineCost { cols: vec![vec![S::zero(); x.len()]], a0: x }
        };
        let cons = vec![(vec![-S::one()], -a), (vec![S::one()], b)];
        let Some(r) = cost.minimize(&cons, tol) else { continue };
        let j = cost.value(&r);
        let (ca, cb, cc) = cost.coefficients();
        let contacts = pedestrian_closed_form(scn, &link.iter().map(|&k| k * r[0]).collect::<Vec<_>>())?
            .contact_times
            .iter()
            .filter(|c| c.is_some())
            .count();
        cases.push(CaseReport {
            label: format!("r in [{}, {}]", fmt_s(a), fmt_s(b)),
            accepted: false,
            detail: format!("{contacts} contact(s); J = {} r^2 + {} r + {}", fmt_s(ca), fmt_s(cb), fmt_s(cc)),
            cost: Some(j),
            contact_time: None,
        });
        let better = best.as_ref().map_or(true, |(bj, ..)| j < *bj - tol * (S::one() + bj.abs()));
        if better {
            best = Some((j, r[0], ReducedCost { a: ca, b: cb, c: cc }, cases.len() - 1));
        }
    }
    let (_, r, coef, idx) = best.ok_or_else(|| Error::Unsupported("empty control segment".into()))?;
    cases[idx].accepted = true;
    let control: Vec<S> = link.iter().map(|&k| k * r).collect();
    let plan = pedestrian_closed_form(scn, &control)?;
    cases[idx].contact_time = contact_schedule(&plan).iter().map(|c| c.1).find(|t| *t > S::zero());
    // dual arc from psi = u: q_i = u_i / s_i
    let q = control
        .iter()
        .zip(&scn.speeds)
        .map(|(&u, &s)| {
            if s.is_zero() {
                Err(Error::Unsupported("zero speed leaves the dual arc undetermined".into()))
            } else {
                Ok(u / s)
            }
        })
        .collect::<Result<Vec<S>>>()?;
    finish(scn, plan, control, q, Some(coef), cases, opts)
}

/// Maximization-driven analysis for a box: `q` from complementarity on every
/// constraint, `u` maximizing `<psi, u>`, then a consistency check of each
/// assumption on the multipliers of initially touching pairs.
fn solve_box<S: Scalar>(scn: &PedestrianScenario<S>, opts: &ReducedOptions<S>) -> Result<ReducedSolution<S>> {
    let p = scn.sweeping_set();
    let s = p.num_constraints();
    let exact = S::default_tol().is_zero();
    let tol0 = if exact { S::zero() } else { activity_tol(&scn.x0) };
    let initially: Vec<usize> = (0..s).filter(|&j| p.slack(j, &scn.x0) <= tol0).collect();
    // q_j - q_{j+1} = c_j
    let mut q = vec![opts.dual_anchor; scn.n];
    for j in 0..s {
        q[j + 1] = q[j] - p.offset(j);
    }
    let psi = scn.control_gradient_transpose(&q, S::zero());
    if psi.iter().any(|v| v.is_zero()) {
        return Err(Error::Unsupported("maximization leaves a control coordinate undetermined".into()));
    }
    let (_, control) = scn.control_set.maximize_linear(&psi);
    let plan = pedestrian_closed_form(scn, &control)?;
    let first = &plan.phases[0].eta;
    let eta_tol = if exact { S::zero() } else { S::from_f64(1e-9) * (S::one() + linalg::norm_inf(first)) };
    let never: Vec<usize> = (0..s).filter(|&j| plan.phases.iter().all(|ph| ph.eta[j] <= eta_tol)).collect();
    let m = initially.len();
    let mut masks: Vec<usize> = (0..1usize << m).collect();
    masks.sort_by_key(|mk| (mk.count_ones(), *mk));
    let mut cases = Vec::new();
    let mut chosen = None;
    for (ci, mask) in masks.into_iter().enumerate() {
        let zero: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| initially[b]).collect();
        let assumption = initially
            .iter()
            .map(|&j| format!("eta{}(0) {} 0", j + 1, if zero.contains(&j) { "=" } else { ">" }))
            .collect::<Vec<_>>()
            .join(", ");
        let mut reasons = Vec::new();
        for &j in &initially {
            let e = first[j];
            if zero.contains(&j) && e > eta_tol {
                reasons.push(format!(
                    "maximizer u = {:?} gives eta{}(0) = {}",
                    control.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                    j + 1,
                    fmt_s(e)
                ));
            }
            if !zero.contains(&j) && e <= eta_tol {
                reasons.push(format!("eta{}(0) vanishes at the maximizer", j + 1));
            }
        }
        for &j in &never {
            reasons.push(format!("pair {} never pushes, so q is not determined by it", j + 1));
        }
        let accepted = reasons.is_empty() && chosen.is_none();
        if accepted {
            chosen = Some(ci);
        }
        let label = if assumption.is_empty() { format!("Case {}", ci + 1) } else { format!("Case {}: {assumption}", ci + 1) };
        cases.push(CaseReport {
            label,
            accepted,
            detail: if reasons.is_empty() { "consistent".into() } else { reasons.join("; ") },
            cost: None,
            contact_time: None,
        });
    }
    if chosen.is_none() {
        return Err(Error::Unsupported(format!(
            "no case is consistent: {}",
            cases.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join(" | ")
        )));
    }
    let mut sol = finish(scn, plan, control, q, None, cases, opts)?;
    let idx = chosen.expect("checked above");
    sol.cases[idx].cost = Some(sol.cost);
    sol.cases[idx].contact_time = sol.main_contact_time();
    Ok(sol)
}

fn finish<S: Scalar>(
    scn: &PedestrianScenario<S>,
    plan: PhasePlan<S>,
    control: Vec<S>,
    q: Vec<S>,
    reduced_cost: Option<ReducedCost<S>>,
    cases: Vec<CaseReport<S>>,
    opts: &ReducedOptions<S>,
) -> Result<ReducedSolution<S>> {
    let schedule = contact_schedule(&plan);
    let phases = plan.phases.clone();
    let (trajectory, control_signal, certificate, cost) = assemble(scn, plan, control.clone(), q, opts)?;
    Ok(ReducedSolution {
        control,
        contact_schedule: schedule,
        phases,
        switch_time: None,
        cost,
        reduced_cost,
        cases,
        trajectory,
        control_signal,
        certificate,
    })
}
