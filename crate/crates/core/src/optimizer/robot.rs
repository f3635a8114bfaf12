use super::quadratic::Constraint;
use super::{assemble, AffineCost, CaseReport, Phase, PhasePlan, ReducedCost, ReducedOptions, ReducedSolution};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::models::{ControlSet, Direction, RobotScenario, SweepingModel, SwitchTime};
use crate::scalar::Scalar;

fn diag_tol<S: Scalar>() -> S {
    if S::default_tol().is_zero() {
        S::zero()
    } else {
        S::from_f64(1e-12)
    }
}

fn is_diagonal<S: Scalar>(d: Direction<S>) -> bool {
    (d.cos - d.sin).abs() <= diag_tol()
}

fn require_pair<S: Scalar>(scn: &RobotScenario<S>) -> Result<()> {
    if scn.n != 2 {
        return Err(Error::Unsupported(format!("closed form needs two robots, found {}", scn.n)));
    }
    Ok(())
}

/// Multiplier after contact: `(s_1 u^1 - s_2 u^2) cos(th) / 2` for a diagonal
/// heading `th` and distinct velocities, zero otherwise.
pub fn robot_eta_formula<S: Scalar>(scn: &RobotScenario<S>, u: &[S]) -> S {
    let d = scn.directions[0].after_switch();
    let rel = scn.speeds[0] * u[0] - scn.speeds[1] * u[1];
    if is_diagonal(d) && !rel.is_zero() {
        rel * d.cos * S::half()
    } else {
        S::zero()
    }
}

/// Roots in `[0, T]` of `|x2(t) - x1(t)|^2 = 4R^2` for the motion before
/// contact, in increasing order.
pub fn robot_contact_quadratic<S: Scalar>(scn: &RobotScenario<S>, u: &[S]) -> Result<Vec<S>> {
    require_pair(scn)?;
    let d = scn.directions[0].initial;
    let w = scn.speeds[1] * u[1] - scn.speeds[0] * u[0];
    let dx = scn.x0[2] - scn.x0[0];
    let dy = scn.x0[3] - scn.x0[1];
    let four_r2 = (scn.radius + scn.radius) * (scn.radius + scn.radius);
    let a = w * w;
    let b = (S::two()) * w * (dx * d.cos + dy * d.sin);
    let c = dx * dx + dy * dy - four_r2;
    let mut roots = real_roots(a, b, c);
    roots.retain(|&t| t >= S::zero() && t <= scn.horizon);
    Ok(roots)
}

/// Roots of `8y^2 + 4(x^11 + x^12 - x^21 - x^22) y = 4R^2 - |x^2 - x^1|^2`
/// for `y = t1 eta`, largest first.
pub fn robot_y_quadratic<S: Scalar>(scn: &RobotScenario<S>) -> Result<Vec<S>> {
    require_pair(scn)?;
    let x = &scn.x0;
    let dx = x[2] - x[0];
    let dy = x[3] - x[1];
    let four_r2 = (scn.radius + scn.radius) * (scn.radius + scn.radius);
    let a = S::from_f64(8.0);
    let b = S::from_f64(4.0) * (x[0] + x[1] - x[2] - x[3]);
    let c = dx * dx + dy * dy - four_r2;
    let mut roots = real_roots(a, b, c);
    if roots.is_empty() {
        return Err(Error::Unsupported("contact equation for y has no real root".into()));
    }
    roots.reverse();
    Ok(roots)
}

/// Real roots of `a t^2 + b t + c`, increasing, with a double root once.
fn real_roots<S: Scalar>(a: S, b: S, c: S) -> Vec<S> {
    if a.is_zero() {
        return if b.is_zero() { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - S::from_f64(4.0) * a * c;
    if disc < S::zero() {
        return Vec::new();
    }
    if disc.is_zero() {
        return vec![-b / (a + a)];
    }
    let sq = disc.sqrt();
    let mut r = vec![(-b - sq) / (a + a), (-b + sq) / (a + a)];
    if r[0] > r[1] {
        r.swap(0, 1);
    }
    r
}

/// Parametrization `u = L r` of the control set.
fn param_matrix<S: Scalar>(cs: &ControlSet<S>) -> Vec<Vec<S>> {
    match cs {
        ControlSet::Box { lo, .. } => {
            let d = lo.len();
            (0..d).map(|i| (0..d).map(|k| if i == k { S::one() } else { S::zero() }).collect()).collect()
        }
        ControlSet::Segment { link, .. } => vec![link.clone()],
    }
}

fn bound_constraints<S: Scalar>(cs: &ControlSet<S>) -> Vec<Constraint<S>> {
    let (lo, hi) = cs.param_bounds();
    let p = lo.len();
    let mut out = Vec::new();
    for i in 0..p {
        let mut e = vec![S::zero(); p];
        e[i] = S::one();
        out.push((e.clone(), hi[i]));
        e[i] = -S::one();
        out.push((e, -lo[i]));
    }
    out
}

/// `g` for the control `u` under fixed headings.
fn velocity<S: Scalar>(scn: &RobotScenario<S>, u: &[S], d: &[Direction<S>]) -> Vec<S> {
    (0..scn.n)
        .flat_map(|i| {
            let v = scn.speeds[i] * u[i];
            [v * d[i].cos, v * d[i].sin]
        })
        .collect()
}

struct Candidate<S> {
    label: String,
    /// `y = t1 eta`; `None` for motion without contact.
    y: Option<S>,
    r: Vec<S>,
    cost: S,
    coef: Option<ReducedCost<S>>,
}

pub(crate) fn solve_robot<S: Scalar>(scn: &RobotScenario<S>, opts: &ReducedOptions<S>) -> Result<ReducedSolution<S>> {
    require_pair(scn)?;
    let (d0, d1) = (&scn.directions[0], &scn.directions[1]);
    if d0 != d1 {
        return Err(Error::Unsupported("both robots must share the heading schedule".into()));
    }
    let switching = match d0.switch {
        None => false,
        Some((SwitchTime::AtContact, _)) => true,
        Some((SwitchTime::At(_), _)) => {
            return Err(Error::Unsupported("declared switch times are handled by simulation only".into()))
        }
    };
    let before = vec![d0.initial; 2];
    let after = vec![d0.after_switch(); 2];
    let cs = &scn.control_set;
    let l = param_matrix(cs);
    let p = l.len();
    if switching && p != 1 {
        return Err(Error::Unsupported("heading switches need a one-parameter control set".into()));
    }
    let set = scn.sweeping_set();
    let a = set.normal(0).to_vec();
    let c = set.offset(0);
    let t_end = scn.horizon;
    // eta(r) = <beta, r>
    let beta: Vec<S> = l.iter().map(|li| robot_eta_formula(scn, li)).collect();
    let tol = diag_tol::<S>();
    let mut cands: Vec<Result<Candidate<S>>> = Vec::new();
    let mut case_no = 0;
    if is_diagonal(after[0]) {
        for y in robot_y_quadratic(scn).unwrap_or_default() {
            case_no += 1;
            let label = format!("Case {case_no}: y = {:.6}", y.to_f64());
            if y < S::zero() {
                cands.push(Err(Error::Unsupported(format!("{label}: negative y gives t1 < 0"))));
                continue;
            }
            // x(T) = x0 + T g_after(u) + (g_before - g_after)(u) t1 - (eta T - y) a
            let mut a0 = scn.x0.clone();
            axpy(&mut a0, y, &a);
            let cols: Vec<Vec<S>> = (0..p)
                .map(|i| {
                    let mut col: Vec<S> = velocity(scn, &l[i], &after).iter().map(|&v| v * t_end).collect();
                    axpy(&mut col, -beta[i] * t_end, &a);
                    col
                })
                .collect();
            if switching {
                if beta[0].is_zero() {
                    cands.push(Err(Error::Unsupported(format!("{label}: no push after contact"))));
                    continue;
                }
                let gb = velocity(scn, &l[0], &before);
                let ga = velocity(scn, &l[0], &after);
                for k in 0..a0.len() {
                    a0[k] += (gb[k] - ga[k]) * y / beta[0];
                }
            }
            let cost = AffineCost { a0, cols };
            let mut cons = bound_constraints(cs);
            // t1 = y / eta <= T
            cons.push((beta.iter().map(|&b| -b).collect(), -y / t_end));
            match cost.minimize(&cons, tol) {
                Some(r) => {
                    let coef = (p == 1).then(|| {
                        let (a, b, c) = cost.coefficients();
                        ReducedCost { a, b, c }
                    });
                    cands.push(Ok(Candidate { label, y: Some(y), cost: cost.value(&r), r, coef }));
                }
                None => cands.push(Err(Error::Unsupported(format!("{label}: contact after the horizon for every control")))),
            }
        }
    }
    {
        // free motion that never reaches the constraint
        let cols: Vec<Vec<S>> = (0..p)
            .map(|i| velocity(scn, &l[i], &before).iter().map(|&v| v * t_end).collect())
            .collect();
        let cost = AffineCost { a0: scn.x0.clone(), cols: cols.clone() };
        let mut cons = bound_constraints(cs);
        let slack = c - dot(&a, &scn.x0);
        let strict = if tol.is_zero() { S::zero() } else { tol * (S::one() + slack.abs()) };
        cons.push((cols.iter().map(|col| dot(&a, col)).collect(), slack - strict));
        let label = "No contact".to_string();
        match cost.minimize(&cons, tol) {
            Some(r) => {
                let coef = (p == 1).then(|| {
                    let (a, b, c) = cost.coefficients();
                    ReducedCost { a, b, c }
                });
                cands.push(Ok(Candidate { label, y: None, cost: cost.value(&r), r, coef }))
            }
            None => cands.push(Err(Error::Unsupported(format!("{label}: every control reaches contact")))),
        }
    }
    let mut best: Option<usize> = None;
    for (i, cand) in cands.iter().enumerate() {
        if let Ok(cd) = cand {
            let keep = match best {
                None => true,
                Some(b) => {
                    let bj = cands[b].as_ref().map(|c| c.cost).unwrap_or(S::zero());
                    cd.cost < bj - S::from_f64(1e-9) * (S::one() + bj.abs())
                }
            };
            if keep {
                best = Some(i);
            }
        }
    }
    let mut cases: Vec<CaseReport<S>> = Vec::new();
    let mut plans: Vec<Option<PhasePlan<S>>> = Vec::new();
    for cand in &cands {
        match cand {
            Ok(cd) => {
                let u = ControlSet::from_params(cs, &cd.r);
                let plan = build_plan(scn, &u, cd.y, &before, &after)?;
                let ordered = plan_keeps_order(&plan);
                let t1 = cd.y.map(|_| plan.phases.last().expect("nonempty").start);
                let mut detail = format!(
                    "u = {:?}, J = {:.6}",
                    u.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                    cd.cost.to_f64()
                );
                if let Some(t1) = t1 {
                    detail.push_str(&format!(", t1 = {:.6}", t1.to_f64()));
                }
                if !ordered {
                    detail.push_str(", robots swap order (sum-norm gap ordering violated)");
                }
                cases.push(CaseReport { label: cd.label.clone(), accepted: false, detail, cost: Some(cd.cost), contact_time: t1 });
                plans.push(Some(plan));
            }
            Err(e) => {
                let msg = e.to_string();
                let label = msg.trim_start_matches("unsupported: ").split(':').next().unwrap_or("").to_string();
                cases.push(CaseReport { label, accepted: false, detail: msg, cost: None, contact_time: None });
                plans.push(None);
            }
        }
    }
    if switching {
        // the switched model presupposes the ordering throughout
        for (i, case) in cases.iter_mut().enumerate() {
            if let Some(plan) = &plans[i] {
                if !plan_keeps_order(plan) && Some(i) == best {
                    best = None;
                }
                if !plan_keeps_order(plan) {
                    case.detail.push_str("; rejected");
                }
            }
        }
        if best.is_none() {
            best = (0..cands.len())
                .filter(|&i| plans[i].as_ref().is_some_and(plan_keeps_order))
                .min_by(|&i, &j| {
                    let ci = cands[i].as_ref().map(|c| c.cost).unwrap_or(S::zero());
                    let cj = cands[j].as_ref().map(|c| c.cost).unwrap_or(S::zero());
                    ci.partial_cmp(&cj).unwrap_or(std::cmp::Ordering::Equal)
                });
        }
    }
    let idx = best.ok_or_else(|| {
        Error::Unsupported(format!(
            "no admissible case: {}",
            cases.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join(" | ")
        ))
    })?;
    cases[idx].accepted = true;
    let cd = cands[idx].as_ref().map_err(|e| Error::Unsupported(e.to_string()))?;
    let control = cs.from_params(&cd.r);
    let plan = plans[idx].clone().expect("accepted case has a plan");
    let t1 = cd.y.map(|_| plan.phases.last().expect("nonempty").start);
    let switch_time = if switching { t1 } else { None };
    let model = match switch_time {
        Some(t) => scn.with_switch_at(t),
        None => scn.clone(),
    };
    // dual arc with psi = u: q^{i1} = 0, q^{i2} = u_i / (s_i sin th_i(T))
    let mut q = vec![S::zero(); 4];
    for i in 0..2 {
        let d = after[i];
        let s = scn.speeds[i];
        if !(s * d.sin).is_zero() {
            q[2 * i + 1] = control[i] / (s * d.sin);
        } else if !(s * d.cos).is_zero() {
            q[2 * i] = control[i] / (s * d.cos);
        } else if !control[i].is_zero() {
            return Err(Error::Unsupported("zero speed leaves the dual arc undetermined".into()));
        }
    }
    let schedule: Vec<(usize, S)> = t1.into_iter().map(|t| (0, t)).collect();
    let phases = plan.phases.clone();
    let (trajectory, control_signal, certificate, cost) = assemble(&model, plan, control.clone(), q, opts)?;
    Ok(ReducedSolution {
        control,
        contact_schedule: schedule,
        phases,
        switch_time,
        cost,
        reduced_cost: cd.coef,
        cases,
        trajectory,
        control_signal,
        certificate,
    })
}

/// Two-phase motion: free until `t1 = y / eta`, then pushed by `eta a`.
fn build_plan<S: Scalar>(
    scn: &RobotScenario<S>,
    u: &[S],
    y: Option<S>,
    before: &[Direction<S>],
    after: &[Direction<S>],
) -> Result<PhasePlan<S>> {
    let t_end = scn.horizon;
    let gb = velocity(scn, u, before);
    let zero = vec![S::zero(); 1];
    let Some(y) = y else {
        let phase = Phase { start: S::zero(), end: t_end, eta: zero, velocity: gb, x_start: scn.x0.clone() };
        return Ok(PhasePlan { phases: vec![phase], contact_times: vec![None] });
    };
    let eta = robot_eta_formula(scn, u);
    if eta <= S::zero() {
        return Err(Error::Unsupported("contact case needs a positive multiplier".into()));
    }
    let t1 = y / eta;
    let a = scn.sweeping_set().normal(0).to_vec();
    let mut va = velocity(scn, u, after);
    axpy(&mut va, -eta, &a);
    let mut x1 = scn.x0.clone();
    axpy(&mut x1, t1, &gb);
    let mut phases = Vec::new();
    if t1 > S::zero() {
        phases.push(Phase { start: S::zero(), end: t1, eta: zero, velocity: gb, x_start: scn.x0.clone() });
    }
    phases.push(Phase { start: t1, end: t_end, eta: vec![eta], velocity: va, x_start: x1 });
    Ok(PhasePlan { phases, contact_times: vec![Some(t1)] })
}

fn plan_keeps_order<S: Scalar>(plan: &PhasePlan<S>) -> bool {
    let mut pts: Vec<Vec<S>> = plan.phases.iter().map(|p| p.x_start.clone()).collect();
    pts.push(plan.terminal());
    pts.iter().all(|x| crate::models::ordering_holds(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DirectionSchedule;
    use approx::assert_abs_diff_eq;

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
    fn eta_formula_cases() {
        let s = ex34();
        let u = [-3.37, -1.685];
        let expected = 0.5 * (3.0 * -3.37 + 1.685) * -std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(robot_eta_formula(&s, &u), expected, epsilon = 1e-12);
        // equal velocities: no push
        assert_eq!(robot_eta_formula(&s, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn y_roots() {
        let r = robot_y_quadratic(&ex34()).unwrap();
        assert_abs_diff_eq!(r[0], 5.0 + 3.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 5.0 - 3.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn y_root_zero_for_touching_start() {
        // euclidean distance of the centres equals 2R
        let d = DirectionSchedule::constant(Direction::from_degrees(225.0));
        let s = RobotScenario::new(
            2,
            2f64.sqrt() / 2.0,
            1.0,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![d.clone(), d],
            ControlSet::new_box(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
        )
        .unwrap();
        let r = robot_y_quadratic(&s).unwrap();
        assert!(r.iter().any(|y| y.abs() < 1e-12));
    }

    #[test]
    fn t1_quadratic_consistent_with_y() {
        // on a diagonal heading the two contact relations agree
        let s = ex34();
        let u = [2.0 * -1.683, -1.683];
        let eta = robot_eta_formula(&s, &u);
        let roots = robot_contact_quadratic(&s, &u).unwrap();
        let ys = robot_y_quadratic(&s).unwrap();
        for (t, y) in roots.iter().rev().zip(&ys) {
            assert_abs_diff_eq!(t * eta, *y, epsilon = 1e-9);
        }
    }

    #[test]
    fn contact_quadratic_without_relative_motion() {
        let s = ex34();
        // s1 u1 = s2 u2 -> no relative motion, no root
        assert!(robot_contact_quadratic(&s, &[0.0, 0.0]).unwrap().is_empty());
    }

    #[test]
    fn reduced_solution_headline() {
        let sol = solve_robot(&ex34(), &ReducedOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.control[1], -1.68358, epsilon = 1e-4);
        assert_abs_diff_eq!(sol.control[0], 2.0 * sol.control[1], epsilon = 1e-12);
        let t1 = sol.main_contact_time().unwrap();
        assert_abs_diff_eq!(t1, 3.106, epsilon = 2e-3);
        let c = sol.reduced_cost.unwrap();
        assert_abs_diff_eq!(c.a, 441.0, epsilon = 0.5);
        assert_abs_diff_eq!(c.b, 1484.92, epsilon = 0.5);
        assert_abs_diff_eq!(c.c, 1286.0, epsilon = 0.5);
        assert_abs_diff_eq!(sol.cost, 36.0, epsilon = 0.1);
        assert!(sol.cases[0].accepted);
        // both contact roots give the same cost
        assert_abs_diff_eq!(sol.cases[0].cost.unwrap(), sol.cases[1].cost.unwrap(), epsilon = 1e-8);
        assert!(sol.cases[0].detail.contains("swap"));
        assert!(!sol.cases[1].detail.contains("swap"));
    }
}
