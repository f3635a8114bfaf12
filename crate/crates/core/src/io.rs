//! Scenario files, trajectory CSV and solution files.
//!
//! Scenarios and solutions are TOML. Numbers pass through `f64`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::models::{
    ControlSet, Direction, DirectionSchedule, PedestrianScenario, RobotScenario, Scenario, SwitchTime,
};
use crate::optimality::{Atom, DualCertificate};
use crate::optimizer::ReducedSolution;
use crate::scalar::Scalar;
use crate::sweeping::{ControlSignal, EtaProfile, Mesh, Trajectory};

/// 1-based line of the first `key = ...` assignment in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Fields<'a> {
    text: &'a str,
    table: &'a toml::Table,
}

impl Fields<'_> {
    fn err(&self, key: &str, reason: impl Into<String>) -> Error {
        let leaf = key.rsplit('.').next().unwrap_or(key);
        let reason = reason.into();
        match line_of(self.text, leaf) {
            Some(line) => Error::scenario(key, format!("{reason} (line {line})")),
            None => Error::scenario(key, reason),
        }
    }

    fn get<'b>(&self, table: &'b toml::Table, key: &str, path: &str) -> Result<&'b Value> {
        table.get(key).ok_or_else(|| self.err(path, "missing"))
    }

    fn number(&self, v: &Value, path: &str) -> Result<f64> {
        match v {
            Value::Integer(i) => Ok(*i as f64),
            Value::Float(f) => Ok(*f),
            _ => Err(self.err(path, "expected a number")),
        }
    }

    fn numbers(&self, v: &Value, path: &str) -> Result<Vec<f64>> {
        match v {
            Value::Array(a) => a.iter().map(|x| self.number(x, path)).collect(),
            _ => Err(self.err(path, "expected a list of numbers")),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        match self.get(self.table, key, key)? {
            Value::Integer(i) if *i > 0 => Ok(*i as usize),
            _ => Err(self.err(key, "expected a positive integer")),
        }
    }
}

fn conv<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::from_f64(x)).collect()
}

/// Parses a scenario file. Errors name the offending key and its line.
pub fn parse_scenario<S: Scalar>(text: &str) -> Result<Scenario<S>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let f = Fields { text, table: &table };
    let model = match f.get(&table, "model", "model")? {
        Value::String(s) => s.clone(),
        _ => return Err(f.err("model", "expected \"robot\" or \"pedestrian\"")),
    };
    let n = f.count("n")?;
    let radius = f.number(f.get(&table, "R", "R")?, "R")?;
    let horizon = f.number(f.get(&table, "T", "T")?, "T")?;
    let x0 = f.numbers(f.get(&table, "x0", "x0")?, "x0")?;
    let speeds = f.numbers(f.get(&table, "speeds", "speeds")?, "speeds")?;
    let control_set = parse_control_set(&f)?;
    match model.as_str() {
        "robot" => {
            let directions = parse_directions(&f, n)?;
            Ok(Scenario::Robot(RobotScenario::new(
                n,
                S::from_f64(radius),
                S::from_f64(horizon),
                conv(&x0),
                conv(&speeds),
                directions,
                control_set,
            )?))
        }
        "pedestrian" => {
            if table.contains_key("angles_deg") {
                return Err(f.err("angles_deg", "only robot scenarios have headings"));
            }
            Ok(Scenario::Pedestrian(PedestrianScenario::new(
                n,
                S::from_f64(radius),
                S::from_f64(horizon),
                conv(&x0),
                conv(&speeds),
                control_set,
            )?))
        }
        other => Err(f.err("model", format!("unknown model {other:?}"))),
    }
}

fn parse_control_set<S: Scalar>(f: &Fields) -> Result<ControlSet<S>> {
    let cs = match f.get(f.table, "control_set", "control_set")? {
        Value::Table(t) => t,
        _ => return Err(f.err("control_set", "expected a table")),
    };
    let kind = match f.get(cs, "kind", "control_set.kind")? {
        Value::String(s) => s.as_str(),
        _ => return Err(f.err("control_set.kind", "expected \"box\" or \"segment\"")),
    };
    let bounds = f.get(cs, "bounds", "control_set.bounds")?;
    match kind {
        "box" => {
            let rows = match bounds {
                Value::Array(a) => a,
                _ => return Err(f.err("control_set.bounds", "expected a list of [lo, hi] pairs")),
            };
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for r in rows {
                let pair = f.numbers(r, "control_set.bounds")?;
                if pair.len() != 2 {
                    return Err(f.err("control_set.bounds", "each entry must be [lo, hi]"));
                }
                lo.push(S::from_f64(pair[0]));
                hi.push(S::from_f64(pair[1]));
            }
            ControlSet::new_box(lo, hi)
        }
        "segment" => {
            let pair = f.numbers(bounds, "control_set.bounds")?;
            if pair.len() != 2 {
                return Err(f.err("control_set.bounds", "expected [lo, hi]"));
            }
            let link = f.numbers(f.get(cs, "link", "control_set.link")?, "control_set.link")?;
            ControlSet::new_segment(conv(&link), S::from_f64(pair[0]), S::from_f64(pair[1]))
        }
        other => Err(f.err("control_set.kind", format!("unknown kind {other:?}"))),
    }
}

fn parse_directions<S: Scalar>(f: &Fields, n: usize) -> Result<Vec<DirectionSchedule<S>>> {
    let v = f.get(f.table, "angles_deg", "angles_deg")?;
    let per_agent = |v: &Value| -> Result<Vec<f64>> {
        match v {
            Value::Array(_) => f.numbers(v, "angles_deg"),
            _ => Ok(vec![f.number(v, "angles_deg")?; n]),
        }
    };
    let phases: Vec<Vec<f64>> = match v {
        Value::Array(a) if a.iter().all(|x| x.is_array()) => a.iter().map(per_agent).collect::<Result<_>>()?,
        _ => vec![per_agent(v)?],
    };
    for p in &phases {
        if p.len() != n {
            return Err(f.err("angles_deg", format!("expected {n} headings per phase, found {}", p.len())));
        }
    }
    let switch = match (phases.len(), f.table.get("switch_at")) {
        (1, None) => None,
        (1, Some(_)) => return Err(f.err("switch_at", "needs two phases in angles_deg")),
        (2, Some(Value::String(s))) if s == "contact" => Some(SwitchTime::AtContact),
        (2, Some(Value::String(_))) => return Err(f.err("switch_at", "expected a time or \"contact\"")),
        (2, Some(v)) => Some(SwitchTime::At(S::from_f64(f.number(v, "switch_at")?))),
        (2, None) => return Err(f.err("switch_at", "missing for two-phase headings")),
        _ => return Err(f.err("angles_deg", "at most two phases are supported")),
    };
    Ok((0..n)
        .map(|i| DirectionSchedule {
            initial: Direction::from_degrees(phases[0][i]),
            switch: switch.map(|s| (s, Direction::from_degrees(phases[1][i]))),
        })
        .collect())
}

/// `%.{digits}g`: fixed or scientific with trailing zeros removed.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Trajectory CSV with columns `t, x.., u.., eta..`. Controls and `eta` come
/// from the interval to the right of each node; the last row repeats `eta(T)`.
pub fn trajectory_csv<S: Scalar>(traj: &Trajectory<S>, u: &ControlSignal<S>, eta: Option<&EtaProfile<S>>) -> String {
    let mesh = &traj.mesh;
    let nx = traj.nodes[0].len();
    let nu = u.values.first().map_or(0, |v| v.len());
    let ne = eta.map_or(0, |e| e.terminal.len());
    let mut out = String::from("t");
    for i in 1..=nx {
        let _ = write!(out, ",x{i}");
    }
    for i in 1..=nu {
        let _ = write!(out, ",u{i}");
    }
    for i in 1..=ne {
        let _ = write!(out, ",eta{i}");
    }
    out.push('\n');
    let last = mesh.num_intervals();
    for (k, x) in traj.nodes.iter().enumerate() {
        let kk = k.min(last - 1);
        let mut row = vec![mesh.node(k)];
        row.extend(x.iter().copied());
        row.extend(u.value(kk).iter().copied());
        if let Some(e) = eta {
            row.extend(if k == last { e.terminal.iter() } else { e.value(k).iter() }.copied());
        }
        let cells: Vec<String> = row.iter().map(|v| format_sig(v.to_f64(), 12)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct AtomFile {
    time: f64,
    mass: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct CertificateFile {
    lambda: f64,
    eta: Vec<Vec<f64>>,
    eta_terminal: Vec<f64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    q_terminal: Vec<f64>,
    gamma: Vec<AtomFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct PhaseFile {
    start: f64,
    end: f64,
    eta: Vec<f64>,
    velocity: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct CaseFile {
    label: String,
    accepted: bool,
    detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct ReducedCostFile {
    a: f64,
    b: f64,
    c: f64,
}

/// On-disk candidate `(x, u)` with its multipliers.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct SolutionFile {
    solver: String,
    control: Vec<f64>,
    cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    switch_time: Option<f64>,
    #[serde(default)]
    contact_schedule: Vec<(usize, f64)>,
    #[serde(default)]
    phases: Vec<PhaseFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reduced_cost: Option<ReducedCostFile>,
    #[serde(default)]
    cases: Vec<CaseFile>,
    mesh: Vec<f64>,
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate: Option<CertificateFile>,
}

fn f64s<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64()).collect()
}

fn f64ss<S: Scalar>(v: &[Vec<S>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| f64s(x)).collect()
}

fn convs<S: Scalar>(v: &[Vec<f64>]) -> Vec<Vec<S>> {
    v.iter().map(|x| conv(x)).collect()
}

/// A trajectory, its control and optionally a certificate, as read back.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredSolution<S> {
    pub trajectory: Trajectory<S>,
    pub control: ControlSignal<S>,
    pub certificate: Option<DualCertificate<S>>,
    pub switch_time: Option<S>,
    pub cost: S,
}

fn certificate_file<S: Scalar>(c: &DualCertificate<S>) -> CertificateFile {
    CertificateFile {
        lambda: c.lambda.to_f64(),
        eta: f64ss(&c.eta.values),
        eta_terminal: f64s(&c.eta.terminal),
        p: f64ss(&c.p),
        q: f64ss(&c.q),
        q_terminal: f64s(&c.q_terminal),
        gamma: c.gamma.iter().map(|a| AtomFile { time: a.time.to_f64(), mass: f64s(&a.mass) }).collect(),
    }
}

fn base_file<S: Scalar>(solver: &str, traj: &Trajectory<S>, u: &ControlSignal<S>, cost: S) -> SolutionFile {
    SolutionFile {
        solver: solver.into(),
        control: f64s(u.value(0)),
        cost: cost.to_f64(),
        switch_time: None,
        contact_schedule: Vec::new(),
        phases: Vec::new(),
        reduced_cost: None,
        cases: Vec::new(),
        mesh: f64s(traj.mesh.nodes()),
        states: f64ss(&traj.nodes),
        controls: f64ss(&u.values),
        certificate: None,
    }
}

fn to_toml(file: &SolutionFile) -> String {
    toml::to_string(file).expect("solution file serializes")
}

/// Serializes a closed-form solution with its certificate.
pub fn write_reduced_solution<S: Scalar>(sol: &ReducedSolution<S>) -> String {
    let mut f = base_file("reduced", &sol.trajectory, &sol.control_signal, sol.cost);
    f.control = f64s(&sol.control);
    f.switch_time = sol.switch_time.map(|t| t.to_f64());
    f.contact_schedule = sol.contact_schedule.iter().map(|&(j, t)| (j + 1, t.to_f64())).collect();
    f.phases = sol
        .phases
        .iter()
        .map(|p| PhaseFile { start: p.start.to_f64(), end: p.end.to_f64(), eta: f64s(&p.eta), velocity: f64s(&p.velocity) })
        .collect();
    f.reduced_cost = sol.reduced_cost.map(|r| ReducedCostFile { a: r.a.to_f64(), b: r.b.to_f64(), c: r.c.to_f64() });
    f.cases = sol
        .cases
        .iter()
        .map(|c| CaseFile { label: c.label.clone(), accepted: c.accepted, detail: c.detail.clone() })
        .collect();
    f.certificate = Some(certificate_file(&sol.certificate));
    to_toml(&f)
}

/// Serializes a trajectory with its control and an optional certificate.
pub fn write_solution<S: Scalar>(
    solver: &str,
    traj: &Trajectory<S>,
    u: &ControlSignal<S>,
    cert: Option<&DualCertificate<S>>,
    cost: S,
) -> String {
    let mut f = base_file(solver, traj, u, cost);
    f.certificate = cert.map(certificate_file);
    to_toml(&f)
}

/// Reads a file written by [`write_reduced_solution`] or [`write_solution`].
pub fn read_solution<S: Scalar>(text: &str) -> Result<StoredSolution<S>> {
    let f: SolutionFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mesh = Mesh::from_nodes(conv(&f.mesh))?;
    let trajectory = Trajectory::new(mesh.clone(), convs(&f.states))?;
    let control = ControlSignal::new(mesh.clone(), convs(&f.controls))?;
    let certificate = match f.certificate {
        None => None,
        Some(c) => {
            let n = mesh.num_intervals();
            if c.eta.len() != n || c.q.len() != n || c.p.len() != n + 1 {
                return Err(Error::MeshMismatch("certificate length disagrees with the mesh".into()));
            }
            Some(DualCertificate {
                lambda: S::from_f64(c.lambda),
                eta: EtaProfile {
                    mesh: mesh.clone(),
                    values: convs(&c.eta),
                    terminal: conv(&c.eta_terminal),
                    residuals: vec![S::zero(); n],
                },
                p: convs(&c.p),
                q: convs(&c.q),
                q_terminal: conv(&c.q_terminal),
                gamma: c.gamma.iter().map(|a| Atom { time: S::from_f64(a.time), mass: conv(&a.mass) }).collect(),
            })
        }
    };
    Ok(StoredSolution {
        trajectory,
        control,
        certificate,
        switch_time: f.switch_time.map(S::from_f64),
        cost: S::from_f64(f.cost),
    })
}

fn fmt_vec<S: Scalar>(v: &[S]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format_sig(x.to_f64(), 12)).collect();
    format!("({})", cells.join(", "))
}

/// Human-readable summary of a closed-form solution.
pub fn solution_summary<S: Scalar>(sol: &ReducedSolution<S>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "control u = {}", fmt_vec(&sol.control));
    for (i, u) in sol.control.iter().enumerate() {
        let _ = writeln!(out, "  u{} = {}", i + 1, format_sig(u.to_f64(), 12));
    }
    let _ = writeln!(out, "cost J = {}", format_sig(sol.cost.to_f64(), 12));
    if let Some(r) = sol.reduced_cost {
        let _ = writeln!(
            out,
            "reduced cost J(r) = {} r^2 + {} r + {}",
            format_sig(r.a.to_f64(), 8),
            format_sig(r.b.to_f64(), 8),
            format_sig(r.c.to_f64(), 8)
        );
    }
    for &(j, t) in &sol.contact_schedule {
        let _ = writeln!(out, "contact constraint {} at t = {}", j + 1, format_sig(t.to_f64(), 12));
    }
    if let Some(t) = sol.main_contact_time() {
        let _ = writeln!(out, "t1 = {}", format_sig(t.to_f64(), 12));
    }
    if let Some(t) = sol.switch_time {
        let _ = writeln!(out, "heading switch at t = {}", format_sig(t.to_f64(), 12));
    }
    for p in &sol.phases {
        let _ = writeln!(
            out,
            "phase [{}, {}]: eta = {}, velocity = {}",
            format_sig(p.start.to_f64(), 12),
            format_sig(p.end.to_f64(), 12),
            fmt_vec(&p.eta),
            fmt_vec(&p.velocity)
        );
    }
    let c = &sol.certificate;
    let _ = writeln!(out, "terminal state x(T) = {}", fmt_vec(sol.trajectory.terminal()));
    let _ = writeln!(out, "lambda = {}", format_sig(c.lambda.to_f64(), 12));
    let _ = writeln!(out, "q = {}", fmt_vec(&c.q_terminal));
    let _ = writeln!(out, "p(T) = {}", fmt_vec(c.p.last().expect("nonempty")));
    for a in &c.gamma {
        let _ = writeln!(out, "gamma atom at t = {}: {}", format_sig(a.time.to_f64(), 12), fmt_vec(&a.mass));
    }
    for case in &sol.cases {
        let mark = if case.accepted { "accepted" } else { "not selected" };
        let _ = writeln!(out, "{} [{}]: {}", case.label, mark, case.detail);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SweepingModel;

    const PED: &str = r#"
model = "pedestrian"
n = 2
R = 3
T = 6
x0 = [-60, -48]
speeds = [8, 2]

[control_set]
kind = "segment"
link = [1, 1]
bounds = [-1.8, 1.8]
"#;

    #[test]
    fn parses_pedestrian() {
        let s: Scenario<f64> = parse_scenario(PED).unwrap();
        assert_eq!(s.model_name(), "pedestrian");
        assert_eq!(s.state_dim(), 2);
        assert_eq!(s.horizon(), 6.0);
    }

    #[test]
    fn parses_robot_with_switch() {
        let text = r#"
model = "robot"
n = 2
R = 6
T = 6
x0 = [-30, -30, -20, -20]
speeds = [3, 1]
angles_deg = [[180, 180], [225, 225]]
switch_at = "contact"
control_set = { kind = "segment", link = [2, 1], bounds = [-1.685, 1.685] }
"#;
        let Scenario::Robot(r) = parse_scenario::<f64>(text).unwrap() else { panic!("robot expected") };
        assert_eq!(r.directions[0].switch.map(|s| s.0), Some(SwitchTime::AtContact));
        let scalar = text.replace("[[180, 180], [225, 225]]", "225").replace("switch_at = \"contact\"\n", "");
        let Scenario::Robot(r) = parse_scenario::<f64>(&scalar).unwrap() else { panic!("robot expected") };
        assert!(r.directions[1].switch.is_none());
    }

    #[test]
    fn errors_name_key_and_line() {
        let bad = PED.replace("R = 3", "R = \"three\"");
        let msg = parse_scenario::<f64>(&bad).unwrap_err().to_string();
        assert!(msg.contains("R") && msg.contains("line 4"), "{msg}");
        let missing = PED.replace("speeds = [8, 2]\n", "");
        assert!(parse_scenario::<f64>(&missing).unwrap_err().to_string().contains("speeds"));
        let kind = PED.replace("\"segment\"", "\"disk\"");
        assert!(parse_scenario::<f64>(&kind).unwrap_err().to_string().contains("control_set.kind"));
        let syntax = PED.replace("n = 2", "n = ");
        assert!(matches!(parse_scenario::<f64>(&syntax), Err(Error::Parse(_))));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(1.8, 12), "1.8");
        assert_eq!(format_sig(-2.0 / 3.0, 12), "-0.666666666667");
        assert_eq!(format_sig(5.0 / 9.0, 12), "0.555555555556");
        assert_eq!(format_sig(1e-7, 12), "1e-07");
        assert_eq!(format_sig(1.5e13, 12), "1.5e+13");
        assert_eq!(format_sig(123456.0, 12), "123456");
        assert_eq!(format_sig(0.1 + 0.2, 12), "0.3");
    }

    #[test]
    fn csv_layout() {
        let mesh = Mesh::dyadic(1.0, 1).unwrap();
        let traj = Trajectory::new(mesh.clone(), vec![vec![0.0, 10.0], vec![0.5, 10.0], vec![1.0, 10.0]]).unwrap();
        let u = ControlSignal::constant(mesh.clone(), &[1.0, 0.0]);
        let eta = EtaProfile { mesh, values: vec![vec![0.0], vec![2.0]], terminal: vec![3.0], residuals: vec![0.0; 2] };
        let csv = trajectory_csv(&traj, &u, Some(&eta));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,u1,u2,eta1");
        assert_eq!(lines[1], "0,0,10,1,0,0");
        assert_eq!(lines[3], "1,1,10,1,0,3");
    }

    #[test]
    fn solution_round_trip() {
        let mesh = Mesh::dyadic(1.0, 2).unwrap();
        let traj = Trajectory::new(mesh.clone(), (0..5).map(|k| vec![k as f64 / 3.0, 7.0]).collect()).unwrap();
        let u = ControlSignal::constant(mesh, &[0.1, 0.2]);
        let text = write_solution("discrete", &traj, &u, None, 1.25);
        let back: StoredSolution<f64> = read_solution(&text).unwrap();
        assert_eq!(back.trajectory, Trajectory { mesh: back.trajectory.mesh.clone(), ..traj });
        assert_eq!(back.control.values, u.values);
        assert_eq!(back.cost, 1.25);
        assert!(back.certificate.is_none());
    }
}
