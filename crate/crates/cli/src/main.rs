use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sweepctl::io::{
    format_sig, parse_scenario, read_solution, solution_summary, trajectory_csv, write_reduced_solution,
    write_solution,
};
use sweepctl::models::SweepingModel;
use sweepctl::optimality::verify_certificate;
use sweepctl::optimizer::{
    convergence_study, resolved_model, solve_discrete, solve_reduced, DiscreteOptions, Parametrization,
    ReducedOptions,
};
use sweepctl::sweeping::{recover_eta, simulate_resolved, terminal_cost};
use sweepctl::{ControlSignal, Error, Mesh, Scenario};

#[derive(Parser, Debug)]
#[command(name = "sweepctl", version, about = "Simulate, optimize and verify controlled sweeping processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Catch-up simulation for a given control.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Constant control `u1,u2,..` or a solution file supplying one.
        #[arg(long)]
        control: String,
    },
    /// Closed-form optimal control with its multipliers.
    SolveReduced {
        #[command(flatten)]
        common: Common,
    },
    /// Multistart compass search on the discrete problem.
    SolveDiscrete {
        #[command(flatten)]
        common: Common,
        /// Piecewise-constant controls on 2^b blocks instead of a constant one.
        #[arg(long)]
        blocks: Option<u32>,
        /// Simulator calls shared by all starts.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Random starts added to the vertices and the centre of U.
        #[arg(long, default_value_t = 2)]
        random_starts: usize,
    },
    /// Checks a stored certificate against the optimality conditions.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Endpoint error of the catch-up scheme across meshes.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Exponents as a list and/or ranges, e.g. `6,8,10` or `6-14`.
        #[arg(long, default_value = "6,8,10,12,14")]
        m_range: String,
        /// Constant control; defaults to the closed-form optimum. Errors are
        /// then measured against the m = 16 endpoint.
        #[arg(long)]
        control: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file.
    scenario: PathBuf,
    /// Dyadic mesh exponent m (2^m intervals).
    #[arg(long, value_parser = clap::value_parser!(u32).range(3..=16))]
    mesh_exp: Option<u32>,
    /// Residual tolerance.
    #[arg(long, value_parser = positive)]
    tol: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, found {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
    Rejected,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    parse_scenario(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_artifact(dir: &Option<PathBuf>, name: &str, content: &str) -> Outcome {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_vector(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|c| c.trim().parse::<f64>().ok()).collect()
}

/// Inline constant control on `mesh`, or the control stored in a solution file.
fn control_source(arg: &str, mesh: &Mesh) -> Result<ControlSignal, Failure> {
    if let Some(u) = parse_vector(arg) {
        return Ok(ControlSignal::constant(mesh.clone(), &u));
    }
    let stored = read_solution::<f64>(&read(Path::new(arg))?)?;
    Ok(stored.control.resample(mesh))
}

fn mesh_for(scn: &Scenario, common: &Common, default: u32) -> Result<Mesh, Failure> {
    Ok(Mesh::dyadic(scn.horizon(), common.mesh_exp.unwrap_or(default))?)
}

fn exponents(arg: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Usage(format!("--m-range: cannot parse {arg:?}"));
    let mut out = Vec::new();
    for item in arg.split(',') {
        let item = item.trim();
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.iter().any(|m| !(3..=16).contains(m)) {
        return Err(Failure::Usage("--m-range: exponents must lie in 3..=16".into()));
    }
    Ok(out)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate { common, control } => {
            let scn = load_scenario(&common.scenario)?;
            let mesh = mesh_for(&scn, &common, 10)?;
            let u = control_source(&control, &mesh)?;
            let (traj, resolved) = simulate_resolved(&scn, &u)?;
            let eta = recover_eta(&resolved, &traj, &u, common.tol.unwrap_or(1e-9))?;
            println!("cost J = {}", format_sig(terminal_cost(&traj), 12));
            write_artifact(&common.out, "trajectory.csv", &trajectory_csv(&traj, &u, Some(&eta)))
        }
        Command::SolveReduced { common } => {
            let scn = load_scenario(&common.scenario)?;
            let opts = ReducedOptions { mesh_exponent: common.mesh_exp.unwrap_or(6), ..Default::default() };
            let sol = solve_reduced(&scn, &opts)?;
            let summary = solution_summary(&sol);
            print!("{summary}");
            let report = sol.verify(&scn, common.tol.unwrap_or(1e-6))?;
            println!("certificate check: {}", if report.passed() { "PASS" } else { "FAIL" });
            write_artifact(&common.out, "solution.txt", &summary)?;
            write_artifact(
                &common.out,
                "trajectory.csv",
                &trajectory_csv(&sol.trajectory, &sol.control_signal, Some(&sol.certificate.eta)),
            )?;
            write_artifact(&common.out, "certificate.toml", &write_reduced_solution(&sol))
        }
        Command::SolveDiscrete { common, blocks, budget, random_starts } => {
            let scn = load_scenario(&common.scenario)?;
            let mesh = mesh_for(&scn, &common, 10)?;
            let opts = DiscreteOptions {
                parametrization: blocks.map_or(Parametrization::Constant, Parametrization::Blocks),
                budget,
                random_starts,
                seed: common.seed,
                ..Default::default()
            };
            let sol = solve_discrete(&scn, &mesh, &opts)?;
            let mut summary = String::new();
            let u0: Vec<String> = sol.control.value(0).iter().map(|v| format_sig(*v, 12)).collect();
            let _ = writeln!(summary, "mesh intervals = {}", mesh.num_intervals());
            let _ = writeln!(summary, "control u(0) = ({})", u0.join(", "));
            let _ = writeln!(summary, "cost J = {}", format_sig(sol.cost, 12));
            let _ = writeln!(summary, "simulator calls = {}, starts = {}", sol.sim_calls, sol.starts);
            if !sol.converged {
                let _ = writeln!(summary, "warning: search budget exhausted before the step converged");
            }
            print!("{summary}");
            let (_, resolved) = simulate_resolved(&scn, &sol.control)?;
            let eta = recover_eta(&resolved, &sol.trajectory, &sol.control, 1e-9)?;
            write_artifact(&common.out, "solution.txt", &summary)?;
            write_artifact(&common.out, "trajectory.csv", &trajectory_csv(&sol.trajectory, &sol.control, Some(&eta)))?;
            write_artifact(
                &common.out,
                "solution.toml",
                &write_solution("discrete", &sol.trajectory, &sol.control, None, sol.cost),
            )
        }
        Command::Verify { common, certificate } => {
            let scn = load_scenario(&common.scenario)?;
            let stored = read_solution::<f64>(&read(&certificate)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", certificate.display())))?;
            let cert = stored
                .certificate
                .ok_or_else(|| Failure::Usage(format!("{}: no certificate section", certificate.display())))?;
            let model = resolved_model(&scn, stored.switch_time);
            let report =
                verify_certificate(&model, &stored.trajectory, &stored.control, &cert, common.tol.unwrap_or(1e-6))?;
            print!("{report}");
            let text = report.to_string();
            write_artifact(&common.out, "report.txt", &text)?;
            if report.passed() {
                println!("PASS");
                Ok(())
            } else {
                println!("FAIL");
                Err(Failure::Rejected)
            }
        }
        Command::Convergence { common, m_range, control } => {
            let scn = load_scenario(&common.scenario)?;
            let ms = exponents(&m_range)?;
            let sol = solve_reduced(&scn, &ReducedOptions::default())?;
            // closed-form endpoint for the optimal control, finest mesh otherwise
            let (u, reference) = match control {
                Some(c) => {
                    let u = parse_vector(&c).ok_or_else(|| Failure::Usage(format!("--control: cannot parse {c:?}")))?;
                    let fine = Mesh::dyadic(scn.horizon(), 16)?;
                    let (traj, _) = simulate_resolved(&scn, &ControlSignal::constant(fine, &u))?;
                    (u, traj.terminal().to_vec())
                }
                None => (sol.control.clone(), sol.trajectory.terminal().to_vec()),
            };
            let rows = convergence_study(&scn, &u, &reference, &ms)?;
            let mut table = String::from("m,cost,endpoint_error,bound\n");
            for r in &rows {
                let _ = writeln!(
                    table,
                    "{},{},{},{}",
                    r.m,
                    format_sig(r.cost, 12),
                    format_sig(r.endpoint_error, 12),
                    format_sig(r.bound, 12)
                );
            }
            print!("{table}");
            write_artifact(&common.out, "convergence.csv", &table)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
