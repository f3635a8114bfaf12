//! Controlled polyhedral sweeping processes: simulation, reduced optimal
//! control for crowd and robot models, and certificate checking.
//!
//! Numerical code is generic over [`Scalar`]; the aliases below fix `f64`.

pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod optimality;
pub mod optimizer;
pub mod polyhedra;
pub mod scalar;
pub mod sweeping;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type Polyhedron = polyhedra::Polyhedron<f64>;
pub type ControlSet = models::ControlSet<f64>;
pub type RobotScenario = models::RobotScenario<f64>;
pub type PedestrianScenario = models::PedestrianScenario<f64>;
pub type Scenario = models::Scenario<f64>;
pub type Mesh = sweeping::Mesh<f64>;
pub type Trajectory = sweeping::Trajectory<f64>;
pub type ControlSignal = sweeping::ControlSignal<f64>;
pub type EtaProfile = sweeping::EtaProfile<f64>;
pub type DualCertificate = optimality::DualCertificate<f64>;
pub type ReducedSolution = optimizer::ReducedSolution<f64>;
