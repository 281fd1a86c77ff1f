//! Two-phase flow in flat porous domains.
//!
//! Six models share one grid, one upwind transport kernel and one time loop:
//!
//! * `TP`: full two-phase flow with an elliptic pressure solve every step.
//! * `VE`: vertical equilibrium with a nonlocal velocity closure.
//! * `VI`: the vertically integrated model, i.e. `VE` on a single layer.
//! * `MS`: the asymptotic multiscale solver with a one-dimensional pressure.
//! * `BTP` and `BVE`: Brinkman-regularized two-phase and vertical-equilibrium
//!   models with a pseudo-parabolic implicit step.
//!
//! ```no_run
//! let sc = flatflow::load_scenario("scenarios/layered_band.cfg").unwrap();
//! let result = flatflow::run(&sc).unwrap();
//! println!("{}", result.ledger.relative_defect());
//! ```

pub mod analysis;
pub mod brinkman;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod multiscale;
pub mod physics;
pub mod problem;
pub mod run;
pub mod scenario;
pub mod tp;
pub mod ve;

pub use analysis::{
    front_position, l1_distance, linf_distance, overshoot, timing_report, FrontReport, MassLedger,
    TimingReport,
};
pub use brinkman::{run_btp, run_bve, BrinkmanParams};
pub use error::{FlowError, Result};
pub use grid::{EdgeField, Grid, PiecewiseProfile, RectProfile, ScalarField};
pub use io::{read_field, write_field};
pub use multiscale::run_multiscale;
pub use physics::FluidModel;
pub use problem::Problem;
pub use run::{RunResult, Snapshot, SolverStats, Timings};
pub use scenario::{load_scenario, parse_scenario, ModelKind, Scenario};
pub use tp::run_tp;
pub use ve::run_ve;

/// Courant number applied to every advective step limit.
pub const DEFAULT_CFL: f64 = 0.45;

/// Runs the vertically integrated model: the scenario on a single layer.
pub fn run_vi(scenario: &Scenario) -> Result<RunResult> {
    let mut single = scenario.clone();
    single.nz = 1;
    run_ve(&single)
}

/// Runs the scenario's model.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    match scenario.model {
        ModelKind::Tp => run_tp(scenario),
        ModelKind::Ve => run_ve(scenario),
        ModelKind::Vi => run_vi(scenario),
        ModelKind::Ms => run_multiscale(scenario),
        ModelKind::Btp => run_btp(scenario),
        ModelKind::Bve => run_bve(scenario),
    }
}
