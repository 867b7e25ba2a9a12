//! Optimal information design for non-atomic Bayesian routing games.
//!
//! A [`RoutingScenario`] describes a network whose polynomial link latencies depend on a random
//! state. A planner who knows the state sends signals to a fraction `nu` of the travelers; the
//! rest route on the prior. This crate computes Bayes Nash flows, optimizes private (atomic and
//! diagonal) and public signaling policies, and certifies them with moment relaxations solved by
//! a built-in semidefinite interior-point method.
//!
//! ## Examples
//!
//! ```text
//! examples/
//! ├── scenario_files.rs       # load, validate and evaluate the bundled scenarios
//! ├── bayes_nash_flow.rs      # prior equilibrium, public-policy equilibria, first best
//! ├── private_signals.rs      # atomic and diagonal private design, posteriors
//! ├── public_signals.rs       # public design against the canonical policies
//! ├── participation_sweep.rs  # cost versus participation rate with extension
//! ├── certificate.rs          # diagonal SDP bound and rank-1 extraction
//! ├── two_link_exact.rs       # univariate and fixed-y moment bounds
//! └── sdpa_export.rs          # writing and re-reading SDPA sparse files
//! ```
//!
//! ```bash
//! cargo run --release -p infodesign --example private_signals
//! ```

pub mod design;
pub mod equilibrium;
pub mod error;
mod game;
pub mod moments;
pub mod private_design;
pub mod public_design;
pub mod report;
pub mod scenario;
pub mod sdp;
pub mod simplex;
pub mod spg;

pub use design::{DesignMode, DesignOptions, DesignSolution, Profile};
pub use equilibrium::{
    bne_indirect, first_best, nonparticipant_flow, prior_equilibrium, social_cost, EquilibriumResult,
    FirstBest,
};
pub use error::{Error, Result};
pub use private_design::{
    atom_bound, extend_policy, lift_public_to_private, obedience_residuals, optimize_diagonal,
    optimize_private, posteriors, sweep_nu, AtomicPrivatePolicy, PosteriorTable, SweepMode,
};
pub use public_design::{
    canonical_policy, evaluate_public, optimize_public, public_residuals, CanonicalKind, PublicPolicy,
};
pub use scenario::{load_scenario, LatencyPolynomial, RouteFlow, RoutingScenario};
pub use moments::{
    build_diagonal_sdp, build_gpm_fixed_y, build_two_link_univariate, check_rank1, export_sdpa, import_sdpa,
    solve_moment_sdp, two_link_univariate_sdp, MomentProgram, MomentSolution, TmsCheck, TmsVerdict,
};
pub use report::{scenario_digest, sweep_report, RunReport, SweepConfig};
