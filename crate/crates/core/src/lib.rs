//! Integrable stochastic particle systems of q-Hahn type: forward and
//! backward dynamics, Markov swap operators, dual zero-range chains, exact
//! finite-state computation, contour-integral moment formulas, and the beta
//! polymer, plus the statistical machinery used to cross-check them.

pub mod boson;
pub mod configspace;
pub mod error;
pub mod exact;
pub mod moments;
pub mod polymer;
pub mod qhahn_sim;
pub mod qkernel;
pub mod report;
pub mod rng;
pub mod stats;
pub mod swap;

pub use boson::StackState;
pub use configspace::{duality_h, BosonConfig, ParticleConfig};
pub use error::{Error, Result};
pub use exact::{FiniteCtmc, TruncatedDistribution};
pub use polymer::{BetaParams, FppSheet, PolymerSheet};
pub use moments::{ContourPlan, NestingKind, TimeKind};
pub use qhahn_sim::{ContParams, NuSeq, QParams, SimState};
pub use qkernel::{PhiDist, RateKind, RateTable, Support};
pub use report::{run_all, run_criterion, CriterionResult, ReportConfig, CRITERION_NAMES};
pub use stats::{ComparisonReport, EmpiricalDist};
pub use swap::{BackwardSchedule, StationaryParams};
