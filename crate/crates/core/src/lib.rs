//! Kernel-weighted Wasserstein distributionally robust optimization.
//!
//! The nominal distribution of an uncertain outcome `Y` given a covariate
//! observation `X = x` is the Nadaraya-Watson reweighting of historical
//! samples ([`kernel`]). Decisions minimize the worst-case expected cost over
//! a type-1 Wasserstein ball around that distribution ([`dro`]), which for
//! piecewise-affine costs over polyhedral outcome sets is a linear program
//! ([`lp`]). Exact discrete optimal transport ([`transport`]) serves as an
//! independent check, and [`apps`] / [`experiments`] provide the newsvendor
//! and CVaR-portfolio workloads.

pub mod apps;
pub mod data;
pub mod dro;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod lp;
pub mod transport;

pub use apps::{solve_newsvendor, solve_portfolio, NewsvendorParams, Policy, PolicyKind, PortfolioParams};
pub use data::{make_measure, Dataset, DiscreteMeasure};
pub use dro::{
    radius, solve_dro, AffinePiece, AmbiguitySet, DecisionConstraints, DroSolution, PiecewiseAffineCost,
    PolyhedralSupport, RadiusSchedule,
};
pub use error::{Error, Result};
pub use kernel::{compute_weights, kernel_value, BandwidthRule, KernelFamily, KernelSpec, WeightVector};
pub use transport::{wasserstein_p, Coupling, GroundNorm};
pub use lp::{LpModel, LpSolution, LpStatus, Relation};
