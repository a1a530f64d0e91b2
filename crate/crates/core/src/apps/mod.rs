//! Newsvendor and CVaR portfolio problems, and the benchmark policies.

mod newsvendor;
mod policy;
mod portfolio;

pub use newsvendor::{solve_newsvendor, true_newsvendor_cost, NewsvendorParams};
pub use policy::{Policy, PolicyKind};
pub use portfolio::{empirical_cvar, equally_weighted, solve_portfolio, PortfolioParams};
