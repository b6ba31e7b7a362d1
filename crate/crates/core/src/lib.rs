//! Maximum likelihood estimation in Gaussian graphical models.
//!
//! Two solvers share one set of inputs ([`SampleStats`], [`Graph`]) and one
//! output ([`FitReport`]): iterative proportional scaling ([`ips_fit`]) and
//! neighbourhood coordinate descent on the dual ([`ncd_fit`]).

pub mod error;
pub mod existence;
pub mod graph;
pub mod ips;
pub mod likelihood;
pub mod ncd;
pub mod numkernel;
pub mod report;

pub use error::{GgmError, Result};
pub use existence::{check_existence, decomposable_mle, ExistenceVerdict, Verdict};
pub use graph::{gen_grid, gen_random_density, gen_tree_plus, Graph};
pub use ips::{ips_fit, ips_fit_observed, IpsConfig, IpsVariant};
pub use likelihood::{empirical_cov, simulate_standard_normal, SampleStats};
pub use ncd::{ncd_fit, ncd_fit_observed, NcdConfig, StartPolicy};
pub use numkernel::{IndexSet, SymMatrix};
pub use report::{Algorithm, CycleTrace, FitReport, UpdateSets};
