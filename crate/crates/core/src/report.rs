use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::existence::ExistenceVerdict;
use crate::numkernel::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    IpsCon,
    IpsCov,
    Ncd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::IpsCon => "ips-con",
            Algorithm::IpsCov => "ips-cov",
            Algorithm::Ncd => "ncd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ips-con" => Ok(Algorithm::IpsCon),
            "ips-cov" => Ok(Algorithm::IpsCov),
            "ncd" => Ok(Algorithm::Ncd),
            other => Err(format!("unknown algorithm `{other}` (expected ips-con, ips-cov or ncd)")),
        }
    }
}

/// The system of complete sets that scaling cycles through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateSets {
    #[default]
    Edges,
    Cliques,
}

impl fmt::Display for UpdateSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateSets::Edges => "edges",
            UpdateSets::Cliques => "cliques",
        })
    }
}

impl FromStr for UpdateSets {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "edges" => Ok(UpdateSets::Edges),
            "cliques" => Ok(UpdateSets::Cliques),
            other => Err(format!("unknown update sets `{other}` (expected edges or cliques)")),
        }
    }
}

/// State at the end of one update cycle, recorded when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub cycle: usize,
    pub loglik: f64,
    pub grad_norm: f64,
}

/// Outcome of a fit. Matrices are not serialized; the CLI writes them to
/// separate files in the matrix text format.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_sets: Option<UpdateSets>,
    pub converged: bool,
    /// Update cycles performed. For NCD this includes the first phase.
    pub cycles: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase1_cycles: Option<usize>,
    pub updates_performed: usize,
    pub updates_skipped: usize,
    /// Seconds spent in the iteration loop.
    pub wall_time: f64,
    /// Seconds spent before the loop: marginal caching, scaling, start value.
    pub setup_time: f64,
    pub d: usize,
    pub n: usize,
    pub num_edges: usize,
    pub loglik: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loglik_incremental: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    /// IPS: `max |Sigma - S|` over the diagonal and edges, with
    /// `Sigma = K^{-1}`. NCD: maximum column sum of `K(G) - K` on the
    /// correlation scale.
    pub grad_norm: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub eps_dprime: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rank_trace: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eig_sigma: Option<f64>,
    /// Whether positive definiteness of the projected `K` follows from the
    /// column-sum bound (NCD with correlation scaling).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<CycleTrace>,
    pub existence: ExistenceVerdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub k_hat: SymMatrix,
    #[serde(skip)]
    pub sigma_hat: SymMatrix,
}
