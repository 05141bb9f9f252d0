use serde::{Deserialize, Serialize};

use crate::error::{Result, SubicError};

/// Penalty variants obtained by switching off the l2 fusion term and/or the
/// target-driven weight components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Elastic-net fusion with supervised weights.
    Subic,
    /// l1 fusion only, supervised weights.
    SupervisedL1,
    /// Elastic-net fusion, unsupervised weights.
    UnsupervisedElastic,
    /// l1 fusion, unsupervised weights: plain convex biclustering.
    Cobra,
}

impl Scenario {
    pub fn flags(self) -> (bool, bool) {
        // (supervised, use_l2)
        match self {
            Scenario::Subic => (true, true),
            Scenario::SupervisedL1 => (true, false),
            Scenario::UnsupervisedElastic => (false, true),
            Scenario::Cobra => (false, false),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = SubicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subic" => Ok(Scenario::Subic),
            "supervised-l1" => Ok(Scenario::SupervisedL1),
            "unsupervised-elastic" => Ok(Scenario::UnsupervisedElastic),
            "cobra" => Ok(Scenario::Cobra),
            other => Err(SubicError::InvalidConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Everything that parameterizes weight construction, the ADMM solve and
/// bicluster extraction.
///
/// `mu1`/`mu2` and `delta1`/`delta2` are expressed relative to the weight
/// scale of their axis: the solver multiplies them by `1 / mean(w^2)`
/// (resp. `1 / mean(h^2)`), so the defaults behave the same whatever `n`, `p`
/// and the kernel bandwidth do to the absolute weight magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi: f64,
    pub knn: usize,
    pub supervised: bool,
    pub use_l2: bool,
    pub mu1: f64,
    pub mu2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Centroid grouping tolerance; `None` means 1e-3 x RMS of the data.
    pub group_tol: Option<f64>,
    /// Residual-balancing of mu during the first iterations.
    pub adaptive_mu: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda1: 1.0,
            lambda2: 1.0,
            phi: 0.5,
            knn: 10,
            supervised: true,
            use_l2: true,
            mu1: 1.0,
            mu2: 1.0,
            delta1: 1.0,
            delta2: 1.0,
            max_iter: 500,
            tol: 1e-6,
            group_tol: None,
            adaptive_mu: true,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        FitConfig {
            lambda1,
            lambda2,
            ..FitConfig::default()
        }
    }

    pub fn apply_scenario(&mut self, scenario: Scenario) {
        let (supervised, use_l2) = scenario.flags();
        self.supervised = supervised;
        self.use_l2 = use_l2;
    }

    /// The l2 fusion strength actually used by the objective.
    pub fn effective_lambda1(&self) -> f64 {
        if self.use_l2 {
            self.lambda1
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SubicError::InvalidConfig(msg));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad(format!("lambda1 must be finite and >= 0, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad(format!("lambda2 must be finite and >= 0, got {}", self.lambda2));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return bad(format!("phi must lie in [0, 1], got {}", self.phi));
        }
        if self.knn < 1 {
            return bad("knn must be >= 1".into());
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2), ("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if self.delta1 > self.mu1 || self.delta2 > self.mu2 {
            return bad(format!(
                "dual step sizes must satisfy delta1 <= mu1 and delta2 <= mu2 (got {} / {}, {} / {})",
                self.delta1, self.mu1, self.delta2, self.mu2
            ));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if let Some(g) = self.group_tol {
            if !(g > 0.0) {
                return bad(format!("group_tol must be > 0, got {g}"));
            }
        }
        Ok(())
    }
}
