use crate::error::{Error, Result};

/// Symmetric Dirichlet concentrations and Beta share priors of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Shared topic proportions `θ`.
    pub alpha_s: f64,
    /// Drawing-private topic proportions `κ`.
    pub alpha_p1: f64,
    /// Label-private topic proportions `ν`.
    pub alpha_p2: f64,
    /// Shared location topics `β`.
    pub sigma_s1: f64,
    /// Private location topics `ζ`.
    pub sigma_p1: f64,
    /// Shared label topics `η`.
    pub sigma_s2: f64,
    /// Private label topics `τ`.
    pub sigma_p2: f64,
    /// Beta prior of the drawing share proportion `ρ` as (shared, private).
    pub iota_1: [f64; 2],
    /// Beta prior of the label share proportion `μ` as (shared, private).
    pub iota_2: [f64; 2],
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha_s: 0.8,
            alpha_p1: 0.8,
            alpha_p2: 0.8,
            sigma_s1: 0.6,
            sigma_p1: 0.6,
            sigma_s2: 0.6,
            sigma_p2: 0.6,
            iota_1: [1.0, 1.0],
            iota_2: [1.0, 1.0],
        }
    }
}

impl HyperParams {
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.alpha_s,
            self.alpha_p1,
            self.alpha_p2,
            self.sigma_s1,
            self.sigma_p1,
            self.sigma_s2,
            self.sigma_p2,
            self.iota_1[0],
            self.iota_1[1],
            self.iota_2[0],
            self.iota_2[1],
        ]
    }

    pub fn from_array(a: [f64; 11]) -> Self {
        Self {
            alpha_s: a[0],
            alpha_p1: a[1],
            alpha_p2: a[2],
            sigma_s1: a[3],
            sigma_p1: a[4],
            sigma_s2: a[5],
            sigma_p2: a[6],
            iota_1: [a[7], a[8]],
            iota_2: [a[9], a[10]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "hyperparameters must be positive and finite: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Shared topics.
    pub k: usize,
    /// Drawing-private topics.
    pub t: usize,
    /// Label-private topics.
    pub s: usize,
    /// Location vocabulary size.
    pub v: usize,
    /// Label vocabulary size.
    pub l: usize,
    pub hyper: HyperParams,
    pub max_sweeps: usize,
    pub elbo_rel_tol: f64,
    pub seed: u64,
    /// Scale of the uniform jitter added to initial topic parameters.
    pub init_jitter: f64,
}

impl ModelConfig {
    pub fn new(k: usize, t: usize, s: usize, v: usize, l: usize) -> Self {
        Self {
            k,
            t,
            s,
            v,
            l,
            hyper: HyperParams::default(),
            max_sweeps: 200,
            elbo_rel_tol: 1e-5,
            seed: 0,
            init_jitter: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.v == 0 || self.l == 0 {
            return Err(Error::InvalidArgument(format!(
                "need K, V, L >= 1 (K={}, V={}, L={})",
                self.k, self.v, self.l
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if self.elbo_rel_tol.is_nan() || self.elbo_rel_tol < 0.0 || self.init_jitter.is_nan() || self.init_jitter < 0.0 {
            return Err(Error::InvalidArgument("tolerance and jitter must be nonnegative".into()));
        }
        self.hyper.validate()
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(20, 5, 5, 256, 1)
    }
}
