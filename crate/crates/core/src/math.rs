//! Special functions and Dirichlet expectations used by the variational
//! updates.

use statrs::function::gamma;

const DIGAMMA_FLOOR: f64 = 1e-300;

pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x.max(DIGAMMA_FLOOR))
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// `E[log p_i]` under `Dir(params)`.
pub fn dirichlet_expectation(params: &[f64], out: &mut [f64]) {
    let total = digamma(params.iter().sum());
    for (o, &p) in out.iter_mut().zip(params) {
        *o = digamma(p) - total;
    }
}

/// `E_q[log p(x | prior)] - E_q[log q(x)]` for a Dirichlet factor `q = Dir(params)`
/// with expectations `elog`.
pub fn dirichlet_elbo_term(prior: &[f64], params: &[f64], elog: &[f64]) -> f64 {
    let prior_sum: f64 = prior.iter().sum();
    let param_sum: f64 = params.iter().sum();
    let mut v = ln_gamma(prior_sum) - ln_gamma(param_sum);
    for ((&a, &g), &e) in prior.iter().zip(params).zip(elog) {
        v += ln_gamma(g) - ln_gamma(a) + (a - g) * e;
    }
    v
}

/// Symmetric-prior version of [`dirichlet_elbo_term`].
pub fn symmetric_dirichlet_elbo_term(prior: f64, params: &[f64], elog: &[f64]) -> f64 {
    let n = params.len() as f64;
    let param_sum: f64 = params.iter().sum();
    let mut v = ln_gamma(prior * n) - n * ln_gamma(prior) - ln_gamma(param_sum);
    for (&g, &e) in params.iter().zip(elog) {
        v += ln_gamma(g) + (prior - g) * e;
    }
    v
}

/// Normalizes log weights in place into probabilities.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}
