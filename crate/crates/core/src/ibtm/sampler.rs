use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::config::HyperParams;
use super::globals::TopicMatrix;
use super::posterior::DocTokens;
use crate::error::{Error, Result};

/// Point-valued topic distributions (row-stochastic), the generative truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistributions {
    pub beta: TopicMatrix,
    pub zeta: TopicMatrix,
    pub eta: TopicMatrix,
    pub tau: TopicMatrix,
}

impl TopicDistributions {
    pub fn validate(&self) -> Result<()> {
        let (k, v, l) = (self.beta.rows(), self.beta.cols(), self.eta.cols());
        if k == 0 || self.eta.rows() != k || self.zeta.cols() != v || self.tau.cols() != l {
            return Err(Error::InvalidArgument("inconsistent topic matrix shapes".into()));
        }
        for m in [&self.beta, &self.zeta, &self.eta, &self.tau] {
            for row in m.iter_rows() {
                let s: f64 = row.iter().sum();
                if row.iter().any(|&x| x.is_nan() || x < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument("topic rows must be probability vectors".into()));
                }
            }
        }
        Ok(())
    }
}

/// One ancestrally sampled document with its latent draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDocument {
    pub words: Vec<usize>,
    pub labels: Vec<usize>,
    /// Per word token: drawn from the shared space.
    pub word_shared: Vec<bool>,
    pub label_shared: Vec<bool>,
    pub theta: Vec<f64>,
    pub rho: f64,
    pub mu: f64,
}

impl SampledDocument {
    /// Word counts plus the distinct labels, each with count `label_scale`
    /// (labels form a set per document).
    pub fn tokens(&self, label_scale: u32) -> DocTokens {
        let mut words = std::collections::BTreeMap::<usize, u32>::new();
        for &w in &self.words {
            *words.entry(w).or_default() += 1;
        }
        let labels: std::collections::BTreeSet<usize> = self.labels.iter().copied().collect();
        DocTokens::new(
            words.into_iter().collect(),
            labels.into_iter().map(|l| (l, label_scale)).collect(),
        )
    }

    pub fn distinct_labels(&self) -> Vec<usize> {
        let set: std::collections::BTreeSet<usize> = self.labels.iter().copied().collect();
        set.into_iter().collect()
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

/// Symmetric Dirichlet draw through normalized Gamma variates. If every
/// variate underflows, all mass goes to one uniformly chosen component.
fn dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| gamma_draw(alpha, rng)).collect();
    let s: f64 = x.iter().sum();
    if s > 0.0 && s.is_finite() {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        x = vec![0.0; n];
        x[rng.random_range(0..n)] = 1.0;
    }
    x
}

fn beta_draw<R: Rng + ?Sized>(ab: [f64; 2], rng: &mut R) -> f64 {
    let a = gamma_draw(ab[0], rng);
    let b = gamma_draw(ab[1], rng);
    if a + b > 0.0 {
        a / (a + b)
    } else if ab[0] >= ab[1] {
        1.0
    } else {
        0.0
    }
}

fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, &pi) in p.iter().enumerate() {
        if u < pi {
            return i;
        }
        u -= pi;
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Ancestral sampling of one document with `n_words` location tokens and
/// `n_labels` label tokens. A view without private topics always draws from
/// the shared space and its share proportion is reported as 1.
pub fn sample_document<R: Rng + ?Sized>(
    dist: &TopicDistributions,
    n_words: usize,
    n_labels: usize,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<SampledDocument> {
    dist.validate()?;
    hyper.validate()?;
    let (k, t, s) = (dist.beta.rows(), dist.zeta.rows(), dist.tau.rows());
    let theta = dirichlet(hyper.alpha_s, k, rng);
    let kappa = if t > 0 { dirichlet(hyper.alpha_p1, t, rng) } else { Vec::new() };
    let nu = if s > 0 { dirichlet(hyper.alpha_p2, s, rng) } else { Vec::new() };
    let rho = if t > 0 { beta_draw(hyper.iota_1, rng) } else { 1.0 };
    let mu = if s > 0 { beta_draw(hyper.iota_2, rng) } else { 1.0 };

    let mut draw_view = |n: usize, share: f64, private: &[f64], shared_m: &TopicMatrix, private_m: &TopicMatrix| {
        let mut toks = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for _ in 0..n {
            let shared = private.is_empty() || rng.random::<f64>() < share;
            let tok = if shared {
                let z = categorical(&theta, rng);
                categorical(shared_m.row(z), rng)
            } else {
                let z = categorical(private, rng);
                categorical(private_m.row(z), rng)
            };
            toks.push(tok);
            flags.push(shared);
        }
        (toks, flags)
    };
    let (words, word_shared) = draw_view(n_words, rho, &kappa, &dist.beta, &dist.zeta);
    let (labels, label_shared) = draw_view(n_labels, mu, &nu, &dist.eta, &dist.tau);
    Ok(SampledDocument {
        words,
        labels,
        word_shared,
        label_shared,
        theta,
        rho,
        mu,
    })
}
