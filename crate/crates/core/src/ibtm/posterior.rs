use super::config::HyperParams;
use super::globals::GlobalTopics;
use crate::error::{Error, Result};
use crate::math::{digamma, dirichlet_expectation, softmax_in_place};

pub const INNER_TOL: f64 = 1e-4;
pub const INNER_MAX_ITER: usize = 100;

/// Sparse token counts of one document in both views.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocTokens {
    /// `(location word, count)` sorted by word.
    pub words: Vec<(usize, u32)>,
    /// `(label index, count)` sorted by label.
    pub labels: Vec<(usize, u32)>,
}

impl DocTokens {
    pub fn new(words: Vec<(usize, u32)>, labels: Vec<(usize, u32)>) -> Self {
        Self { words, labels }
    }

    pub fn word_mass(&self) -> f64 {
        self.words.iter().map(|w| w.1 as f64).sum()
    }

    pub fn label_mass(&self) -> f64 {
        self.labels.iter().map(|l| l.1 as f64).sum()
    }

    pub fn check(&self, v: usize, l: usize) -> Result<()> {
        if let Some(&(id, _)) = self.words.iter().find(|w| w.0 >= v) {
            return Err(Error::TokenOutOfRange { kind: "word", id, size: v });
        }
        if let Some(&(id, _)) = self.labels.iter().find(|w| w.0 >= l) {
            return Err(Error::TokenOutOfRange { kind: "label", id, size: l });
        }
        Ok(())
    }
}

/// Per-document variational factors.
///
/// `phi_w` holds one `(K+T)` row per distinct word of the document: the
/// first `K` entries are the shared topics, the rest the private ones.
/// `phi_a` is the `(K+S)` analogue for labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DocPosterior {
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    /// Beta parameters of `q(ρ)` as (shared, private).
    pub rho: [f64; 2],
    /// Beta parameters of `q(μ)` as (shared, private).
    pub mu: [f64; 2],
    pub phi_w: Vec<f64>,
    pub phi_a: Vec<f64>,
}

impl DocPosterior {
    /// Posterior equal to the prior, with no token responsibilities.
    pub fn prior(k: usize, t: usize, s: usize, hyper: &HyperParams) -> Self {
        Self {
            gamma: vec![hyper.alpha_s; k],
            lambda: vec![hyper.alpha_p1; t],
            xi: vec![hyper.alpha_p2; s],
            rho: hyper.iota_1,
            mu: hyper.iota_2,
            phi_w: Vec::new(),
            phi_a: Vec::new(),
        }
    }

    /// Normalized `E[θ]`.
    pub fn theta_mean(&self) -> Vec<f64> {
        let s: f64 = self.gamma.iter().sum();
        self.gamma.iter().map(|g| g / s).collect()
    }

    pub fn phi_w_row(&self, i: usize, width: usize) -> &[f64] {
        &self.phi_w[i * width..(i + 1) * width]
    }

    pub fn phi_a_row(&self, i: usize, width: usize) -> &[f64] {
        &self.phi_a[i * width..(i + 1) * width]
    }
}

/// Log expectations of the document-level factors.
pub(crate) struct DocExpectations {
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub nu: Vec<f64>,
    /// `E[log ρ]`, `E[log(1-ρ)]`; zero when the view has no private topics.
    pub rho: [f64; 2],
    pub mu: [f64; 2],
}

impl DocExpectations {
    pub fn of(p: &DocPosterior) -> Self {
        let mut theta = vec![0.0; p.gamma.len()];
        dirichlet_expectation(&p.gamma, &mut theta);
        let mut kappa = vec![0.0; p.lambda.len()];
        dirichlet_expectation(&p.lambda, &mut kappa);
        let mut nu = vec![0.0; p.xi.len()];
        dirichlet_expectation(&p.xi, &mut nu);
        let beta_e = |ab: [f64; 2], active: bool| {
            if active {
                let t = digamma(ab[0] + ab[1]);
                [digamma(ab[0]) - t, digamma(ab[1]) - t]
            } else {
                [0.0, 0.0]
            }
        };
        Self {
            rho: beta_e(p.rho, !p.lambda.is_empty()),
            mu: beta_e(p.mu, !p.xi.is_empty()),
            theta,
            kappa,
            nu,
        }
    }
}

/// Fills responsibilities for one view. Returns nothing; `phi` is
/// overwritten row by row.
#[allow(clippy::too_many_arguments)]
fn update_phi(
    tokens: &[(usize, u32)],
    e: &DocExpectations,
    private: &[f64],
    share: [f64; 2],
    elog_shared: &super::globals::TopicMatrix,
    elog_private: &super::globals::TopicMatrix,
    phi: &mut Vec<f64>,
) {
    let k = e.theta.len();
    let p = private.len();
    let width = k + p;
    phi.resize(tokens.len() * width, 0.0);
    for (i, &(tok, _)) in tokens.iter().enumerate() {
        let row = &mut phi[i * width..(i + 1) * width];
        for j in 0..k {
            row[j] = share[0] + e.theta[j] + elog_shared.get(j, tok);
        }
        for j in 0..p {
            row[k + j] = share[1] + private[j] + elog_private.get(j, tok);
        }
        softmax_in_place(row);
    }
}

/// Accumulates responsibilities of one view into shared topic mass,
/// private topic mass, and the (shared, private) share totals.
fn accumulate(tokens: &[(usize, u32)], phi: &[f64], k: usize, shared: &mut [f64], private: &mut [f64]) -> [f64; 2] {
    let width = k + private.len();
    let mut split = [0.0, 0.0];
    for (i, &(_, c)) in tokens.iter().enumerate() {
        let c = c as f64;
        let row = &phi[i * width..(i + 1) * width];
        for j in 0..k {
            shared[j] += c * row[j];
            split[0] += c * row[j];
        }
        for j in 0..private.len() {
            private[j] += c * row[k + j];
            split[1] += c * row[k + j];
        }
    }
    split
}

/// Runs one full round of coordinate updates: responsibilities of both views,
/// then the document-level Dirichlet and Beta factors.
pub(crate) fn coordinate_round(tokens: &DocTokens, globals: &GlobalTopics, hyper: &HyperParams, post: &mut DocPosterior) {
    let k = globals.k();
    let e = DocExpectations::of(post);
    update_phi(&tokens.words, &e, &e.kappa, e.rho, &globals.elog_beta, &globals.elog_zeta, &mut post.phi_w);
    update_phi(&tokens.labels, &e, &e.nu, e.mu, &globals.elog_eta, &globals.elog_tau, &mut post.phi_a);

    let mut shared = vec![0.0; k];
    let mut lambda = vec![0.0; globals.t()];
    let mut xi = vec![0.0; globals.s()];
    let w_split = accumulate(&tokens.words, &post.phi_w, k, &mut shared, &mut lambda);
    let a_split = accumulate(&tokens.labels, &post.phi_a, k, &mut shared, &mut xi);
    post.gamma = shared.into_iter().map(|m| hyper.alpha_s + m).collect();
    post.lambda = lambda.into_iter().map(|m| hyper.alpha_p1 + m).collect();
    post.xi = xi.into_iter().map(|m| hyper.alpha_p2 + m).collect();
    if globals.t() > 0 {
        post.rho = [hyper.iota_1[0] + w_split[0], hyper.iota_1[1] + w_split[1]];
    }
    if globals.s() > 0 {
        post.mu = [hyper.iota_2[0] + a_split[0], hyper.iota_2[1] + a_split[1]];
    }
}

/// Local coordinate ascent for one document starting from its prior.
pub fn e_step_document(tokens: &DocTokens, globals: &GlobalTopics, hyper: &HyperParams) -> Result<DocPosterior> {
    let start = DocPosterior::prior(globals.k(), globals.t(), globals.s(), hyper);
    e_step_document_from(tokens, globals, hyper, start)
}

/// Local coordinate ascent from a given starting posterior (warm start).
/// Stops when the mean absolute change of `gamma` drops below `1e-4` or after
/// 100 rounds.
pub fn e_step_document_from(
    tokens: &DocTokens,
    globals: &GlobalTopics,
    hyper: &HyperParams,
    mut post: DocPosterior,
) -> Result<DocPosterior> {
    tokens.check(globals.v(), globals.l())?;
    let k = globals.k() as f64;
    for _ in 0..INNER_MAX_ITER {
        let before = post.gamma.clone();
        coordinate_round(tokens, globals, hyper, &mut post);
        let change: f64 = before
            .iter()
            .zip(&post.gamma)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / k;
        if change < INNER_TOL {
            break;
        }
    }
    Ok(post)
}
