use super::config::HyperParams;
use super::globals::{GlobalTopics, TopicMatrix};
use super::posterior::{DocExpectations, DocPosterior, DocTokens};
use crate::math::{dirichlet_elbo_term, symmetric_dirichlet_elbo_term};

fn token_term(
    tokens: &[(usize, u32)],
    phi: &[f64],
    e: &DocExpectations,
    private: &[f64],
    share: [f64; 2],
    elog_shared: &TopicMatrix,
    elog_private: &TopicMatrix,
) -> f64 {
    let k = e.theta.len();
    let width = k + private.len();
    let mut total = 0.0;
    for (i, &(tok, c)) in tokens.iter().enumerate() {
        let row = &phi[i * width..(i + 1) * width];
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let score = if j < k {
                share[0] + e.theta[j] + elog_shared.get(j, tok)
            } else {
                share[1] + private[j - k] + elog_private.get(j - k, tok)
            };
            acc += p * (score - p.ln());
        }
        total += c as f64 * acc;
    }
    total
}

/// Local (per-document) ELBO contribution: expected log joint of the
/// document's latents and tokens minus the entropy terms of its factors.
pub fn document_elbo(tokens: &DocTokens, globals: &GlobalTopics, hyper: &HyperParams, post: &DocPosterior) -> f64 {
    let e = DocExpectations::of(post);
    let mut v = symmetric_dirichlet_elbo_term(hyper.alpha_s, &post.gamma, &e.theta);
    if globals.t() > 0 {
        v += symmetric_dirichlet_elbo_term(hyper.alpha_p1, &post.lambda, &e.kappa);
        v += dirichlet_elbo_term(&hyper.iota_1, &post.rho, &e.rho);
    }
    if globals.s() > 0 {
        v += symmetric_dirichlet_elbo_term(hyper.alpha_p2, &post.xi, &e.nu);
        v += dirichlet_elbo_term(&hyper.iota_2, &post.mu, &e.mu);
    }
    v += token_term(&tokens.words, &post.phi_w, &e, &e.kappa, e.rho, &globals.elog_beta, &globals.elog_zeta);
    v += token_term(&tokens.labels, &post.phi_a, &e, &e.nu, e.mu, &globals.elog_eta, &globals.elog_tau);
    v
}

/// Global ELBO contribution of the topic Dirichlets.
pub fn global_elbo(globals: &GlobalTopics, hyper: &HyperParams) -> f64 {
    let fam = |params: &TopicMatrix, elog: &TopicMatrix, prior: f64| -> f64 {
        (0..params.rows())
            .map(|r| symmetric_dirichlet_elbo_term(prior, params.row(r), elog.row(r)))
            .sum()
    };
    fam(&globals.beta, &globals.elog_beta, hyper.sigma_s1)
        + fam(&globals.zeta, &globals.elog_zeta, hyper.sigma_p1)
        + fam(&globals.eta, &globals.elog_eta, hyper.sigma_s2)
        + fam(&globals.tau, &globals.elog_tau, hyper.sigma_p2)
}

/// Evidence lower bound of the whole corpus, summed in document order.
pub fn elbo(docs: &[DocTokens], globals: &GlobalTopics, posteriors: &[DocPosterior], hyper: &HyperParams) -> f64 {
    let local: f64 = docs
        .iter()
        .zip(posteriors)
        .map(|(d, p)| document_elbo(d, globals, hyper, p))
        .sum();
    local + global_elbo(globals, hyper)
}
