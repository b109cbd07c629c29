use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{HyperParams, ModelConfig};
use super::elbo::{document_elbo, elbo};
use super::globals::{init_model, GlobalTopics, TopicMatrix};
use super::posterior::{e_step_document, e_step_document_from, DocPosterior, DocTokens};
use crate::error::{Error, Result};

/// Batch M-step: each topic parameter is its prior plus the expected token
/// counts assigned to it, accumulated in document order.
pub fn m_step(
    docs: &[DocTokens],
    posteriors: &[DocPosterior],
    hyper: &HyperParams,
    dims: (usize, usize, usize, usize, usize),
) -> GlobalTopics {
    let (k, t, s, v, l) = dims;
    let mut beta = TopicMatrix::filled(k, v, 0.0);
    let mut zeta = TopicMatrix::filled(t, v, 0.0);
    let mut eta = TopicMatrix::filled(k, l, 0.0);
    let mut tau = TopicMatrix::filled(s, l, 0.0);
    let scatter = |tokens: &[(usize, u32)], phi: &[f64], shared: &mut TopicMatrix, private: &mut TopicMatrix| {
        let width = k + private.rows();
        for (i, &(tok, c)) in tokens.iter().enumerate() {
            let c = c as f64;
            let row = &phi[i * width..(i + 1) * width];
            for j in 0..k {
                shared.row_mut(j)[tok] += c * row[j];
            }
            for j in 0..private.rows() {
                private.row_mut(j)[tok] += c * row[k + j];
            }
        }
    };
    for (d, p) in docs.iter().zip(posteriors) {
        scatter(&d.words, &p.phi_w, &mut beta, &mut zeta);
        scatter(&d.labels, &p.phi_a, &mut eta, &mut tau);
    }
    let add_prior = |m: &mut TopicMatrix, prior: f64| {
        for r in 0..m.rows() {
            m.row_mut(r).iter_mut().for_each(|x| *x += prior);
        }
    };
    add_prior(&mut beta, hyper.sigma_s1);
    add_prior(&mut zeta, hyper.sigma_p1);
    add_prior(&mut eta, hyper.sigma_s2);
    add_prior(&mut tau, hyper.sigma_p2);
    GlobalTopics::new(beta, zeta, eta, tau)
}

/// Local step of one sweep: fits the document from the prior and from its
/// previous posterior and keeps the fit with the larger document ELBO.
fn refit_document(
    tokens: &DocTokens,
    globals: &GlobalTopics,
    hyper: &HyperParams,
    previous: DocPosterior,
    first_sweep: bool,
) -> Result<DocPosterior> {
    let cold = e_step_document(tokens, globals, hyper)?;
    if first_sweep {
        return Ok(cold);
    }
    let warm = e_step_document_from(tokens, globals, hyper, previous)?;
    if document_elbo(tokens, globals, hyper, &cold) > document_elbo(tokens, globals, hyper, &warm) {
        Ok(cold)
    } else {
        Ok(warm)
    }
}

/// Outcome of batch variational training.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub globals: GlobalTopics,
    pub posteriors: Vec<DocPosterior>,
    /// ELBO after each sweep.
    pub elbo_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl TrainOutput {
    pub fn final_elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("at least one sweep")
    }
}

/// Batch mean-field training; see [`train_with`].
pub fn train(docs: &[DocTokens], config: &ModelConfig) -> Result<TrainOutput> {
    train_with(docs, config, |_, _| {})
}

/// Alternates full E-sweeps (documents in parallel, see [`refit_document`])
/// and M-steps until the relative ELBO improvement falls
/// below `elbo_rel_tol` or `max_sweeps` is reached. `on_sweep` receives the
/// sweep number (from 1) and its ELBO.
pub fn train_with<F: FnMut(usize, f64)>(
    docs: &[DocTokens],
    config: &ModelConfig,
    mut on_sweep: F,
) -> Result<TrainOutput> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for d in docs {
        d.check(config.v, config.l)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut globals = init_model(config, &mut rng);
    train_from(docs, config, &mut globals, &mut on_sweep)
}

/// Training loop from explicit initial globals.
pub fn train_from<F: FnMut(usize, f64)>(
    docs: &[DocTokens],
    config: &ModelConfig,
    globals: &mut GlobalTopics,
    on_sweep: &mut F,
) -> Result<TrainOutput> {
    let hyper = config.hyper;
    let dims = (config.k, config.t, config.s, config.v, config.l);
    let mut posteriors: Vec<DocPosterior> = docs
        .iter()
        .map(|_| DocPosterior::prior(config.k, config.t, config.s, &hyper))
        .collect();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for sweep in 1..=config.max_sweeps {
        let current: &GlobalTopics = globals;
        posteriors = docs
            .par_iter()
            .zip(posteriors.into_par_iter())
            .map(|(d, p)| refit_document(d, current, &hyper, p, sweep == 1))
            .collect::<Result<Vec<_>>>()?;
        *globals = m_step(docs, &posteriors, &hyper, dims);
        if !globals.all_finite() {
            return Err(Error::NonFinite { what: "topic parameters", sweep });
        }
        let value = elbo(docs, globals, &posteriors, &hyper);
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "ELBO", sweep });
        }
        on_sweep(sweep, value);
        let done = trace
            .last()
            .is_some_and(|&prev| (value - prev) / prev.abs() < config.elbo_rel_tol);
        trace.push(value);
        if done {
            converged = true;
            break;
        }
    }
    Ok(TrainOutput {
        globals: globals.clone(),
        posteriors,
        sweeps: trace.len(),
        elbo_trace: trace,
        converged,
    })
}
