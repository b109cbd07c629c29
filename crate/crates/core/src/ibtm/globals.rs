use rand::Rng;

use super::config::ModelConfig;
use crate::math::dirichlet_expectation;

/// Dense row-major matrix with one topic per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TopicMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize) -> Self {
        let n = rows.len();
        let data: Vec<f64> = rows.into_iter().flat_map(|r| {
            assert_eq!(r.len(), cols, "ragged topic matrix");
            r
        }).collect();
        Self { rows: n, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Row-wise normalization: the mean of each Dirichlet row.
    pub fn row_normalized(&self) -> TopicMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let row = out.row_mut(r);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        out
    }

    /// Row-wise `E[log x]` under independent Dirichlet rows.
    pub fn dirichlet_expectation(&self) -> TopicMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            dirichlet_expectation(self.row(r), out.row_mut(r));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Variational Dirichlet parameters of the four topic families together
/// with their cached log expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTopics {
    /// Shared location topics, K×V.
    pub beta: TopicMatrix,
    /// Private location topics, T×V.
    pub zeta: TopicMatrix,
    /// Shared label topics, K×L.
    pub eta: TopicMatrix,
    /// Private label topics, S×L.
    pub tau: TopicMatrix,
    pub(crate) elog_beta: TopicMatrix,
    pub(crate) elog_zeta: TopicMatrix,
    pub(crate) elog_eta: TopicMatrix,
    pub(crate) elog_tau: TopicMatrix,
}

impl GlobalTopics {
    pub fn new(beta: TopicMatrix, zeta: TopicMatrix, eta: TopicMatrix, tau: TopicMatrix) -> Self {
        Self {
            elog_beta: beta.dirichlet_expectation(),
            elog_zeta: zeta.dirichlet_expectation(),
            elog_eta: eta.dirichlet_expectation(),
            elog_tau: tau.dirichlet_expectation(),
            beta,
            zeta,
            eta,
            tau,
        }
    }

    pub fn k(&self) -> usize {
        self.beta.rows()
    }

    pub fn t(&self) -> usize {
        self.zeta.rows()
    }

    pub fn s(&self) -> usize {
        self.tau.rows()
    }

    pub fn v(&self) -> usize {
        self.beta.cols()
    }

    pub fn l(&self) -> usize {
        self.eta.cols()
    }

    /// Expected shared location distributions `E[β]`.
    pub fn expected_beta(&self) -> TopicMatrix {
        self.beta.row_normalized()
    }

    /// Expected shared label distributions `E[η]`.
    pub fn expected_eta(&self) -> TopicMatrix {
        self.eta.row_normalized()
    }

    pub fn expected_zeta(&self) -> TopicMatrix {
        self.zeta.row_normalized()
    }

    pub fn expected_tau(&self) -> TopicMatrix {
        self.tau.row_normalized()
    }

    pub fn all_finite(&self) -> bool {
        [&self.beta, &self.zeta, &self.eta, &self.tau]
            .iter()
            .all(|m| m.all_finite())
    }
}

/// Initial global parameters: each entry is its prior concentration plus
/// uniform jitter in `[0, init_jitter)`.
pub fn init_model<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> GlobalTopics {
    let h = &config.hyper;
    let mut make = |rows: usize, cols: usize, prior: f64| {
        let data = (0..rows * cols)
            .map(|_| prior + config.init_jitter * rng.random::<f64>())
            .collect();
        TopicMatrix::from_vec(rows, cols, data)
    };
    let beta = make(config.k, config.v, h.sigma_s1);
    let zeta = make(config.t, config.v, h.sigma_p1);
    let eta = make(config.k, config.l, h.sigma_s2);
    let tau = make(config.s, config.l, h.sigma_p2);
    GlobalTopics::new(beta, zeta, eta, tau)
}
