//! Versioned binary model container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "IBTMMDL1"
//! u32 K, T, S, V, L
//! f64 x 11 hyperparameters (alpha_s, alpha_p1, alpha_p2, sigma_s1, sigma_p1,
//!          sigma_s2, sigma_p2, iota_1, iota_2)
//! f64 beta[K*V], zeta[T*V], eta[K*L], tau[S*L]      row-major
//! u32 n, then n bytes of an embedded "IBTMVOC1" location vocabulary
//! u32 n, then n x (u32 len, UTF-8 bytes)            label vocabulary
//! u64 seed, u32 max_sweeps, f64 elbo_rel_tol, f64 init_jitter
//! u32 label_scale, u32 sweeps, u32 n, f64 elbo_trace[n]
//! u32 CRC32 of all preceding bytes
//! ```

use std::io::{Read, Write};

use super::config::{HyperParams, ModelConfig};
use super::globals::{GlobalTopics, TopicMatrix};
use crate::corpus::LabelVocab;
use crate::error::{Error, Result};
use crate::featurize::LocationVocab;

pub const MODEL_MAGIC: &[u8; 8] = b"IBTMMDL1";

/// A fitted model with the vocabularies needed to featurize new input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub location_vocab: LocationVocab,
    pub label_vocab: LabelVocab,
    pub globals: GlobalTopics,
    pub elbo_trace: Vec<f64>,
    pub sweeps: usize,
    /// Multiplicity given to each label token during training.
    pub label_scale: u32,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len());
        self.buf.extend_from_slice(b);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format {
                what: "model",
                message: format!("truncated at byte {}", self.pos),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<TopicMatrix> {
        let n = rows.checked_mul(cols).filter(|n| n * 8 <= self.data.len()).ok_or_else(|| Error::Format {
            what: "model",
            message: "matrix size overflows file".into(),
        })?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        if data.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Format {
                what: "model",
                message: "topic parameters must be positive and finite".into(),
            });
        }
        Ok(TopicMatrix::from_vec(rows, cols, data))
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MODEL_MAGIC);
        for d in [c.k, c.t, c.s, c.v, c.l] {
            w.u32(d);
        }
        w.f64s(&c.hyper.to_array());
        let g = &self.globals;
        for m in [&g.beta, &g.zeta, &g.eta, &g.tau] {
            w.f64s(m.as_slice());
        }
        w.bytes(&self.location_vocab.to_bytes()?);
        w.u32(self.label_vocab.len());
        for l in self.label_vocab.labels() {
            w.bytes(l.as_bytes());
        }
        w.u64(c.seed);
        w.u32(c.max_sweeps);
        w.f64(c.elbo_rel_tol);
        w.f64(c.init_jitter);
        w.u32(self.label_scale as usize);
        w.u32(self.sweeps);
        w.u32(self.elbo_trace.len());
        w.f64s(&self.elbo_trace);
        let crc = crc32fast::hash(&w.buf);
        w.buf.extend_from_slice(&crc.to_le_bytes());
        Ok(w.buf)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |message: &str| Error::Format {
            what: "model",
            message: message.to_string(),
        };
        if data.len() < MODEL_MAGIC.len() + 4 || &data[..8] != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let (body, tail) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader { data: body, pos: 8 };
        let (k, t, s, v, l) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let mut hyper = [0.0; 11];
        for h in hyper.iter_mut() {
            *h = r.f64()?;
        }
        let hyper = HyperParams::from_array(hyper);
        let beta = r.matrix(k, v)?;
        let zeta = r.matrix(t, v)?;
        let eta = r.matrix(k, l)?;
        let tau = r.matrix(s, l)?;
        let location_vocab = LocationVocab::read_from(r.bytes()?)?;
        if location_vocab.len() != v {
            return Err(bad("location vocabulary size does not match V"));
        }
        let n_labels = r.u32()?;
        let mut labels = Vec::with_capacity(n_labels.min(body.len()));
        for _ in 0..n_labels {
            let s = std::str::from_utf8(r.bytes()?).map_err(|_| bad("label is not UTF-8"))?;
            labels.push(s.to_string());
        }
        let label_vocab = LabelVocab::from_labels(&labels);
        if label_vocab.len() != l || label_vocab.labels() != labels.as_slice() {
            return Err(bad("label vocabulary does not match L"));
        }
        let seed = r.u64()?;
        let max_sweeps = r.u32()?;
        let elbo_rel_tol = r.f64()?;
        let init_jitter = r.f64()?;
        let label_scale = r.u32()? as u32;
        let sweeps = r.u32()?;
        let n_trace = r.u32()?;
        if n_trace * 8 > body.len() {
            return Err(bad("trace length overflows file"));
        }
        let elbo_trace = (0..n_trace).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != body.len() {
            return Err(bad("trailing bytes before checksum"));
        }
        let config = ModelConfig {
            k,
            t,
            s,
            v,
            l,
            hyper,
            max_sweeps,
            elbo_rel_tol,
            seed,
            init_jitter,
        };
        config.validate()?;
        Ok(Self {
            config,
            location_vocab,
            label_vocab,
            globals: GlobalTopics::new(beta, zeta, eta, tau),
            elbo_trace,
            sweeps,
            label_scale,
        })
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }

    /// Hex CRC32 of the serialized model.
    pub fn training_id(&self) -> String {
        let bytes = self.to_bytes().unwrap_or_default();
        let crc = bytes
            .len()
            .checked_sub(4)
            .map(|n| u32::from_le_bytes(bytes[n..].try_into().unwrap()))
            .unwrap_or(0);
        format!("{crc:08x}")
    }
}
