//! The clip-level motion basis bank: cosine addressing, softmax attention,
//! reconstruction, the L1 basis loss, the KL alignment loss, and the
//! analytic gradients through all of them.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Norms at or below this are treated as degenerate cosine queries.
pub const MIN_NORM: f64 = 1e-12;
/// Floor applied to audio-side probabilities before the log in KL.
pub const KL_FLOOR: f64 = 1e-12;
/// Default softmax scale on cosine distances.
pub const DEFAULT_KAPPA: f64 = 10.0;

/// A clip-level motion feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFeature(Vec<f64>);

impl MotionFeature {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("motion feature has non-finite entries".into()));
        }
        Ok(MotionFeature(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Attention weights over the basis; a point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWeights(Vec<f64>);

impl BasisWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("basis weights".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain("basis weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("basis weights sum to {sum}, not 1")));
        }
        Ok(BasisWeights(weights))
    }

    pub fn one_hot(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::OutOfRange { index, len });
        }
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        Ok(BasisWeights(w))
    }

    pub fn uniform(len: usize) -> Self {
        BasisWeights(vec![1.0 / len as f64; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest weight (first on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Numerically stable softmax of `scale · x`.
pub fn softmax_scaled(x: &[f64], scale: f64) -> Vec<f64> {
    let max = x
        .iter()
        .map(|v| scale * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (scale * v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `S` learnable basis vectors of dimension `C`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionBasisBank {
    basis: Vec<f64>,
    size: usize,
    dim: usize,
    kappa: f64,
}

/// Values cached by [`MotionBasisBank::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct BankForward {
    pub query: Vec<f64>,
    pub query_norm: f64,
    pub basis_norms: Vec<f64>,
    pub distances: Vec<f64>,
    pub weights: BasisWeights,
    pub reconstruction: MotionFeature,
}

/// Gradients produced by [`MotionBasisBank::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct BankGrads {
    /// Same layout as the bank's coefficients (`S·C`, row-major).
    pub basis: Vec<f64>,
    pub query: Vec<f64>,
}

impl MotionBasisBank {
    pub fn new(basis: Vec<Vec<f64>>, kappa: f64) -> Result<Self> {
        let size = basis.len();
        let dim = basis.first().map_or(0, Vec::len);
        if basis.iter().any(|b| b.len() != dim) {
            return Err(Error::Domain("basis vectors differ in dimension".into()));
        }
        Self::from_flat(basis.into_iter().flatten().collect(), size, dim, kappa)
    }

    pub fn from_flat(basis: Vec<f64>, size: usize, dim: usize, kappa: f64) -> Result<Self> {
        if size < 2 || dim < 2 {
            return Err(Error::Domain(format!(
                "motion bank needs S >= 2 and C >= 2, got S={size}, C={dim}"
            )));
        }
        if basis.len() != size * dim {
            return Err(Error::shape("motion bank coefficients", size * dim, basis.len()));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("motion bank has non-finite entries".into()));
        }
        let bank = MotionBasisBank {
            basis,
            size,
            dim,
            kappa,
        };
        for i in 0..size {
            if norm(bank.basis(i)) <= MIN_NORM {
                return Err(Error::Domain(format!("basis vector {i} has zero norm")));
            }
        }
        Ok(bank)
    }

    /// Unit vectors with isotropic random directions.
    pub fn random<R: Rng + ?Sized>(size: usize, dim: usize, kappa: f64, rng: &mut R) -> Result<Self> {
        let mut basis: Vec<f64> = (0..size * dim).map(|_| rng.sample(StandardNormal)).collect();
        for row in basis.chunks_exact_mut(dim) {
            let n = norm(row);
            row.iter_mut().for_each(|v| *v /= n);
        }
        Self::from_flat(basis, size, dim, kappa)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn basis(&self, i: usize) -> &[f64] {
        &self.basis[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.basis
    }

    pub(crate) fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.basis
    }

    pub fn basis_feature(&self, i: usize) -> Result<MotionFeature> {
        if i >= self.size {
            return Err(Error::OutOfRange {
                index: i,
                len: self.size,
            });
        }
        Ok(MotionFeature(self.basis(i).to_vec()))
    }

    /// Rescales every basis vector to unit length.
    pub fn renormalize(&mut self) {
        for row in self.basis.chunks_exact_mut(self.dim) {
            let n = norm(row);
            if n > MIN_NORM {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    fn check_query(&self, query: &[f64]) -> Result<f64> {
        if query.len() != self.dim {
            return Err(Error::shape("motion feature", self.dim, query.len()));
        }
        let qn = norm(query);
        if qn <= MIN_NORM {
            return Err(Error::DegenerateQuery(format!("query norm {qn:e}")));
        }
        Ok(qn)
    }

    fn basis_norms(&self) -> Result<Vec<f64>> {
        (0..self.size)
            .map(|i| {
                let n = norm(self.basis(i));
                if n <= MIN_NORM {
                    Err(Error::DegenerateQuery(format!("basis {i} norm {n:e}")))
                } else {
                    Ok(n)
                }
            })
            .collect()
    }

    /// Cosine similarity between the query and every basis vector.
    pub fn cosine_distances(&self, query: &MotionFeature) -> Result<Vec<f64>> {
        let qn = self.check_query(query.values())?;
        let norms = self.basis_norms()?;
        Ok((0..self.size)
            .map(|i| dot(self.basis(i), query.values()) / (norms[i] * qn))
            .collect())
    }

    pub fn attention(&self, query: &MotionFeature) -> Result<BasisWeights> {
        Ok(attention_weights(&self.cosine_distances(query)?, self.kappa))
    }

    /// `Σ_i w_i · b_i`
    pub fn reconstruct(&self, weights: &BasisWeights) -> Result<MotionFeature> {
        if weights.len() != self.size {
            return Err(Error::shape("basis weights", self.size, weights.len()));
        }
        let mut out = vec![0.0; self.dim];
        for (i, w) in weights.values().iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis(i)) {
                *o += w * b;
            }
        }
        Ok(MotionFeature(out))
    }

    /// Distances, attention and reconstruction for one query, with the
    /// intermediates needed by [`MotionBasisBank::backward`].
    pub fn forward(&self, query: &MotionFeature) -> Result<BankForward> {
        let query_norm = self.check_query(query.values())?;
        let basis_norms = self.basis_norms()?;
        let distances: Vec<f64> = (0..self.size)
            .map(|i| dot(self.basis(i), query.values()) / (basis_norms[i] * query_norm))
            .collect();
        let weights = attention_weights(&distances, self.kappa);
        let reconstruction = self.reconstruct(&weights)?;
        Ok(BankForward {
            query: query.values().to_vec(),
            query_norm,
            basis_norms,
            distances,
            weights,
            reconstruction,
        })
    }

    /// Reverse pass through reconstruction, softmax and cosine addressing.
    /// `grad_recon` is dL/dF̃; `grad_weights` is an optional extra dL/dw.
    pub fn backward(
        &self,
        fwd: &BankForward,
        grad_recon: &[f64],
        grad_weights: Option<&[f64]>,
    ) -> Result<BankGrads> {
        if fwd.query.len() != self.dim || fwd.basis_norms.len() != self.size {
            return Err(Error::Contract("forward cache does not match this bank".into()));
        }
        if grad_recon.len() != self.dim {
            return Err(Error::shape("reconstruction gradient", self.dim, grad_recon.len()));
        }
        if let Some(g) = grad_weights {
            if g.len() != self.size {
                return Err(Error::shape("weight gradient", self.size, g.len()));
            }
        }
        // guard against a cache from before a parameter update
        for i in 0..self.size {
            if norm(self.basis(i)) != fwd.basis_norms[i] {
                return Err(Error::Contract("stale forward cache".into()));
            }
        }
        let w = fwd.weights.values();
        let mut grad_basis = vec![0.0; self.size * self.dim];
        let mut grad_w: Vec<f64> = (0..self.size).map(|i| dot(grad_recon, self.basis(i))).collect();
        if let Some(g) = grad_weights {
            grad_w.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        for i in 0..self.size {
            let row = &mut grad_basis[i * self.dim..(i + 1) * self.dim];
            row.iter_mut()
                .zip(grad_recon)
                .for_each(|(r, g)| *r = w[i] * g);
        }

        // softmax(κ d) Jacobian-vector product
        let mean_gw: f64 = dot(w, &grad_w);
        let grad_d: Vec<f64> = (0..self.size)
            .map(|i| self.kappa * w[i] * (grad_w[i] - mean_gw))
            .collect();

        let q = &fwd.query;
        let qn = fwd.query_norm;
        let mut grad_query = vec![0.0; self.dim];
        for i in 0..self.size {
            if grad_d[i] == 0.0 {
                continue;
            }
            let b = self.basis(i);
            let bn = fwd.basis_norms[i];
            let d = fwd.distances[i];
            let row = &mut grad_basis[i * self.dim..(i + 1) * self.dim];
            for k in 0..self.dim {
                row[k] += grad_d[i] * (q[k] / (bn * qn) - d * b[k] / (bn * bn));
                grad_query[k] += grad_d[i] * (b[k] / (bn * qn) - d * q[k] / (qn * qn));
            }
        }
        Ok(BankGrads {
            basis: grad_basis,
            query: grad_query,
        })
    }
}

/// Softmax of `κ·d`.
pub fn attention_weights(distances: &[f64], kappa: f64) -> BasisWeights {
    BasisWeights(softmax_scaled(distances, kappa))
}

/// A scalar loss with gradients for its two vector arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    pub grad_first: Vec<f64>,
    pub grad_second: Vec<f64>,
}

/// `‖a − b‖₁`, with the subgradient at zero difference taken as zero.
pub fn l1_loss(a: &[f64], b: &[f64]) -> Result<PairLoss> {
    if a.len() != b.len() {
        return Err(Error::shape("l1 operands", a.len(), b.len()));
    }
    let mut value = 0.0;
    let mut grad_first = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        value += d.abs();
        grad_first.push(if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        });
    }
    let grad_second = grad_first.iter().map(|g| -g).collect();
    Ok(PairLoss {
        value,
        grad_first,
        grad_second,
    })
}

/// Basis reconstruction loss `‖F − F̃‖₁`.
pub fn basis_loss(feature: &MotionFeature, reconstruction: &MotionFeature) -> Result<PairLoss> {
    l1_loss(feature.values(), reconstruction.values())
}

/// KL divergence with its gradient with respect to the audio-side logits.
#[derive(Debug, Clone, PartialEq)]
pub struct KlLoss {
    pub value: f64,
    pub grad_logits: Vec<f64>,
}

/// `D_KL(visual ‖ audio)` where `audio = softmax(logits)`. The visual side is
/// a target and receives no gradient.
pub fn kl_loss(visual: &BasisWeights, audio: &BasisWeights) -> Result<KlLoss> {
    if visual.len() != audio.len() {
        return Err(Error::shape("kl operands", visual.len(), audio.len()));
    }
    let value = visual
        .values()
        .iter()
        .zip(audio.values())
        .map(|(p, q)| {
            if *p == 0.0 {
                0.0
            } else {
                p * (p / q.max(KL_FLOOR)).ln()
            }
        })
        .sum();
    let grad_logits = audio
        .values()
        .iter()
        .zip(visual.values())
        .map(|(q, p)| q - p)
        .collect();
    Ok(KlLoss { value, grad_logits })
}
