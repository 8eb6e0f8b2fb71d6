//! Quantum channels as Kraus families.
//!
//! A [`KrausChannel`] is a completely positive map given by an ordered list
//! of Kraus operators together with a trace-preservation flag (CPTP vs CPTD).
//! The module provides application, tensor powers, complementary channels,
//! canonical Kraus forms relative to a reference state, averaged channels,
//! the useless channel, and a multi-restart ascent estimator for the diamond
//! norm of channel differences.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    self, haar_isometry, hermitian_fn, kron, CMatrix, DensityOperator, C_ZERO,
};
use crate::tol;

/// Completely positive map as an ordered Kraus family.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
    trace_preserving: bool,
}

impl KrausChannel {
    /// Trace-preserving channel; validates Σ aᵢ†aᵢ = I.
    pub fn new_cptp(in_dim: usize, out_dim: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = KrausChannel {
            in_dim,
            out_dim,
            kraus,
            trace_preserving: true,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Trace-decreasing channel; validates Σ aᵢ†aᵢ ≤ I.
    pub fn new_cptd(in_dim: usize, out_dim: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = KrausChannel {
            in_dim,
            out_dim,
            kraus,
            trace_preserving: false,
        };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        for a in &self.kraus {
            if a.rows() != self.out_dim || a.cols() != self.in_dim {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator is {}x{}, expected {}x{}",
                    a.rows(),
                    a.cols(),
                    self.out_dim,
                    self.in_dim
                )));
            }
        }
        let s = self.kraus_sum();
        if self.trace_preserving {
            let defect = s.max_abs_diff(&CMatrix::identity(self.in_dim));
            if defect > tol::KRAUS_TP {
                return Err(Error::InvalidChannel(format!(
                    "Σ aᵢ†aᵢ deviates from identity by {defect:e}"
                )));
            }
        } else {
            let top = s
                .eigh()
                .map_err(|e| Error::InvalidChannel(format!("Kraus sum not Hermitian: {e}")))?
                .eigenvalues
                .first()
                .cloned()
                .unwrap_or(0.0);
            if top > 1.0 + tol::KRAUS_TD {
                return Err(Error::InvalidChannel(format!(
                    "Σ aᵢ†aᵢ has eigenvalue {top} > 1"
                )));
            }
        }
        Ok(())
    }

    fn kraus_sum(&self) -> CMatrix {
        let mut s = CMatrix::zeros(self.in_dim, self.in_dim);
        for a in &self.kraus {
            s = s.add(&a.dagger().mul(a));
        }
        s
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn kraus_count(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Identity channel on `dim` dimensions.
    pub fn identity(dim: usize) -> Self {
        KrausChannel {
            in_dim: dim,
            out_dim: dim,
            kraus: vec![CMatrix::identity(dim)],
            trace_preserving: true,
        }
    }

    /// Useless channel U(ρ) = tr(ρ) 1/d' mapping dim `in_dim` to `out_dim`.
    pub fn useless(in_dim: usize, out_dim: usize) -> Self {
        let scale = 1.0 / (out_dim as f64).sqrt();
        let mut kraus = Vec::with_capacity(in_dim * out_dim);
        for i in 0..out_dim {
            for j in 0..in_dim {
                let mut a = CMatrix::zeros(out_dim, in_dim);
                a.set(i, j, Complex64::new(scale, 0.0));
                kraus.push(a);
            }
        }
        KrausChannel {
            in_dim,
            out_dim,
            kraus,
            trace_preserving: true,
        }
    }

    /// Qubit phase flip: ρ ↦ (1-p) ρ + p ZρZ.
    pub fn phase_flip(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p));
        let a0 = CMatrix::identity(2).scale_re((1.0 - p).sqrt());
        let z = CMatrix::diag(&[1.0, -1.0]).scale_re(p.sqrt());
        KrausChannel {
            in_dim: 2,
            out_dim: 2,
            kraus: vec![a0, z],
            trace_preserving: true,
        }
    }

    /// Qubit bit flip (phase flip in the X basis): ρ ↦ (1-p) ρ + p XρX.
    pub fn bit_flip(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p));
        let a0 = CMatrix::identity(2).scale_re((1.0 - p).sqrt());
        let x = CMatrix::from_real_row_major(2, 2, &[0.0, 1.0, 1.0, 0.0])
            .unwrap()
            .scale_re(p.sqrt());
        KrausChannel {
            in_dim: 2,
            out_dim: 2,
            kraus: vec![a0, x],
            trace_preserving: true,
        }
    }

    /// Qubit depolarizing channel: ρ ↦ (1-p) ρ + p 1/2.
    pub fn depolarizing(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p));
        let i = CMatrix::identity(2);
        let x = CMatrix::from_real_row_major(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let y = CMatrix::from_row_major(
            2,
            2,
            vec![
                C_ZERO,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                C_ZERO,
            ],
        )
        .unwrap();
        let z = CMatrix::diag(&[1.0, -1.0]);
        let w0 = (1.0 - 0.75 * p).sqrt();
        let w1 = (0.25 * p).sqrt();
        KrausChannel {
            in_dim: 2,
            out_dim: 2,
            kraus: vec![
                i.scale_re(w0),
                x.scale_re(w1),
                y.scale_re(w1),
                z.scale_re(w1),
            ],
            trace_preserving: true,
        }
    }

    /// Qubit amplitude damping with decay probability γ.
    pub fn amplitude_damping(gamma: f64) -> Self {
        assert!((0.0..=1.0).contains(&gamma));
        let a0 = CMatrix::diag(&[1.0, (1.0 - gamma).sqrt()]);
        let mut a1 = CMatrix::zeros(2, 2);
        a1.set(0, 1, Complex64::new(gamma.sqrt(), 0.0));
        KrausChannel {
            in_dim: 2,
            out_dim: 2,
            kraus: vec![a0, a1],
            trace_preserving: true,
        }
    }

    /// The zero map (CPTD with empty Kraus family).
    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        KrausChannel {
            in_dim,
            out_dim,
            kraus: vec![],
            trace_preserving: false,
        }
    }

    /// Parse a named builtin such as `identity`, `useless`, `phase_flip(0.1)`,
    /// `bit_flip(0.1)`, `depolarizing(0.2)`, `amplitude_damping(0.3)`.
    /// `identity(d)` and `useless(d)` accept an optional dimension.
    pub fn builtin(name: &str) -> Result<Self> {
        let name = name.trim();
        let (head, arg) = match name.find('(') {
            Some(i) if name.ends_with(')') => {
                (&name[..i], Some(name[i + 1..name.len() - 1].trim()))
            }
            None => (name, None),
            _ => return Err(Error::InvalidParameter(format!("bad channel name {name}"))),
        };
        let parse_f = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidParameter(format!("{head} needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("{head}: {e}")))
        };
        match head {
            "identity" => {
                let d = match arg {
                    Some(a) => a
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?,
                    None => 2,
                };
                Ok(KrausChannel::identity(d))
            }
            "useless" => {
                let d = match arg {
                    Some(a) => a
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?,
                    None => 2,
                };
                Ok(KrausChannel::useless(d, d))
            }
            "phase_flip" => Ok(KrausChannel::phase_flip(parse_f(arg)?)),
            "bit_flip" => Ok(KrausChannel::bit_flip(parse_f(arg)?)),
            "depolarizing" => Ok(KrausChannel::depolarizing(parse_f(arg)?)),
            "amplitude_damping" => Ok(KrausChannel::amplitude_damping(parse_f(arg)?)),
            other => Err(Error::InvalidParameter(format!(
                "unknown builtin channel {other}"
            ))),
        }
    }

    /// N(ρ) = Σ aᵢ ρ aᵢ†.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.in_dim || rho.cols() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "state of dim {} into channel with input dim {}",
                rho.rows(),
                self.in_dim
            )));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for a in &self.kraus {
            out = out.add(&a.mul(rho).mul(&a.dagger()));
        }
        Ok(out)
    }

    pub fn apply_density(&self, rho: &DensityOperator) -> Result<CMatrix> {
        self.apply(rho.matrix())
    }

    /// Memoryless extension N^{⊗l}; the Kraus set consists of all l-fold
    /// tensor words in lexicographic order of the index sequence.
    pub fn tensor_power(&self, l: usize, guards: &tol::Guards) -> Result<KrausChannel> {
        if l == 0 {
            return Err(Error::InvalidParameter("tensor power needs l >= 1".into()));
        }
        let n_words = (self.kraus_count() as f64).powi(l as i32);
        if n_words > guards.max_kraus_words as f64 {
            return Err(Error::GuardExceeded(format!(
                "tensor power would need {n_words} Kraus words (cap {})",
                guards.max_kraus_words
            )));
        }
        let mut kraus: Vec<CMatrix> = vec![CMatrix::identity(1)];
        for _ in 0..l {
            let mut next = Vec::with_capacity(kraus.len() * self.kraus_count());
            for w in &kraus {
                for a in &self.kraus {
                    next.push(kron(w, a));
                }
            }
            kraus = next;
        }
        Ok(KrausChannel {
            in_dim: self.in_dim.pow(l as u32),
            out_dim: self.out_dim.pow(l as u32),
            kraus,
            trace_preserving: self.trace_preserving,
        })
    }

    /// Complementary channel E(ρ)ᵢⱼ = tr(aᵢ ρ aⱼ†); the environment dimension
    /// equals the Kraus count.
    pub fn complementary(&self) -> Result<KrausChannel> {
        if !self.trace_preserving {
            return Err(Error::InvalidChannel(
                "complementary channel defined for CPTP maps".into(),
            ));
        }
        let n = self.kraus_count();
        // The m-th Kraus operator of E picks out row m of every aᵢ.
        let mut kraus = Vec::with_capacity(self.out_dim);
        for m in 0..self.out_dim {
            let mut c = CMatrix::zeros(n, self.in_dim);
            for (i, a) in self.kraus.iter().enumerate() {
                for j in 0..self.in_dim {
                    c.set(i, j, a.get(m, j));
                }
            }
            kraus.push(c);
        }
        KrausChannel::new_cptp(self.in_dim, n, kraus)
    }

    /// Composition `self ∘ inner` with materialized Kraus products.
    pub fn compose(&self, inner: &KrausChannel, guards: &tol::Guards) -> Result<KrausChannel> {
        if inner.out_dim != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "composing {}->{} after {}->{}",
                self.in_dim, self.out_dim, inner.in_dim, inner.out_dim
            )));
        }
        let count = self.kraus_count() * inner.kraus_count();
        if count > guards.max_kraus_words {
            return Err(Error::GuardExceeded(format!(
                "composition needs {count} Kraus operators (cap {})",
                guards.max_kraus_words
            )));
        }
        let mut kraus = Vec::with_capacity(count);
        for r in &self.kraus {
            for a in &inner.kraus {
                kraus.push(r.mul(a));
            }
        }
        Ok(KrausChannel {
            in_dim: inner.in_dim,
            out_dim: self.out_dim,
            kraus,
            trace_preserving: self.trace_preserving && inner.trace_preserving,
        })
    }

    /// Convex mixture Σ wᵢ Nᵢ materialized as the union of √wᵢ-scaled Kraus
    /// families.
    pub fn mixture(parts: &[(f64, &KrausChannel)]) -> Result<KrausChannel> {
        if parts.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let (in_dim, out_dim) = (parts[0].1.in_dim, parts[0].1.out_dim);
        let mut kraus = Vec::new();
        let mut wsum = 0.0;
        let mut all_tp = true;
        for (w, ch) in parts {
            if ch.in_dim != in_dim || ch.out_dim != out_dim {
                return Err(Error::DimensionMismatch("mixture members differ in dims".into()));
            }
            if *w < 0.0 {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            wsum += w;
            all_tp &= ch.trace_preserving;
            for a in &ch.kraus {
                kraus.push(a.scale_re(w.sqrt()));
            }
        }
        Ok(KrausChannel {
            in_dim,
            out_dim,
            kraus,
            trace_preserving: all_tp && (wsum - 1.0).abs() <= tol::WEIGHT_SUM,
        })
    }

    /// Unnormalized Choi matrix Σ_{kl} |k⟩⟨l| ⊗ N(|k⟩⟨l|).
    pub fn choi(&self) -> CMatrix {
        let (d, dp) = (self.in_dim, self.out_dim);
        let mut out = CMatrix::zeros(d * dp, d * dp);
        for a in &self.kraus {
            // vec(a) as a column of the d·d' space: (id⊗a)|Ω⟩ with Ω = Σ k⊗k.
            let mut v = vec![C_ZERO; d * dp];
            for k in 0..d {
                for m in 0..dp {
                    v[k * dp + m] = a.get(m, k);
                }
            }
            for i in 0..d * dp {
                for j in 0..d * dp {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + v[i] * v[j].conj());
                }
            }
        }
        out
    }

    /// Heisenberg-picture adjoint applied to an operator on the output space:
    /// N†(Y) = Σ aᵢ† Y aᵢ.
    pub fn apply_adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        if y.rows() != self.out_dim {
            return Err(Error::DimensionMismatch("adjoint input dim".into()));
        }
        let mut out = CMatrix::zeros(self.in_dim, self.in_dim);
        for a in &self.kraus {
            out = out.add(&a.dagger().mul(y).mul(a));
        }
        Ok(out)
    }
}

/// Apply N^{⊗l} to a state on the l-fold input space without materializing
/// the tensor-word Kraus family: the channel is applied site by site.
pub fn apply_tensor_power_per_site(ch: &KrausChannel, l: usize, rho: &CMatrix) -> Result<CMatrix> {
    let din = ch.in_dim();
    let dout = ch.out_dim();
    if rho.rows() != din.pow(l as u32) {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} for {}^{l}",
            rho.rows(),
            din
        )));
    }
    let mut state = rho.clone();
    for site in 0..l {
        // Sites before `site` are already in the output space.
        let pre = dout.pow(site as u32);
        let post = din.pow((l - site - 1) as u32);
        let mut next = CMatrix::zeros(pre * dout * post, pre * dout * post);
        for a in ch.kraus() {
            let big = qmat::kron_all(&[
                &CMatrix::identity(pre),
                a,
                &CMatrix::identity(post),
            ]);
            next = next.add(&big.mul(&state).mul(&big.dagger()));
        }
        state = next;
    }
    Ok(state)
}

/// Averaged channel Σ λᵢ Nᵢ^{⊗l}.
#[derive(Debug, Clone)]
pub struct AveragedChannel {
    members: Vec<KrausChannel>,
    weights: Vec<f64>,
    block_length: usize,
}

impl AveragedChannel {
    pub fn new(members: Vec<KrausChannel>, weights: Vec<f64>, block_length: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if members.len() != weights.len() {
            return Err(Error::DimensionMismatch(
                "weights and members differ in length".into(),
            ));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > tol::WEIGHT_SUM || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights must be positive and sum to 1 (sum {s})"
            )));
        }
        let (d, dp) = (members[0].in_dim(), members[0].out_dim());
        if members.iter().any(|m| m.in_dim() != d || m.out_dim() != dp) {
            return Err(Error::DimensionMismatch("members differ in dims".into()));
        }
        Ok(AveragedChannel {
            members,
            weights,
            block_length,
        })
    }

    pub fn members(&self) -> &[KrausChannel] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Σ λᵢ Nᵢ^{⊗l}(ρ).
    pub fn apply(&self, rho: &CMatrix, guards: &tol::Guards) -> Result<CMatrix> {
        let l = self.block_length;
        let mut out = CMatrix::zeros(
            self.members[0].out_dim().pow(l as u32),
            self.members[0].out_dim().pow(l as u32),
        );
        for (w, ch) in self.weights.iter().zip(self.members.iter()) {
            let pow = ch.tensor_power(l, guards)?;
            out = out.add(&pow.apply(rho)?.scale_re(*w));
        }
        Ok(out)
    }
}

/// A finite set of channels sharing dimensions (the compound set I or a net).
#[derive(Debug, Clone)]
pub struct ChannelFamily {
    members: Vec<KrausChannel>,
}

impl ChannelFamily {
    pub fn new(members: Vec<KrausChannel>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let (d, dp) = (members[0].in_dim(), members[0].out_dim());
        if members.iter().any(|m| m.in_dim() != d || m.out_dim() != dp) {
            return Err(Error::DimensionMismatch("family members differ in dims".into()));
        }
        Ok(ChannelFamily { members })
    }

    pub fn members(&self) -> &[KrausChannel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.members[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.members[0].out_dim()
    }
}

/// Canonical Kraus form relative to a reference state: the returned family
/// represents the same map but has a diagonal Gram matrix
/// tr(aᵢ π aⱼ†) = δᵢⱼ r(i), with r sorted descending.
#[derive(Debug, Clone)]
pub struct CanonicalKraus {
    pub channel: KrausChannel,
    /// r(i) = tr(aᵢ π aᵢ†) sorted descending.
    pub weights: Vec<f64>,
    /// Position of each returned Kraus operator in the pre-sort eigenbasis.
    pub index_map: Vec<usize>,
}

pub fn canonical_kraus(ch: &KrausChannel, pi: &DensityOperator) -> Result<CanonicalKraus> {
    let n = ch.kraus_count();
    let mut gram = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = ch.kraus()[i].mul(pi.matrix()).mul(&ch.kraus()[j].dagger()).trace();
            gram.set(i, j, v);
        }
    }
    let eig = gram.eigh()?;
    // b_k = Σᵢ conj(U_{ik}) aᵢ diagonalizes the Gram matrix.
    let mut kraus = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let mut b = CMatrix::zeros(ch.out_dim(), ch.in_dim());
        for i in 0..n {
            let c = eig.eigenvectors.get(i, k).conj();
            b = b.add(&ch.kraus()[i].scale(c));
        }
        kraus.push(b);
        weights.push(eig.eigenvalues[k].max(0.0));
    }
    // eigh already sorts descending; keep the identity map for traceability.
    let index_map: Vec<usize> = (0..n).collect();
    let channel = KrausChannel {
        in_dim: ch.in_dim(),
        out_dim: ch.out_dim(),
        kraus,
        trace_preserving: ch.is_trace_preserving(),
    };
    channel.validate()?;
    Ok(CanonicalKraus {
        channel,
        weights,
        index_map,
    })
}

/// Result of the diamond-distance ascent: a certified lower estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiamondEstimate {
    pub value: f64,
    pub converged: bool,
    pub restarts: usize,
}

/// Lower estimate of ||ch1 - ch2||◇ by alternating ascent over pure inputs
/// ψ ∈ C^d ⊗ H: the sign operator of (id⊗Δ)(|ψ⟩⟨ψ|) is lifted back through
/// the adjoint map and ψ is replaced by its top eigenvector. Every step is
/// monotone, so the result never exceeds the true norm.
pub fn diamond_distance(
    ch1: &KrausChannel,
    ch2: &KrausChannel,
    restarts: usize,
    tol_gain: f64,
    seed: u64,
) -> Result<DiamondEstimate> {
    if ch1.in_dim() != ch2.in_dim() || ch1.out_dim() != ch2.out_dim() {
        return Err(Error::DimensionMismatch("diamond distance dims".into()));
    }
    let d = ch1.in_dim();
    let dp = ch1.out_dim();
    let dim_in = d * d;
    let dim_out = d * dp;

    // Lifted Kraus operators 1_d ⊗ a are block-diagonal and mostly zeros;
    // they are kept as sparse triplet lists and never materialized densely.
    let sparsify_lifted = |a: &CMatrix| -> Vec<(usize, usize, Complex64)> {
        let mut t = Vec::new();
        for b in 0..d {
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    let v = a.get(i, j);
                    if v != C_ZERO {
                        t.push((b * dp + i, b * d + j, v));
                    }
                }
            }
        }
        t
    };
    let k1: Vec<Vec<(usize, usize, Complex64)>> =
        ch1.kraus().iter().map(&sparsify_lifted).collect();
    let k2: Vec<Vec<(usize, usize, Complex64)>> =
        ch2.kraus().iter().map(&sparsify_lifted).collect();

    let delta_of = |psi: &[Complex64]| -> CMatrix {
        let mut x = nalgebra::DMatrix::<Complex64>::zeros(dim_out, dim_out);
        for (ks, sign) in [(&k1, 1.0), (&k2, -1.0)] {
            for a in ks.iter() {
                let mut v = vec![C_ZERO; dim_out];
                for &(i, j, val) in a {
                    v[i] += val * psi[j];
                }
                for j in 0..dim_out {
                    let scale = Complex64::new(sign, 0.0) * v[j].conj();
                    if scale == C_ZERO {
                        continue;
                    }
                    let mut col = x.column_mut(j);
                    for (i, &vi) in v.iter().enumerate() {
                        col[i] += vi * scale;
                    }
                }
            }
        }
        CMatrix::from_dmatrix(x)
    };

    // Large instances get a smaller iteration budget; the result remains a
    // valid lower bound either way.
    let max_iters = (4096 / dim_out.max(1)).clamp(12, 120);

    let run_start = |psi0: Vec<Complex64>| -> (f64, bool) {
        let mut psi = psi0;
        let mut best = 0.0f64;
        let mut converged = false;
        for _ in 0..max_iters {
            let x = delta_of(&psi);
            let eig = match x.eigh() {
                Ok(e) => e,
                Err(_) => return (best, false),
            };
            let f: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
            if f <= best + tol_gain {
                converged = true;
                best = best.max(f);
                break;
            }
            best = f;
            // Sign operator S = V diag(±1) V†.
            let mut w = eig.eigenvectors.clone();
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                if lam < 0.0 {
                    for i in 0..dim_out {
                        w.set(i, k, -w.get(i, k));
                    }
                }
            }
            let s = w.mul(&eig.eigenvectors.dagger());
            // M = (id ⊗ Δ)†(S) accumulated over triplet pairs:
            // (A†SA)[j,j'] = Σ conj(A[i,j]) S[i,i'] A[i',j'].
            let mut m_acc = nalgebra::DMatrix::<Complex64>::zeros(dim_in, dim_in);
            for (ks, sign) in [(&k1, 1.0), (&k2, -1.0)] {
                let sgn = Complex64::new(sign, 0.0);
                for a in ks.iter() {
                    for &(i, j, v) in a {
                        let vc = sgn * v.conj();
                        for &(i2, j2, v2) in a {
                            m_acc[(j, j2)] += vc * s.get(i, i2) * v2;
                        }
                    }
                }
            }
            let m = CMatrix::from_dmatrix(m_acc);
            let meig = match m.eigh() {
                Ok(e) => e,
                Err(_) => return (best, false),
            };
            psi = meig.eigenvector(0);
            let nrm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in psi.iter_mut() {
                *z /= nrm;
            }
        }
        (best, converged)
    };

    // Restart 0 from the maximally entangled input, the optimum for many
    // covariant channels; the rest from Haar-random pure states.
    let starts: Vec<Vec<Complex64>> = (0..restarts.max(1))
        .map(|r| {
            if r == 0 {
                let mut v = vec![C_ZERO; dim_in];
                let s = 1.0 / (d as f64).sqrt();
                for k in 0..d {
                    v[k * d + k] = Complex64::new(s, 0.0);
                }
                v
            } else {
                qmat::random_pure(dim_in, qmat::split_seed(seed, r as u64))
            }
        })
        .collect();

    let results: Vec<(f64, bool)> = starts.into_par_iter().map(run_start).collect();
    let value = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let converged = results
        .iter()
        .any(|r| r.1 && (r.0 - value).abs() <= tol_gain.max(1e-12));
    Ok(DiamondEstimate {
        value,
        converged,
        restarts: restarts.max(1),
    })
}

/// Serialized channel format:
/// `{ "in_dim": d, "out_dim": d', "kraus": [ [[ [re,im], ... ] row ] matrix ] }`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub trace_preserving: Option<bool>,
}

impl ChannelJson {
    pub fn from_channel(ch: &KrausChannel) -> Self {
        let kraus = ch
            .kraus()
            .iter()
            .map(|a| {
                (0..a.rows())
                    .map(|i| {
                        (0..a.cols())
                            .map(|j| {
                                let z = a.get(i, j);
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ChannelJson {
            in_dim: ch.in_dim(),
            out_dim: ch.out_dim(),
            kraus,
            trace_preserving: Some(ch.is_trace_preserving()),
        }
    }

    pub fn into_channel(self) -> Result<KrausChannel> {
        let mut kraus = Vec::with_capacity(self.kraus.len());
        for rows in &self.kraus {
            if rows.len() != self.out_dim {
                return Err(Error::InvalidChannel("Kraus row count".into()));
            }
            let mut entries = Vec::with_capacity(self.out_dim * self.in_dim);
            for row in rows {
                if row.len() != self.in_dim {
                    return Err(Error::InvalidChannel("Kraus column count".into()));
                }
                for &[re, im] in row {
                    entries.push(Complex64::new(re, im));
                }
            }
            kraus.push(CMatrix::from_row_major(self.out_dim, self.in_dim, entries)?);
        }
        match self.trace_preserving {
            Some(false) => KrausChannel::new_cptd(self.in_dim, self.out_dim, kraus),
            _ => KrausChannel::new_cptp(self.in_dim, self.out_dim, kraus),
        }
    }
}

/// Random CPTP map through a Haar-random Stinespring isometry with `n_env`
/// environment dimensions.
pub fn random_cptp(in_dim: usize, out_dim: usize, n_env: usize, seed: u64) -> KrausChannel {
    // The Stinespring isometry needs out_dim·n_env ≥ in_dim.
    let n_env = n_env.max(in_dim.div_ceil(out_dim));
    let v = haar_isometry(out_dim * n_env, in_dim, seed);
    let mut kraus = Vec::with_capacity(n_env);
    for i in 0..n_env {
        let mut a = CMatrix::zeros(out_dim, in_dim);
        for m in 0..out_dim {
            for j in 0..in_dim {
                a.set(m, j, v.get(m * n_env + i, j));
            }
        }
        kraus.push(a);
    }
    KrausChannel::new_cptp(in_dim, out_dim, kraus).expect("Stinespring construction is CPTP")
}

/// Random CPTD map: a random CPTP map compressed by a random-rank projector
/// on the output space (the same shape truncation produces).
pub fn random_cptd(in_dim: usize, out_dim: usize, n_env: usize, seed: u64) -> KrausChannel {
    let base = random_cptp(in_dim, out_dim, n_env, seed);
    let rank = 1 + (qmat::split_seed(seed, 77) as usize) % out_dim;
    let v = haar_isometry(out_dim, rank, qmat::split_seed(seed, 78));
    let proj = v.mul(&v.dagger());
    let kraus = base.kraus().iter().map(|a| proj.mul(a)).collect();
    KrausChannel::new_cptd(in_dim, out_dim, kraus).expect("projected channel is CPTD")
}

/// min eigenvalue of the Choi matrix (PSD witness for tests).
pub fn choi_min_eigenvalue(ch: &KrausChannel) -> Result<f64> {
    let eig = ch.choi().eigh()?;
    Ok(eig.eigenvalues.last().cloned().unwrap_or(0.0))
}

/// Inverse square root of a PSD matrix on its support.
pub fn psd_inv_sqrt(m: &CMatrix, cutoff: f64) -> Result<CMatrix> {
    hermitian_fn(m, cutoff, |x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::random_density;

    #[test]
    fn identity_channel_is_identity() {
        let ch = KrausChannel::identity(3);
        let rho = random_density(3, 1);
        let out = ch.apply_density(&rho).unwrap();
        assert!(out.max_abs_diff(rho.matrix()) < 1e-14);
    }

    #[test]
    fn useless_channel_outputs_maximally_mixed() {
        let u = KrausChannel::useless(2, 2);
        for seed in 0..4u64 {
            let rho = random_density(2, seed);
            let out = u.apply_density(&rho).unwrap();
            assert!(out.max_abs_diff(&CMatrix::identity(2).scale_re(0.5)) < 1e-12);
        }
    }

    #[test]
    fn phase_flip_on_plus_state() {
        let ch = KrausChannel::phase_flip(0.1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let minus = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        let rho = DensityOperator::from_pure(&plus).unwrap();
        let out = ch.apply_density(&rho).unwrap();
        let expect = DensityOperator::from_pure(&plus)
            .unwrap()
            .matrix()
            .scale_re(0.9)
            .add(&DensityOperator::from_pure(&minus).unwrap().matrix().scale_re(0.1));
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn tensor_power_identity() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::identity(2).tensor_power(3, &guards).unwrap();
        assert_eq!(ch.in_dim(), 8);
        assert_eq!(ch.kraus_count(), 1);
        let rho = random_density(8, 2);
        assert!(ch.apply_density(&rho).unwrap().max_abs_diff(rho.matrix()) < 1e-13);
    }

    #[test]
    fn tensor_power_word_weights() {
        let guards = tol::Guards::default();
        let p = 0.2;
        let ch = KrausChannel::phase_flip(p).tensor_power(2, &guards).unwrap();
        assert_eq!(ch.kraus_count(), 4);
        // Squared Frobenius weights of the words: (1-p)^2, p(1-p), p(1-p), p^2
        // against tr(a† a)/dim.
        let weights: Vec<f64> = ch
            .kraus()
            .iter()
            .map(|a| a.dagger().mul(a).trace().re / 4.0)
            .collect();
        let expect = [
            (1.0 - p) * (1.0 - p),
            p * (1.0 - p),
            p * (1.0 - p),
            p * p,
        ];
        for (w, e) in weights.iter().zip(expect.iter()) {
            assert!((w - e).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_power_product_covariance() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::amplitude_damping(0.3);
        let pow = ch.tensor_power(2, &guards).unwrap();
        let rho = random_density(2, 3);
        let sigma = random_density(2, 4);
        let joint = kron(rho.matrix(), sigma.matrix());
        let lhs = pow.apply(&joint).unwrap();
        let rhs = kron(
            &ch.apply_density(&rho).unwrap(),
            &ch.apply_density(&sigma).unwrap(),
        );
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn tensor_power_cap() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::depolarizing(0.5);
        assert!(matches!(
            ch.tensor_power(7, &guards),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn per_site_matches_materialized() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::amplitude_damping(0.25);
        let rho = random_density(8, 11);
        let dense = ch
            .tensor_power(3, &guards)
            .unwrap()
            .apply_density(&rho)
            .unwrap();
        let site = apply_tensor_power_per_site(&ch, 3, rho.matrix()).unwrap();
        assert!(dense.max_abs_diff(&site) < 1e-11);
    }

    #[test]
    fn complementary_of_identity_is_trace() {
        let ch = KrausChannel::identity(2);
        let e = ch.complementary().unwrap();
        assert_eq!(e.out_dim(), 1);
        let rho = random_density(2, 5);
        let out = e.apply_density(&rho).unwrap();
        assert!((out.get(0, 0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complementary_phase_flip_at_pi() {
        let p = 0.1;
        let ch = KrausChannel::phase_flip(p);
        let pi = DensityOperator::maximally_mixed(2);
        let e = ch.complementary().unwrap();
        let out = e.apply_density(&pi).unwrap();
        assert!(out.max_abs_diff(&CMatrix::diag(&[1.0 - p, p])) < 1e-12);
    }

    #[test]
    fn stinespring_consistency() {
        // tr_e(vρv†) with vφ = Σ (aᵢφ)⊗eᵢ recovers the channel.
        let ch = KrausChannel::amplitude_damping(0.4);
        let n = ch.kraus_count();
        let (d, dp) = (ch.in_dim(), ch.out_dim());
        let mut v = CMatrix::zeros(dp * n, d);
        for (i, a) in ch.kraus().iter().enumerate() {
            for m in 0..dp {
                for j in 0..d {
                    v.set(m * n + i, j, a.get(m, j));
                }
            }
        }
        let rho = random_density(2, 9);
        let lifted = v.mul(rho.matrix()).mul(&v.dagger());
        let red = qmat::partial_trace(&lifted, (dp, n), qmat::Keep::A).unwrap();
        let direct = ch.apply_density(&rho).unwrap();
        assert!(red.max_abs_diff(&direct) < 1e-10);
    }

    #[test]
    fn canonical_kraus_phase_flip_already_diagonal() {
        let p = 0.1;
        let ch = KrausChannel::phase_flip(p);
        let pi = DensityOperator::maximally_mixed(2);
        let canon = canonical_kraus(&ch, &pi).unwrap();
        assert!((canon.weights[0] - (1.0 - p)).abs() < 1e-12);
        assert!((canon.weights[1] - p).abs() < 1e-12);
        // Same map: Choi matrices agree.
        assert!(canon.channel.choi().max_abs_diff(&ch.choi()) < tol::HS_ROUTES);
    }

    #[test]
    fn canonical_kraus_rediagonalizes_mixed_family() {
        let p = 0.3;
        let base = KrausChannel::phase_flip(p);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = base.kraus()[0].add(&base.kraus()[1]).scale_re(s);
        let b = base.kraus()[0].sub(&base.kraus()[1]).scale_re(s);
        let mixed = KrausChannel::new_cptp(2, 2, vec![a, b]).unwrap();
        assert!(mixed.choi().max_abs_diff(&base.choi()) < 1e-12);
        let pi = DensityOperator::maximally_mixed(2);
        let canon = canonical_kraus(&mixed, &pi).unwrap();
        // Gram matrix diagonal again.
        for i in 0..2 {
            for j in 0..2 {
                let g = canon.channel.kraus()[i]
                    .mul(pi.matrix())
                    .mul(&canon.channel.kraus()[j].dagger())
                    .trace();
                if i != j {
                    assert!(g.norm() < 1e-10);
                }
            }
        }
        assert!((canon.weights[0] - (1.0 - p)).abs() < 1e-10);
        assert!(canon.channel.choi().max_abs_diff(&base.choi()) < tol::HS_ROUTES);
    }

    #[test]
    fn choi_psd_for_constructed_channels() {
        for (i, ch) in [
            KrausChannel::identity(2),
            KrausChannel::useless(2, 2),
            KrausChannel::phase_flip(0.2),
            KrausChannel::depolarizing(0.4),
            KrausChannel::amplitude_damping(0.6),
            random_cptp(3, 2, 4, 21),
            random_cptd(2, 2, 3, 22),
        ]
        .iter()
        .enumerate()
        {
            let min = choi_min_eigenvalue(ch).unwrap();
            assert!(min > -tol::CHOI_PSD, "channel {i} has Choi min eig {min}");
        }
    }

    #[test]
    fn diamond_same_channel_is_zero() {
        let ch = KrausChannel::phase_flip(0.15);
        let est = diamond_distance(&ch, &ch, 2, 1e-9, 5).unwrap();
        assert!(est.value.abs() < 1e-9);
    }

    #[test]
    fn diamond_identity_vs_useless() {
        let est = diamond_distance(
            &KrausChannel::identity(2),
            &KrausChannel::useless(2, 2),
            4,
            1e-9,
            7,
        )
        .unwrap();
        assert!(est.value >= 1.5 - 1e-7, "estimate {}", est.value);
        assert!(est.value <= 1.5 + 1e-7);
    }

    #[test]
    fn diamond_mixing_scales_linearly() {
        let tau = 0.1;
        let ch = KrausChannel::phase_flip(0.05);
        let u = KrausChannel::useless(2, 2);
        let mixed = KrausChannel::mixture(&[(1.0 - tau / 2.0, &ch), (tau / 2.0, &u)]).unwrap();
        let d_mix = diamond_distance(&ch, &mixed, 4, 1e-10, 11).unwrap().value;
        let d_cu = diamond_distance(&ch, &u, 4, 1e-10, 13).unwrap().value;
        assert!(d_mix >= 0.0);
        assert!(d_mix <= tau / 2.0 * d_cu + 1e-6, "{d_mix} vs {}", tau / 2.0 * d_cu);
    }

    #[test]
    fn diamond_cptp_vs_zero_map() {
        let ch = KrausChannel::amplitude_damping(0.3);
        let est = diamond_distance(&ch, &KrausChannel::zero(2, 2), 2, 1e-9, 3).unwrap();
        assert!((est.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diamond_phase_flip_pair_exact() {
        // ||Λ_p - Λ_q||◇ = 2|p-q| for same-basis phase flips.
        let est = diamond_distance(
            &KrausChannel::phase_flip(0.05),
            &KrausChannel::phase_flip(0.12),
            3,
            1e-10,
            17,
        )
        .unwrap();
        assert!((est.value - 0.14).abs() < 1e-7, "estimate {}", est.value);
    }

    #[test]
    fn diamond_triangle_inequality_on_estimates() {
        let tol_gain = 1e-9;
        let chs = [
            KrausChannel::phase_flip(0.1),
            KrausChannel::amplitude_damping(0.2),
            KrausChannel::depolarizing(0.3),
        ];
        let d01 = diamond_distance(&chs[0], &chs[1], 4, tol_gain, 1).unwrap().value;
        let d12 = diamond_distance(&chs[1], &chs[2], 4, tol_gain, 2).unwrap().value;
        let d02 = diamond_distance(&chs[0], &chs[2], 4, tol_gain, 3).unwrap().value;
        assert!(d02 <= d01 + d12 + 2.0 * 1e-6);
    }

    #[test]
    fn averaged_channel_single_member() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::phase_flip(0.2);
        let av = AveragedChannel::new(vec![ch.clone()], vec![1.0], 2).unwrap();
        let rho = random_density(4, 31);
        let via_avg = av.apply(rho.matrix(), &guards).unwrap();
        let direct = ch
            .tensor_power(2, &guards)
            .unwrap()
            .apply_density(&rho)
            .unwrap();
        assert!(via_avg.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn averaged_channel_identical_members() {
        let guards = tol::Guards::default();
        let ch = KrausChannel::amplitude_damping(0.15);
        let av = AveragedChannel::new(vec![ch.clone(), ch.clone()], vec![0.5, 0.5], 1).unwrap();
        let rho = random_density(2, 33);
        let via_avg = av.apply(rho.matrix(), &guards).unwrap();
        assert!(via_avg.max_abs_diff(&ch.apply_density(&rho).unwrap()) < 1e-12);
    }

    #[test]
    fn channel_json_roundtrip() {
        let ch = KrausChannel::amplitude_damping(0.35);
        let js = serde_json::to_string(&ChannelJson::from_channel(&ch)).unwrap();
        let back: ChannelJson = serde_json::from_str(&js).unwrap();
        let ch2 = back.into_channel().unwrap();
        assert!(ch.choi().max_abs_diff(&ch2.choi()) < 1e-14);
    }

    #[test]
    fn builtin_parser() {
        assert_eq!(KrausChannel::builtin("identity").unwrap().in_dim(), 2);
        assert_eq!(KrausChannel::builtin("identity(3)").unwrap().in_dim(), 3);
        assert_eq!(KrausChannel::builtin("useless").unwrap().kraus_count(), 4);
        assert!(KrausChannel::builtin("phase_flip(0.1)").is_ok());
        assert!(KrausChannel::builtin("depolarizing(0.2)").is_ok());
        assert!(KrausChannel::builtin("amplitude_damping(0.3)").is_ok());
        assert!(KrausChannel::builtin("wormhole(1)").is_err());
    }
}
