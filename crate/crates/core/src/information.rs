//! Entropic quantities and recovery-map optimization.
//!
//! Coherent information is evaluated along two routes (purification and
//! complementary channel) which are asserted to agree at small dimension;
//! entanglement fidelity likewise. `optimize_recovery` lower-bounds the code
//! entanglement fidelity with a transpose-channel (Petz-type) initializer
//! followed by monotone fixed-point polishing.

use num_complex::Complex64;

use crate::channels::{canonical_kraus, KrausChannel};
use crate::error::{Error, Result};
use crate::qmat::{kron, purify, CMatrix, DensityOperator, C_ZERO};
use crate::tol;

/// Shannon entropy in bits with the 0·log 0 = 0 convention.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        + 0.0
}

/// Von Neumann entropy S(ρ) = -tr(ρ log₂ ρ) in bits.
pub fn entropy(rho: &DensityOperator) -> f64 {
    shannon_entropy(rho.spectrum())
}

/// Entropy of a PSD matrix through its eigenvalues (small negatives from
/// roundoff are dropped). The input is expected to have trace ≈ 1.
pub fn entropy_psd(m: &CMatrix) -> Result<f64> {
    let eig = m.eigh()?;
    Ok(shannon_entropy(
        &eig.eigenvalues
            .iter()
            .cloned()
            .filter(|&x| x > 0.0)
            .collect::<Vec<_>>(),
    ))
}

/// Environment output E(ρ) of the channel with Kraus family `kraus`:
/// E(ρ)ᵢⱼ = tr(aᵢ ρ aⱼ†).
pub fn environment_output(kraus: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let n = kraus.len();
    let mut e = CMatrix::zeros(n, n);
    for i in 0..n {
        let ai_rho = kraus[i].mul(rho);
        for j in 0..n {
            e.set(i, j, ai_rho.mul(&kraus[j].dagger()).trace());
        }
    }
    e
}

/// Entanglement fidelity F_e(ρ, N) for a CPTD map with matching input and
/// output dimension. Evaluated through the Kraus identity Σᵢ |tr(ρ aᵢ)|²;
/// when the doubled space is small enough the canonical-purification route is
/// evaluated as well and both are required to agree.
pub fn entanglement_fidelity(
    rho: &DensityOperator,
    ch: &KrausChannel,
    guards: &tol::Guards,
) -> Result<f64> {
    if ch.in_dim() != rho.dim() {
        return Err(Error::DimensionMismatch("F_e input dims".into()));
    }
    if ch.in_dim() != ch.out_dim() {
        return Err(Error::DimensionMismatch(
            "entanglement fidelity needs an endomorphic map".into(),
        ));
    }
    let via_kraus: f64 = ch
        .kraus()
        .iter()
        .map(|a| crate::qmat::mul_trace(rho.matrix(), a).norm_sqr())
        .sum();
    let d = rho.dim();
    if d * d <= guards.max_dense_dim {
        let via_pure = fe_purification_route(rho, ch);
        let diff = (via_pure - via_kraus).abs();
        if diff > tol::FE_ROUTES {
            return Err(Error::InvalidState(format!(
                "F_e routes disagree by {diff:e}"
            )));
        }
    }
    Ok(via_kraus)
}

fn fe_purification_route(rho: &DensityOperator, ch: &KrausChannel) -> f64 {
    let d = rho.dim();
    let psi = purify(rho);
    // (id ⊗ N)(|ψ⟩⟨ψ|), then overlap with ψ again.
    let mut val = 0.0;
    let proj = psi.projector();
    let mut out = CMatrix::zeros(d * d, d * d);
    for a in ch.kraus() {
        let big = kron(&CMatrix::identity(d), a);
        out = out.add(&big.mul(&proj).mul(&big.dagger()));
    }
    for i in 0..d * d {
        for j in 0..d * d {
            val += (psi.vec[i].conj() * out.get(i, j) * psi.vec[j]).re;
        }
    }
    val
}

/// F_e(ρ, R∘N) for explicit Kraus channels without materializing the
/// composition: Σ_{i,j} |tr(ρ rᵢ aⱼ)|².
pub fn fe_composed(rho: &DensityOperator, recovery: &KrausChannel, ch: &KrausChannel) -> Result<f64> {
    if recovery.in_dim() != ch.out_dim() || recovery.out_dim() != ch.in_dim() {
        return Err(Error::DimensionMismatch("F_e composition dims".into()));
    }
    let mut f = 0.0;
    for r in recovery.kraus() {
        let rho_r = rho.matrix().mul(r);
        for a in ch.kraus() {
            f += crate::qmat::mul_trace(&rho_r, a).norm_sqr();
        }
    }
    Ok(f)
}

/// Coherent information I_c(ρ, N) in bits.
///
/// The complementary route S(N(ρ)) - S(E(ρ)) is always evaluated; when the
/// doubled space H⊗K is within the dense cap the purification route
/// S(N(ρ)) - S((id⊗N)(|ψ⟩⟨ψ|)) is evaluated too, the two are required to
/// agree within the central tolerance, and the purification value is
/// returned.
pub fn coherent_information(
    rho: &DensityOperator,
    ch: &KrausChannel,
    guards: &tol::Guards,
) -> Result<f64> {
    if !ch.is_trace_preserving() {
        return Err(Error::InvalidChannel(
            "coherent information needs a CPTP map".into(),
        ));
    }
    if ch.in_dim() != rho.dim() {
        return Err(Error::DimensionMismatch("I_c input dims".into()));
    }
    let out = ch.apply_density(rho)?;
    let s_out = entropy_psd(&out)?;
    let env = environment_output(ch.kraus(), rho.matrix());
    let s_env = entropy_psd(&env)?;
    let via_env = s_out - s_env;

    let doubled = rho.dim() * ch.out_dim();
    if doubled <= guards.max_dense_dim.min(512) {
        let psi = purify(rho);
        let proj = psi.projector();
        let d = rho.dim();
        let mut joint = CMatrix::zeros(d * ch.out_dim(), d * ch.out_dim());
        for a in ch.kraus() {
            let big = kron(&CMatrix::identity(d), a);
            joint = joint.add(&big.mul(&proj).mul(&big.dagger()));
        }
        let via_pure = s_out - entropy_psd(&joint)?;
        if (via_pure - via_env).abs() > tol::IC_ROUTES {
            return Err(Error::InvalidState(format!(
                "I_c routes disagree: {via_pure} vs {via_env}"
            )));
        }
        return Ok(via_pure);
    }
    Ok(via_env)
}

/// Entropy exchange S_e(π_G, N) as the Shannon entropy of the canonical
/// Kraus weights r(i); cross-checked against S(E(π_G)).
pub fn entropy_exchange(pi: &DensityOperator, ch: &KrausChannel) -> Result<f64> {
    let canon = canonical_kraus(ch, pi)?;
    let h = shannon_entropy(&canon.weights);
    let env = environment_output(ch.kraus(), pi.matrix());
    let s_env = entropy_psd(&env)?;
    if (h - s_env).abs() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "entropy exchange routes disagree: {h} vs {s_env}"
        )));
    }
    Ok(h)
}

/// Fannes bound τ log₂ d - τ log₂ τ, valid for 0 < τ ≤ 1/e.
pub fn fannes_bound(tau: f64, d: usize) -> Result<f64> {
    if tau <= 0.0 || tau > 1.0 / std::f64::consts::E {
        return Err(Error::InvalidParameter(format!(
            "Fannes bound needs 0 < τ ≤ 1/e, got {tau}"
        )));
    }
    Ok(tau * (d as f64).log2() - tau * tau.log2())
}

/// Trace-preserving recovery map in factored form.
///
/// The main Kraus operators share an orthonormal column basis V (they act
/// into the support of ρ): rᵢ = V Cᵢ. States arriving outside the support of
/// Σᵢ rᵢ†rᵢ are dumped onto a fixed pure target so the total map is exactly
/// CPTP.
#[derive(Debug, Clone)]
pub struct RecoveryMap {
    in_dim: usize,
    out_dim: usize,
    /// out_dim × r, orthonormal columns.
    basis: CMatrix,
    /// r × in_dim coefficient blocks, one per main Kraus operator.
    coeffs: Vec<CMatrix>,
    /// in_dim × s factor of the support projector P = U U†.
    support: CMatrix,
    /// Unit vector in the output space receiving the complement.
    dump_target: Vec<Complex64>,
}

impl RecoveryMap {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn main_kraus_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Materialize the i-th main Kraus operator.
    pub fn main_kraus(&self, i: usize) -> CMatrix {
        self.basis.mul(&self.coeffs[i])
    }

    /// Apply the full CPTP map to a state on the input space.
    pub fn apply(&self, sigma: &CMatrix) -> Result<CMatrix> {
        if sigma.rows() != self.in_dim {
            return Err(Error::DimensionMismatch("recovery input dim".into()));
        }
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for c in &self.coeffs {
            let r = self.basis.mul(c);
            out = out.add(&r.mul(sigma).mul(&r.dagger()));
        }
        // tr((1-P) σ) |t⟩⟨t|
        let p_sigma = self
            .support
            .dagger()
            .mul(sigma)
            .mul(&self.support)
            .trace()
            .re;
        let w = sigma.trace().re - p_sigma;
        if w.abs() > 0.0 {
            for i in 0..self.out_dim {
                for j in 0..self.out_dim {
                    let cur = out.get(i, j);
                    out.set(
                        i,
                        j,
                        cur + Complex64::new(w, 0.0) * self.dump_target[i] * self.dump_target[j].conj(),
                    );
                }
            }
        }
        Ok(out)
    }

    /// Trace-preservation defect max |Σ rᵢ†rᵢ + (1-P) - 1|.
    pub fn tp_defect(&self) -> f64 {
        let mut s = CMatrix::zeros(self.in_dim, self.in_dim);
        for c in &self.coeffs {
            // r†r = C† (V†V) C = C†C
            s = s.add(&c.dagger().mul(c));
        }
        let p = self.support.mul(&self.support.dagger());
        let total = s.add(&CMatrix::identity(self.in_dim)).sub(&p);
        total.max_abs_diff(&CMatrix::identity(self.in_dim))
    }

    /// Materialize the full Kraus family (main + dump) as a channel; only
    /// sensible at small dimension.
    pub fn to_kraus_channel(&self) -> Result<KrausChannel> {
        let mut kraus: Vec<CMatrix> = (0..self.coeffs.len()).map(|i| self.main_kraus(i)).collect();
        // Complement basis of the support from the eigendecomposition of 1-P.
        let p = self.support.mul(&self.support.dagger());
        let comp = CMatrix::identity(self.in_dim).sub(&p);
        let eig = comp.eigh()?;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > 0.5 {
                let q = eig.eigenvector(k);
                let mut a = CMatrix::zeros(self.out_dim, self.in_dim);
                for i in 0..self.out_dim {
                    for j in 0..self.in_dim {
                        a.set(i, j, self.dump_target[i] * q[j].conj());
                    }
                }
                kraus.push(a);
            }
        }
        KrausChannel::new_cptp(self.in_dim, self.out_dim, kraus)
    }
}

/// Outcome of `optimize_recovery`.
#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub recovery: RecoveryMap,
    /// Achieved F_e(ρ, R∘N); a lower bound on the code entanglement fidelity.
    pub fidelity: f64,
    /// False when the iteration cap was hit while still improving.
    pub converged: bool,
    /// Achieved fidelity after each accepted step (never decreasing).
    pub history: Vec<f64>,
}

struct FactoredState {
    /// Eigenbasis columns of ρ with eigenvalues above the cutoff (d × r).
    v: CMatrix,
    /// Positive eigenvalues matching the columns of `v`.
    lam: Vec<f64>,
    /// aⱼ V for each channel Kraus operator (d' × r).
    av: Vec<CMatrix>,
}

impl FactoredState {
    fn new(rho: &DensityOperator, ch: &KrausChannel) -> Self {
        let d = rho.dim();
        let mut cols = Vec::new();
        let mut lam = Vec::new();
        for (k, &l) in rho.spectrum().iter().enumerate() {
            if l > tol::PINV_CUTOFF {
                cols.push(rho.eigenbasis().column(k));
                lam.push(l);
            }
        }
        let r = cols.len();
        let mut v = CMatrix::zeros(d, r);
        for (k, col) in cols.iter().enumerate() {
            for i in 0..d {
                v.set(i, k, col[i]);
            }
        }
        let av = ch.kraus().iter().map(|a| a.mul(&v)).collect();
        FactoredState { v, lam, av }
    }

    fn rank(&self) -> usize {
        self.lam.len()
    }
}

/// F_e(ρ, R∘N) for a factored recovery: Σ_{ij} |tr(Λ Cᵢ (aⱼV))|² plus the
/// dump contribution Σⱼ ||(1-P) aⱼ ρ t||².
fn fe_factored(rec: &RecoveryMap, fs: &FactoredState, ch: &KrausChannel) -> f64 {
    let r = fs.rank();
    let mut f = 0.0;
    for c in &rec.coeffs {
        for av in &fs.av {
            // tr(Λ C (aV))
            let m = c.mul(av);
            let mut t = C_ZERO;
            for k in 0..r {
                t += Complex64::new(fs.lam[k], 0.0) * m.get(k, k);
            }
            f += t.norm_sqr();
        }
    }
    // Dump part: target is an eigenvector of ρ, so ρ t = λ_t t.
    let d = rec.out_dim;
    let t: Vec<Complex64> = rec.dump_target.clone();
    // λ of the target within ρ (t = first column of V).
    let lam_t = fs.lam.first().cloned().unwrap_or(0.0);
    if lam_t > 0.0 {
        for a in ch.kraus() {
            let at: Vec<Complex64> = a.matvec(&t);
            let full: f64 = at.iter().map(|z| z.norm_sqr()).sum();
            // ||U† a t||²
            let mut proj = 0.0;
            for s in 0..rec.support.cols() {
                let mut acc = C_ZERO;
                for i in 0..rec.support.rows() {
                    acc += rec.support.get(i, s).conj() * at[i];
                }
                proj += acc.norm_sqr();
            }
            f += lam_t * lam_t * (full - proj).max(0.0);
        }
    }
    let _ = d;
    f
}

/// Inverse square root of M = Σⱼ aⱼ ρ aⱼ† on its support together with a
/// factor U of the support projector, computed from the low-rank factor
/// B = [a₁VΛ^{1/2} | a₂VΛ^{1/2} | …] so the cost stays proportional to the
/// rank.
fn channel_output_inv_sqrt(fs: &FactoredState, out_dim: usize) -> (CMatrix, CMatrix) {
    let r = fs.rank();
    let n = fs.av.len();
    let mut b = CMatrix::zeros(out_dim, n * r);
    for (j, av) in fs.av.iter().enumerate() {
        for k in 0..r {
            let s = fs.lam[k].sqrt();
            for i in 0..out_dim {
                b.set(i, j * r + k, av.get(i, k) * Complex64::new(s, 0.0));
            }
        }
    }
    // M = B B†; eigenpairs of M from the Gram matrix B†B.
    let gram = b.dagger().mul(&b);
    let eig = gram.eigh().expect("Gram matrix is Hermitian");
    let mut cols = Vec::new();
    for (k, &g) in eig.eigenvalues.iter().enumerate() {
        if g > tol::PINV_CUTOFF {
            // u_k = B w_k / √g
            let w = eig.eigenvector(k);
            let mut u = vec![C_ZERO; out_dim];
            for (c, &wc) in w.iter().enumerate() {
                if wc.norm_sqr() == 0.0 {
                    continue;
                }
                for i in 0..out_dim {
                    u[i] += b.get(i, c) * wc;
                }
            }
            let inv = 1.0 / g.sqrt();
            for z in u.iter_mut() {
                *z *= inv;
            }
            cols.push((g, u));
        }
    }
    let s = cols.len();
    let mut u_fact = CMatrix::zeros(out_dim, s);
    let mut minv = CMatrix::zeros(out_dim, out_dim);
    for (k, (g, u)) in cols.iter().enumerate() {
        for i in 0..out_dim {
            u_fact.set(i, k, u[i]);
        }
        let w = 1.0 / g.sqrt();
        for i in 0..out_dim {
            for j in 0..out_dim {
                let cur = minv.get(i, j);
                minv.set(i, j, cur + Complex64::new(w, 0.0) * u[i] * u[j].conj());
            }
        }
    }
    (minv, u_fact)
}

/// Transpose-channel (Petz-type) recovery for ρ and N, with the complement of
/// the output support dumped onto ρ's top eigenvector.
fn petz_recovery(rho: &DensityOperator, ch: &KrausChannel, fs: &FactoredState) -> RecoveryMap {
    let dk = ch.out_dim();
    let (minv_sqrt, support) = channel_output_inv_sqrt(fs, dk);
    // rᵢ = ρ^{1/2} aᵢ† M^{-1/2} = V [Λ^{1/2} (aᵢV)† M^{-1/2}]
    let r = fs.rank();
    let mut coeffs = Vec::with_capacity(fs.av.len());
    for av in &fs.av {
        let mut lam_av = av.dagger();
        for k in 0..r {
            let s = fs.lam[k].sqrt();
            for j in 0..dk {
                let cur = lam_av.get(k, j);
                lam_av.set(k, j, cur * Complex64::new(s, 0.0));
            }
        }
        coeffs.push(lam_av.mul(&minv_sqrt));
    }
    let dump_target: Vec<Complex64> = (0..rho.dim()).map(|i| fs.v.get(i, 0)).collect();
    RecoveryMap {
        in_dim: dk,
        out_dim: rho.dim(),
        basis: fs.v.clone(),
        coeffs,
        support,
        dump_target,
    }
}

/// One fixed-point polish step: move every Kraus block toward the maximizer
/// of the linear fidelity functional, then restore trace preservation by
/// right-multiplying with T^{-1/2}.
fn polish_step(rec: &RecoveryMap, fs: &FactoredState) -> Option<RecoveryMap> {
    let r = fs.rank();
    let dk = rec.in_dim;
    // Gradient blocks Sᵢ = Λ Σⱼ tᵢⱼ (aⱼV)†, tᵢⱼ = tr(Λ Cᵢ (aⱼV)).
    let mut new_coeffs = Vec::with_capacity(rec.coeffs.len());
    for c in &rec.coeffs {
        let mut s = CMatrix::zeros(r, dk);
        for av in &fs.av {
            let m = c.mul(av);
            let mut t = C_ZERO;
            for k in 0..r {
                t += Complex64::new(fs.lam[k], 0.0) * m.get(k, k);
            }
            if t.norm_sqr() == 0.0 {
                continue;
            }
            s = s.add(&av.dagger().scale(t.conj()));
        }
        for k in 0..r {
            for j in 0..dk {
                let cur = s.get(k, j);
                s.set(k, j, cur * Complex64::new(fs.lam[k], 0.0));
            }
        }
        new_coeffs.push(s);
    }
    // T = S†S with S the stacked coefficient blocks (m × dk, m small); the
    // nonzero spectrum of T comes from the m × m Gram SS†, keeping the cost
    // proportional to the recovery rank rather than dk³.
    let total_rows: usize = new_coeffs.len() * r;
    if total_rows == 0 {
        return None;
    }
    let mut stacked = CMatrix::zeros(total_rows, dk);
    for (i, c) in new_coeffs.iter().enumerate() {
        for k in 0..r {
            for j in 0..dk {
                stacked.set(i * r + k, j, c.get(k, j));
            }
        }
    }
    let small = stacked.mul(&stacked.dagger()); // m × m
    let eig = small.eigh().ok()?;
    let mut support_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut inv_weights = Vec::new();
    for (k, &g) in eig.eigenvalues.iter().enumerate() {
        if g > tol::PINV_CUTOFF {
            // v = S† w / √g is the matching eigenvector of T.
            let w = eig.eigenvector(k);
            let mut v = vec![C_ZERO; dk];
            for (row, &wc) in w.iter().enumerate() {
                if wc.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..dk {
                    v[j] += stacked.get(row, j).conj() * wc;
                }
            }
            let inv = 1.0 / g.sqrt();
            for z in v.iter_mut() {
                *z *= inv;
            }
            support_cols.push(v);
            inv_weights.push(1.0 / g.sqrt());
        }
    }
    let s = support_cols.len();
    let mut support = CMatrix::zeros(dk, s);
    for (k, v) in support_cols.iter().enumerate() {
        for i in 0..dk {
            support.set(i, k, v[i]);
        }
    }
    // C·T^{-1/2} = ((C·U)·diag)·U† without materializing T^{-1/2}.
    let apply_tinv_sqrt = |c: &CMatrix| -> CMatrix {
        let mut cu = c.mul(&support); // r × s
        for (k, &w) in inv_weights.iter().enumerate() {
            for i in 0..cu.rows() {
                let cur = cu.get(i, k);
                cu.set(i, k, cur * Complex64::new(w, 0.0));
            }
        }
        cu.mul(&support.dagger())
    };
    let coeffs = new_coeffs
        .into_iter()
        .map(|c| apply_tinv_sqrt(&c))
        .collect();
    Some(RecoveryMap {
        in_dim: dk,
        out_dim: rec.out_dim,
        basis: rec.basis.clone(),
        coeffs,
        support,
        dump_target: rec.dump_target.clone(),
    })
}

/// Lower-bound the code entanglement fidelity max_R F_e(ρ, R∘N) over CPTP
/// recoveries. Starts from the transpose channel and polishes by guarded
/// fixed-point steps; the achieved fidelity never decreases.
pub fn optimize_recovery(
    rho: &DensityOperator,
    ch: &KrausChannel,
    iters: usize,
    tol_gain: f64,
) -> Result<RecoveryOutcome> {
    if ch.in_dim() != rho.dim() {
        return Err(Error::DimensionMismatch("optimize_recovery dims".into()));
    }
    let fs = FactoredState::new(rho, ch);
    if fs.rank() == 0 {
        return Err(Error::InvalidState("state has empty support".into()));
    }
    let mut cur = petz_recovery(rho, ch, &fs);
    let mut f_cur = fe_factored(&cur, &fs, ch);
    let mut history = vec![f_cur];
    let mut converged = true;
    for _ in 0..iters {
        converged = false;
        let cand = match polish_step(&cur, &fs) {
            Some(c) => c,
            None => {
                converged = true;
                break;
            }
        };
        let f_cand = fe_factored(&cand, &fs, ch);
        if f_cand > f_cur + tol_gain {
            cur = cand;
            f_cur = f_cand;
            history.push(f_cur);
        } else {
            if f_cand > f_cur {
                cur = cand;
                f_cur = f_cand;
                history.push(f_cur);
            }
            converged = true;
            break;
        }
    }
    if iters == 0 {
        converged = true;
    }
    Ok(RecoveryOutcome {
        recovery: cur,
        fidelity: f_cur,
        converged,
        history,
    })
}

/// F_e(ρ, R∘N) for a factored recovery map against an explicit channel.
pub fn fe_with_recovery(
    rho: &DensityOperator,
    rec: &RecoveryMap,
    ch: &KrausChannel,
) -> Result<f64> {
    if rec.in_dim() != ch.out_dim() || rec.out_dim() != ch.in_dim() || ch.in_dim() != rho.dim() {
        return Err(Error::DimensionMismatch("fe_with_recovery dims".into()));
    }
    let fs = FactoredState::new(rho, ch);
    // The factored fast path assumes the recovery basis spans supp ρ, which
    // holds for recoveries produced against the same ρ. For foreign
    // recoveries fall back to the explicit double sum.
    if rec.basis.cols() == fs.rank() && rec.basis.mul(&CMatrix::identity(fs.rank())).max_abs_diff(&fs.v) < 1e-12
    {
        return Ok(fe_factored(rec, &fs, ch));
    }
    let mut f = 0.0;
    for i in 0..rec.main_kraus_count() {
        let r = rec.main_kraus(i);
        let rho_r = rho.matrix().mul(&r);
        for a in ch.kraus() {
            f += crate::qmat::mul_trace(&rho_r, a).norm_sqr();
        }
    }
    // Dump contribution.
    let p = rec.support.mul(&rec.support.dagger());
    let comp = CMatrix::identity(rec.in_dim).sub(&p);
    for a in ch.kraus() {
        // Σ_m |⟨q_m| a ρ |t⟩|² = (aρt)† (1-P) (aρt)
        let rho_t: Vec<Complex64> = rho.matrix().matvec(&rec.dump_target);
        let a_rho_t = a.matvec(&rho_t);
        let mut val = C_ZERO;
        for i in 0..rec.in_dim {
            for j in 0..rec.in_dim {
                val += a_rho_t[i].conj() * comp.get(i, j) * a_rho_t[j];
            }
        }
        f += val.re.max(0.0);
    }
    Ok(f)
}
