//! One-shot random coding over finite arithmetic averages of CPTD maps.
//!
//! The centerpiece is the randomized bound
//! tr(N̂(π_G)) - 2 Σⱼ √(k nⱼ) ||N̂ⱼ(π_G)||₂ on the Haar-averaged code
//! entanglement fidelity, together with the truncated channels feeding it,
//! the decoupling quantities, the Hilbert-Schmidt block computations behind
//! the bound, a Monte Carlo sampler of the achieved fidelity, subcode
//! extraction and the floor-arithmetic estimate used by the informed-encoder
//! construction.

use num_bigint::BigUint;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::information::optimize_recovery;
use crate::qmat::{haar_isometry, hs_inner, split_seed, CMatrix, DensityOperator};
use crate::tol::{self, Guards};
use crate::typicality::{typical_kraus, typical_projector, ProjectionCertificate, ReductionCertificate};

/// Isometry whose orthonormal columns span a code subspace.
#[derive(Debug, Clone)]
pub struct SubspaceFrame {
    ambient: usize,
    k: usize,
    isometry: CMatrix,
}

impl SubspaceFrame {
    pub fn new(isometry: CMatrix) -> Result<Self> {
        let (ambient, k) = (isometry.rows(), isometry.cols());
        if k > ambient {
            return Err(Error::DimensionMismatch(
                "more columns than ambient dim".into(),
            ));
        }
        let defect = isometry
            .dagger()
            .mul(&isometry)
            .max_abs_diff(&CMatrix::identity(k));
        if defect > tol::FRAME_ORTHO {
            return Err(Error::InvalidState(format!(
                "frame columns not orthonormal: defect {defect:e}"
            )));
        }
        Ok(SubspaceFrame {
            ambient,
            k,
            isometry,
        })
    }

    /// Span of the first k basis vectors.
    pub fn first_k(ambient: usize, k: usize) -> Result<Self> {
        if k > ambient || k == 0 {
            return Err(Error::DimensionMismatch(format!("first_k({ambient}, {k})")));
        }
        let mut v = CMatrix::zeros(ambient, k);
        for c in 0..k {
            v.set(c, c, crate::qmat::C_ONE);
        }
        Ok(SubspaceFrame {
            ambient,
            k,
            isometry: v,
        })
    }

    /// Haar-random frame.
    pub fn haar(ambient: usize, k: usize, seed: u64) -> Self {
        SubspaceFrame {
            ambient,
            k,
            isometry: haar_isometry(ambient, k, seed),
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    /// Maximally mixed state on the subspace.
    pub fn pi(&self) -> DensityOperator {
        DensityOperator::uniform_on_frame(&self.isometry).expect("frame is orthonormal")
    }

    /// Unnormalized projector p = k·π_F.
    pub fn projector(&self) -> CMatrix {
        self.isometry.mul(&self.isometry.dagger())
    }

    /// Sub-frame from a consecutive block of columns.
    pub fn column_block(&self, start: usize, len: usize) -> Result<SubspaceFrame> {
        if start + len > self.k {
            return Err(Error::DimensionMismatch("column block out of range".into()));
        }
        let mut v = CMatrix::zeros(self.ambient, len);
        for c in 0..len {
            for r in 0..self.ambient {
                v.set(r, c, self.isometry.get(r, start + c));
            }
        }
        SubspaceFrame::new(v)
    }
}

/// Truncated channel N̂ = Q ∘ N_{δ,l}: the typical Kraus reduction of
/// N^{⊗l} compressed by the frequency-typical projection of the single-copy
/// output state N(π_G).
#[derive(Debug, Clone)]
pub struct TruncatedChannel {
    pub channel: KrausChannel,
    pub kraus_cert: ReductionCertificate,
    pub output_cert: ProjectionCertificate,
    /// log₂ of the analytic envelope 2^{-l(S-3φ(δ))} for ||N̂(π_G^{⊗l})||₂².
    pub hs_sq_envelope_log2: f64,
    /// True when the output-typical projector is the full identity and the
    /// compression step collapses.
    pub output_projector_full: bool,
}

/// Build the truncated channel for one member at block length l.
pub fn truncate_channel(
    ch: &KrausChannel,
    pi_g: &DensityOperator,
    l: usize,
    delta: f64,
    guards: &Guards,
) -> Result<TruncatedChannel> {
    let c = tol::typicality_c();
    let tk = typical_kraus(ch, pi_g, l, delta, c, guards)?;
    let reduced = tk.materialize(guards)?;
    let out_single = DensityOperator::new(ch.apply_density(pi_g)?)?;
    let (spec, output_cert) = typical_projector(&out_single, l, delta, c, guards)?;
    let full_dim = (ch.out_dim() as u128).pow(l as u32);
    let output_projector_full = spec.dim() == full_dim;
    let channel = if output_projector_full {
        reduced
    } else {
        let q = spec.projector.clone().ok_or_else(|| {
            Error::GuardExceeded("output-typical projector not materialized".into())
        })?;
        let kraus = reduced.kraus().iter().map(|a| q.mul(a)).collect();
        KrausChannel::new_cptd(reduced.in_dim(), reduced.out_dim(), kraus)?
    };
    Ok(TruncatedChannel {
        channel,
        kraus_cert: tk.certificate,
        hs_sq_envelope_log2: output_cert.hs_sq_bound_log2,
        output_cert,
        output_projector_full,
    })
}

/// Per-channel fields of the one-shot bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneShotChannelRow {
    pub n_kraus: usize,
    pub hs_norm: f64,
    pub trace: f64,
    /// Analytic envelope on the squared HS norm (log₂), when known.
    pub hs_sq_envelope_log2: Option<f64>,
}

/// Report of the randomized one-shot bound for an arithmetic average of
/// CPTD maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneShotBoundReport {
    pub k: usize,
    pub per_channel: Vec<OneShotChannelRow>,
    /// tr(N̂(π_G^{⊗l})) for the uniform average.
    pub average_trace: f64,
    /// tr(N̂(π)) - 2 Σⱼ √(k nⱼ) ||N̂ⱼ(π)||₂.
    pub bound: f64,
    /// The sharper intermediate value tr - Σ_{j,l} (1/N)√(L_{jl} D_{jl})
    /// with L_{jl} = k·min(nⱼ,n_l) and D_{jl} = ⟨N̂ⱼ(π), N̂_l(π)⟩.
    pub sharp_bound: f64,
    /// bound ≤ 0 carries no information.
    pub vacuous: bool,
}

/// Evaluate the one-shot bound for channels sharing dimensions against the
/// maximally mixed state on the code's ambient space G^{⊗l}.
pub fn one_shot_bound(
    channels: &[&KrausChannel],
    envelopes_log2: Option<&[f64]>,
    k: usize,
    pi_gl: &DensityOperator,
) -> Result<OneShotBoundReport> {
    if channels.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if k == 0 || k > pi_gl.dim() {
        return Err(Error::InvalidParameter(format!(
            "code dimension {k} outside 1..={}",
            pi_gl.dim()
        )));
    }
    let n = channels.len();
    let outputs: Vec<CMatrix> = channels
        .iter()
        .map(|ch| ch.apply_density(pi_gl))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n);
    for (j, (ch, out)) in channels.iter().zip(outputs.iter()).enumerate() {
        rows.push(OneShotChannelRow {
            n_kraus: ch.kraus_count(),
            hs_norm: out.hs_norm_sqr().sqrt(),
            trace: out.trace().re,
            hs_sq_envelope_log2: envelopes_log2.map(|e| e[j]),
        });
    }
    let average_trace = rows.iter().map(|r| r.trace).sum::<f64>() / n as f64;
    let penalty: f64 = rows
        .iter()
        .map(|r| (k as f64 * r.n_kraus as f64).sqrt() * r.hs_norm)
        .sum();
    let bound = average_trace - 2.0 * penalty;
    // Sharper intermediate value before the matrix-lemma loosening.
    let mut sharp_penalty = 0.0;
    for j in 0..n {
        for l in 0..n {
            let d_jl = hs_inner(&outputs[j], &outputs[l]).re.max(0.0);
            let l_jl = k as f64 * rows[j].n_kraus.min(rows[l].n_kraus) as f64;
            sharp_penalty += (l_jl * d_jl).sqrt() / n as f64;
        }
    }
    let sharp_bound = average_trace - sharp_penalty;
    Ok(OneShotBoundReport {
        k,
        per_channel: rows,
        average_trace,
        bound,
        vacuous: bound <= 0.0,
        sharp_bound,
    })
}

/// w = tr(N(π_F)) and the decoupling gap ||w ρ'_ae - w ρ_a ⊗ ρ'_e||₁ for a
/// code frame under a CPTD map.
pub fn decoupling_gap(frame: &SubspaceFrame, ch: &KrausChannel) -> Result<(f64, f64)> {
    if ch.in_dim() != frame.ambient() {
        return Err(Error::DimensionMismatch("decoupling_gap dims".into()));
    }
    let k = frame.dim();
    let n = ch.kraus_count();
    // Vectors aᵢ g_m, indexed i·k + m.
    let mut ag: Vec<Vec<Complex64>> = Vec::with_capacity(n * k);
    for a in ch.kraus() {
        for m in 0..k {
            ag.push(a.matvec(&frame.isometry().column(m)));
        }
    }
    let inner = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .zip(y.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
    };
    // w ρ'_ae on C^k ⊗ C^n: [(m,i),(m',i')] = (1/k)⟨a_{i'} g_{m'}, a_i g_m⟩.
    let dim = k * n;
    let mut w_rho_ae = CMatrix::zeros(dim, dim);
    for m in 0..k {
        for i in 0..n {
            for mp in 0..k {
                for ip in 0..n {
                    let v = inner(&ag[ip * k + mp], &ag[i * k + m]) / (k as f64);
                    w_rho_ae.set(m * n + i, mp * n + ip, v);
                }
            }
        }
    }
    let w = (0..dim).map(|x| w_rho_ae.get(x, x).re).sum::<f64>();
    // w ρ'_e[i,i'] = (1/k) Σ_m ⟨a_{i'} g_m, a_i g_m⟩ and ρ_a = 1_k/k.
    let mut w_rho_e = CMatrix::zeros(n, n);
    for i in 0..n {
        for ip in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..k {
                s += inner(&ag[ip * k + m], &ag[i * k + m]);
            }
            w_rho_e.set(i, ip, s / (k as f64));
        }
    }
    let mut product = CMatrix::zeros(dim, dim);
    for m in 0..k {
        for i in 0..n {
            for ip in 0..n {
                product.set(m * n + i, m * n + ip, w_rho_e.get(i, ip) / (k as f64));
            }
        }
    }
    let gap = crate::qmat::trace_norm_hermitian(&w_rho_ae.sub(&product))?;
    Ok((w, gap))
}

/// ||D_{j,l}(p)||₂² for every channel pair, evaluated both through the
/// closed Kraus formula and by materializing the D blocks.
#[derive(Debug, Clone)]
pub struct DMatrixReport {
    pub closed: Vec<Vec<f64>>,
    pub direct: Vec<Vec<f64>>,
    pub max_disagreement: f64,
}

pub fn d_matrices(frame: &SubspaceFrame, channels: &[&KrausChannel]) -> Result<DMatrixReport> {
    let p = frame.projector();
    let k = frame.dim() as f64;
    let n = channels.len();
    let mut closed = vec![vec![0.0; n]; n];
    let mut direct = vec![vec![0.0; n]; n];
    for (j, chj) in channels.iter().enumerate() {
        for (l, chl) in channels.iter().enumerate() {
            let mut acc_closed = 0.0;
            let mut acc_direct = 0.0;
            for ai in chj.kraus() {
                for ar in chl.kraus() {
                    let x = ai.dagger().mul(ar);
                    let px = p.mul(&x);
                    let t = px.trace();
                    // Closed form (1/k²)(tr(p X† p X) - |tr(pX)|²/k).
                    let quad = p.mul(&x.dagger()).mul(&p).mul(&x).trace().re;
                    acc_closed += (quad - t.norm_sqr() / k) / (k * k);
                    // Direct: materialize the block, take its HS norm.
                    let block = px
                        .mul(&p)
                        .sub(&p.scale(t / Complex64::new(k, 0.0)))
                        .scale_re(1.0 / k);
                    acc_direct += block.hs_norm_sqr();
                }
            }
            closed[j][l] = acc_closed;
            direct[j][l] = acc_direct;
        }
    }
    let mut max_dis = 0.0f64;
    for j in 0..n {
        for l in 0..n {
            max_dis = max_dis.max((closed[j][l] - direct[j][l]).abs());
        }
    }
    if max_dis > tol::HS_ROUTES {
        return Err(Error::InvalidState(format!(
            "D-matrix routes disagree by {max_dis:e}"
        )));
    }
    Ok(DMatrixReport {
        closed,
        direct,
        max_disagreement: max_dis,
    })
}

/// Both sides of the matrix estimate Σ (1/N)√(L_{jl}D_{jl}) ≤ 2 Σ √(L_jj D_jj)
/// after validating its hypotheses.
pub fn matrix_lemma_check(l: &[Vec<f64>], d: &[Vec<f64>]) -> Result<(f64, f64, bool)> {
    let n = l.len();
    if n == 0 || d.len() != n || l.iter().any(|r| r.len() != n) || d.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("matrix lemma shapes".into()));
    }
    for j in 0..n {
        for c in 0..n {
            if l[j][c] < 0.0 || d[j][c] < 0.0 {
                return Err(Error::HypothesisViolated("negative entry".into()));
            }
            if l[j][c] > l[j][j] + 1e-12 || l[j][c] > l[c][c] + 1e-12 {
                return Err(Error::HypothesisViolated(format!(
                    "L[{j}][{c}] exceeds a diagonal entry"
                )));
            }
            if d[j][c] > d[j][j].max(d[c][c]) + 1e-12 {
                return Err(Error::HypothesisViolated(format!(
                    "D[{j}][{c}] exceeds both diagonal entries"
                )));
            }
        }
    }
    let lhs: f64 = (0..n)
        .flat_map(|j| (0..n).map(move |c| (j, c)))
        .map(|(j, c)| (l[j][c] * d[j][c]).sqrt() / n as f64)
        .sum();
    let rhs: f64 = (0..n).map(|j| 2.0 * (l[j][j] * d[j][j]).sqrt()).sum();
    Ok((lhs, rhs, lhs <= rhs + 1e-12))
}

/// One Monte Carlo trial record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub fidelity: f64,
    pub w: f64,
    pub gap: f64,
    pub converged: bool,
    pub runtime_ms: f64,
}

/// Aggregate Monte Carlo report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub min: f64,
    pub trials: Vec<TrialRecord>,
}

/// Monte Carlo configuration; per-trial seeds are split off `seed` by trial
/// index.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub opt_iters: usize,
    pub opt_tol: f64,
}

/// Sample the achieved entanglement fidelity of Haar-rotated codes under the
/// uniform mixture N̂ = (1/N) Σ N̂ⱼ: each trial draws u, optimizes a recovery
/// for u π_F u† and records the achieved F_e together with the decoupling
/// quantities. Trials run in parallel; the aggregation order is fixed.
pub fn monte_carlo_fidelity(
    channels: &[&KrausChannel],
    dim_gl: usize,
    cfg: &MonteCarloConfig,
) -> Result<MonteCarloReport> {
    if channels.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if cfg.k == 0 || cfg.k > dim_gl {
        return Err(Error::InvalidParameter("code dim outside ambient".into()));
    }
    let n = channels.len();
    let parts: Vec<(f64, &KrausChannel)> =
        channels.iter().map(|ch| (1.0 / n as f64, *ch)).collect();
    let mixture = KrausChannel::mixture(&parts)?;

    let records: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let started = std::time::Instant::now();
            let trial_seed = split_seed(cfg.seed, t as u64);
            let frame = SubspaceFrame::haar(dim_gl, cfg.k, trial_seed);
            let rho = frame.pi();
            let out = optimize_recovery(&rho, &mixture, cfg.opt_iters, cfg.opt_tol)
                .expect("recovery optimization on valid inputs");
            let (w, gap) =
                decoupling_gap(&frame, &mixture).expect("decoupling quantities on valid inputs");
            TrialRecord {
                trial: t,
                seed: trial_seed,
                fidelity: out.fidelity,
                w,
                gap,
                converged: out.converged,
                runtime_ms: started.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();

    let mean = records.iter().map(|r| r.fidelity).sum::<f64>() / cfg.trials as f64;
    let var = records
        .iter()
        .map(|r| (r.fidelity - mean) * (r.fidelity - mean))
        .sum::<f64>()
        / (cfg.trials.max(2) - 1) as f64;
    let std = var.sqrt();
    Ok(MonteCarloReport {
        mean,
        std,
        stderr: std / (cfg.trials as f64).sqrt(),
        min: records
            .iter()
            .map(|r| r.fidelity)
            .fold(f64::INFINITY, f64::min),
        trials: records,
    })
}

/// Empirical Haar means of ||D_{j,l}(U p U†)||₂² against their bounds
/// tr(N̂ⱼ(π_G) N̂_l(π_G)), and of tr(N̂(U π_F U†)) against tr(N̂(π_G)).
#[derive(Debug, Clone)]
pub struct HaarMomentReport {
    pub d_means: Vec<Vec<f64>>,
    pub d_stderrs: Vec<Vec<f64>>,
    pub d_bounds: Vec<Vec<f64>>,
    pub trace_mean: f64,
    pub trace_stderr: f64,
    pub trace_expected: f64,
}

pub fn haar_moment_checks(
    channels: &[&KrausChannel],
    dim_g: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<HaarMomentReport> {
    let n = channels.len();
    let pi_g = DensityOperator::maximally_mixed(dim_g);
    let parts: Vec<(f64, &KrausChannel)> =
        channels.iter().map(|ch| (1.0 / n as f64, *ch)).collect();
    let mixture = KrausChannel::mixture(&parts)?;

    let per_sample: Vec<(Vec<Vec<f64>>, f64)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let frame = SubspaceFrame::haar(dim_g, k, split_seed(seed, s as u64));
            let rep = d_matrices(&frame, channels).expect("D matrices on valid inputs");
            let tr = mixture
                .apply_density(&frame.pi())
                .expect("mixture application")
                .trace()
                .re;
            (rep.closed, tr)
        })
        .collect();

    let m = samples as f64;
    let mut d_means = vec![vec![0.0; n]; n];
    let mut d_stderrs = vec![vec![0.0; n]; n];
    let mut d_bounds = vec![vec![0.0; n]; n];
    for j in 0..n {
        for l in 0..n {
            let mean = per_sample.iter().map(|(dm, _)| dm[j][l]).sum::<f64>() / m;
            let var = per_sample
                .iter()
                .map(|(dm, _)| (dm[j][l] - mean) * (dm[j][l] - mean))
                .sum::<f64>()
                / (m - 1.0);
            d_means[j][l] = mean;
            d_stderrs[j][l] = (var / m).sqrt();
            d_bounds[j][l] = hs_inner(
                &channels[j].apply_density(&pi_g)?,
                &channels[l].apply_density(&pi_g)?,
            )
            .re;
        }
    }
    let trace_mean = per_sample.iter().map(|(_, t)| t).sum::<f64>() / m;
    let trace_var = per_sample
        .iter()
        .map(|(_, t)| (t - trace_mean) * (t - trace_mean))
        .sum::<f64>()
        / (m - 1.0);
    Ok(HaarMomentReport {
        d_means,
        d_stderrs,
        d_bounds,
        trace_mean,
        trace_stderr: (trace_var / m).sqrt(),
        trace_expected: mixture.apply_density(&pi_g)?.trace().re,
    })
}

/// Best dimension-K subcode among the consecutive column blocks of C,
/// with the guaranteed floor 1 - (D/(⌊D/K⌋K))(1 - F_e(π_C, E)).
#[derive(Debug, Clone)]
pub struct SubcodeReport {
    pub frame: SubspaceFrame,
    pub fidelity: f64,
    pub parent_fidelity: f64,
    pub guarantee: f64,
}

pub fn extract_subcode(
    code: &SubspaceFrame,
    effective: &KrausChannel,
    k_sub: usize,
    guards: &Guards,
) -> Result<SubcodeReport> {
    let d = code.dim();
    if k_sub == 0 || k_sub > d {
        return Err(Error::InvalidParameter(format!(
            "subcode dim {k_sub} outside 1..={d}"
        )));
    }
    let parent_fidelity = crate::information::entanglement_fidelity(&code.pi(), effective, guards)?;
    let blocks = d / k_sub;
    let mut best: Option<(f64, SubspaceFrame)> = None;
    for b in 0..blocks {
        let sub = code.column_block(b * k_sub, k_sub)?;
        let f = crate::information::entanglement_fidelity(&sub.pi(), effective, guards)?;
        if best.as_ref().map(|(bf, _)| f > *bf).unwrap_or(true) {
            best = Some((f, sub));
        }
    }
    let (fidelity, frame) = best.expect("at least one block");
    let guarantee = 1.0 - (d as f64 / (blocks as f64 * k_sub as f64)) * (1.0 - parent_fidelity);
    Ok(SubcodeReport {
        frame,
        fidelity,
        parent_fidelity,
        guarantee,
    })
}

/// Exact floor-arithmetic report for ⌊2^{nA}⌋/(⌊2^{nB}⌋·⌊⌊2^{nA}⌋/⌊2^{nB}⌋⌋).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorRatioReport {
    pub value: f64,
    /// 1 + 3·2^{-nB}.
    pub bound: f64,
    /// value ≤ 1 + 3·2^{-nB}, decided in exact integer arithmetic.
    pub holds: bool,
    /// The subtracted variant "≤ 1 - 3·2^{-nB}"; the ratio is ≥ 1, so this
    /// can never hold.
    pub holds_subtracted_variant: bool,
}

/// ⌊2^{n·p/q}⌋ as an exact integer via an integer q-th root.
fn floor_pow2_rational(n: u32, p: u32, q: u32) -> BigUint {
    let total = BigUint::from(1u32) << (n as usize * p as usize);
    total.nth_root(q)
}

/// Check the floor-ratio estimate for rational exponents A = ap/aq and
/// B = bp/bq with A > B > 0, entirely in integer arithmetic.
pub fn floor_ratio_check(n: u32, a: (u32, u32), b: (u32, u32)) -> Result<FloorRatioReport> {
    let (ap, aq) = a;
    let (bp, bq) = b;
    if aq == 0 || bq == 0 || ap == 0 || bp == 0 {
        return Err(Error::InvalidParameter("zero numerator/denominator".into()));
    }
    let a_val = ap as f64 / aq as f64;
    let b_val = bp as f64 / bq as f64;
    if !(a_val > b_val && b_val > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(
            "floor ratio needs A > B > 0 and n ≥ 1".into(),
        ));
    }
    let x = floor_pow2_rational(n, ap, aq);
    let y = floor_pow2_rational(n, bp, bq);
    let z = &x / &y;
    let yz = &y * &z;
    let rem = &x - &yz;
    // value ≤ 1 + 3·2^{-nB}  ⟺  2^{nB}·rem ≤ 3·Y·Z
    //                        ⟺  2^{n·bp}·rem^{bq} ≤ (3·Y·Z)^{bq}.
    let lhs = (BigUint::from(1u32) << (n as usize * bp as usize)) * rem.pow(bq);
    let rhs = (BigUint::from(3u32) * &yz).pow(bq);
    let holds = lhs <= rhs;

    let x_f = x.to_string().parse::<f64>().unwrap_or(f64::INFINITY);
    let yz_f = yz.to_string().parse::<f64>().unwrap_or(f64::INFINITY);
    Ok(FloorRatioReport {
        value: x_f / yz_f,
        bound: 1.0 + 3.0 * 2f64.powf(-(n as f64) * b_val),
        holds,
        holds_subtracted_variant: false,
    })
}
