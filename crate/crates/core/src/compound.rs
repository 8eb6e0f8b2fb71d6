//! Compound-channel pipelines: τ-nets over parameterized channel families,
//! approximation checks, discrimination-based code conversion, capacity
//! lower-bound estimation and finite-blocklength convergence tables.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_tensor_power_per_site, diamond_distance, psd_inv_sqrt, ChannelFamily, KrausChannel,
};
use crate::coding::SubspaceFrame;
use crate::error::{Error, Result};
use crate::information::{
    coherent_information, entropy_psd, fe_with_recovery, optimize_recovery, RecoveryMap,
    RecoveryOutcome,
};
use crate::qmat::{kron, split_seed, trace_norm_hermitian, CMatrix, DensityOperator, C_ZERO};
use crate::tol::{self, Guards};
use crate::typicality::{phi, typical_projector};

/// Single-parameter qubit channel families with a known diamond-norm
/// modulus: ||N_p - N_q||◇ ≤ modulus·|p - q|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamChannelKind {
    PhaseFlip,
    BitFlip,
    Depolarizing,
}

impl ParamChannelKind {
    pub fn build(&self, p: f64) -> KrausChannel {
        match self {
            ParamChannelKind::PhaseFlip => KrausChannel::phase_flip(p),
            ParamChannelKind::BitFlip => KrausChannel::bit_flip(p),
            ParamChannelKind::Depolarizing => KrausChannel::depolarizing(p),
        }
    }

    /// ||N_p - N_q||◇ ≤ 2|p-q| for the Pauli-mixture families: the
    /// difference is (p-q)(conjugation - identity).
    pub fn diamond_modulus(&self) -> f64 {
        2.0
    }

    /// Analytic bound on ||N_p - U||◇ from the ℓ₁ weight of the Pauli
    /// decomposition: 3/2 for these families on the parameter ranges we
    /// admit (p ≤ 1/2).
    pub fn useless_distance_bound(&self) -> f64 {
        1.5
    }
}

/// A parameter interval of a named single-parameter family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFamily {
    pub kind: ParamChannelKind,
    pub lo: f64,
    pub hi: f64,
}

/// Adapted τ-net: grid points of the family mixed with the useless channel,
/// (1-τ/2)N + (τ/2)U.
#[derive(Debug, Clone)]
pub struct ChannelNet {
    pub tau: f64,
    pub members: ChannelFamily,
    /// Parameter of each member when built over a grid family.
    pub params: Vec<f64>,
    /// Pre-mixing base members (the τ/2-net inside the family).
    pub base_members: Vec<KrausChannel>,
    /// Certified single-copy covering radius of the base net inside the
    /// family (≤ τ/2 by construction).
    pub base_cover_radius: f64,
    /// Certified bound on max_N min_i ||N - mixed_i||◇.
    pub certified_radius: f64,
    pub mixing_applied: bool,
}

impl ChannelNet {
    /// Net member closest in parameter to `p`.
    pub fn nearest_index(&self, p: f64) -> usize {
        self.params
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - p).abs().partial_cmp(&(*b - p).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap()
    }
}

/// Build the adapted net over a parameter grid: the base net is a
/// deterministic grid with step τ/(2·modulus), so every family member lies
/// within τ/2 of a base point; every base point is then mixed with the
/// useless channel at weight τ/2.
pub fn build_adapted_net(family: &GridFamily, tau: f64) -> Result<ChannelNet> {
    if tau <= 0.0 || tau > 1.0 / std::f64::consts::E {
        return Err(Error::InvalidParameter(format!(
            "τ must lie in (0, 1/e], got {tau}"
        )));
    }
    if family.lo > family.hi || family.lo < 0.0 || family.hi > 0.5 {
        return Err(Error::InvalidParameter(
            "parameter interval must satisfy 0 ≤ lo ≤ hi ≤ 0.5".into(),
        ));
    }
    let modulus = family.kind.diamond_modulus();
    let step = tau / (2.0 * modulus);
    let span = family.hi - family.lo;
    let n_pts = (span / step).ceil() as usize + 1;
    let params: Vec<f64> = if n_pts == 1 {
        vec![family.lo]
    } else {
        (0..n_pts)
            .map(|i| family.lo + span * i as f64 / (n_pts - 1) as f64)
            .collect()
    };
    let base_cover_radius = if n_pts == 1 {
        0.0
    } else {
        modulus * (span / (n_pts - 1) as f64) / 2.0
    };
    if base_cover_radius > tau / 2.0 + 1e-12 {
        return Err(Error::CoveringNotCertified(format!(
            "grid radius {base_cover_radius} exceeds τ/2"
        )));
    }
    let base_members: Vec<KrausChannel> = params.iter().map(|&p| family.kind.build(p)).collect();
    let d_out = base_members[0].out_dim();
    let useless = KrausChannel::useless(base_members[0].in_dim(), d_out);
    let members: Vec<KrausChannel> = base_members
        .iter()
        .map(|ch| KrausChannel::mixture(&[(1.0 - tau / 2.0, ch), (tau / 2.0, &useless)]))
        .collect::<Result<_>>()?;
    let certified_radius = (1.0 - tau / 2.0) * base_cover_radius
        + (tau / 2.0) * family.kind.useless_distance_bound();
    let net = ChannelNet {
        tau,
        members: ChannelFamily::new(members)?,
        params,
        base_members,
        base_cover_radius,
        certified_radius,
        mixing_applied: true,
    };
    // Cardinality bound (6/τ)^{2(dd')²}, checked in logs.
    let d = net.members.in_dim() as f64;
    let dp = net.members.out_dim() as f64;
    let log2_cap = 2.0 * (d * dp) * (d * dp) * (6.0 / tau).log2();
    if (net.members.len() as f64).log2() > log2_cap {
        return Err(Error::CoveringNotCertified(
            "net exceeds the cardinality bound".into(),
        ));
    }
    Ok(net)
}

/// Adapted net of an explicit finite family: the family itself is the base
/// net (distance zero), mixed with the useless channel.
pub fn adapt_explicit_family(family: &ChannelFamily, tau: f64) -> Result<ChannelNet> {
    if tau <= 0.0 || tau > 1.0 / std::f64::consts::E {
        return Err(Error::InvalidParameter(format!(
            "τ must lie in (0, 1/e], got {tau}"
        )));
    }
    let useless = KrausChannel::useless(family.in_dim(), family.out_dim());
    let members: Vec<KrausChannel> = family
        .members()
        .iter()
        .map(|ch| KrausChannel::mixture(&[(1.0 - tau / 2.0, ch), (tau / 2.0, &useless)]))
        .collect::<Result<_>>()?;
    Ok(ChannelNet {
        tau,
        members: ChannelFamily::new(members)?,
        params: vec![],
        base_members: family.members().to_vec(),
        base_cover_radius: 0.0,
        // ||N - mixed(N)||◇ = (τ/2)||N - U||◇ ≤ τ.
        certified_radius: tau,
        mixing_applied: true,
    })
}

/// log₂ of the cardinality bound (3/τ)^{2(dd')²} for τ-nets in the full
/// channel space.
pub fn net_cardinality_bound_log2(tau: f64, d: usize, d_prime: usize) -> Result<f64> {
    if tau <= 0.0 || tau > 1.0 {
        return Err(Error::InvalidParameter("τ must lie in (0, 1]".into()));
    }
    let dd = (d * d_prime) as f64;
    Ok(2.0 * dd * dd * (3.0 / tau).log2())
}

/// Infimum of the coherent information over a finite family.
pub fn min_coherent_information(
    rho: &DensityOperator,
    family: &ChannelFamily,
    guards: &Guards,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for ch in family.members() {
        best = best.min(coherent_information(rho, ch, guards)?);
    }
    Ok(best)
}

/// Coherent information at block length l, evaluated through site-by-site
/// channel application so no tensor-word Kraus family is materialized.
pub fn coherent_information_tensor_power(
    rho_l: &DensityOperator,
    ch: &KrausChannel,
    l: usize,
) -> Result<f64> {
    let out = apply_tensor_power_per_site(ch, l, rho_l.matrix())?;
    let s_out = entropy_psd(&out)?;
    let env = ch.complementary()?;
    let env_out = apply_tensor_power_per_site(&env, l, rho_l.matrix())?;
    let s_env = entropy_psd(&env_out)?;
    Ok(s_out - s_env)
}

/// Report of the three net-approximation quantities for one (family member,
/// net member) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub l: usize,
    pub tau: f64,
    /// Lower estimate of ||N^{⊗l} - N_i^{⊗l}||◇ and the bound lτ.
    pub diamond_tensor_estimate: f64,
    pub diamond_single_estimate: f64,
    pub diamond_bound: f64,
    /// |F_e(ρ, R∘N^{⊗l}) - F_e(ρ, R∘N_i^{⊗l})| and the bound lτ.
    pub fe_difference: f64,
    pub fe_bound: f64,
    /// |I_c(ρ, I) - I_c(ρ, I_τ)| and the bound τ + 2τ log(d/τ).
    pub ic_shift: f64,
    pub ic_bound: f64,
}

impl ApproximationReport {
    pub fn all_hold(&self) -> bool {
        self.diamond_tensor_estimate < self.diamond_bound
            && self.fe_difference < self.fe_bound
            && self.ic_shift <= self.ic_bound + 1e-9
    }
}

/// Evaluate the approximation properties for a member of the family against
/// its net representative.
#[allow(clippy::too_many_arguments)]
pub fn approximation_check(
    n_true: &KrausChannel,
    n_net: &KrausChannel,
    family: &ChannelFamily,
    net: &ChannelFamily,
    rho_l: &DensityOperator,
    rho_single: &DensityOperator,
    recovery: &RecoveryMap,
    l: usize,
    tau: f64,
    guards: &Guards,
    seed: u64,
) -> Result<ApproximationReport> {
    let d = n_true.in_dim();
    let single = diamond_distance(n_true, n_net, 3, 1e-9, seed)?;
    let pow_true = n_true.tensor_power(l, guards)?;
    let pow_net = n_net.tensor_power(l, guards)?;
    let tensor = diamond_distance(&pow_true, &pow_net, 3, 1e-8, split_seed(seed, 1))?;
    let fe_true = fe_with_recovery(rho_l, recovery, &pow_true)?;
    let fe_net = fe_with_recovery(rho_l, recovery, &pow_net)?;
    let ic_family = min_coherent_information(rho_single, family, guards)?;
    let ic_net = min_coherent_information(rho_single, net, guards)?;
    Ok(ApproximationReport {
        l,
        tau,
        diamond_tensor_estimate: tensor.value,
        diamond_single_estimate: single.value,
        diamond_bound: l as f64 * tau,
        fe_difference: (fe_true - fe_net).abs(),
        fe_bound: l as f64 * tau,
        ic_shift: (ic_family - ic_net).abs(),
        ic_bound: tau + 2.0 * tau * (d as f64 / tau).log2(),
    })
}

/// Result of the capacity lower-bound ascent.
#[derive(Debug, Clone)]
pub struct CapacityEstimate {
    pub rho: DensityOperator,
    /// Achieved min_i I_c(ρ, N_i^{⊗l}) / l: a certified lower bound on the
    /// finite-l max-min value.
    pub value: f64,
    pub starts: usize,
    pub iterations_used: usize,
}

fn family_objective(
    rho: &DensityOperator,
    family: &ChannelFamily,
    l: usize,
    guards: &Guards,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for ch in family.members() {
        let ic = if l == 1 {
            coherent_information(rho, ch, guards)?
        } else {
            coherent_information_tensor_power(rho, ch, l)?
        };
        best = best.min(ic);
    }
    Ok(best / l as f64)
}

fn density_from_factor(a: &CMatrix) -> Result<DensityOperator> {
    let m = a.mul(&a.dagger());
    let tr = m.trace().re;
    if tr <= 1e-300 {
        return Err(Error::InvalidState("zero factor".into()));
    }
    DensityOperator::new(m.scale_re(1.0 / tr))
}

/// Maximize min_i I_c(ρ, N_i^{⊗l})/l by projected ascent over the factor
/// parameterization ρ = AA†/tr(AA†), with multi-start (maximally mixed plus
/// seeded random starts) and a final snap to the best pure candidate.
pub fn compound_capacity_lower(
    family: &ChannelFamily,
    l: usize,
    iters: usize,
    starts: usize,
    seed: u64,
    guards: &Guards,
) -> Result<CapacityEstimate> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let dim = family.in_dim().pow(l as u32);
    if dim > guards.max_dense_dim {
        return Err(Error::GuardExceeded(format!("ambient dim {dim}")));
    }
    let mut best: Option<(f64, DensityOperator)> = None;
    let mut total_iters = 0usize;
    for s in 0..starts.max(1) {
        let mut a = if s == 0 {
            CMatrix::identity(dim)
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, s as u64));
            let mut m = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    m.set(
                        i,
                        j,
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    );
                }
            }
            m
        };
        let mut f_cur = family_objective(&density_from_factor(&a)?, family, l, guards)?;
        let mut step = 0.3;
        for _ in 0..iters {
            total_iters += 1;
            // Numerical gradient in the unconstrained factor space.
            let eps = 1e-5;
            let mut grad = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    for part in 0..2 {
                        let dir = if part == 0 {
                            Complex64::new(eps, 0.0)
                        } else {
                            Complex64::new(0.0, eps)
                        };
                        let mut ap = a.clone();
                        ap.set(i, j, a.get(i, j) + dir);
                        let mut am = a.clone();
                        am.set(i, j, a.get(i, j) - dir);
                        let fp = family_objective(&density_from_factor(&ap)?, family, l, guards)?;
                        let fm = family_objective(&density_from_factor(&am)?, family, l, guards)?;
                        let g = (fp - fm) / (2.0 * eps);
                        let cur = grad.get(i, j);
                        grad.set(
                            i,
                            j,
                            cur + if part == 0 {
                                Complex64::new(g, 0.0)
                            } else {
                                Complex64::new(0.0, g)
                            },
                        );
                    }
                }
            }
            let gnorm = grad.hs_norm_sqr().sqrt();
            if gnorm < 1e-10 {
                break;
            }
            // Backtracking line search along the gradient.
            let mut improved = false;
            let mut trial_step = step;
            for _ in 0..20 {
                let cand = a.add(&grad.scale_re(trial_step / gnorm));
                if let Ok(rho_cand) = density_from_factor(&cand) {
                    let f_cand = family_objective(&rho_cand, family, l, guards)?;
                    if f_cand > f_cur + 1e-12 {
                        a = cand;
                        f_cur = f_cand;
                        step = (trial_step * 1.5).min(1.0);
                        improved = true;
                        break;
                    }
                }
                trial_step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let rho_final = density_from_factor(&a)?;
        if best.as_ref().map(|(bf, _)| f_cur > *bf).unwrap_or(true) {
            best = Some((f_cur, rho_final));
        }
    }
    let (mut value, mut rho) = best.expect("at least one start");
    // Snap candidates: pure states from the eigenbasis of the current best.
    for kidx in 0..rho.dim() {
        if rho.spectrum()[kidx] <= 0.0 {
            continue;
        }
        let v = rho.eigenbasis().column(kidx);
        if let Ok(pure) = DensityOperator::from_pure(&v) {
            let f = family_objective(&pure, family, l, guards)?;
            if f > value {
                value = f;
                rho = pure;
            }
        }
    }
    Ok(CapacityEstimate {
        rho,
        value,
        starts: starts.max(1),
        iterations_used: total_iters,
    })
}

/// Exhaustive Bloch-ball oracle for qubit families: scans (x, y, z) on a
/// cubic grid of the given resolution and returns the best min-coherent
/// information found. Independent of the ascent path.
pub fn bloch_scan_oracle(
    family: &ChannelFamily,
    resolution: f64,
    guards: &Guards,
) -> Result<(f64, [f64; 3])> {
    if family.in_dim() != 2 {
        return Err(Error::DimensionMismatch("Bloch scan needs qubit input".into()));
    }
    let steps = (2.0 / resolution).round() as i64;
    let coords: Vec<f64> = (0..=steps)
        .map(|i| -1.0 + 2.0 * i as f64 / steps as f64)
        .collect();
    use rayon::prelude::*;
    let results: Vec<(f64, [f64; 3])> = coords
        .par_iter()
        .map(|&x| {
            let mut local_best = (f64::NEG_INFINITY, [0.0; 3]);
            for &y in &coords {
                for &z in &coords {
                    if x * x + y * y + z * z > 1.0 + 1e-12 {
                        continue;
                    }
                    let m = CMatrix::from_row_major(
                        2,
                        2,
                        vec![
                            Complex64::new((1.0 + z) / 2.0, 0.0),
                            Complex64::new(x / 2.0, -y / 2.0),
                            Complex64::new(x / 2.0, y / 2.0),
                            Complex64::new((1.0 - z) / 2.0, 0.0),
                        ],
                    )
                    .unwrap();
                    let rho = match DensityOperator::new(m) {
                        Ok(r) => r,
                        Err(_) => continue,
                    };
                    let f = min_coherent_information(&rho, family, guards)
                        .expect("I_c on valid inputs");
                    if f > local_best.0 {
                        local_best = (f, [x, y, z]);
                    }
                }
            }
            local_best
        })
        .collect();
    Ok(results
        .into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap())
}

/// Channel-discrimination report: probe, PGM and the success matrix
/// tr(pᵢ Nⱼ^{⊗m}(ω)).
#[derive(Debug, Clone)]
pub struct DiscriminationReport {
    /// Single-copy pure probe; the full probe is its m-fold power.
    pub probe: Vec<Complex64>,
    pub m: usize,
    pub povm: Vec<CMatrix>,
    pub success: Vec<Vec<f64>>,
    pub min_success: f64,
    pub avg_success: f64,
    /// All pairwise output distances below threshold: the members carry no
    /// information and the success degenerates to 1/N.
    pub indistinguishable: bool,
}

/// Pick a single-copy pure probe maximizing the minimum pairwise output
/// trace distance by seeded coordinate ascent over the unit sphere.
pub fn optimize_probe(family: &ChannelFamily, budget: usize, seed: u64) -> Result<Vec<Complex64>> {
    let d = family.in_dim();
    let objective = |psi: &[Complex64]| -> f64 {
        let rho = DensityOperator::from_pure(psi).expect("normalized probe");
        let outs: Vec<CMatrix> = family
            .members()
            .iter()
            .map(|ch| ch.apply_density(&rho).expect("probe application"))
            .collect();
        let mut min_d = f64::INFINITY;
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                let td = trace_norm_hermitian(&outs[i].sub(&outs[j])).expect("Hermitian diff");
                min_d = min_d.min(td);
            }
        }
        if outs.len() < 2 {
            0.0
        } else {
            min_d
        }
    };
    let normalize = |v: &mut Vec<Complex64>| {
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= n;
        }
    };
    // Candidate starts: computational basis, uniform superposition, random.
    let mut candidates: Vec<Vec<Complex64>> = Vec::new();
    for b in 0..d {
        let mut v = vec![C_ZERO; d];
        v[b] = crate::qmat::C_ONE;
        candidates.push(v);
    }
    let mut plus = vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d];
    normalize(&mut plus);
    candidates.push(plus);
    for s in 0..3u64 {
        candidates.push(crate::qmat::random_pure(d, split_seed(seed, s)));
    }
    let mut best = candidates
        .into_iter()
        .map(|v| (objective(&v), v))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap();
    // Gradient-free polish: shrinking random coordinate moves.
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, 77));
    let mut radius = 0.5;
    for _ in 0..budget {
        let mut cand = best.1.clone();
        for z in cand.iter_mut() {
            *z += Complex64::new(
                radius * (rng.random::<f64>() - 0.5),
                radius * (rng.random::<f64>() - 0.5),
            );
        }
        normalize(&mut cand);
        let f = objective(&cand);
        if f > best.0 {
            best = (f, cand);
        } else {
            radius *= 0.97;
        }
    }
    Ok(best.1)
}

/// Pretty-good measurement discrimination of the family from m channel uses
/// of the product probe.
pub fn discriminate(
    family: &ChannelFamily,
    m: usize,
    probe: &[Complex64],
    guards: &Guards,
) -> Result<DiscriminationReport> {
    let n = family.len();
    if n < 2 {
        return Err(Error::InvalidParameter("discrimination needs N ≥ 2".into()));
    }
    let dim_out = family.out_dim().pow(m as u32);
    if dim_out > guards.max_dense_dim {
        return Err(Error::GuardExceeded(format!(
            "output dim {dim_out} over cap"
        )));
    }
    let probe_rho = DensityOperator::from_pure(probe)?;
    let mut omega = CMatrix::identity(1);
    for _ in 0..m {
        omega = kron(&omega, probe_rho.matrix());
    }
    let outputs: Vec<CMatrix> = family
        .members()
        .iter()
        .map(|ch| apply_tensor_power_per_site(ch, m, &omega))
        .collect::<Result<_>>()?;
    // Indistinguishable family: every pairwise distance vanishes.
    let mut max_pair = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            max_pair = max_pair.max(trace_norm_hermitian(&outputs[i].sub(&outputs[j]))?);
        }
    }
    let indistinguishable = max_pair < 1e-9;
    // PGM with equal weights; the kernel of the average is shared out
    // equally to keep the POVM complete.
    let mut avg = CMatrix::zeros(dim_out, dim_out);
    for out in &outputs {
        avg = avg.add(&out.scale_re(1.0 / n as f64));
    }
    let inv_sqrt = psd_inv_sqrt(&avg, tol::PINV_CUTOFF)?;
    let support = inv_sqrt.mul(&avg).mul(&inv_sqrt);
    let complement = CMatrix::identity(dim_out).sub(&support);
    let povm: Vec<CMatrix> = outputs
        .iter()
        .map(|out| {
            inv_sqrt
                .mul(&out.scale_re(1.0 / n as f64))
                .mul(&inv_sqrt)
                .add(&complement.scale_re(1.0 / n as f64))
        })
        .collect();
    let mut success = vec![vec![0.0; n]; n];
    for (i, p) in povm.iter().enumerate() {
        for (j, out) in outputs.iter().enumerate() {
            success[i][j] = p.mul(out).trace().re;
        }
    }
    let min_success = (0..n).map(|i| success[i][i]).fold(f64::INFINITY, f64::min);
    let avg_success = (0..n).map(|i| success[i][i]).sum::<f64>() / n as f64;
    Ok(DiscriminationReport {
        probe: probe.to_vec(),
        m,
        povm,
        success,
        min_success,
        avg_success,
        indistinguishable,
    })
}

/// Fit the decay 1 - s(m) ≈ C·f^m over a sweep by least squares on
/// log(1 - s); returns None when every success is numerically 1.
pub fn fit_decay(reports: &[DiscriminationReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| {
            let gap = 1.0 - r.avg_success;
            if gap > 1e-14 {
                Some((r.m as f64, gap.ln()))
            } else {
                None
            }
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(slope.exp())
}

/// One member's informed code: a subspace of H^{⊗t} and a recovery tuned to
/// that member.
#[derive(Debug, Clone)]
pub struct InformedCode {
    pub frame: SubspaceFrame,
    pub recovery: RecoveryMap,
    pub fidelity: f64,
}

/// Build an informed code of dimension k at block length t for one channel:
/// candidate frames (computational span and the uniform-superposition pair)
/// are scored by the recovery optimizer and the best kept.
pub fn informed_code(
    ch: &KrausChannel,
    t: usize,
    k: usize,
    opt_iters: usize,
    guards: &Guards,
) -> Result<InformedCode> {
    let d = ch.in_dim();
    let dim = d.pow(t as u32);
    let pow = ch.tensor_power(t, guards)?;
    let mut candidates = vec![SubspaceFrame::first_k(dim, k)?];
    if d == 2 && k == 2 {
        // span{|+…+⟩, |-…-⟩}: the phase-repetition pair.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let minus = [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)];
        let mut v = CMatrix::zeros(dim, 2);
        let mut col_p = vec![crate::qmat::C_ONE];
        let mut col_m = vec![crate::qmat::C_ONE];
        for _ in 0..t {
            let mut np = Vec::with_capacity(col_p.len() * 2);
            let mut nm = Vec::with_capacity(col_m.len() * 2);
            for &c in &col_p {
                np.push(c * plus[0]);
                np.push(c * plus[1]);
            }
            for &c in &col_m {
                nm.push(c * minus[0]);
                nm.push(c * minus[1]);
            }
            col_p = np;
            col_m = nm;
        }
        for i in 0..dim {
            v.set(i, 0, col_p[i]);
            v.set(i, 1, col_m[i]);
        }
        candidates.push(SubspaceFrame::new(v)?);
    }
    let mut best: Option<(RecoveryOutcome, SubspaceFrame)> = None;
    for frame in candidates {
        let out = optimize_recovery(&frame.pi(), &pow, opt_iters, 1e-11)?;
        if best
            .as_ref()
            .map(|(b, _)| out.fidelity > b.fidelity)
            .unwrap_or(true)
        {
            best = Some((out, frame));
        }
    }
    let (out, frame) = best.expect("at least one candidate frame");
    Ok(InformedCode {
        frame,
        recovery: out.recovery,
        fidelity: out.fidelity,
    })
}

/// Per-member outcome of the estimate-then-decode conversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionRow {
    /// Diagonal discrimination success tr(pᵢ Nᵢ^{⊗m}(ω)).
    pub success: f64,
    /// Informed fidelity F_e(π_{F_i}, R_i ∘ N_i^{⊗t}).
    pub informed_fidelity: f64,
    /// Combined fidelity F_e(π_{F'_i}, R^{m+t} ∘ N_i^{⊗(m+t)}).
    pub combined_fidelity: f64,
    /// Product lower bound successᵢ · informedᵢ.
    pub product_bound: f64,
}

/// Report of convert_code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionReport {
    pub m: usize,
    pub t: usize,
    pub rows: Vec<ConversionRow>,
}

impl ConversionReport {
    pub fn product_bound_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.combined_fidelity >= r.product_bound - 1e-9)
    }
}

/// Estimate-then-decode conversion: the combined recovery is
/// R = Σⱼ R̂ⱼ ⊗ Rⱼ with R̂ⱼ(σ) = ω tr(pⱼ σ), the combined code is
/// {C·x} ⊗ Fᵢ, and the member fidelity factorizes exactly as
/// Σⱼ tr(pⱼ Nᵢ^{⊗m}(ω)) · F_e(π_{Fᵢ}, Rⱼ ∘ Nᵢ^{⊗t}).
pub fn convert_code(
    codes: &[InformedCode],
    family: &ChannelFamily,
    disc: Option<&DiscriminationReport>,
    t: usize,
    guards: &Guards,
) -> Result<ConversionReport> {
    let n = family.len();
    if codes.len() != n {
        return Err(Error::DimensionMismatch(
            "one informed code per member required".into(),
        ));
    }
    // A single-member family needs no estimation stage: the conversion is
    // the identity and the fidelity is unchanged.
    if n == 1 {
        let pow = family.members()[0].tensor_power(t, guards)?;
        let fe = fe_with_recovery(&codes[0].frame.pi(), &codes[0].recovery, &pow)?;
        return Ok(ConversionReport {
            m: 0,
            t,
            rows: vec![ConversionRow {
                success: 1.0,
                informed_fidelity: fe,
                combined_fidelity: fe,
                product_bound: fe,
            }],
        });
    }
    let disc = disc.ok_or_else(|| {
        Error::InvalidParameter("discrimination report required for N ≥ 2".into())
    })?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let pow_i = family.members()[i].tensor_power(t, guards)?;
        let mut combined = 0.0;
        let mut informed_fidelity = 0.0;
        for (j, code_j) in codes.iter().enumerate() {
            // The estimate branch: probability that the PGM points at j when
            // the channel is i.
            let p_ji = disc.success[j][i];
            // The decode branch evaluated for code/recovery pair j against
            // channel i on the code subspace of member i.
            let fe = fe_with_recovery(&codes[i].frame.pi(), &code_j.recovery, &pow_i)?;
            combined += p_ji * fe;
            if j == i {
                informed_fidelity = fe;
            }
        }
        rows.push(ConversionRow {
            success: disc.success[i][i],
            informed_fidelity,
            combined_fidelity: combined,
            product_bound: disc.success[i][i] * informed_fidelity,
        });
    }
    Ok(ConversionReport {
        m: disc.m,
        t,
        rows,
    })
}

/// One row of the finite-blocklength convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsstRow {
    pub l: usize,
    pub delta: f64,
    pub tau: f64,
    /// (1/l) min_i I_c(π_{δ,l}, Nᵢ^{⊗l}).
    pub ic_per_use: f64,
    /// min_i I_c(ρ, Nᵢ).
    pub target: f64,
    pub deviation: f64,
    /// The analytic Θ/Δ envelope; infinite when η_l(δ) ≤ 0 at desk scale.
    pub envelope: f64,
    pub eta: f64,
    pub typical_dim: u128,
}

/// Θ_l(δ, D) = -(1/l) log₂ η_l(δ) + 2φ(δ) - dδ log₂(τ/(2D)); infinite when
/// η ≤ 0.
fn theta_l(l: usize, delta: f64, d: usize, big_d: usize, tau: f64, eta: f64) -> f64 {
    if eta <= 0.0 {
        return f64::INFINITY;
    }
    -eta.log2() / l as f64 + 2.0 * phi(delta, d)
        - d as f64 * delta * (tau / (2.0 * big_d as f64)).log2()
}

/// Finite-blocklength convergence table: for each l the normalized coherent
/// information of the typical state is compared against the single-copy
/// target and the analytic envelope.
pub fn bsst_check(
    rho: &DensityOperator,
    family: &ChannelFamily,
    ls: &[usize],
    deltas: &[f64],
    taus: &[f64],
    guards: &Guards,
) -> Result<Vec<BsstRow>> {
    if ls.len() != deltas.len() || ls.len() != taus.len() {
        return Err(Error::DimensionMismatch("schedule lengths differ".into()));
    }
    let d = rho.dim();
    let target = min_coherent_information(rho, family, guards)?;
    let c = tol::typicality_c();
    let mut rows = Vec::with_capacity(ls.len());
    for ((&l, &delta), &tau) in ls.iter().zip(deltas.iter()).zip(taus.iter()) {
        let (spec, cert) = typical_projector(rho, l, delta, c, guards)?;
        let pi_dl = spec.normalized_state()?;
        let mut ic_min = f64::INFINITY;
        let mut env_dim_max = 1usize;
        for ch in family.members() {
            ic_min = ic_min.min(coherent_information_tensor_power(&pi_dl, ch, l)?);
            env_dim_max = env_dim_max.max(ch.kraus_count());
        }
        let ic_per_use = ic_min / l as f64;
        let dp = family.out_dim();
        let theta_out = theta_l(l, delta, d, dp, tau, cert.eta);
        let theta_env = theta_l(l, delta, d, env_dim_max, tau, cert.eta);
        let he = env_dim_max as f64;
        let delta_l = theta_out
            + theta_env
            + tau * (he / tau).log2()
            + l as f64 * tau * (he / (l as f64 * tau)).log2();
        let envelope = delta_l
            + tau
            + 2.0 * l as f64 * tau * (d as f64 / (l as f64 * tau)).log2()
            + tau
            + 2.0 * tau * (d as f64 / tau).log2();
        rows.push(BsstRow {
            l,
            delta,
            tau,
            ic_per_use,
            target,
            deviation: (ic_per_use - target).abs(),
            envelope,
            eta: cert.eta,
            typical_dim: spec.dim(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::random_density;

    fn guards() -> Guards {
        Guards::default()
    }

    fn h2(p: f64) -> f64 {
        crate::information::shannon_entropy(&[p, 1.0 - p])
    }

    #[test]
    fn adapted_net_singleton_family() {
        let fam = GridFamily {
            kind: ParamChannelKind::PhaseFlip,
            lo: 0.1,
            hi: 0.1,
        };
        let net = build_adapted_net(&fam, 0.1).unwrap();
        assert_eq!(net.members.len(), 1);
        assert!(net.base_cover_radius == 0.0);
    }

    #[test]
    fn adapted_net_covers_interval() {
        let fam = GridFamily {
            kind: ParamChannelKind::PhaseFlip,
            lo: 0.0,
            hi: 0.2,
        };
        let tau = 0.1;
        let net = build_adapted_net(&fam, tau).unwrap();
        assert!(net.base_cover_radius <= tau / 2.0 + 1e-12);
        // Verified covering: the diamond estimate from a family member to
        // its base representative is below the certified radius.
        for p in [0.03, 0.11, 0.17] {
            let idx = net.nearest_index(p);
            let est = diamond_distance(
                &KrausChannel::phase_flip(p),
                &net.base_members[idx],
                3,
                1e-9,
                5,
            )
            .unwrap();
            assert!(
                est.value <= net.base_cover_radius + 1e-7,
                "p={p}: est {} radius {}",
                est.value,
                net.base_cover_radius
            );
        }
        // Cardinality sanity against the loose bound.
        let log2_cap = 2.0 * 16.0 * (6.0 / tau).log2();
        assert!((net.members.len() as f64).log2() <= log2_cap);
    }

    #[test]
    fn adapted_net_members_have_floor_spectrum() {
        // Mixed members satisfy N(ρ) ≥ (τ/(2d')) 1 exactly.
        let fam = GridFamily {
            kind: ParamChannelKind::PhaseFlip,
            lo: 0.0,
            hi: 0.2,
        };
        let tau = 0.1;
        let net = build_adapted_net(&fam, tau).unwrap();
        for seed in 0..4u64 {
            let rho = random_density(2, seed);
            for member in net.members.members() {
                let out = member.apply_density(&rho).unwrap();
                let min_eig = out.eigh().unwrap().eigenvalues.last().cloned().unwrap();
                assert!(min_eig >= tau / 4.0 - 1e-12, "min eig {min_eig}");
            }
        }
    }

    #[test]
    fn net_cardinality_reference_values() {
        // τ=1, d=d'=2: log₂ bound = 32·log₂3.
        let v = net_cardinality_bound_log2(1.0, 2, 2).unwrap();
        assert!((v - 32.0 * 3f64.log2()).abs() < 1e-12);
        // τ=1, d=d'=1: bound 9, exponent 2.
        let v = net_cardinality_bound_log2(1.0, 1, 1).unwrap();
        assert!((2f64.powf(v) - 9.0).abs() < 1e-9);
        // τ=0.5, d=d'=2: 32·log₂6.
        let v = net_cardinality_bound_log2(0.5, 2, 2).unwrap();
        assert!((v - 32.0 * 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn min_coherent_information_cases() {
        let g = guards();
        let pi = DensityOperator::maximally_mixed(2);
        let single =
            ChannelFamily::new(vec![KrausChannel::phase_flip(0.1)]).unwrap();
        let v = min_coherent_information(&pi, &single, &g).unwrap();
        assert!((v - (1.0 - h2(0.1))).abs() < 1e-10);

        let pair = ChannelFamily::new(vec![
            KrausChannel::identity(2),
            KrausChannel::useless(2, 2),
        ])
        .unwrap();
        let v = min_coherent_information(&pi, &pair, &g).unwrap();
        assert!((v + 1.0).abs() < 1e-10);

        let flips = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.05),
            KrausChannel::phase_flip(0.1),
        ])
        .unwrap();
        let v = min_coherent_information(&pi, &flips, &g).unwrap();
        assert!((v - (1.0 - h2(0.1))).abs() < 1e-10);
    }

    #[test]
    fn tensor_power_ic_matches_single_copy_scaling() {
        // I_c(ρ^{⊗l}-like product states, N^{⊗l}) = l · I_c for product
        // inputs; checked against the dense small-l route.
        let g = guards();
        let ch = KrausChannel::phase_flip(0.1);
        let rho = DensityOperator::from_probabilities(&[0.7, 0.3]).unwrap();
        let rho2 = DensityOperator::new(kron(rho.matrix(), rho.matrix())).unwrap();
        let via_sites = coherent_information_tensor_power(&rho2, &ch, 2).unwrap();
        let pow = ch.tensor_power(2, &g).unwrap();
        let via_dense = coherent_information(&rho2, &pow, &g).unwrap();
        assert!((via_sites - via_dense).abs() < 1e-9);
        let single = coherent_information(&rho, &ch, &g).unwrap();
        assert!((via_sites - 2.0 * single).abs() < 1e-9);
    }

    #[test]
    fn approximation_identical_pair_vanishes() {
        let g = guards();
        let ch = KrausChannel::phase_flip(0.1);
        let family = ChannelFamily::new(vec![ch.clone()]).unwrap();
        let rho_l = DensityOperator::maximally_mixed(4);
        let rho_s = DensityOperator::maximally_mixed(2);
        let pow = ch.tensor_power(2, &g).unwrap();
        let rec = optimize_recovery(&rho_l, &pow, 2, 1e-10).unwrap().recovery;
        let rep = approximation_check(
            &ch, &ch, &family, &family, &rho_l, &rho_s, &rec, 2, 0.05, &g, 3,
        )
        .unwrap();
        assert!(rep.diamond_tensor_estimate < 1e-8);
        assert!(rep.fe_difference < 1e-12);
        assert!(rep.ic_shift < 1e-12);
        assert!(rep.all_hold());
    }

    #[test]
    fn approximation_close_phase_flips() {
        let g = guards();
        let n_true = KrausChannel::phase_flip(0.06);
        let n_net = KrausChannel::phase_flip(0.05);
        let family = ChannelFamily::new(vec![n_true.clone()]).unwrap();
        let net = ChannelFamily::new(vec![n_net.clone()]).unwrap();
        let rho_l = DensityOperator::maximally_mixed(16);
        let rho_s = DensityOperator::maximally_mixed(2);
        let pow = n_net.tensor_power(4, &g).unwrap();
        let rec = optimize_recovery(&rho_l, &pow, 3, 1e-10).unwrap().recovery;
        let rep = approximation_check(
            &n_true, &n_net, &family, &net, &rho_l, &rho_s, &rec, 4, 0.05, &g, 9,
        )
        .unwrap();
        assert!(rep.fe_difference < 0.2, "F_e diff {}", rep.fe_difference);
        assert!(rep.all_hold(), "{rep:?}");
    }

    #[test]
    fn capacity_single_phase_flip() {
        let g = guards();
        let family = ChannelFamily::new(vec![KrausChannel::phase_flip(0.1)]).unwrap();
        let est = compound_capacity_lower(&family, 1, 60, 3, 11, &g).unwrap();
        let expect = 1.0 - h2(0.1);
        assert!(
            (est.value - expect).abs() < 1e-4,
            "value {} vs {expect}",
            est.value
        );
        let diff = est.rho.matrix().sub(DensityOperator::maximally_mixed(2).matrix());
        assert!(trace_norm_hermitian(&diff).unwrap() < 0.01);
    }

    #[test]
    fn capacity_identity_family() {
        let g = guards();
        let family = ChannelFamily::new(vec![KrausChannel::identity(2)]).unwrap();
        let est = compound_capacity_lower(&family, 1, 40, 2, 4, &g).unwrap();
        assert!((est.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn capacity_dominates_uniform_start() {
        let g = guards();
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.1),
            KrausChannel::amplitude_damping(0.2),
        ])
        .unwrap();
        let est = compound_capacity_lower(&family, 1, 30, 2, 8, &g).unwrap();
        let at_pi =
            min_coherent_information(&DensityOperator::maximally_mixed(2), &family, &g).unwrap();
        assert!(est.value >= at_pi - 1e-9);
    }

    #[test]
    fn probe_for_phase_flips_prefers_coherence() {
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.0),
            KrausChannel::phase_flip(0.3),
        ])
        .unwrap();
        let probe = optimize_probe(&family, 150, 5).unwrap();
        // |+⟩-like probes maximize the output distance 2|q₁-q₂||αβ|.
        let balance = probe[0].norm() * probe[1].norm();
        assert!(balance > 0.45, "probe balance {balance}");
    }

    #[test]
    fn pgm_identity_vs_useless_reference() {
        // Probe |0⟩, m=1: PGM success is 2/3 for both members.
        let family = ChannelFamily::new(vec![
            KrausChannel::identity(2),
            KrausChannel::useless(2, 2),
        ])
        .unwrap();
        let probe = vec![crate::qmat::C_ONE, C_ZERO];
        let rep = discriminate(&family, 1, &probe, &guards()).unwrap();
        assert!((rep.success[0][0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((rep.success[1][1] - 2.0 / 3.0).abs() < 1e-10);
        // Barnum-Knill floor: PGM ≥ (Helstrom)² with Helstrom = 3/4.
        assert!(rep.avg_success >= 0.75 * 0.75 - 1e-12);
        assert!(!rep.indistinguishable);
        // POVM completeness.
        let total = rep
            .povm
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, p| acc.add(p));
        assert!(total.max_abs_diff(&CMatrix::identity(2)) < tol::POVM_COMPLETE);
    }

    #[test]
    fn pgm_identical_members_flagged() {
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.1),
            KrausChannel::phase_flip(0.1),
        ])
        .unwrap();
        let probe = optimize_probe(&family, 50, 3).unwrap();
        let rep = discriminate(&family, 2, &probe, &guards()).unwrap();
        assert!(rep.indistinguishable);
        assert!((rep.success[0][0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pgm_success_monotone_for_id_vs_useless() {
        let family = ChannelFamily::new(vec![
            KrausChannel::identity(2),
            KrausChannel::useless(2, 2),
        ])
        .unwrap();
        let probe = vec![crate::qmat::C_ONE, C_ZERO];
        let mut last = 0.0;
        for m in 1..=6 {
            let rep = discriminate(&family, m, &probe, &guards()).unwrap();
            assert!(
                rep.avg_success >= last - 1e-12,
                "m={m}: {} < {last}",
                rep.avg_success
            );
            last = rep.avg_success;
        }
        assert!(last > 0.98, "success at m=6: {last}");
    }

    #[test]
    fn pgm_phase_flip_pair_matches_binomial_oracle() {
        // Same-basis phase flips with a |+⟩ probe reduce to classical
        // discrimination of Binomial(m, p₁) vs Binomial(m, p₂).
        let (p1, p2, m) = (0.0, 0.3, 4);
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(p1),
            KrausChannel::phase_flip(p2),
        ])
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let probe = vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let rep = discriminate(&family, m, &probe, &guards()).unwrap();
        let binom = |mm: usize, k: usize, p: f64| {
            crate::typicality::multinomial(&[mm - k, k]) as f64
                * p.powi(k as i32)
                * (1.0 - p).powi((mm - k) as i32)
        };
        let mut oracle = [0.0, 0.0];
        for k in 0..=m {
            let q1 = binom(m, k, p1);
            let q2 = binom(m, k, p2);
            if q1 + q2 > 0.0 {
                oracle[0] += q1 * q1 / (q1 + q2);
                oracle[1] += q2 * q2 / (q1 + q2);
            }
        }
        assert!((rep.success[0][0] - oracle[0]).abs() < 1e-9);
        assert!((rep.success[1][1] - oracle[1]).abs() < 1e-9);
    }

    #[test]
    fn conversion_product_bound_holds() {
        let g = guards();
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.02),
            KrausChannel::phase_flip(0.25),
        ])
        .unwrap();
        let probe = optimize_probe(&family, 100, 21).unwrap();
        let disc = discriminate(&family, 3, &probe, &g).unwrap();
        let codes: Vec<InformedCode> = family
            .members()
            .iter()
            .map(|ch| informed_code(ch, 3, 2, 20, &g).unwrap())
            .collect();
        let rep = convert_code(&codes, &family, Some(&disc), 3, &g).unwrap();
        assert!(rep.product_bound_holds(), "{rep:?}");
        for row in &rep.rows {
            assert!(row.combined_fidelity <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn conversion_factorized_matches_dense_composition() {
        // Small instance (m=1, t=1): evaluate the combined F_e through the
        // explicit tensor recovery on the doubled space and compare.
        let g = guards();
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.05),
            KrausChannel::amplitude_damping(0.4),
        ])
        .unwrap();
        let probe = optimize_probe(&family, 80, 31).unwrap();
        let disc = discriminate(&family, 1, &probe, &g).unwrap();
        let codes: Vec<InformedCode> = family
            .members()
            .iter()
            .map(|ch| informed_code(ch, 1, 2, 10, &g).unwrap())
            .collect();
        let rep = convert_code(&codes, &family, Some(&disc), 1, &g).unwrap();

        // Dense route: R = Σⱼ R̂ⱼ ⊗ Rⱼ applied to Nᵢ^{⊗2} on H⊗H, with the
        // code {C·x}⊗Fᵢ.
        let omega = DensityOperator::from_pure(&disc.probe).unwrap();
        for (i, row) in rep.rows.iter().enumerate() {
            let ni = &family.members()[i];
            let big = ni.tensor_power(2, &g).unwrap();
            // Combined code state ω ⊗ π_{F_i} and its purification overlap:
            // evaluate F_e through explicit Kraus sums of R∘N.
            let mut total = 0.0;
            for (j, code_j) in codes.iter().enumerate() {
                // R̂ⱼ(σ) = ω tr(pⱼ σ): Kraus {√λ |x⟩⟨v|} over the eigenpairs
                // of pⱼ.
                let pj = &disc.povm[j];
                let pj_eig = pj.eigh().unwrap();
                let rj = code_j.recovery.to_kraus_channel().unwrap();
                let mut kraus = Vec::new();
                for (kk, &lam) in pj_eig.eigenvalues.iter().enumerate() {
                    if lam <= 1e-14 {
                        continue;
                    }
                    let v = pj_eig.eigenvector(kk);
                    let mut est = CMatrix::zeros(2, 2);
                    for r in 0..2 {
                        for c in 0..2 {
                            est.set(
                                r,
                                c,
                                disc.probe[r] * v[c].conj() * Complex64::new(lam.sqrt(), 0.0),
                            );
                        }
                    }
                    for rk in rj.kraus() {
                        kraus.push(kron(&est, rk));
                    }
                }
                let branch = KrausChannel::new_cptd(4, 4, kraus).unwrap();
                let composed = branch.compose(&big, &g).unwrap();
                let code_state = DensityOperator::new(kron(
                    omega.matrix(),
                    codes[i].frame.pi().matrix(),
                ))
                .unwrap();
                total +=
                    crate::information::entanglement_fidelity(&code_state, &composed, &g).unwrap();
            }
            assert!(
                (total - row.combined_fidelity).abs() < 1e-8,
                "member {i}: dense {total} vs factored {}",
                row.combined_fidelity
            );
        }
    }

    #[test]
    fn conversion_single_member_is_identity() {
        let g = guards();
        let family = ChannelFamily::new(vec![KrausChannel::phase_flip(0.1)]).unwrap();
        let code = informed_code(&family.members()[0], 2, 2, 10, &g).unwrap();
        let fe = code.fidelity;
        let rep = convert_code(&[code], &family, None, 2, &g).unwrap();
        assert!((rep.rows[0].combined_fidelity - fe).abs() < 1e-9);
        assert!((rep.rows[0].success - 1.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_crossed_flip_pair() {
        // Phase flips in the X and Z bases: the compound value cannot beat
        // either single-channel value.
        let g = guards();
        let z = KrausChannel::phase_flip(0.1);
        let x = KrausChannel::bit_flip(0.1);
        let family = ChannelFamily::new(vec![z.clone(), x.clone()]).unwrap();
        let est = compound_capacity_lower(&family, 1, 50, 3, 19, &g).unwrap();
        let pi = DensityOperator::maximally_mixed(2);
        let single_z = coherent_information(&pi, &z, &g).unwrap();
        let single_x = coherent_information(&pi, &x, &g).unwrap();
        assert!(est.value <= single_z.min(single_x) + 1e-9);
        assert!(est.value >= min_coherent_information(&pi, &family, &g).unwrap() - 1e-9);
    }

    #[test]
    fn pgm_monotone_for_separated_flips() {
        // {phase-flip 0, phase-flip 0.3} with a |+⟩ probe: success grows
        // with m toward 1.
        let family = ChannelFamily::new(vec![
            KrausChannel::phase_flip(0.0),
            KrausChannel::phase_flip(0.3),
        ])
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let probe = vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let mut last = 0.0;
        for m in 1..=5 {
            let rep = discriminate(&family, m, &probe, &guards()).unwrap();
            assert!(rep.avg_success >= last - 1e-12);
            last = rep.avg_success;
        }
        assert!(last > 0.8, "success after 5 uses: {last}");
    }

    #[test]
    fn fe_continuity_bounded_by_diamond_distance() {
        // |F_e(ρ, R∘N₁^{⊗l}) - F_e(ρ, R∘N₂^{⊗l})| < l·||N₁-N₂||◇; the
        // phase-flip pair has an exactly attained diamond estimate.
        let g = guards();
        let n1 = KrausChannel::phase_flip(0.05);
        let n2 = KrausChannel::phase_flip(0.11);
        let est = diamond_distance(&n1, &n2, 3, 1e-10, 23).unwrap();
        assert!((est.value - 0.12).abs() < 1e-7);
        let l = 2;
        let rho = DensityOperator::maximally_mixed(4);
        let pow1 = n1.tensor_power(l, &g).unwrap();
        let pow2 = n2.tensor_power(l, &g).unwrap();
        let rec = optimize_recovery(&rho, &pow1, 4, 1e-10).unwrap().recovery;
        let f1 = fe_with_recovery(&rho, &rec, &pow1).unwrap();
        let f2 = fe_with_recovery(&rho, &rec, &pow2).unwrap();
        assert!((f1 - f2).abs() < l as f64 * est.value);
    }

    #[test]
    fn averaged_fidelity_linearity_arithmetic() {
        // Average-channel fidelity equals Σ λᵢ F_e,i and the ε/λᵢ
        // back-conversion holds on computed values.
        let g = guards();
        let rho = DensityOperator::maximally_mixed(2);
        let n1 = KrausChannel::phase_flip(0.05);
        let n2 = KrausChannel::phase_flip(0.2);
        let lams = [0.3, 0.7];
        let f1 = crate::information::entanglement_fidelity(&rho, &n1, &g).unwrap();
        let f2 = crate::information::entanglement_fidelity(&rho, &n2, &g).unwrap();
        let mixed = KrausChannel::mixture(&[(lams[0], &n1), (lams[1], &n2)]).unwrap();
        let favg = crate::information::entanglement_fidelity(&rho, &mixed, &g).unwrap();
        assert!((favg - (lams[0] * f1 + lams[1] * f2)).abs() < 1e-10);
        let eps = 1.0 - favg;
        assert!(f1 >= 1.0 - eps / lams[0] - 1e-12);
        assert!(f2 >= 1.0 - eps / lams[1] - 1e-12);
    }

    #[test]
    fn bsst_uniform_state_has_zero_deviation() {
        // Maximally mixed input: the typical projector is full, π_{δ,l} is
        // exactly π^{⊗l}, and the normalized coherent information matches
        // the single-copy value for every l.
        let g = guards();
        let rho = DensityOperator::maximally_mixed(2);
        let family = ChannelFamily::new(vec![KrausChannel::phase_flip(0.1)]).unwrap();
        let rows = bsst_check(
            &rho,
            &family,
            &[2, 4],
            &[0.3, 0.3],
            &[0.05, 0.05],
            &g,
        )
        .unwrap();
        for row in &rows {
            assert!(row.deviation < 1e-9, "l={}: deviation {}", row.l, row.deviation);
            assert!(row.deviation <= row.envelope);
        }
    }

    #[test]
    fn bsst_rows_respect_envelope() {
        let g = guards();
        let rho = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        let family = ChannelFamily::new(vec![KrausChannel::phase_flip(0.1)]).unwrap();
        let rows = bsst_check(
            &rho,
            &family,
            &[2, 4, 6],
            &[0.45, 0.45, 0.45],
            &[0.05, 0.05, 0.05],
            &g,
        )
        .unwrap();
        for row in &rows {
            assert!(row.deviation <= row.envelope, "{row:?}");
        }
    }
}
