//! Frequency-typical machinery.
//!
//! Typical sets are enumerated type by type (compositions of the block
//! length), never over raw d^l sequences. Spectral typicality groups equal
//! eigenvalues into one letter so the projector is basis-independent; Kraus
//! typicality keeps one letter per canonical Kraus operator.

use serde::{Deserialize, Serialize};

use crate::channels::{canonical_kraus, CanonicalKraus, KrausChannel};
use crate::error::{Error, Result};
use crate::information::shannon_entropy;
use crate::qmat::{kron, CMatrix, DensityOperator};
use crate::tol::{self, Guards};

/// One type class: occurrence counts per letter plus the number of sequences
/// carrying those counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeClass {
    pub counts: Vec<usize>,
    pub multiplicity: u128,
}

/// Multinomial coefficient l! / Π kᵢ!.
pub fn multinomial(counts: &[usize]) -> u128 {
    let mut result: u128 = 1;
    let mut n: u128 = 0;
    for &k in counts {
        for j in 1..=k as u128 {
            n += 1;
            result = result * n / j;
        }
    }
    result
}

fn compositions(l: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
        if pos == cur.len() - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(out, cur, pos + 1, left - k);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    rec(&mut out, &mut cur, 0, l);
    out
}

/// ℓ₁ test with the absolute-continuity requirement p ≪ base. The distance
/// is evaluated in the l-scaled domain (Σ|kᵢ - l·bᵢ| < l·δ) so boundary
/// types such as k/l hitting the radius exactly are classified the way exact
/// arithmetic would classify them.
fn type_passes(counts: &[usize], base: &[f64], l: usize, delta: f64) -> bool {
    let lf = l as f64;
    let mut dist = 0.0;
    for (&k, &b) in counts.iter().zip(base.iter()) {
        if k > 0 && b == 0.0 {
            return false;
        }
        dist += (k as f64 - lf * b).abs();
    }
    let thr = lf * delta;
    dist < thr - 1e-12 * thr.max(1.0)
}

/// Types of length-l sequences whose empirical distribution is δ-close to
/// `base` in ℓ₁ and absolutely continuous with respect to it.
pub fn typical_types(base: &[f64], l: usize, delta: f64) -> Vec<TypeClass> {
    compositions(l, base.len())
        .into_iter()
        .filter(|c| type_passes(c, base, l, delta))
        .map(|counts| {
            let multiplicity = multinomial(&counts);
            TypeClass {
                counts,
                multiplicity,
            }
        })
        .collect()
}

/// Probability mass Σ_{x ∈ T} Π base^{counts} of a collection of types.
pub fn types_mass(types: &[TypeClass], base: &[f64]) -> f64 {
    types
        .iter()
        .map(|t| {
            let mut p = t.multiplicity as f64;
            for (&k, &b) in t.counts.iter().zip(base.iter()) {
                p *= b.powi(k as i32);
            }
            p
        })
        .sum()
}

/// Total number of sequences across a collection of types.
pub fn types_count(types: &[TypeClass]) -> u128 {
    types.iter().map(|t| t.multiplicity).sum()
}

fn sequences_of_type(counts: &[usize]) -> Vec<Vec<u8>> {
    fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, rem: &mut [usize], left: usize) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for a in 0..rem.len() {
            if rem[a] == 0 {
                continue;
            }
            rem[a] -= 1;
            cur.push(a as u8);
            rec(out, cur, rem, left - 1);
            cur.pop();
            rem[a] += 1;
        }
    }
    let l: usize = counts.iter().sum();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    let mut rem = counts.to_vec();
    rec(&mut out, &mut cur, &mut rem, l);
    out
}

/// Exact enumeration of the frequency-typical set over an explicitly indexed
/// alphabet: every sequence of every passing type.
pub fn typical_set(base: &[f64], l: usize, delta: f64, guards: &Guards) -> Result<Vec<Vec<u8>>> {
    let s: f64 = base.iter().sum();
    if (s - 1.0).abs() > 1e-9 || base.iter().any(|&b| b < 0.0) {
        return Err(Error::InvalidParameter("base must be a distribution".into()));
    }
    if l > guards.max_block_length || base.len() > guards.max_alphabet {
        return Err(Error::GuardExceeded(format!(
            "typical_set with l={l}, d={} (caps {}, {})",
            base.len(),
            guards.max_block_length,
            guards.max_alphabet
        )));
    }
    let types = typical_types(base, l, delta);
    let count = types_count(&types);
    if count > 5_000_000 {
        return Err(Error::GuardExceeded(format!(
            "typical set has {count} sequences"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    for t in &types {
        out.extend(sequences_of_type(&t.counts));
    }
    Ok(out)
}

/// One spectral letter: a distinct eigenvalue and its multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralGroup {
    pub value: f64,
    pub multiplicity: usize,
}

/// Frequency-typical reduction of ρ^{⊗l}: the surviving spectral types, the
/// grouped base distribution, and optionally the materialized projector.
#[derive(Debug, Clone)]
pub struct TypicalSpec {
    pub delta: f64,
    pub l: usize,
    /// Grouped base distribution: weight value·multiplicity per letter.
    pub base: Vec<f64>,
    pub groups: Vec<SpectralGroup>,
    pub types: Vec<TypeClass>,
    /// Projector onto the typical subspace in the ambient product basis;
    /// materialized only when d^l is within the dense cap.
    pub projector: Option<CMatrix>,
}

impl TypicalSpec {
    /// tr q as an exact sequence count over the original, ungrouped basis.
    pub fn dim(&self) -> u128 {
        self.types
            .iter()
            .map(|t| {
                let mut m = t.multiplicity;
                for (&k, g) in t.counts.iter().zip(self.groups.iter()) {
                    m *= (g.multiplicity as u128).pow(k as u32);
                }
                m
            })
            .sum()
    }

    /// Maximally mixed state on the typical subspace (requires the
    /// materialized projector).
    pub fn normalized_state(&self) -> Result<DensityOperator> {
        let q = self
            .projector
            .as_ref()
            .ok_or_else(|| Error::GuardExceeded("projector not materialized".into()))?;
        let tr = q.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState("typical subspace is empty".into()));
        }
        DensityOperator::new(q.scale_re(1.0 / tr))
    }
}

/// Measured certificate for a frequency-typical projection: mass, eigenvalue
/// sandwich and dimension bounds with their analytic envelopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionCertificate {
    pub l: usize,
    pub delta: f64,
    /// tr(ρ^{⊗l} q), computed classically over types.
    pub mass: f64,
    /// Measured min/max of -(1/l)·log₂ λ_{x^l} over retained sequences
    /// (absent when the typical set is empty).
    pub exponent_min: Option<f64>,
    pub exponent_max: Option<f64>,
    /// log₂ tr(q).
    pub log2_dim: f64,
    /// ||q ρ^{⊗l} q||₂² = Σ_{x∈T} λ_x², with its analytic envelope
    /// 2^{-l(S-3φ)} carried as a log₂ value.
    pub hs_sq: f64,
    pub hs_sq_bound_log2: f64,
    pub entropy: f64,
    pub phi: f64,
    pub h: f64,
    pub eta: f64,
    /// Configured constant in the mass bound.
    pub c: f64,
    /// Largest c for which the mass bound holds on this instance
    /// (infinite when the measured mass is 1).
    pub c_max: f64,
    pub item1_holds: bool,
    pub item2_holds: bool,
    pub item3_holds: bool,
}

impl ProjectionCertificate {
    pub fn all_hold(&self) -> bool {
        self.item1_holds && self.item2_holds && self.item3_holds
    }
}

fn group_spectrum(spectrum: &[f64]) -> Vec<SpectralGroup> {
    let mut groups: Vec<SpectralGroup> = Vec::new();
    for &v in spectrum {
        if v <= 0.0 {
            // Zero eigenvalues never occur in sequences with p ≪ λ.
            continue;
        }
        match groups.last_mut() {
            Some(g) if (g.value - v).abs() <= tol::SPECTRAL_GROUPING * g.value.max(v) => {
                g.value = (g.value * g.multiplicity as f64 + v) / (g.multiplicity + 1) as f64;
                g.multiplicity += 1;
            }
            _ => groups.push(SpectralGroup {
                value: v,
                multiplicity: 1,
            }),
        }
    }
    groups
}

/// φ(δ) = -δ log₂(δ/d).
pub fn phi(delta: f64, d: usize) -> f64 {
    -delta * (delta / d as f64).log2()
}

/// h(l) = (d/l) log₂(l+1).
pub fn h_l(l: usize, d: usize) -> f64 {
    d as f64 / l as f64 * ((l + 1) as f64).log2()
}

/// h'(l) = (d²/l) log₂(l+1).
pub fn h_prime_l(l: usize, d: usize) -> f64 {
    (d * d) as f64 / l as f64 * ((l + 1) as f64).log2()
}

/// γ(δ) = -δ log₂(δ/n) over an n-letter Kraus alphabet.
pub fn gamma(delta: f64, n_kraus: usize) -> f64 {
    -delta * (delta / n_kraus as f64).log2()
}

/// Frequency-typical projection of ρ at block length l with a measured
/// certificate. Equal eigenvalues are grouped into one spectral letter, so
/// for degenerate spectra the projector is the basis-independent sum of
/// spectral projectors of ρ^{⊗l}.
pub fn typical_projector(
    rho: &DensityOperator,
    l: usize,
    delta: f64,
    c: f64,
    guards: &Guards,
) -> Result<(TypicalSpec, ProjectionCertificate)> {
    if delta <= 0.0 || delta >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "δ must lie in (0, 1/2), got {delta}"
        )));
    }
    if l > guards.max_block_length {
        return Err(Error::GuardExceeded(format!(
            "block length {l} over cap {}",
            guards.max_block_length
        )));
    }
    let d = rho.dim();
    let groups = group_spectrum(rho.spectrum());
    let base: Vec<f64> = groups
        .iter()
        .map(|g| g.value * g.multiplicity as f64)
        .collect();
    let types = typical_types(&base, l, delta);

    // Classical quantities over value-types.
    let mut mass = 0.0;
    let mut hs_sq = 0.0;
    let mut exp_min = f64::INFINITY;
    let mut exp_max = f64::NEG_INFINITY;
    for t in &types {
        let mut seqs = t.multiplicity as f64;
        let mut log2_eig = 0.0;
        for (&k, g) in t.counts.iter().zip(groups.iter()) {
            seqs *= (g.multiplicity as f64).powi(k as i32);
            log2_eig += k as f64 * g.value.log2();
        }
        let eig = 2f64.powf(log2_eig);
        mass += seqs * eig;
        hs_sq += seqs * eig * eig;
        let e = -log2_eig / l as f64;
        exp_min = exp_min.min(e);
        exp_max = exp_max.max(e);
    }

    let spec_counts = TypicalSpec {
        delta,
        l,
        base: base.clone(),
        groups: groups.clone(),
        types: types.clone(),
        projector: None,
    };
    let dim_count = spec_counts.dim();
    let log2_dim = if dim_count == 0 {
        f64::NEG_INFINITY
    } else {
        (dim_count as f64).log2()
    };

    let s = shannon_entropy(
        &rho.spectrum()
            .iter()
            .cloned()
            .filter(|&x| x > 0.0)
            .collect::<Vec<_>>(),
    );
    let phi_v = phi(delta, d);
    let h_v = h_l(l, d);
    let eta = 1.0 - 2f64.powf(-(l as f64) * (c * delta * delta - h_v));
    let item1 = mass >= eta - 1e-12;
    let item2 =
        types.is_empty() || (exp_max <= s + phi_v + 1e-9 && exp_min >= s - phi_v - 1e-9);
    let upper3 = dim_count == 0 || log2_dim <= l as f64 * (s + phi_v) + 1e-9;
    let lower3 = if eta > 0.0 {
        log2_dim >= eta.log2() + l as f64 * (s - phi_v) - 1e-9
    } else {
        true
    };
    let c_max = if mass >= 1.0 - 1e-15 {
        f64::INFINITY
    } else {
        (h_v - (1.0 - mass).log2() / l as f64) / (delta * delta)
    };

    let ambient = (d as f64).powi(l as i32);
    let projector = if ambient <= guards.max_dense_dim.min(2048) as f64 {
        Some(materialize_projector(rho, l, &groups, &types))
    } else {
        None
    };

    let spec = TypicalSpec {
        projector,
        ..spec_counts
    };
    let cert = ProjectionCertificate {
        l,
        delta,
        mass,
        exponent_min: if spec.types.is_empty() { None } else { Some(exp_min) },
        exponent_max: if spec.types.is_empty() { None } else { Some(exp_max) },
        log2_dim,
        hs_sq,
        hs_sq_bound_log2: -(l as f64) * (s - 3.0 * phi_v),
        entropy: s,
        phi: phi_v,
        h: h_v,
        eta,
        c,
        c_max,
        item1_holds: item1,
        item2_holds: item2,
        item3_holds: upper3 && lower3,
    };
    Ok((spec, cert))
}

fn materialize_projector(
    rho: &DensityOperator,
    l: usize,
    groups: &[SpectralGroup],
    types: &[TypeClass],
) -> CMatrix {
    let d = rho.dim();
    let dim = d.pow(l as u32);
    // Map each eigenvalue index to its spectral group; zero eigenvalues get
    // none and poison any sequence containing them.
    let mut index_group = vec![usize::MAX; d];
    {
        let mut g = 0usize;
        let mut used = 0usize;
        for (i, &v) in rho.spectrum().iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            if used == groups[g].multiplicity {
                g += 1;
                used = 0;
            }
            index_group[i] = g;
            used += 1;
        }
    }
    let retained: std::collections::HashSet<&[usize]> =
        types.iter().map(|t| t.counts.as_slice()).collect();
    // Diagonal indicator in the product eigenbasis; digit order does not
    // matter because types are order-invariant.
    let mut diag = vec![false; dim];
    let mut counts = vec![0usize; groups.len()];
    'outer: for (x, slot) in diag.iter_mut().enumerate() {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut rest = x;
        for _ in 0..l {
            let digit = rest % d;
            rest /= d;
            let g = index_group[digit];
            if g == usize::MAX {
                continue 'outer;
            }
            counts[g] += 1;
        }
        *slot = retained.contains(counts.as_slice());
    }
    // Rotate to the ambient basis: q = W 1_T W† with W = V^{⊗l}.
    let mut w = CMatrix::identity(1);
    for _ in 0..l {
        w = kron(&w, rho.eigenbasis());
    }
    let mut q = CMatrix::zeros(dim, dim);
    for (x, &keep) in diag.iter().enumerate() {
        if !keep {
            continue;
        }
        let col = w.column(x);
        for i in 0..dim {
            for j in 0..dim {
                let cur = q.get(i, j);
                q.set(i, j, cur + col[i] * col[j].conj());
            }
        }
    }
    q
}

/// Measured certificate for a typical Kraus reduction: word count and mass
/// against their analytic envelopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionCertificate {
    pub l: usize,
    pub delta: f64,
    /// n_{δ,l} = |K_{δ,l}|.
    pub n_words: u128,
    pub log2_n_words: f64,
    /// Count bound l·(S_e + γ(δ)) in log₂.
    pub count_bound_log2: f64,
    /// Measured minimal γ for which the count bound holds.
    pub gamma_min: f64,
    pub gamma: f64,
    /// r^{⊗l}(K_{δ,l}).
    pub mass: f64,
    /// Mass lower bound 1 - 2^{-l(c'δ² - h'(l))}.
    pub mass_bound: f64,
    pub entropy_exchange: f64,
    pub count_bound_holds: bool,
    pub mass_bound_holds: bool,
}

/// Typical Kraus reduction of a channel at block length l relative to π_G.
#[derive(Debug, Clone)]
pub struct TypicalKraus {
    pub canonical: CanonicalKraus,
    pub l: usize,
    pub delta: f64,
    /// Surviving word types over the canonical Kraus alphabet.
    pub types: Vec<TypeClass>,
    pub certificate: ReductionCertificate,
}

impl TypicalKraus {
    /// The retained Kraus words as index sequences, materialized on demand.
    pub fn words(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for t in &self.types {
            out.extend(sequences_of_type(&t.counts));
        }
        out
    }

    /// Materialize the reduced operation N_{δ,l}(ρ) = Σ_{y ∈ K} a_y ρ a_y†
    /// as a CPTD channel.
    pub fn materialize(&self, guards: &Guards) -> Result<KrausChannel> {
        let count = types_count(&self.types);
        if count > guards.max_kraus_words as u128 {
            return Err(Error::GuardExceeded(format!(
                "reduced operation has {count} Kraus words (cap {})",
                guards.max_kraus_words
            )));
        }
        let base = &self.canonical.channel;
        let mut kraus = Vec::with_capacity(count as usize);
        for word in self.words() {
            let mats: Vec<&CMatrix> = word.iter().map(|&i| &base.kraus()[i as usize]).collect();
            kraus.push(crate::qmat::kron_all(&mats));
        }
        KrausChannel::new_cptd(
            base.in_dim().pow(self.l as u32),
            base.out_dim().pow(self.l as u32),
            kraus,
        )
    }
}

/// Typical Kraus index set, word count and reduced operation for a CPTP
/// channel relative to the maximally mixed state π_G.
pub fn typical_kraus(
    ch: &KrausChannel,
    pi_g: &DensityOperator,
    l: usize,
    delta: f64,
    c_prime: f64,
    guards: &Guards,
) -> Result<TypicalKraus> {
    if delta <= 0.0 || delta >= 0.5 {
        return Err(Error::InvalidParameter(format!(
            "δ must lie in (0, 1/2), got {delta}"
        )));
    }
    if l > guards.max_block_length {
        return Err(Error::GuardExceeded(format!(
            "block length {l} over cap {}",
            guards.max_block_length
        )));
    }
    let canonical = canonical_kraus(ch, pi_g)?;
    let r = canonical.weights.clone();
    let types = typical_types(&r, l, delta);
    let n_words = types_count(&types);
    let mass = types_mass(&types, &r);
    let se = shannon_entropy(&r);
    let gam = gamma(delta, r.len());
    let log2_n = if n_words == 0 {
        f64::NEG_INFINITY
    } else {
        (n_words as f64).log2()
    };
    let count_bound_log2 = l as f64 * (se + gam);
    let gamma_min = ((log2_n / l as f64) - se).max(0.0);
    let h_p = h_prime_l(l, ch.in_dim());
    let mass_bound = 1.0 - 2f64.powf(-(l as f64) * (c_prime * delta * delta - h_p));
    let certificate = ReductionCertificate {
        l,
        delta,
        n_words,
        log2_n_words: log2_n,
        count_bound_log2,
        gamma_min,
        gamma: gam,
        mass,
        mass_bound,
        entropy_exchange: se,
        count_bound_holds: log2_n <= count_bound_log2 + 1e-9,
        mass_bound_holds: mass >= mass_bound - 1e-12,
    };
    Ok(TypicalKraus {
        canonical,
        l,
        delta,
        types,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::partial_trace;

    fn guards() -> Guards {
        Guards::default()
    }

    #[test]
    fn deterministic_base_gives_single_sequence() {
        let set = typical_set(&[1.0, 0.0], 7, 0.3, &guards()).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set[0].iter().all(|&x| x == 0));
    }

    #[test]
    fn uniform_base_counts() {
        // l=10, δ=0.2: only the balanced type, C(10,5) = 252 sequences.
        let set = typical_set(&[0.5, 0.5], 10, 0.2, &guards()).unwrap();
        assert_eq!(set.len(), 252);
        // l=10, δ=0.45: types k ∈ {3,…,7}, 912 sequences.
        let set = typical_set(&[0.5, 0.5], 10, 0.45, &guards()).unwrap();
        assert_eq!(set.len(), 912);
    }

    #[test]
    fn typical_set_guard() {
        let base = vec![0.25; 4];
        assert!(matches!(
            typical_set(&base, 25, 0.3, &guards()),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn projector_of_pure_state_is_rank_one() {
        let rho = DensityOperator::from_probabilities(&[1.0, 0.0]).unwrap();
        let (spec, cert) =
            typical_projector(&rho, 5, 0.3, tol::typicality_c(), &guards()).unwrap();
        assert_eq!(spec.dim(), 1);
        assert!((cert.mass - 1.0).abs() < 1e-12);
        let q = spec.projector.as_ref().unwrap();
        assert!((q.trace().re - 1.0).abs() < 1e-10);
        assert!(cert.all_hold());
    }

    #[test]
    fn projector_uniform_spectrum_is_full() {
        // Equal eigenvalues form a single spectral letter, so every sequence
        // is typical and the projector is the identity.
        let rho = DensityOperator::maximally_mixed(2);
        let (spec, cert) =
            typical_projector(&rho, 6, 0.2, tol::typicality_c(), &guards()).unwrap();
        assert_eq!(spec.dim(), 64);
        assert!((cert.mass - 1.0).abs() < 1e-12);
        let q = spec.projector.as_ref().unwrap();
        assert!(q.max_abs_diff(&CMatrix::identity(64)) < 1e-10);
        assert!(cert.all_hold());
        // Sandwich is exact: every eigenvalue is 2^{-l}.
        assert!((cert.exponent_min.unwrap() - 1.0).abs() < 1e-12);
        assert!((cert.exponent_max.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_is_idempotent_hermitian_projection() {
        let rho = DensityOperator::from_probabilities(&[0.7, 0.2, 0.1]).unwrap();
        let (spec, _) = typical_projector(&rho, 4, 0.45, tol::typicality_c(), &guards()).unwrap();
        let q = spec.projector.as_ref().unwrap();
        assert!(q.hermiticity_defect() < tol::PROJECTOR);
        assert!(q.mul(q).max_abs_diff(q) < tol::PROJECTOR);
        assert!((q.trace().re - spec.dim() as f64).abs() < 1e-8);
    }

    #[test]
    fn classical_mass_matches_operator_trace() {
        // tr(ρ^{⊗l} q) computed classically equals the dense contraction.
        let rho = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        let (spec, cert) =
            typical_projector(&rho, 8, 0.3, tol::typicality_c(), &guards()).unwrap();
        let q = spec.projector.clone().unwrap();
        let mut rho_l = CMatrix::identity(1);
        for _ in 0..8 {
            rho_l = kron(&rho_l, rho.matrix());
        }
        let trace = rho_l.mul(&q).trace().re;
        assert!((trace - cert.mass).abs() < 1e-12, "{trace} vs {}", cert.mass);
    }

    #[test]
    fn diag_09_01_certificate_reference() {
        // l=12, δ=0.3: k ∈ {0,1,2} flip counts survive.
        let rho = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        let (spec, cert) =
            typical_projector(&rho, 12, 0.3, tol::typicality_c(), &guards()).unwrap();
        let expected_mass: f64 = (0..=2usize)
            .map(|k| {
                multinomial(&[12 - k, k]) as f64
                    * 0.9f64.powi(12 - k as i32)
                    * 0.1f64.powi(k as i32)
            })
            .sum();
        assert!((cert.mass - expected_mass).abs() < 1e-12);
        assert!(cert.mass >= 0.8);
        assert_eq!(spec.dim(), (1 + 12 + 66) as u128);
        assert!(cert.all_hold());
        assert!(cert.hs_sq <= 2f64.powf(cert.hs_sq_bound_log2) + 1e-12);
    }

    #[test]
    fn projector_commutes_with_product_state() {
        let rho = DensityOperator::from_probabilities(&[0.8, 0.2]).unwrap();
        let (spec, _) = typical_projector(&rho, 4, 0.4, tol::typicality_c(), &guards()).unwrap();
        let q = spec.projector.clone().unwrap();
        let mut rho_l = CMatrix::identity(1);
        for _ in 0..4 {
            rho_l = kron(&rho_l, rho.matrix());
        }
        let comm = q.mul(&rho_l).sub(&rho_l.mul(&q));
        assert!(comm.max_abs() < tol::PROJECTOR);
    }

    #[test]
    fn typical_kraus_identity_channel() {
        let ch = KrausChannel::identity(2);
        let pi = DensityOperator::maximally_mixed(2);
        let tk = typical_kraus(&ch, &pi, 6, 0.3, tol::typicality_c(), &guards()).unwrap();
        assert_eq!(tk.certificate.n_words, 1);
        assert!((tk.certificate.mass - 1.0).abs() < 1e-12);
        let reduced = tk.materialize(&guards()).unwrap();
        assert_eq!(reduced.kraus_count(), 1);
    }

    #[test]
    fn typical_kraus_phase_flip_reference() {
        // p=0.1, l=10, δ=0.3: words with ≤ 2 flips, n = 56, mass ≈ 0.9298.
        let ch = KrausChannel::phase_flip(0.1);
        let pi = DensityOperator::maximally_mixed(2);
        let tk = typical_kraus(&ch, &pi, 10, 0.3, tol::typicality_c(), &guards()).unwrap();
        assert_eq!(tk.certificate.n_words, 56);
        let oracle: f64 = (0..=2usize)
            .map(|k| {
                multinomial(&[10 - k, k]) as f64
                    * 0.9f64.powi(10 - k as i32)
                    * 0.1f64.powi(k as i32)
            })
            .sum();
        assert!((tk.certificate.mass - oracle).abs() < 1e-10);
        assert!(tk.certificate.count_bound_holds);
    }

    #[test]
    fn reduced_operation_trace_identity() {
        // tr(N_{δ,l}(π^{⊗l})) equals the classical word mass exactly.
        let ch = KrausChannel::phase_flip(0.1);
        let pi = DensityOperator::maximally_mixed(2);
        let tk = typical_kraus(&ch, &pi, 4, 0.4, tol::typicality_c(), &guards()).unwrap();
        let reduced = tk.materialize(&guards()).unwrap();
        let mut pi_l = CMatrix::identity(1);
        for _ in 0..4 {
            pi_l = kron(&pi_l, pi.matrix());
        }
        let tr = reduced.apply(&pi_l).unwrap().trace().re;
        assert!((tr - tk.certificate.mass).abs() < 1e-12);
    }

    #[test]
    fn reduction_complement_is_completely_positive() {
        // Full tensor power minus the reduced operation is CP.
        let ch = KrausChannel::phase_flip(0.2);
        let pi = DensityOperator::maximally_mixed(2);
        let g = guards();
        let tk = typical_kraus(&ch, &pi, 3, 0.3, tol::typicality_c(), &g).unwrap();
        let reduced = tk.materialize(&g).unwrap();
        let full = tk.canonical.channel.tensor_power(3, &g).unwrap();
        let diff_choi = full.choi().sub(&reduced.choi());
        let min_eig = diff_choi
            .eigh()
            .unwrap()
            .eigenvalues
            .last()
            .cloned()
            .unwrap();
        assert!(min_eig > -tol::CHOI_PSD);
    }

    #[test]
    fn masses_grow_with_block_length() {
        let rho = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        let mut last = -1.0;
        for l in [4usize, 8, 12] {
            let (_, cert) =
                typical_projector(&rho, l, 0.3, tol::typicality_c(), &guards()).unwrap();
            assert!(cert.mass >= last - 1e-12, "mass dropped at l={l}");
            last = cert.mass;
        }
    }

    #[test]
    fn normalized_typical_state_is_valid() {
        let rho = DensityOperator::from_probabilities(&[0.9, 0.1]).unwrap();
        let (spec, _) = typical_projector(&rho, 4, 0.45, tol::typicality_c(), &guards()).unwrap();
        let pi_t = spec.normalized_state().unwrap();
        let red = partial_trace(pi_t.matrix(), (2, 8), crate::qmat::Keep::A).unwrap();
        assert!((red.trace().re - 1.0).abs() < 1e-10);
    }
}
