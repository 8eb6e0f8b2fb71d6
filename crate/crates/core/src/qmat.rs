//! Dense complex linear algebra substrate.
//!
//! [`CMatrix`] is the universal carrier for operators, states and Kraus
//! blocks. It is a thin wrapper around a dense complex matrix that exposes a
//! row-major contract and the handful of decompositions the rest of the crate
//! needs: Hermitian eigendecomposition, singular values, QR for Haar
//! sampling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub const C_ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const C_ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Dense complex matrix with explicit row/column dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    m: DMatrix<Complex64>,
}

impl CMatrix {
    /// Build from entries listed row by row. Fails if the entry count does
    /// not match `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        Ok(CMatrix {
            m: DMatrix::from_row_iterator(rows, cols, entries),
        })
    }

    pub fn from_real_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_row_major(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            m: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(dim: usize) -> Self {
        CMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let v: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        CMatrix {
            m: DMatrix::from_diagonal(&DVector::from_vec(v)),
        }
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn cols(&self) -> usize {
        self.m.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.m[(i, j)] = v;
    }

    /// Column `k` as a vector.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        (0..self.rows()).map(|i| self.m[(i, k)]).collect()
    }

    /// Entries in row-major order.
    pub fn entries_row_major(&self) -> Vec<Complex64> {
        let (r, c) = (self.rows(), self.cols());
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub(crate) fn from_dmatrix(m: DMatrix<Complex64>) -> Self {
        CMatrix { m }
    }

    pub(crate) fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        CMatrix {
            m: self.m.adjoint(),
        }
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix {
            m: self.m.transpose(),
        }
    }

    pub fn conjugate(&self) -> CMatrix {
        CMatrix {
            m: self.m.conjugate(),
        }
    }

    /// Matrix product in SAXPY form, skipping zero entries of the right
    /// factor; tensor-word and projector operands are mostly zeros and this
    /// is much faster than a dense general multiply on them.
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols(),
            other.rows(),
            "matrix product {}x{} times {}x{}",
            self.rows(),
            self.cols(),
            other.rows(),
            other.cols()
        );
        let (n, k, m) = (self.rows(), self.cols(), other.cols());
        let mut out = DMatrix::zeros(n, m);
        for j in 0..m {
            let bcol = other.m.column(j);
            let mut ocol = out.column_mut(j);
            for (r, &b) in bcol.iter().enumerate() {
                if b == C_ZERO {
                    continue;
                }
                let acol = self.m.column(r);
                for i in 0..n {
                    ocol[i] += acol[i] * b;
                }
            }
        }
        let _ = k;
        CMatrix { m: out }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        CMatrix {
            m: &self.m - &other.m,
        }
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix { m: &self.m * s }
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// Apply to a vector.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let x = DVector::from_column_slice(v);
        (&self.m * x).iter().cloned().collect()
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        (&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Squared Hilbert-Schmidt norm Σ |mᵢⱼ|².
    pub fn hs_norm_sqr(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// max |M - M†|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    /// Hermitian eigendecomposition with a deterministic ordering:
    /// eigenvalues descending, exact ties broken by the lexicographic order of
    /// the phase-fixed eigenvectors. Inputs must be Hermitian within the
    /// central tolerance.
    pub fn eigh(&self) -> Result<EigH> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("eigh of a non-square matrix".into()));
        }
        let defect = self.hermiticity_defect();
        if defect > tol::HERMITICITY {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian: defect {defect:e}"
            )));
        }
        // Symmetrize to kill roundoff before the solver sees it.
        let h = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        let se = nalgebra::SymmetricEigen::new(h);
        let n = self.rows();
        let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
            .map(|k| {
                let mut col: Vec<Complex64> = se.eigenvectors.column(k).iter().cloned().collect();
                phase_fix(&mut col);
                (se.eigenvalues[k], col)
            })
            .collect();
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| lex_cmp(&a.1, &b.1))
        });
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut vecs = DMatrix::zeros(n, n);
        for (k, (_, col)) in pairs.iter().enumerate() {
            for i in 0..n {
                vecs[(i, k)] = col[i];
            }
        }
        Ok(EigH {
            eigenvalues,
            eigenvectors: CMatrix { m: vecs },
        })
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }
}

fn phase_fix(col: &mut [Complex64]) {
    if let Some(z) = col.iter().find(|z| z.norm() > 1e-8) {
        let phase = z / z.norm();
        let corr = phase.conj();
        for c in col.iter_mut() {
            *c *= corr;
        }
    }
}

fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
        {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Result of a Hermitian eigendecomposition; eigenvectors are columns.
#[derive(Debug, Clone)]
pub struct EigH {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigH {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.eigenvectors.rows())
            .map(|i| self.eigenvectors.get(i, k))
            .collect()
    }
}

/// Density operator: Hermitian, positive semi-definite, unit trace.
///
/// Construction clamps eigenvalues in `[-EIG_CLAMP, 0)` to zero and
/// renormalizes the trace; anything more negative is rejected.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mat: CMatrix,
    spectrum: Vec<f64>,
    basis: CMatrix,
}

impl DensityOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidState("density operator must be square".into()));
        }
        let defect = mat.hermiticity_defect();
        if defect > tol::HERMITICITY {
            return Err(Error::InvalidState(format!(
                "density operator not Hermitian: defect {defect:e}"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol::DENSITY_TRACE || tr.im.abs() > tol::DENSITY_TRACE {
            return Err(Error::InvalidState(format!(
                "density operator trace {tr} is not 1"
            )));
        }
        let eig = mat.eigh()?;
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < 0.0 {
                if *v < -tol::EIG_CLAMP {
                    return Err(Error::InvalidState(format!(
                        "density operator has eigenvalue {v:e}"
                    )));
                }
                *v = 0.0;
            }
        }
        let sum: f64 = vals.iter().sum();
        for v in vals.iter_mut() {
            *v /= sum;
        }
        let basis = eig.eigenvectors;
        let rebuilt = rebuild_from_spectrum(&vals, &basis);
        Ok(DensityOperator {
            mat: rebuilt,
            spectrum: vals,
            basis,
        })
    }

    /// Maximally mixed state on `dim` dimensions. The eigendecomposition is
    /// written down directly instead of being solved for.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            mat: CMatrix::identity(dim).scale_re(1.0 / dim as f64),
            spectrum: vec![1.0 / dim as f64; dim],
            basis: CMatrix::identity(dim),
        }
    }

    /// Maximally mixed state π_F = V V†/k on the range of an isometry V of
    /// shape dim × k with orthonormal columns. The spectrum is written down;
    /// basis columns beyond the rank are left zero and are never consulted
    /// because their eigenvalues are exactly zero.
    pub fn uniform_on_frame(v: &CMatrix) -> Result<Self> {
        let (dim, k) = (v.rows(), v.cols());
        let defect = v.dagger().mul(v).max_abs_diff(&CMatrix::identity(k));
        if defect > tol::FRAME_ORTHO {
            return Err(Error::InvalidState(format!(
                "frame columns not orthonormal: defect {defect:e}"
            )));
        }
        let mat = v.mul(&v.dagger()).scale_re(1.0 / k as f64);
        let mut spectrum = vec![0.0; dim];
        let mut basis = CMatrix::zeros(dim, dim);
        for c in 0..k {
            spectrum[c] = 1.0 / k as f64;
            for r in 0..dim {
                basis.set(r, c, v.get(r, c));
            }
        }
        Ok(DensityOperator {
            mat,
            spectrum,
            basis,
        })
    }

    /// Diagonal state from a probability vector.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < -tol::EIG_CLAMP) {
            return Err(Error::InvalidState("not a probability vector".into()));
        }
        DensityOperator::new(CMatrix::diag(p))
    }

    /// Rank-one state |ψ⟩⟨ψ| from a normalized vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (n2.sqrt() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState("pure state not normalized".into()));
        }
        let d = psi.len();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, psi[i] * psi[j].conj() / n2);
            }
        }
        DensityOperator::new(m)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Eigenvalues, descending, clamped and renormalized.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Eigenvectors as columns, ordered to match [`Self::spectrum`].
    pub fn eigenbasis(&self) -> &CMatrix {
        &self.basis
    }
}

fn rebuild_from_spectrum(vals: &[f64], basis: &CMatrix) -> CMatrix {
    let n = basis.rows();
    let mut lam = CMatrix::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        lam.set(k, k, Complex64::new(v, 0.0));
    }
    basis.mul(&lam).mul(&basis.dagger())
}

/// Normalized pure state, optionally with a bipartite factorization.
#[derive(Debug, Clone)]
pub struct PureState {
    pub vec: Vec<Complex64>,
    /// Factor dimensions (d_a, d_b) for the bipartite interpretation.
    pub dims: (usize, usize),
}

impl PureState {
    pub fn new(vec: Vec<Complex64>, dims: (usize, usize)) -> Result<Self> {
        if dims.0 * dims.1 != vec.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} factors for a vector of length {}",
                dims.0,
                dims.1,
                vec.len()
            )));
        }
        let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol::PURE_NORM {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm} deviates from 1"
            )));
        }
        Ok(PureState { vec, dims })
    }

    pub fn projector(&self) -> CMatrix {
        let d = self.vec.len();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, self.vec[i] * self.vec[j].conj());
            }
        }
        m
    }
}

/// Kronecker product; dimensions multiply.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca, rb, cb) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = DMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a.get(i, j);
            if aij == C_ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b.get(k, l);
                }
            }
        }
    }
    CMatrix::from_dmatrix(out)
}

/// Kronecker product of a list, left to right.
pub fn kron_all(ms: &[&CMatrix]) -> CMatrix {
    assert!(!ms.is_empty());
    let mut acc = ms[0].clone();
    for m in &ms[1..] {
        acc = kron(&acc, m);
    }
    acc
}

/// Which factor to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of an operator on A⊗B.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    if m.rows() != da * db || !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "operator of dim {} is not on {}x{}",
            m.rows(),
            da,
            db
        )));
    }
    match keep {
        Keep::A => {
            let mut out = CMatrix::zeros(da, da);
            for i in 0..da {
                for j in 0..da {
                    let mut s = C_ZERO;
                    for k in 0..db {
                        s += m.get(i * db + k, j * db + k);
                    }
                    out.set(i, j, s);
                }
            }
            Ok(out)
        }
        Keep::B => {
            let mut out = CMatrix::zeros(db, db);
            for i in 0..db {
                for j in 0..db {
                    let mut s = C_ZERO;
                    for k in 0..da {
                        s += m.get(k * db + i, k * db + j);
                    }
                    out.set(i, j, s);
                }
            }
            Ok(out)
        }
    }
}

/// Canonical purification ψ = Σᵢ √λᵢ eᵢ⊗eᵢ ∈ H_a⊗H built from the
/// deterministic eigendecomposition of ρ; tracing out the first factor
/// recovers ρ.
pub fn purify(rho: &DensityOperator) -> PureState {
    let d = rho.dim();
    let mut vec = vec![C_ZERO; d * d];
    for (k, &lam) in rho.spectrum().iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let e = rho.eigenbasis();
        let s = lam.sqrt();
        // √λ_k (e_k ⊗ e_k)
        for i in 0..d {
            for j in 0..d {
                vec[i * d + j] += Complex64::new(s, 0.0) * e.get(i, k) * e.get(j, k);
            }
        }
    }
    // Normalize away the last float dust so downstream checks see norm 1.
    let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in vec.iter_mut() {
        *z /= norm;
    }
    PureState::new(vec, (d, d)).expect("canonical purification is normalized")
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phases of
/// the R diagonal absorbed into Q. Deterministic for a fixed seed.
pub fn haar_unitary(dim: usize, seed: u64) -> CMatrix {
    haar_isometry(dim, dim, seed)
}

/// First `cols` columns of a Haar-random unitary (a Haar-random isometry),
/// sampled directly from a dim×cols Ginibre block.
pub fn haar_isometry(dim: usize, cols: usize, seed: u64) -> CMatrix {
    assert!(cols <= dim && dim >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let g = DMatrix::from_fn(dim, cols, |_, _| {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the gauge: make the R diagonal real positive.
    let mut out = DMatrix::zeros(dim, cols);
    for j in 0..cols {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C_ONE
        };
        for i in 0..dim {
            out[(i, j)] = q[(i, j)] * phase;
        }
    }
    CMatrix::from_dmatrix(out)
}

/// (trace norm, Hilbert-Schmidt norm, operator norm).
pub fn norms(m: &CMatrix) -> (f64, f64, f64) {
    let sv = m.singular_values();
    let trace_norm: f64 = sv.iter().sum();
    let hs: f64 = m.as_dmatrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let op = sv.first().cloned().unwrap_or(0.0);
    (trace_norm, hs, op)
}

/// Trace norm of a Hermitian matrix via its eigenvalues.
pub fn trace_norm_hermitian(m: &CMatrix) -> Result<f64> {
    Ok(m.eigh()?.eigenvalues.iter().map(|v| v.abs()).sum())
}

/// Hilbert-Schmidt inner product ⟨a, b⟩ = tr(a† b).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut s = C_ZERO;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            s += a.get(i, j).conj() * b.get(i, j);
        }
    }
    s
}

/// tr(a·b) in O(n²) without forming the product.
pub fn mul_trace(a: &CMatrix, b: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.cols(), b.rows());
    debug_assert_eq!(a.rows(), b.cols());
    let mut s = C_ZERO;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            s += a.get(i, j) * b.get(j, i);
        }
    }
    s
}

/// f(M) for Hermitian PSD M through the spectral decomposition, dropping
/// eigenvalues below `cutoff`.
pub fn hermitian_fn(m: &CMatrix, cutoff: f64, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let eig = m.eigh()?;
    let n = m.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let flam = f(lam);
        let v = eig.eigenvector(k);
        for i in 0..n {
            for j in 0..n {
                let cur = out.get(i, j);
                out.set(i, j, cur + Complex64::new(flam, 0.0) * v[i] * v[j].conj());
            }
        }
    }
    Ok(out)
}

/// Splitmix64 step; used to derive per-trial and per-restart seeds.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random density operator of full-ish rank from the Hilbert-Schmidt
/// ensemble: G G†/tr with G Ginibre. Deterministic for a fixed seed.
pub fn random_density(dim: usize, seed: u64) -> DensityOperator {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(CMatrix::from_dmatrix(m / Complex64::new(tr, 0.0)))
        .expect("Wishart matrix is a valid state")
}

/// Random pure state from the Haar measure.
pub fn random_pure(dim: usize, seed: u64) -> Vec<Complex64> {
    let u = haar_isometry(dim, 1, seed);
    (0..dim).map(|i| u.get(i, 0)).collect()
}
