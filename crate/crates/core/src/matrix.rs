//! Dense complex matrices and the conditioned-Haar samplers.
//!
//! The matrices here are small (N <= 1024) and the operations few, so the
//! crate carries its own row-major `Vec<Complex64>` arithmetic instead of a
//! LAPACK binding. Haar sampling follows the Ginibre + QR recipe with the
//! R-diagonal phase correction; a naive QR of a Gaussian matrix is not Haar
//! distributed without that correction.

use crate::scalar::C64;
use crate::word::{Polynomial, Word};
use num::complex::Complex64;
use num::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("fixed vectors are not orthonormal (residual {0:.3e})")]
    NotOrthonormal(f64),
    #[error("need k < N fixed vectors, got k={k}, N={n}")]
    TooManyFixedVectors { k: usize, n: usize },
    #[error("vector must have unit norm, got {0}")]
    NotUnitNorm(f64),
    #[error("compression precondition failed: ||Uv - v|| = {0:.3e}")]
    NotStabilized(f64),
    #[error("no matrix registered for generator `{0}`")]
    UnknownGenerator(String),
    #[error("ensemble norm bound {bound} below observed spectral norm {observed:.6}")]
    NormBoundViolated { bound: f64, observed: f64 },
    #[error("invalid ensemble parameters: {0}")]
    BadEnsemble(String),
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![C64::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::one();
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "matrix dimensions must agree");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let arow = &self.data[i * n..(i + 1) * n];
            let crow = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in arow.iter().enumerate() {
                if aik.is_zero() {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (c, &b) in crow.iter_mut().zip(brow.iter()) {
                    *c += aik * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len());
        let n = self.n;
        let mut out = vec![C64::zero(); n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = C64::zero();
            for (a, x) in row.iter().zip(v.iter()) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||U* U - I||_F`, the unitarity defect.
    pub fn unitarity_residual(&self) -> f64 {
        self.adjoint().mul(self).sub(&CMatrix::identity(self.n)).frobenius_norm()
    }

    /// Power-iteration estimate of the spectral norm (largest singular value).
    pub fn spectral_norm_estimate(&self, iterations: usize) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let adj = self.adjoint();
        let mut x = vec![C64::one(); n];
        let mut norm = (n as f64).sqrt();
        for xi in x.iter_mut() {
            *xi /= norm;
        }
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let y = adj.matvec(&self.matvec(&x));
            norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            x = y;
            for xi in x.iter_mut() {
                *xi /= norm;
            }
        }
        lambda.sqrt()
    }

    /// Rank-one update `self + c * u v*`.
    pub fn add_outer(&mut self, c: C64, u: &[C64], v: &[C64]) {
        let n = self.n;
        for i in 0..n {
            let cu = c * u[i];
            let row = &mut self.data[i * n..(i + 1) * n];
            for (r, &vj) in row.iter_mut().zip(v.iter()) {
                *r += cu * vj.conj();
            }
        }
    }
}

fn standard_complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / f64::sqrt(2.0)
}

/// Haar-distributed unitary: complex Ginibre, Householder QR, then the
/// diagonal of R is normalized to unit phases.
pub fn sample_haar(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    assert!(n >= 1);
    let mut a = CMatrix::zeros(n);
    for v in a.data.iter_mut() {
        *v = standard_complex_gaussian(rng);
    }
    let (mut u, r_diag) = householder_qr(a, n);
    // Column scaling by the phases of R's diagonal.
    let phases: Vec<C64> = r_diag
        .iter()
        .map(|d| if d.norm() > 0.0 { d / d.norm() } else { C64::one() })
        .collect();
    for i in 0..n {
        let row = &mut u.data[i * n..(i + 1) * n];
        for (x, p) in row.iter_mut().zip(&phases) {
            *x *= p;
        }
    }
    u
}

/// Householder QR of a square matrix; returns (Q, diag(R)).
///
/// Reflectors are applied in two row-major passes (`w = v* M`, then
/// `M -= scale v w`) so the inner loops stream over contiguous rows.
fn householder_qr(mut a: CMatrix, n: usize) -> (CMatrix, Vec<C64>) {
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut w = vec![C64::zero(); n];
    for k in 0..n {
        let mut norm_sq = 0.0;
        for i in k..n {
            norm_sq += a.data[i * n + k].norm_sqr();
        }
        let norm = norm_sq.sqrt();
        let akk = a.data[k * n + k];
        let phase = if akk.norm() > 0.0 { akk / akk.norm() } else { C64::one() };
        let alpha = -phase * norm;
        let mut v = vec![C64::zero(); n - k];
        v[0] = akk - alpha;
        for i in (k + 1)..n {
            v[i - k] = a.data[i * n + k];
        }
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq > 0.0 {
            apply_reflector(&mut a.data, n, k, &v, vnorm_sq, &mut w);
        }
        reflectors.push(v);
    }
    let r_diag: Vec<C64> = (0..n).map(|i| a.data[i * n + i]).collect();
    // Q = H_1 H_2 ... H_n applied to the identity, innermost first. When H_k
    // is applied, rows >= k of columns < k are still zero, so those columns
    // are untouched and the work per reflector shrinks quadratically.
    let mut q = CMatrix::identity(n);
    for (k, v) in reflectors.iter().enumerate().rev() {
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        apply_reflector(&mut q.data, n, k, v, vnorm_sq, &mut w);
    }
    (q, r_diag)
}

/// `M[k.., k..] <- (I - (2/|v|^2) v v*) M[k.., k..]` with `v` indexed from
/// row k; `w` is scratch of length n.
fn apply_reflector(
    data: &mut [C64],
    n: usize,
    k: usize,
    v: &[C64],
    vnorm_sq: f64,
    w: &mut [C64],
) {
    let scale = 2.0 / vnorm_sq;
    let w = &mut w[k..n];
    w.fill(C64::zero());
    for i in k..n {
        let vic = v[i - k].conj();
        if vic.is_zero() {
            continue;
        }
        let row = &data[i * n + k..i * n + n];
        for (acc, &m) in w.iter_mut().zip(row) {
            *acc += vic * m;
        }
    }
    for i in k..n {
        let f = v[i - k] * scale;
        if f.is_zero() {
            continue;
        }
        let row = &mut data[i * n + k..i * n + n];
        for (m, &ww) in row.iter_mut().zip(w.iter()) {
            *m -= f * ww;
        }
    }
}

fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

const ORTHONORMAL_TOL: f64 = 1e-12;

/// Uniform unitary conditioned to fix the given orthonormal vectors:
/// `U = sum_i v_i v_i* + Q V Q*` with `V` Haar on the orthogonal complement
/// and `Q` an isometry onto that complement.
///
/// The complement basis is completed once at construction (deterministically
/// from `basis_seed`), so sampling is a pure function of the caller's RNG and
/// samplers can be shared read-only across worker threads.
pub struct StabilizerHaarSampler {
    n: usize,
    fixed: Vec<Vec<C64>>,
    /// Orthonormal basis of the complement, `n - k` columns.
    complement: Vec<Vec<C64>>,
    /// When every complement column is a canonical basis vector, their
    /// indices; sampling then embeds V by scatter instead of two products.
    canonical: Option<Vec<usize>>,
}

impl StabilizerHaarSampler {
    pub fn new(n: usize, fixed: Vec<Vec<C64>>, basis_seed: u64) -> Result<Self, MatrixError> {
        let k = fixed.len();
        if k >= n {
            return Err(MatrixError::TooManyFixedVectors { k, n });
        }
        for v in &fixed {
            if v.len() != n {
                return Err(MatrixError::DimensionMismatch(v.len(), n));
            }
        }
        let mut max_defect = 0.0f64;
        for (i, u) in fixed.iter().enumerate() {
            for (j, v) in fixed.iter().enumerate() {
                let g = inner(u, v);
                let expected = if i == j { C64::one() } else { C64::zero() };
                max_defect = max_defect.max((g - expected).norm());
            }
        }
        if max_defect > ORTHONORMAL_TOL {
            return Err(MatrixError::NotOrthonormal(max_defect));
        }

        // Canonical basis vectors orthogonal to every fixed vector complete
        // the basis directly (always the case for canonical fixed vectors).
        let mut complement: Vec<Vec<C64>> = Vec::with_capacity(n - k);
        let mut canonical_indices = Vec::with_capacity(n - k);
        for j in 0..n {
            let overlap: f64 = fixed.iter().map(|v| v[j].norm_sqr()).sum();
            if overlap < 1e-28 {
                let mut e = vec![C64::zero(); n];
                e[j] = C64::one();
                complement.push(e);
                canonical_indices.push(j);
            }
        }
        if complement.len() == n - k {
            return Ok(StabilizerHaarSampler {
                n,
                fixed,
                complement,
                canonical: Some(canonical_indices),
            });
        }

        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(basis_seed);
        let mut basis: Vec<Vec<C64>> = fixed.clone();
        let mut complement = Vec::with_capacity(n - k);
        while complement.len() < n - k {
            let mut cand: Vec<C64> =
                (0..n).map(|_| standard_complex_gaussian(&mut rng)).collect();
            // Modified Gram-Schmidt, applied twice for re-orthogonalization.
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &cand);
                    for (x, y) in cand.iter_mut().zip(b.iter()) {
                        *x -= c * y;
                    }
                }
            }
            let norm = vec_norm(&cand);
            if norm < 1e-8 {
                continue; // nearly dependent draw, resample
            }
            for x in cand.iter_mut() {
                *x /= norm;
            }
            basis.push(cand.clone());
            complement.push(cand);
        }
        Ok(StabilizerHaarSampler { n, fixed, complement, canonical: None })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fixed_vectors(&self) -> &[Vec<C64>] {
        &self.fixed
    }

    /// Draws one conditioned unitary using the supplied RNG.
    pub fn sample_with(&self, rng: &mut ChaCha8Rng) -> CMatrix {
        let n = self.n;
        let m = self.complement.len();
        let v_small = sample_haar(m, rng);
        // U = sum v_i v_i* + Q V Q*.
        let mut u = CMatrix::zeros(n);
        for f in &self.fixed {
            u.add_outer(C64::one(), f, f);
        }
        if let Some(idx) = &self.canonical {
            // Q columns are canonical: embed V directly.
            for a in 0..m {
                let row = idx[a] * n;
                for b in 0..m {
                    u.data[row + idx[b]] += v_small.data[a * m + b];
                }
            }
            return u;
        }
        // (Q V)_{i, b} = sum_a Q_{i, a} V_{a, b}, accumulated row-major.
        let mut qv = vec![C64::zero(); n * m];
        for (a, qa) in self.complement.iter().enumerate() {
            let vrow = &v_small.data[a * m..(a + 1) * m];
            for i in 0..n {
                let qia = qa[i];
                if qia.is_zero() {
                    continue;
                }
                let out = &mut qv[i * m..(i + 1) * m];
                for (o, &v) in out.iter_mut().zip(vrow) {
                    *o += qia * v;
                }
            }
        }
        // U += (Q V) Q*.
        for i in 0..n {
            let qvrow = &qv[i * m..(i + 1) * m];
            let urow = &mut u.data[i * n..(i + 1) * n];
            for (b, qb) in self.complement.iter().enumerate() {
                let c = qvrow[b];
                if c.is_zero() {
                    continue;
                }
                for (r, &q) in urow.iter_mut().zip(qb.iter()) {
                    *r += c * q.conj();
                }
            }
        }
        u
    }

    /// Largest `||U v_i - v_i||` over the fixed vectors.
    pub fn stabilizer_residual(&self, u: &CMatrix) -> f64 {
        self.fixed
            .iter()
            .map(|v| {
                let uv = u.matvec(v);
                uv.iter().zip(v.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// The compression `U - v v*` of a stabilized unitary onto the complement of
/// `v`; satisfies `(U - v v*) v = 0` when `U v = v`.
pub fn compress_perp(u: &CMatrix, v: &[C64]) -> Result<CMatrix, MatrixError> {
    let uv = u.matvec(v);
    let defect = uv.iter().zip(v.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    if defect > 1e-8 {
        return Err(MatrixError::NotStabilized(defect));
    }
    let mut out = u.clone();
    out.add_outer(-C64::one(), v, v);
    Ok(out)
}

/// A labeled family of same-dimension matrices with a recorded norm bound.
#[derive(Clone, Debug)]
pub struct MatrixEnsemble {
    family: u32,
    members: BTreeMap<u32, CMatrix>,
    norm_bound: f64,
}

impl MatrixEnsemble {
    pub fn new(
        family: u32,
        members: BTreeMap<u32, CMatrix>,
        norm_bound: f64,
    ) -> Result<Self, MatrixError> {
        let mut dims = members.values().map(|m| m.dim());
        let first = dims.next().ok_or_else(|| {
            MatrixError::BadEnsemble("ensemble needs at least one member".into())
        })?;
        for d in dims {
            if d != first {
                return Err(MatrixError::DimensionMismatch(first, d));
            }
        }
        for m in members.values() {
            let observed = m.spectral_norm_estimate(30);
            if observed > norm_bound * (1.0 + 1e-9) + 1e-12 {
                return Err(MatrixError::NormBoundViolated { bound: norm_bound, observed });
            }
        }
        Ok(MatrixEnsemble { family, members, norm_bound })
    }

    pub fn family(&self) -> u32 {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.members.values().next().map(|m| m.dim()).unwrap_or(0)
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn member(&self, index: u32) -> Option<&CMatrix> {
        self.members.get(&index)
    }

    /// The rotated ensemble `{U M U*}`; the norm bound carries over.
    pub fn conjugate(&self, u: &CMatrix) -> Result<MatrixEnsemble, MatrixError> {
        if u.dim() != self.dim() {
            return Err(MatrixError::DimensionMismatch(u.dim(), self.dim()));
        }
        let uh = u.adjoint();
        let members = self
            .members
            .iter()
            .map(|(&k, m)| (k, u.mul(m).mul(&uh)))
            .collect();
        Ok(MatrixEnsemble { family: self.family, members, norm_bound: self.norm_bound })
    }
}

/// Which scalar to read off a matrix polynomial.
#[derive(Clone, Debug, PartialEq)]
pub enum StateMode {
    NormalizedTrace,
    UnnormalizedTrace,
    VectorState(Vec<C64>),
}

impl StateMode {
    pub fn vector_state(v: Vec<C64>) -> Result<Self, MatrixError> {
        let norm = vec_norm(&v);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(MatrixError::NotUnitNorm(norm));
        }
        Ok(StateMode::VectorState(v))
    }

    /// Value of the state on the identity matrix of dimension `n`.
    pub fn unit_value(&self, n: usize) -> C64 {
        match self {
            StateMode::UnnormalizedTrace => C64::new(n as f64, 0.0),
            _ => C64::one(),
        }
    }
}

/// Looks up the matrix for each letter across the registered ensembles.
fn resolve<'a>(
    ensembles: &'a BTreeMap<u32, MatrixEnsemble>,
    g: &crate::word::Generator,
) -> Result<&'a CMatrix, MatrixError> {
    ensembles
        .get(&g.family())
        .and_then(|e| e.member(g.index()))
        .ok_or_else(|| MatrixError::UnknownGenerator(g.to_string()))
}

/// Evaluates a single word under the requested state. Vector states use the
/// running-vector optimization (apply letters to `v` right to left).
pub fn evaluate_word_state(
    ensembles: &BTreeMap<u32, MatrixEnsemble>,
    w: &Word,
    mode: &StateMode,
) -> Result<C64, MatrixError> {
    let n = ensembles
        .values()
        .next()
        .map(|e| e.dim())
        .ok_or_else(|| MatrixError::BadEnsemble("no ensembles registered".into()))?;
    if w.is_empty() {
        return Ok(mode.unit_value(n));
    }
    match mode {
        StateMode::VectorState(v) => {
            if v.len() != n {
                return Err(MatrixError::DimensionMismatch(v.len(), n));
            }
            let mut x = v.clone();
            for g in w.letters().iter().rev() {
                x = resolve(ensembles, g)?.matvec(&x);
            }
            Ok(inner(v, &x))
        }
        trace_mode => {
            let mut letters = w.letters().iter();
            let mut acc = resolve(ensembles, letters.next().unwrap())?.clone();
            for g in letters {
                acc = acc.mul(resolve(ensembles, g)?);
            }
            let tr = acc.trace();
            Ok(match trace_mode {
                StateMode::NormalizedTrace => tr / n as f64,
                _ => tr,
            })
        }
    }
}

/// Linear extension of [`evaluate_word_state`] to polynomials.
pub fn evaluate_poly_state(
    ensembles: &BTreeMap<u32, MatrixEnsemble>,
    p: &Polynomial<C64>,
    mode: &StateMode,
) -> Result<C64, MatrixError> {
    let mut acc = C64::zero();
    for (w, c) in p.terms() {
        acc += c * evaluate_word_state(ensembles, w, mode)?;
    }
    Ok(acc)
}

/// Single-ensemble convenience used by functional wrappers.
pub fn word_state(ens: &MatrixEnsemble, w: &Word, mode: &StateMode) -> Result<C64, MatrixError> {
    let mut map = BTreeMap::new();
    map.insert(ens.family(), ens.clone());
    evaluate_word_state(&map, w, mode)
}

/// Deterministic bounded test matrices with exactly known states.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// diag(theta, a, ..., a) — rank-one spike over a scalar bulk.
    SpikedDiagonal { theta: f64, base: f64 },
    /// diag(theta, b, -b, b, ...) — spike over an alternating two-atom bulk.
    /// Needs even N; the trace then has an exact two-term 1/N expansion.
    SpikedAlternating { theta: f64, bulk: f64 },
    /// Diagonal cycling through the given values; exact when len divides N.
    TwoSpectrum { values: Vec<f64> },
    /// The cyclic shift: tr(S^k) = 1 if N | k, else 0.
    Shift,
    /// Orthogonal projection onto the first `rank` coordinates.
    Projection { rank: usize },
}

impl EnsembleKind {
    pub fn build(&self, n: usize) -> Result<CMatrix, MatrixError> {
        match self {
            EnsembleKind::SpikedDiagonal { theta, base } => {
                let mut d = vec![Complex64::new(*base, 0.0); n];
                d[0] = Complex64::new(*theta, 0.0);
                Ok(CMatrix::from_diag(&d))
            }
            EnsembleKind::SpikedAlternating { theta, bulk } => {
                if n % 2 != 0 {
                    return Err(MatrixError::BadEnsemble(format!(
                        "spiked_alternating needs even N, got {n}"
                    )));
                }
                let mut d = vec![Complex64::zero(); n];
                d[0] = Complex64::new(*theta, 0.0);
                for (i, v) in d.iter_mut().enumerate().skip(1) {
                    let sign = if (i - 1) % 2 == 0 { 1.0 } else { -1.0 };
                    *v = Complex64::new(sign * bulk, 0.0);
                }
                Ok(CMatrix::from_diag(&d))
            }
            EnsembleKind::TwoSpectrum { values } => {
                if values.is_empty() {
                    return Err(MatrixError::BadEnsemble("two_spectrum needs values".into()));
                }
                let d: Vec<C64> = (0..n)
                    .map(|i| Complex64::new(values[i % values.len()], 0.0))
                    .collect();
                Ok(CMatrix::from_diag(&d))
            }
            EnsembleKind::Shift => {
                let mut m = CMatrix::zeros(n);
                for i in 0..n {
                    m.set(i, (i + 1) % n, C64::one());
                }
                Ok(m)
            }
            EnsembleKind::Projection { rank } => {
                if *rank > n {
                    return Err(MatrixError::BadEnsemble(format!(
                        "projection rank {rank} exceeds N = {n}"
                    )));
                }
                let d: Vec<C64> = (0..n)
                    .map(|i| if i < *rank { C64::one() } else { C64::zero() })
                    .collect();
                Ok(CMatrix::from_diag(&d))
            }
        }
    }

    pub fn norm_bound(&self) -> f64 {
        match self {
            EnsembleKind::SpikedDiagonal { theta, base } => theta.abs().max(base.abs()),
            EnsembleKind::SpikedAlternating { theta, bulk } => theta.abs().max(bulk.abs()),
            EnsembleKind::TwoSpectrum { values } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            EnsembleKind::Shift => 1.0,
            EnsembleKind::Projection { .. } => 1.0,
        }
    }
}

/// Builds the one-generator ensemble `{X_{family,0} -> kind matrix}`.
pub fn standard_ensemble(
    family: u32,
    kind: &EnsembleKind,
    n: usize,
) -> Result<MatrixEnsemble, MatrixError> {
    let mut members = BTreeMap::new();
    members.insert(0u32, kind.build(n)?);
    MatrixEnsemble::new(family, members, kind.norm_bound())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn e_k(n: usize, k: usize) -> Vec<C64> {
        let mut v = vec![C64::zero(); n];
        v[k] = C64::one();
        v
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 32] {
            let u = sample_haar(n, &mut rng);
            assert!(u.unitarity_residual() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn haar_dimension_one_is_a_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = sample_haar(1, &mut rng);
        assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stabilizer_fixes_given_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 64;
        // Random unit vector.
        let mut v: Vec<C64> = (0..n).map(|_| standard_complex_gaussian(&mut rng)).collect();
        let norm = vec_norm(&v);
        for x in v.iter_mut() {
            *x /= norm;
        }
        let sampler = StabilizerHaarSampler::new(n, vec![v], 11).unwrap();
        let u = sampler.sample_with(&mut rng);
        assert!(u.unitarity_residual() < 1e-10);
        assert!(sampler.stabilizer_residual(&u) < 1e-12);
    }

    #[test]
    fn stabilizer_near_identity_when_k_is_n_minus_1() {
        let n = 8;
        let fixed: Vec<Vec<C64>> = (0..n - 1).map(|k| e_k(n, k)).collect();
        let sampler = StabilizerHaarSampler::new(n, fixed, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = sampler.sample_with(&mut rng);
        // Everything but the last direction is fixed; the residual block is a phase.
        for k in 0..n - 1 {
            let uv = u.matvec(&e_k(n, k));
            let defect: f64 =
                uv.iter().zip(e_k(n, k).iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!(defect.sqrt() < 1e-12);
        }
        assert!((u.get(n - 1, n - 1).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_rejects_bad_input() {
        let n = 4;
        assert!(matches!(
            StabilizerHaarSampler::new(n, (0..n).map(|k| e_k(n, k)).collect(), 0),
            Err(MatrixError::TooManyFixedVectors { .. })
        ));
        let skew = vec![e_k(n, 0), {
            let mut v = e_k(n, 0);
            v[1] = C64::new(0.5, 0.0);
            v
        }];
        assert!(matches!(
            StabilizerHaarSampler::new(n, skew, 0),
            Err(MatrixError::NotOrthonormal(_))
        ));
    }

    #[test]
    fn conjugation_preserves_trace_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 16;
        let ens = standard_ensemble(0, &EnsembleKind::TwoSpectrum { values: vec![1.0, -2.0] }, n)
            .unwrap();
        let u = sample_haar(n, &mut rng);
        let rotated = ens.conjugate(&u).unwrap();
        let b = ens.member(0).unwrap();
        let ub = rotated.member(0).unwrap();
        // Similarity invariance via trace powers.
        let mut bp = b.clone();
        let mut ubp = ub.clone();
        for _ in 0..4 {
            assert!((bp.trace() - ubp.trace()).norm() < 1e-9);
            bp = bp.mul(b);
            ubp = ubp.mul(ub);
        }
        let id = CMatrix::identity(n);
        assert_eq!(ens.conjugate(&id).unwrap().member(0).unwrap(), b);
    }

    #[test]
    fn word_states_on_spiked_diagonal() {
        let ens =
            standard_ensemble(0, &EnsembleKind::SpikedDiagonal { theta: 2.0, base: 0.0 }, 4)
                .unwrap();
        let mut map = BTreeMap::new();
        map.insert(0, ens);
        let w = Word::power(0, 2);
        let tr = evaluate_word_state(&map, &w, &StateMode::NormalizedTrace).unwrap();
        assert!((tr - C64::new(1.0, 0.0)).norm() < 1e-14);
        let vs = evaluate_word_state(
            &map,
            &w,
            &StateMode::vector_state(e_k(4, 0)).unwrap(),
        )
        .unwrap();
        assert!((vs - C64::new(4.0, 0.0)).norm() < 1e-14);
        let unit = evaluate_word_state(&map, &Word::empty(), &StateMode::UnnormalizedTrace)
            .unwrap();
        assert!((unit - C64::new(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn compress_perp_identities() {
        let n = 16;
        let v = e_k(n, 0);
        let sampler = StabilizerHaarSampler::new(n, vec![v.clone()], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = sampler.sample_with(&mut rng);
        let perp = compress_perp(&u, &v).unwrap();
        let pv = perp.matvec(&v);
        assert!(vec_norm(&pv) < 1e-12);
        // U_perp + v v* = U exactly.
        let mut back = perp.clone();
        back.add_outer(C64::one(), &v, &v);
        assert!(back.sub(&u).frobenius_norm() < 1e-13);
        // Identity matrix fixes anything; I - e1 e1* has a zero first column.
        let id = CMatrix::identity(n);
        let p = compress_perp(&id, &v).unwrap();
        assert!((p.get(0, 0)).norm() < 1e-15);
        assert!((p.get(1, 1) - C64::one()).norm() < 1e-15);
        // A unitary moving v is rejected.
        let shift = EnsembleKind::Shift.build(n).unwrap();
        assert!(compress_perp(&shift, &v).is_err());
    }

    #[test]
    fn shift_and_projection_traces() {
        let n = 4;
        let shift = standard_ensemble(0, &EnsembleKind::Shift, n).unwrap();
        let mut map = BTreeMap::new();
        map.insert(0, shift);
        for k in 1..=8 {
            let tr =
                evaluate_word_state(&map, &Word::power(0, k), &StateMode::NormalizedTrace)
                    .unwrap();
            let expected = if k % n == 0 { 1.0 } else { 0.0 };
            assert!((tr - C64::new(expected, 0.0)).norm() < 1e-14, "k = {k}");
        }
        let proj = standard_ensemble(0, &EnsembleKind::Projection { rank: 3 }, n).unwrap();
        let mut map = BTreeMap::new();
        map.insert(0, proj);
        let tr = evaluate_word_state(&map, &Word::power(0, 5), &StateMode::NormalizedTrace)
            .unwrap();
        assert!((tr - C64::new(0.75, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn norm_bound_is_checked() {
        let mut members = BTreeMap::new();
        members.insert(0u32, CMatrix::from_diag(&[C64::new(3.0, 0.0), C64::one()]));
        assert!(matches!(
            MatrixEnsemble::new(0, members, 2.0),
            Err(MatrixError::NormBoundViolated { .. })
        ));
    }
}
