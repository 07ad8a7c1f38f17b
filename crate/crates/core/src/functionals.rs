//! Moment functionals on a single family's polynomial algebra.
//!
//! A [`MomentFunctional`] assigns a scalar to every word of its family and
//! extends linearly to polynomials. Backings are either explicit tables
//! (arbitrary test data, JSON input) or closed-form rules (point mass,
//! semicircle, symmetric two-atom, spiked diagonal traces, matrix ensembles).
//!
//! Unital functionals send the empty word to 1; the tracial flag records
//! invariance under cyclic rotation of words and is spot-checked on demand.

use crate::matrix::{self, MatrixEnsemble, StateMode};
use crate::scalar::{parse_big_rational, Scalar, C64};
use crate::word::{Polynomial, Word};
use num::{BigRational, One};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FunctionalError {
    #[error("polynomial mixes families; functional is defined on family {family}")]
    MixedFamilies { family: u32 },
    #[error("no moment stored for word `{0}`")]
    MissingMoment(String),
    #[error("pair/triple functionals must share one family ({0} vs {1})")]
    FamilyMismatch(u32, u32),
    #[error("functional marked unital must send 1 to 1")]
    NotUnital,
    #[error("omega component must be tracial")]
    OmegaNotTracial,
    #[error("bad functional spec: {0}")]
    BadSpec(String),
}

type RuleFn<S> = dyn Fn(&Word) -> Result<S, FunctionalError> + Send + Sync;

enum Backing<S: Scalar> {
    Table(BTreeMap<Word, S>),
    Rule(Arc<RuleFn<S>>),
}

impl<S: Scalar> Clone for Backing<S> {
    fn clone(&self) -> Self {
        match self {
            Backing::Table(t) => Backing::Table(t.clone()),
            Backing::Rule(r) => Backing::Rule(Arc::clone(r)),
        }
    }
}

/// A linear functional on one family's word algebra, given by its values on
/// monomials. Immutable after construction; the memo table only caches values
/// the backing already determines, so concurrent reads stay consistent.
pub struct MomentFunctional<S: Scalar> {
    family: u32,
    backing: Backing<S>,
    value_at_one: S,
    unital: bool,
    tracial: bool,
    memo: Mutex<HashMap<Word, S>>,
}

impl<S: Scalar> Clone for MomentFunctional<S> {
    fn clone(&self) -> Self {
        MomentFunctional {
            family: self.family,
            backing: self.backing.clone(),
            value_at_one: self.value_at_one.clone(),
            unital: self.unital,
            tracial: self.tracial,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl<S: Scalar> fmt::Debug for MomentFunctional<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentFunctional")
            .field("family", &self.family)
            .field("unital", &self.unital)
            .field("tracial", &self.tracial)
            .finish()
    }
}

impl<S: Scalar> MomentFunctional<S> {
    /// Table-backed functional. Missing words are an error at evaluation time.
    /// The table's value at the empty word (default 1) fixes unitality.
    pub fn from_table(
        family: u32,
        values: BTreeMap<Word, S>,
        tracial: bool,
    ) -> Result<Self, FunctionalError> {
        let value_at_one = values.get(&Word::empty()).cloned().unwrap_or_else(S::one);
        let unital = value_at_one.is_one();
        Ok(MomentFunctional {
            family,
            backing: Backing::Table(values),
            value_at_one,
            unital,
            tracial,
            memo: Mutex::new(HashMap::new()),
        })
    }

    /// Rule-backed functional; `rule` is queried on nonempty words only.
    pub fn from_rule(
        family: u32,
        value_at_one: S,
        tracial: bool,
        rule: impl Fn(&Word) -> Result<S, FunctionalError> + Send + Sync + 'static,
    ) -> Self {
        let unital = value_at_one.is_one();
        MomentFunctional {
            family,
            backing: Backing::Rule(Arc::new(rule)),
            value_at_one,
            unital,
            tracial,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn family(&self) -> u32 {
        self.family
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn is_tracial(&self) -> bool {
        self.tracial
    }

    pub fn value_at_one(&self) -> S {
        self.value_at_one.clone()
    }

    /// Value on a single word of this functional's family.
    pub fn value(&self, w: &Word) -> Result<S, FunctionalError> {
        if w.is_empty() {
            return Ok(self.value_at_one.clone());
        }
        if !w.is_single_family(self.family) {
            return Err(FunctionalError::MixedFamilies { family: self.family });
        }
        if let Some(v) = self.memo.lock().unwrap().get(w) {
            return Ok(v.clone());
        }
        let v = match &self.backing {
            Backing::Table(t) => t
                .get(w)
                .cloned()
                .ok_or_else(|| FunctionalError::MissingMoment(w.to_string()))?,
            Backing::Rule(r) => r(w)?,
        };
        self.memo.lock().unwrap().insert(w.clone(), v.clone());
        Ok(v)
    }

    /// Linear extension to polynomials supported on this family.
    pub fn evaluate(&self, p: &Polynomial<S>) -> Result<S, FunctionalError> {
        let mut acc = S::zero();
        for (w, c) in p.terms() {
            acc = acc + c.clone() * self.value(w)?;
        }
        Ok(acc)
    }

    /// `p - f(p) * 1`, so that `evaluate(f, center(f, p)) == 0`.
    pub fn center(&self, p: &Polynomial<S>) -> Result<Polynomial<S>, FunctionalError> {
        let v = self.evaluate(p)?;
        Ok(p.sub_scalar(&v))
    }

    /// Spot-checks traciality on the words of `p` rotated by every offset.
    pub fn check_tracial_on(&self, w: &Word) -> Result<bool, FunctionalError> {
        let base = self.value(w)?;
        for k in 1..w.len() {
            if self.value(&w.rotate_left(k))? != base {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Reads off the scalar part: 1 on the empty word, 0 on every other word.
pub fn delta_functional<S: Scalar>(family: u32) -> MomentFunctional<S> {
    MomentFunctional::from_rule(family, S::one(), true, |_| Ok(S::zero()))
}

/// Point mass at `c`: every length-k word maps to c^k.
pub fn dirac_functional<S: Scalar>(family: u32, c: S) -> MomentFunctional<S> {
    MomentFunctional::from_rule(family, S::one(), true, move |w| Ok(c.pow(w.len())))
}

/// The zero functional on nonempty words with a prescribed value at 1.
pub fn constant_functional<S: Scalar>(family: u32, value_at_one: S) -> MomentFunctional<S> {
    MomentFunctional::from_rule(family, value_at_one, true, |_| Ok(S::zero()))
}

/// Standard semicircle moments: odd moments vanish, the 2k-th moment is the
/// k-th Catalan number, generated by the first-return recursion
/// `m_{2k} = sum_j m_{2(j-1)} m_{2(k-j)}`.
pub fn semicircle_functional<S: Scalar>(family: u32) -> MomentFunctional<S> {
    MomentFunctional::from_rule(family, S::one(), true, |w| {
        let n = w.len();
        if n % 2 == 1 {
            return Ok(S::zero());
        }
        Ok(S::from_rational(&BigRational::from_integer(catalan(n / 2).into())))
    })
}

/// Symmetric two-atom (+1/-1) moments: 1 on even lengths, 0 on odd.
pub fn bernoulli_functional<S: Scalar>(family: u32) -> MomentFunctional<S> {
    MomentFunctional::from_rule(family, S::one(), true, |w| {
        Ok(if w.len() % 2 == 0 { S::one() } else { S::zero() })
    })
}

fn catalan(k: usize) -> u64 {
    let mut c = vec![0u64; k + 1];
    c[0] = 1;
    for n in 1..=k {
        for j in 0..n {
            c[n] += c[j] * c[n - 1 - j];
        }
    }
    c[k]
}

/// The diag(theta, a, ..., a) model with distinguished vector e1: limits,
/// first-order correction and the vector state, all in closed form, plus the
/// concrete matrix builder. `tr_N(A^k) = a^k + (theta^k - a^k)/N` exactly.
pub struct SpikedDiagonalModel<S: Scalar> {
    pub theta: S,
    pub base: S,
    /// Limit of the normalized trace: X^k -> a^k.
    pub psi_limit: MomentFunctional<S>,
    /// First-order trace correction: X^k -> theta^k - a^k; zero at 1.
    pub omega: MomentFunctional<S>,
    /// Vector state along the spike: X^k -> theta^k.
    pub phi: MomentFunctional<S>,
}

impl<S: Scalar> SpikedDiagonalModel<S> {
    /// Exact normalized trace at size `n`.
    pub fn psi_at(&self, n: usize) -> MomentFunctional<S> {
        let theta = self.theta.clone();
        let base = self.base.clone();
        let inv_n = S::from_ratio(1, n as i64);
        MomentFunctional::from_rule(self.psi_limit.family(), S::one(), true, move |w| {
            let k = w.len();
            let bulk = base.pow(k);
            Ok(bulk.clone() + (theta.pow(k) - bulk) * inv_n.clone())
        })
    }

    /// The concrete matrix diag(theta, a, ..., a).
    pub fn matrix(&self, n: usize) -> crate::matrix::CMatrix {
        let theta = self.theta.to_c64();
        let base = self.base.to_c64();
        let mut diag = vec![base; n];
        diag[0] = theta;
        crate::matrix::CMatrix::from_diag(&diag)
    }
}

/// Builds the spiked-diagonal model for spike `theta` over base value `a`.
pub fn spiked_diagonal_triple<S: Scalar>(family: u32, theta: S, a: S) -> SpikedDiagonalModel<S> {
    let psi_limit = {
        let a = a.clone();
        MomentFunctional::from_rule(family, S::one(), true, move |w| Ok(a.pow(w.len())))
    };
    let omega = {
        let theta = theta.clone();
        let a = a.clone();
        MomentFunctional::from_rule(family, S::zero(), true, move |w| {
            Ok(theta.pow(w.len()) - a.pow(w.len()))
        })
    };
    let phi = {
        let theta = theta.clone();
        MomentFunctional::from_rule(family, S::one(), true, move |w| Ok(theta.pow(w.len())))
    };
    SpikedDiagonalModel { theta, base: a, psi_limit, omega, phi }
}

/// Wraps a matrix ensemble as the functional `P -> state(P(members))`.
pub fn ensemble_functional(
    family: u32,
    ensemble: Arc<MatrixEnsemble>,
    mode: StateMode,
) -> MomentFunctional<C64> {
    let tracial = matches!(mode, StateMode::NormalizedTrace | StateMode::UnnormalizedTrace);
    let value_at_one = match mode {
        StateMode::UnnormalizedTrace => C64::new(ensemble.dim() as f64, 0.0),
        _ => C64::one(),
    };
    MomentFunctional::from_rule(family, value_at_one, tracial, move |w| {
        matrix::word_state(&ensemble, w, &mode)
            .map_err(|e| FunctionalError::BadSpec(e.to_string()))
    })
}

/// The (psi, phi) pair entering conditionally free products.
#[derive(Clone, Debug)]
pub struct FunctionalPair<S: Scalar> {
    pub phi: MomentFunctional<S>,
    pub psi: MomentFunctional<S>,
}

impl<S: Scalar> FunctionalPair<S> {
    pub fn new(phi: MomentFunctional<S>, psi: MomentFunctional<S>) -> Result<Self, FunctionalError> {
        if phi.family() != psi.family() {
            return Err(FunctionalError::FamilyMismatch(phi.family(), psi.family()));
        }
        if !phi.is_unital() || !psi.is_unital() {
            return Err(FunctionalError::NotUnital);
        }
        Ok(FunctionalPair { phi, psi })
    }

    pub fn family(&self) -> u32 {
        self.phi.family()
    }
}

/// The (psi, phi, omega) triple entering cyclic-conditional products: psi and
/// phi unital, omega tracial with a free value at 1.
#[derive(Clone, Debug)]
pub struct FunctionalTriple<S: Scalar> {
    pub psi: MomentFunctional<S>,
    pub phi: MomentFunctional<S>,
    pub omega: MomentFunctional<S>,
}

impl<S: Scalar> FunctionalTriple<S> {
    pub fn new(
        psi: MomentFunctional<S>,
        phi: MomentFunctional<S>,
        omega: MomentFunctional<S>,
    ) -> Result<Self, FunctionalError> {
        if psi.family() != phi.family() {
            return Err(FunctionalError::FamilyMismatch(psi.family(), phi.family()));
        }
        if psi.family() != omega.family() {
            return Err(FunctionalError::FamilyMismatch(psi.family(), omega.family()));
        }
        if !psi.is_unital() || !phi.is_unital() {
            return Err(FunctionalError::NotUnital);
        }
        if !omega.is_tracial() {
            return Err(FunctionalError::OmegaNotTracial);
        }
        Ok(FunctionalTriple { psi, phi, omega })
    }

    pub fn family(&self) -> u32 {
        self.psi.family()
    }
}

/// JSON description of a functional: either an explicit word table
/// (`{"values": {"X0": "1/2", "X0*X0": 1}, "tracial": true}`) or a named rule
/// (`{"rule": "semicircle"}`, `{"rule": "dirac", "param": "2"}`).
#[derive(Serialize, Deserialize, Debug, Clone, Default)]
pub struct FunctionalSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(default)]
    pub tracial: bool,
}

impl FunctionalSpec {
    /// True when every literal in the spec is rational-representable without
    /// going through a float (integers and string literals).
    pub fn is_rational(&self) -> bool {
        let val_ok = |v: &serde_json::Value| match v {
            serde_json::Value::String(_) => true,
            serde_json::Value::Number(n) => n.is_i64() || n.is_u64(),
            _ => false,
        };
        self.param.as_ref().map_or(true, val_ok)
            && self
                .values
                .as_ref()
                .map_or(true, |m| m.values().all(val_ok))
    }

    pub fn build<S: Scalar>(&self, family: u32) -> Result<MomentFunctional<S>, FunctionalError> {
        if let Some(rule) = &self.rule {
            let param = match &self.param {
                None => S::one(),
                Some(v) => json_scalar::<S>(v)?,
            };
            return match rule.as_str() {
                "delta" => Ok(delta_functional(family)),
                "dirac" => Ok(dirac_functional(family, param)),
                "semicircle" => Ok(semicircle_functional(family)),
                "bernoulli" => Ok(bernoulli_functional(family)),
                "zero" => Ok(constant_functional(family, S::zero())),
                other => Err(FunctionalError::BadSpec(format!("unknown rule `{other}`"))),
            };
        }
        let Some(values) = &self.values else {
            return Err(FunctionalError::BadSpec("need `rule` or `values`".into()));
        };
        let mut table = BTreeMap::new();
        for (key, raw) in values {
            let word = crate::word::parse_word(key)
                .map_err(|e| FunctionalError::BadSpec(format!("key `{key}`: {e}")))?;
            if !word.is_single_family(family) {
                return Err(FunctionalError::BadSpec(format!(
                    "key `{key}` does not belong to family {family}"
                )));
            }
            table.insert(word, json_scalar::<S>(raw)?);
        }
        MomentFunctional::from_table(family, table, self.tracial)
    }
}

fn json_scalar<S: Scalar>(v: &serde_json::Value) -> Result<S, FunctionalError> {
    match v {
        serde_json::Value::String(s) => parse_big_rational(s)
            .map(|r| S::from_rational(&r))
            .ok_or_else(|| FunctionalError::BadSpec(format!("bad rational literal `{s}`"))),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(S::from_i64(i))
            } else {
                let f = n.as_f64().ok_or_else(|| {
                    FunctionalError::BadSpec(format!("non-finite number `{n}`"))
                })?;
                let r = BigRational::from_float(f)
                    .ok_or_else(|| FunctionalError::BadSpec(format!("non-finite number `{n}`")))?;
                Ok(S::from_rational(&r))
            }
        }
        other => Err(FunctionalError::BadSpec(format!("expected number, got `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::CExact;
    use crate::word::parse_polynomial;

    #[test]
    fn dirac_at_one_evaluates_words_to_one() {
        let f = dirac_functional::<CExact>(0, CExact::from_i64(1));
        let p = parse_polynomial("X0^3").unwrap();
        assert_eq!(f.evaluate(&p).unwrap(), CExact::from_i64(1));
        assert_eq!(f.evaluate(&Polynomial::one()).unwrap(), CExact::from_i64(1));
    }

    #[test]
    fn delta_reads_off_scalar_part() {
        let d = delta_functional::<CExact>(0);
        assert_eq!(d.evaluate(&Polynomial::one()).unwrap(), CExact::from_i64(1));
        assert_eq!(
            d.evaluate(&parse_polynomial("X0^5").unwrap()).unwrap(),
            CExact::from_i64(0)
        );
        assert_eq!(
            d.evaluate(&parse_polynomial("3 + 2*X0").unwrap()).unwrap(),
            CExact::from_i64(3)
        );
    }

    #[test]
    fn centering_kills_the_mean() {
        let f = semicircle_functional::<CExact>(0);
        let p = parse_polynomial("X0^2").unwrap();
        let centered = f.center(&p).unwrap();
        assert_eq!(centered, parse_polynomial("X0^2 - 1").unwrap());
        assert_eq!(f.evaluate(&centered).unwrap(), CExact::from_i64(0));
        assert_eq!(f.center(&Polynomial::one()).unwrap(), Polynomial::zero());
    }

    #[test]
    fn evaluate_rejects_mixed_families() {
        let f = semicircle_functional::<CExact>(0);
        let p = parse_polynomial("X0*Y0").unwrap();
        assert!(matches!(
            f.evaluate(&p),
            Err(FunctionalError::MixedFamilies { family: 0 })
        ));
    }

    #[test]
    fn linearity_is_exact() {
        let f = semicircle_functional::<CExact>(0);
        let p: Polynomial<CExact> = parse_polynomial("X0^2 + X0").unwrap();
        let q: Polynomial<CExact> = parse_polynomial("X0^4 - 2*X0").unwrap();
        let alpha = CExact::from_ratio(3, 7);
        let beta = CExact::from_ratio(-2, 5);
        let combo = p.scale(&alpha).add(&q.scale(&beta));
        let lhs = f.evaluate(&combo).unwrap();
        let rhs = alpha * f.evaluate(&p).unwrap() + beta * f.evaluate(&q).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn spiked_trace_expansion_is_exact() {
        // theta=2, a=0, k=3: psi_inf=0, omega=8, phi=8, tr_4 = 8/4 = 2.
        let m = spiked_diagonal_triple::<CExact>(0, CExact::from_i64(2), CExact::from_i64(0));
        let w = Word::power(0, 3);
        assert_eq!(m.psi_limit.value(&w).unwrap(), CExact::from_i64(0));
        assert_eq!(m.omega.value(&w).unwrap(), CExact::from_i64(8));
        assert_eq!(m.phi.value(&w).unwrap(), CExact::from_i64(8));
        assert_eq!(m.psi_at(4).value(&w).unwrap(), CExact::from_i64(2));

        // theta=2, a=1, k=2: tr_N = 1 + 3/N for every N.
        let m = spiked_diagonal_triple::<CExact>(0, CExact::from_i64(2), CExact::from_i64(1));
        let w = Word::power(0, 2);
        for n in [4usize, 8, 16] {
            let expected = CExact::from_i64(1) + CExact::from_ratio(3, n as i64);
            assert_eq!(m.psi_at(n).value(&w).unwrap(), expected);
        }

        // theta=a: omega vanishes on nonempty words.
        let m = spiked_diagonal_triple::<CExact>(0, CExact::from_i64(1), CExact::from_i64(1));
        assert_eq!(m.omega.value(&Word::power(0, 5)).unwrap(), CExact::from_i64(0));
    }

    #[test]
    fn spiked_expansion_matches_matrix_trace() {
        // Exactness of tr_N = psi_inf + omega/N against the real matrix.
        let m = spiked_diagonal_triple::<C64>(0, C64::new(2.0, 0.0), C64::new(0.5, 0.0));
        for n in [4usize, 8, 16] {
            let a = m.matrix(n);
            for k in 1..=8 {
                let mut acc = a.clone();
                for _ in 1..k {
                    acc = acc.mul(&a);
                }
                let tr = acc.trace() / n as f64;
                let predicted = m.psi_at(n).value(&Word::power(0, k)).unwrap();
                assert!((tr - predicted).norm() < 1e-12, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn functional_spec_round_trip() {
        let json = r#"{"values": {"X0": "1/2", "X0*X0": 1}, "tracial": true}"#;
        let spec: FunctionalSpec = serde_json::from_str(json).unwrap();
        assert!(spec.is_rational());
        let f = spec.build::<CExact>(0).unwrap();
        assert_eq!(f.value(&Word::power(0, 1)).unwrap(), CExact::from_ratio(1, 2));
        assert_eq!(f.value(&Word::power(0, 2)).unwrap(), CExact::from_i64(1));
        assert!(f.value(&Word::power(0, 3)).is_err());

        let bad: FunctionalSpec = serde_json::from_str(r#"{"rule": "nope"}"#).unwrap();
        assert!(bad.build::<CExact>(0).is_err());
    }

    #[test]
    fn semicircle_moments_are_catalan() {
        let f = semicircle_functional::<CExact>(0);
        let expected = [1i64, 0, 1, 0, 2, 0, 5, 0, 14];
        for (k, &e) in expected.iter().enumerate() {
            assert_eq!(f.value(&Word::power(0, k)).unwrap(), CExact::from_i64(e));
        }
    }
}
