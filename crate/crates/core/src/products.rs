//! Product evaluators for moment functionals on free products of algebras.
//!
//! All five products are configurations of one centering recursion. A word is
//! decomposed into alternating blocks by registered algebra; every block `b`
//! splits as `b = (b - beta) + beta` against that algebra's *weight*
//! functional, and the expansion is summed multilinearly. The all-centered
//! term is evaluated by the defining identity of the product (a product of
//! *value* functionals on the centered blocks), every other term recurses on
//! a strictly shorter word:
//!
//! * free product: weight = value = psi, so the all-centered term vanishes;
//! * weighted conditionally free product: weights psi_i, values phi_i;
//! * ordered product: weights (psi_1, phi_2), components phi then psi;
//! * indented product: weights (theta_1, psi_2), components phi, psi, theta;
//! * cyclic-conditional product: weights psi_i, all-centered cyclically
//!   alternating words evaluate as a product of phi values, single blocks by
//!   omega_i, and a word whose ends share an algebra is first rotated (the
//!   product functional is tracial by construction).
//!
//! Registered algebras may themselves be sub-products (composite grouping),
//! which is how associativity is exercised.

use crate::functionals::{FunctionalError, FunctionalPair, FunctionalTriple, MomentFunctional};
use crate::scalar::Scalar;
use crate::word::{multiply, Polynomial, Word};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ProductError {
    #[error("no algebra registered for family {0}")]
    UnregisteredFamily(u32),
    #[error("cyclic product requires equal omega(1) values across algebras")]
    OmegaUnitMismatch,
    #[error("operation `{op}` is not available in {mode:?} mode")]
    ModeMismatch { op: &'static str, mode: Mode },
    #[error("{0} mode requires exactly two algebras")]
    NeedsTwoAlgebras(&'static str),
    #[error("duplicate registration for family {0}")]
    DuplicateFamily(u32),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

/// Which component of a multi-functional product is being evaluated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Component {
    Psi,
    Phi,
    Theta,
    Omega,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Free,
    CFree,
    Ordered,
    Indented,
    Cyclic,
}

/// A functional an algebra slot exposes: either a plain moment functional or
/// a component of a registered sub-product.
#[derive(Clone)]
enum AlgebraFn<S: Scalar> {
    Moment(Arc<MomentFunctional<S>>),
    Sub(Arc<ProductContext<S>>, Component),
}

impl<S: Scalar> AlgebraFn<S> {
    fn eval(&self, p: &Polynomial<S>) -> Result<S, ProductError> {
        match self {
            AlgebraFn::Moment(f) => Ok(f.evaluate(p)?),
            AlgebraFn::Sub(ctx, c) => ctx.eval_poly(*c, p),
        }
    }
}

struct AlgebraSlot<S: Scalar> {
    weight: AlgebraFn<S>,
    values: HashMap<Component, AlgebraFn<S>>,
}

/// A registered set of algebras with the functionals one product mode needs.
/// Evaluation is deterministic; the memo cache only stores values already
/// determined by the inputs, so sharing a context across threads is sound.
pub struct ProductContext<S: Scalar> {
    mode: Mode,
    slots: Vec<AlgebraSlot<S>>,
    family_to_slot: BTreeMap<u32, usize>,
    omega_one: Option<S>,
    memo: Mutex<HashMap<(Component, Word), S>>,
}

/// An algebra entering a cyclic product: either an atomic triple or an
/// already-formed cyclic product treated as a single algebra.
pub enum CyclicAlgebra<S: Scalar> {
    Atom(FunctionalTriple<S>),
    Grouped(Arc<ProductContext<S>>),
}

impl<S: Scalar> ProductContext<S> {
    fn empty(mode: Mode) -> Self {
        ProductContext {
            mode,
            slots: Vec::new(),
            family_to_slot: BTreeMap::new(),
            omega_one: None,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn push_slot(
        &mut self,
        families: &[u32],
        weight: AlgebraFn<S>,
        values: Vec<(Component, AlgebraFn<S>)>,
    ) -> Result<(), ProductError> {
        let idx = self.slots.len();
        for &f in families {
            if self.family_to_slot.insert(f, idx).is_some() {
                return Err(ProductError::DuplicateFamily(f));
            }
        }
        self.slots.push(AlgebraSlot { weight, values: values.into_iter().collect() });
        Ok(())
    }

    /// Free product of unital functionals, one per family.
    pub fn free(psis: Vec<MomentFunctional<S>>) -> Result<Self, ProductError> {
        let mut ctx = ProductContext::empty(Mode::Free);
        for psi in psis {
            if !psi.is_unital() {
                return Err(FunctionalError::NotUnital.into());
            }
            let f = AlgebraFn::Moment(Arc::new(psi.clone()));
            ctx.push_slot(&[psi.family()], f.clone(), vec![(Component::Psi, f)])?;
        }
        Ok(ctx)
    }

    /// Weighted conditionally free product: per family a value functional
    /// phi and a weight functional psi (the centering functional).
    pub fn cfree(pairs: Vec<FunctionalPair<S>>) -> Result<Self, ProductError> {
        let mut ctx = ProductContext::empty(Mode::CFree);
        for pair in pairs {
            let family = pair.family();
            let psi = AlgebraFn::Moment(Arc::new(pair.psi));
            let phi = AlgebraFn::Moment(Arc::new(pair.phi));
            ctx.push_slot(
                &[family],
                psi.clone(),
                vec![(Component::Psi, psi), (Component::Phi, phi)],
            )?;
        }
        Ok(ctx)
    }

    /// Ordered product of two pairs (phi_i, psi_i): weights are psi on the
    /// left algebra and phi on the right.
    pub fn ordered(
        left: FunctionalPair<S>,
        right: FunctionalPair<S>,
    ) -> Result<Self, ProductError> {
        let mut ctx = ProductContext::empty(Mode::Ordered);
        let (lf, rf) = (left.family(), right.family());
        let l_phi = AlgebraFn::Moment(Arc::new(left.phi));
        let l_psi = AlgebraFn::Moment(Arc::new(left.psi));
        let r_phi = AlgebraFn::Moment(Arc::new(right.phi));
        let r_psi = AlgebraFn::Moment(Arc::new(right.psi));
        ctx.push_slot(
            &[lf],
            l_psi.clone(),
            vec![(Component::Phi, l_phi), (Component::Psi, l_psi)],
        )?;
        ctx.push_slot(
            &[rf],
            r_phi.clone(),
            vec![(Component::Phi, r_phi), (Component::Psi, r_psi)],
        )?;
        Ok(ctx)
    }

    /// Indented product of two triples (phi_i, psi_i, theta_i): weights are
    /// theta on the left algebra and psi on the right.
    pub fn indented(
        left: (MomentFunctional<S>, MomentFunctional<S>, MomentFunctional<S>),
        right: (MomentFunctional<S>, MomentFunctional<S>, MomentFunctional<S>),
    ) -> Result<Self, ProductError> {
        for f in [&left.0, &left.1, &left.2, &right.0, &right.1, &right.2] {
            if !f.is_unital() {
                return Err(FunctionalError::NotUnital.into());
            }
        }
        let mut ctx = ProductContext::empty(Mode::Indented);
        let (lf, rf) = (left.0.family(), right.0.family());
        let (l_phi, l_psi, l_theta) = (
            AlgebraFn::Moment(Arc::new(left.0)),
            AlgebraFn::Moment(Arc::new(left.1)),
            AlgebraFn::Moment(Arc::new(left.2)),
        );
        let (r_phi, r_psi, r_theta) = (
            AlgebraFn::Moment(Arc::new(right.0)),
            AlgebraFn::Moment(Arc::new(right.1)),
            AlgebraFn::Moment(Arc::new(right.2)),
        );
        ctx.push_slot(
            &[lf],
            l_theta.clone(),
            vec![
                (Component::Phi, l_phi),
                (Component::Psi, l_psi),
                (Component::Theta, l_theta),
            ],
        )?;
        ctx.push_slot(
            &[rf],
            r_psi.clone(),
            vec![
                (Component::Phi, r_phi),
                (Component::Psi, r_psi),
                (Component::Theta, r_theta),
            ],
        )?;
        Ok(ctx)
    }

    /// Cyclic-conditional product of triples (psi, phi, omega). All omega(1)
    /// values must agree; the common value becomes omega(1) of the product.
    pub fn cyclic(triples: Vec<FunctionalTriple<S>>) -> Result<Self, ProductError> {
        ProductContext::cyclic_grouped(triples.into_iter().map(CyclicAlgebra::Atom).collect())
    }

    /// Cyclic-conditional product where each algebra is either an atomic
    /// triple or a previously formed cyclic product (grouping of consecutive
    /// letters of its families into one block).
    pub fn cyclic_grouped(algebras: Vec<CyclicAlgebra<S>>) -> Result<Self, ProductError> {
        let mut ctx = ProductContext::empty(Mode::Cyclic);
        let mut shared: Option<S> = None;
        let mut check = |v: S| -> Result<S, ProductError> {
            match &shared {
                None => {
                    shared = Some(v.clone());
                    Ok(v)
                }
                Some(prev) if *prev == v => Ok(v),
                Some(_) => Err(ProductError::OmegaUnitMismatch),
            }
        };
        for alg in algebras {
            match alg {
                CyclicAlgebra::Atom(t) => {
                    check(t.omega.value_at_one())?;
                    let family = t.family();
                    let psi = AlgebraFn::Moment(Arc::new(t.psi));
                    let phi = AlgebraFn::Moment(Arc::new(t.phi));
                    let omega = AlgebraFn::Moment(Arc::new(t.omega));
                    ctx.push_slot(
                        &[family],
                        psi.clone(),
                        vec![
                            (Component::Psi, psi),
                            (Component::Phi, phi),
                            (Component::Omega, omega),
                        ],
                    )?;
                }
                CyclicAlgebra::Grouped(sub) => {
                    if sub.mode != Mode::Cyclic {
                        return Err(ProductError::ModeMismatch {
                            op: "cyclic_grouped",
                            mode: sub.mode,
                        });
                    }
                    check(sub.component_at_one(Component::Omega))?;
                    let families: Vec<u32> = sub.family_to_slot.keys().copied().collect();
                    let psi = AlgebraFn::Sub(Arc::clone(&sub), Component::Psi);
                    let phi = AlgebraFn::Sub(Arc::clone(&sub), Component::Phi);
                    let omega = AlgebraFn::Sub(Arc::clone(&sub), Component::Omega);
                    ctx.push_slot(
                        &families,
                        psi.clone(),
                        vec![
                            (Component::Psi, psi),
                            (Component::Phi, phi),
                            (Component::Omega, omega),
                        ],
                    )?;
                }
            }
        }
        ctx.omega_one = shared;
        Ok(ctx)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn families(&self) -> Vec<u32> {
        self.family_to_slot.keys().copied().collect()
    }

    /// omega(1) of a cyclic product.
    pub fn omega_one(&self) -> Option<S> {
        self.omega_one.clone()
    }

    fn component_at_one(&self, c: Component) -> S {
        match c {
            Component::Omega => self.omega_one.clone().expect("cyclic mode has omega(1)"),
            _ => S::one(),
        }
    }

    fn slot_of(&self, family: u32) -> Result<usize, ProductError> {
        self.family_to_slot
            .get(&family)
            .copied()
            .ok_or(ProductError::UnregisteredFamily(family))
    }

    fn require(&self, op: &'static str, allowed: &[Mode]) -> Result<(), ProductError> {
        if allowed.contains(&self.mode) {
            Ok(())
        } else {
            Err(ProductError::ModeMismatch { op, mode: self.mode })
        }
    }

    /// The unique unital functional extending the registered psi's under
    /// which the algebras are freely independent.
    pub fn free_product_eval(&self, w: &Word) -> Result<S, ProductError> {
        self.require("free_product_eval", &[Mode::Free, Mode::CFree, Mode::Cyclic])?;
        self.eval_word(Component::Psi, w)
    }

    /// The weighted conditionally free value functional (the phi component).
    pub fn weighted_cfree_eval(&self, w: &Word) -> Result<S, ProductError> {
        self.require(
            "weighted_cfree_eval",
            &[Mode::CFree, Mode::Ordered, Mode::Indented, Mode::Cyclic],
        )?;
        self.eval_word(Component::Phi, w)
    }

    /// The conditionally free pair (psi value, phi value).
    pub fn cfree_product_eval(&self, w: &Word) -> Result<(S, S), ProductError> {
        self.require("cfree_product_eval", &[Mode::CFree, Mode::Cyclic])?;
        Ok((self.eval_word(Component::Psi, w)?, self.eval_word(Component::Phi, w)?))
    }

    /// The cyclic-conditional (omega) value.
    pub fn cyclic_cfree_eval(&self, w: &Word) -> Result<S, ProductError> {
        self.require("cyclic_cfree_eval", &[Mode::Cyclic])?;
        self.eval_word(Component::Omega, w)
    }

    /// The ordered pair (phi value, psi value).
    pub fn ordered_product_eval(&self, w: &Word) -> Result<(S, S), ProductError> {
        self.require("ordered_product_eval", &[Mode::Ordered])?;
        Ok((self.eval_word(Component::Phi, w)?, self.eval_word(Component::Psi, w)?))
    }

    /// The indented triple (phi, psi, theta values).
    pub fn indented_product_eval(&self, w: &Word) -> Result<(S, S, S), ProductError> {
        self.require("indented_product_eval", &[Mode::Indented])?;
        Ok((
            self.eval_word(Component::Phi, w)?,
            self.eval_word(Component::Psi, w)?,
            self.eval_word(Component::Theta, w)?,
        ))
    }

    /// Component evaluation extended linearly to polynomials.
    pub fn eval_poly(&self, c: Component, p: &Polynomial<S>) -> Result<S, ProductError> {
        let mut acc = S::zero();
        for (w, coeff) in p.terms() {
            acc = acc + coeff.clone() * self.eval_word(c, w)?;
        }
        Ok(acc)
    }

    /// Single-component word evaluation.
    pub fn eval_word(&self, c: Component, w: &Word) -> Result<S, ProductError> {
        if w.is_empty() {
            return Ok(self.component_at_one(c));
        }
        let key = (c, w.clone());
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let blocks = self.algebra_blocks(w)?;
        let result = if blocks.len() == 1 {
            let comp = self
                .slots[blocks[0].0]
                .values
                .get(&c)
                .ok_or(ProductError::ModeMismatch { op: "eval_word", mode: self.mode })?;
            comp.eval(&Polynomial::from_word(blocks[0].1.clone()))?
        } else if c == Component::Omega && blocks[0].0 == blocks[blocks.len() - 1].0 {
            // Traciality: rotate so the shared-end blocks merge.
            let last_len = blocks[blocks.len() - 1].1.len();
            let rotated = w.rotate_left(w.len() - last_len);
            self.eval_word(c, &rotated)?
        } else {
            self.expand_blocks(c, &blocks)?
        };
        self.memo.lock().unwrap().insert(key, result.clone());
        Ok(result)
    }

    /// Groups the letters of `w` into maximal runs of one registered algebra.
    fn algebra_blocks(&self, w: &Word) -> Result<Vec<(usize, Word)>, ProductError> {
        let mut blocks: Vec<(usize, Word)> = Vec::new();
        for &g in w.letters() {
            let slot = self.slot_of(g.family())?;
            match blocks.last_mut() {
                Some((s, word)) if *s == slot => {
                    *word = word.concat(&Word::single(g));
                }
                _ => blocks.push((slot, Word::single(g))),
            }
        }
        Ok(blocks)
    }

    /// The centering expansion over an alternating block sequence of length
    /// >= 2 (cyclically alternating when evaluating the omega component).
    fn expand_blocks(&self, c: Component, blocks: &[(usize, Word)]) -> Result<S, ProductError> {
        let k = blocks.len();
        let value_comp = if c == Component::Omega { Component::Phi } else { c };
        let mut betas = Vec::with_capacity(k);
        let mut centered = Vec::with_capacity(k);
        for (slot, word) in blocks {
            let poly = Polynomial::from_word(word.clone());
            let beta = self.slots[*slot].weight.eval(&poly)?;
            centered.push(poly.sub_scalar(&beta));
            betas.push(beta);
        }
        // All-centered term: the defining identity of the product.
        let mut total = S::one();
        for ((slot, _), cblock) in blocks.iter().zip(centered.iter()) {
            let value = self
                .slots[*slot]
                .values
                .get(&value_comp)
                .ok_or(ProductError::ModeMismatch { op: "expand_blocks", mode: self.mode })?;
            total = total * value.eval(cblock)?;
        }
        // Every subset of blocks replaced by its weight scalar recurses on a
        // strictly shorter word.
        for mask in 1u32..(1u32 << k) {
            let mut coeff = S::one();
            let mut poly = Polynomial::one();
            for i in 0..k {
                if mask & (1 << i) != 0 {
                    coeff = coeff * betas[i].clone();
                } else {
                    poly = multiply(&poly, &centered[i]);
                }
            }
            if coeff.is_zero() {
                continue;
            }
            total = total + coeff * self.eval_poly(c, &poly)?;
        }
        Ok(total)
    }

    /// The second-order covariance functional attached to a free-mode
    /// context with vanishing per-algebra second-order data: both arguments
    /// are decomposed (traciality rotation, centering, multilinearity) into
    /// cyclically alternating centered factor tuples, and matched tuples are
    /// summed over cyclic pairings of first-order mixed moments.
    pub fn second_order_covariance(
        &self,
        p: &Polynomial<S>,
        q: &Polynomial<S>,
    ) -> Result<S, ProductError> {
        self.require("second_order_covariance", &[Mode::Free])?;
        let pd = self.cyclic_factor_decomposition(p)?;
        let qd = self.cyclic_factor_decomposition(q)?;
        let mut total = S::zero();
        for (cp, fp) in &pd {
            for (cq, fq) in &qd {
                if fp.len() != fq.len() {
                    continue; // the Kronecker delta on factor counts
                }
                total = total + cp.clone() * cq.clone() * self.cyclic_pairing(fp, fq)?;
            }
        }
        Ok(total)
    }

    /// `sum_k prod_i psi(a_i b_{i+k})` with the second tuple reversed, as the
    /// second argument enters the defining identity in reversed order.
    fn cyclic_pairing(
        &self,
        a: &[Polynomial<S>],
        q_factors: &[Polynomial<S>],
    ) -> Result<S, ProductError> {
        let n = a.len();
        debug_assert_eq!(n, q_factors.len());
        if n == 0 {
            return Ok(S::zero());
        }
        let b: Vec<&Polynomial<S>> = q_factors.iter().rev().collect();
        let mut total = S::zero();
        for k in 0..n {
            let mut prod = S::one();
            for i in 0..n {
                let pairing = multiply(&a[i], b[(i + k) % n]);
                prod = prod * self.eval_poly(Component::Psi, &pairing)?;
            }
            total = total + prod;
        }
        Ok(total)
    }

    /// Decomposes a polynomial into `sum coeff * (centered factor tuple)`
    /// with every tuple cyclically alternating. Scalar terms drop out
    /// (the bilinear functional vanishes on 1) and single centered blocks
    /// survive as 1-tuples.
    pub fn cyclic_factor_decomposition(
        &self,
        p: &Polynomial<S>,
    ) -> Result<Vec<(S, Vec<Polynomial<S>>)>, ProductError> {
        let mut out = Vec::new();
        for (w, c) in p.terms() {
            if w.is_empty() {
                continue;
            }
            self.decompose_word(w, c.clone(), &mut out)?;
        }
        Ok(out)
    }

    fn decompose_word(
        &self,
        w: &Word,
        coeff: S,
        out: &mut Vec<(S, Vec<Polynomial<S>>)>,
    ) -> Result<(), ProductError> {
        let blocks = self.algebra_blocks(w)?;
        let k = blocks.len();
        if k >= 2 && blocks[0].0 == blocks[k - 1].0 {
            let last_len = blocks[k - 1].1.len();
            let rotated = w.rotate_left(w.len() - last_len);
            return self.decompose_word(&rotated, coeff, out);
        }
        let mut betas = Vec::with_capacity(k);
        let mut centered = Vec::with_capacity(k);
        for (slot, word) in &blocks {
            let poly = Polynomial::from_word(word.clone());
            let beta = self.slots[*slot].weight.eval(&poly)?;
            centered.push(poly.sub_scalar(&beta));
            betas.push(beta);
        }
        out.push((coeff.clone(), centered.clone()));
        for mask in 1u32..(1u32 << k) {
            let mut c2 = coeff.clone();
            let mut poly = Polynomial::one();
            for i in 0..k {
                if mask & (1 << i) != 0 {
                    c2 = c2 * betas[i].clone();
                } else {
                    poly = multiply(&poly, &centered[i]);
                }
            }
            if c2.is_zero() {
                continue;
            }
            for (w2, cw) in poly.terms() {
                if w2.is_empty() {
                    continue;
                }
                self.decompose_word(w2, c2.clone() * cw.clone(), out)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{
        delta_functional, dirac_functional, semicircle_functional, MomentFunctional,
    };
    use crate::scalar::{CExact, Scalar};
    use crate::word::parse_word;
    use num::Zero;
    use std::collections::BTreeMap;

    fn table(family: u32, moments: &[(usize, (i64, i64))]) -> MomentFunctional<CExact> {
        let mut t = BTreeMap::new();
        for &(len, (n, d)) in moments {
            t.insert(Word::power(family, len), CExact::from_ratio(n, d));
        }
        MomentFunctional::from_table(family, t, true).unwrap()
    }

    #[test]
    fn free_product_on_single_letters_factorizes() {
        let fa = table(0, &[(1, (1, 2)), (2, (2, 1))]);
        let fb = table(1, &[(1, (1, 3)), (2, (3, 1))]);
        let ctx = ProductContext::free(vec![fa, fb]).unwrap();
        let v = ctx.free_product_eval(&parse_word("X0*Y0").unwrap()).unwrap();
        assert_eq!(v, CExact::from_ratio(1, 6));
        // Extension: single-family words evaluate by the input functional.
        assert_eq!(
            ctx.free_product_eval(&parse_word("X0*X0").unwrap()).unwrap(),
            CExact::from_i64(2)
        );
        assert_eq!(ctx.free_product_eval(&Word::empty()).unwrap(), CExact::from_i64(1));
    }

    #[test]
    fn free_product_abab_formula() {
        // psi(abab) = psi(a^2) psi(b)^2 + psi(a)^2 psi(b^2) - psi(a)^2 psi(b)^2
        let ma1 = CExact::from_ratio(2, 3);
        let ma2 = CExact::from_ratio(5, 2);
        let mb1 = CExact::from_ratio(-1, 4);
        let mb2 = CExact::from_ratio(7, 5);
        let fa = table(0, &[(1, (2, 3)), (2, (5, 2))]);
        let fb = table(1, &[(1, (-1, 4)), (2, (7, 5))]);
        let ctx = ProductContext::free(vec![fa, fb]).unwrap();
        let got = ctx.free_product_eval(&parse_word("X0*Y0*X0*Y0").unwrap()).unwrap();
        let expected = ma2.clone() * mb1.clone() * mb1.clone()
            + ma1.clone() * ma1.clone() * mb2
            - ma1.clone() * ma1 * mb1.clone() * mb1;
        assert_eq!(got, expected);
    }

    #[test]
    fn free_product_of_point_masses_is_multiplicative() {
        let ctx = ProductContext::free(vec![
            dirac_functional::<CExact>(0, CExact::from_i64(1)),
            dirac_functional::<CExact>(1, CExact::from_i64(1)),
        ])
        .unwrap();
        for word in ["X0*Y0", "X0*Y0*X0", "Y0*X0*Y0*X0*Y0"] {
            assert_eq!(
                ctx.free_product_eval(&parse_word(word).unwrap()).unwrap(),
                CExact::from_i64(1),
                "{word}"
            );
        }
    }

    #[test]
    fn free_product_vanishes_on_alternating_centered_words() {
        let fa = semicircle_functional::<CExact>(0);
        let fb = table(1, &[(1, (1, 2)), (2, (1, 1)), (3, (1, 4)), (4, (3, 1))]);
        let ctx = ProductContext::free(vec![fa.clone(), fb.clone()]).unwrap();
        // (X0^2 - 1) is centered for the semicircle; (Y0 - 1/2) for the table.
        let a = fa.center(&crate::word::parse_polynomial("X0^2").unwrap()).unwrap();
        let b = fb.center(&crate::word::parse_polynomial("Y0").unwrap()).unwrap();
        let mut word_poly = multiply(&a, &b);
        word_poly = multiply(&word_poly, &a);
        assert_eq!(ctx.eval_poly(Component::Psi, &word_poly).unwrap(), CExact::zero());
    }

    #[test]
    fn unregistered_family_is_an_error() {
        let ctx = ProductContext::free(vec![semicircle_functional::<CExact>(0)]).unwrap();
        assert!(matches!(
            ctx.free_product_eval(&parse_word("X0*Y0").unwrap()),
            Err(ProductError::UnregisteredFamily(1))
        ));
    }

    #[test]
    fn weighted_cfree_on_single_letters() {
        // phi(ab) = phi_A(a) phi_B(b) whatever the weights.
        let phi_a = table(0, &[(1, (3, 1)), (2, (9, 1))]);
        let psi_a = table(0, &[(1, (1, 2)), (2, (1, 5))]);
        let phi_b = table(1, &[(1, (-2, 1)), (2, (4, 1))]);
        let psi_b = table(1, &[(1, (1, 7)), (2, (2, 7))]);
        let ctx = ProductContext::cfree(vec![
            FunctionalPair::new(phi_a, psi_a).unwrap(),
            FunctionalPair::new(phi_b, psi_b).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            ctx.weighted_cfree_eval(&parse_word("X0*Y0").unwrap()).unwrap(),
            CExact::from_i64(-6)
        );
    }

    #[test]
    fn boolean_case_with_delta_weights() {
        // Both weights delta: phi factorizes over any alternating word of
        // constant-free letters.
        let phi_a = table(0, &[(1, (3, 2)), (2, (2, 1)), (3, (4, 1))]);
        let phi_b = table(1, &[(1, (5, 1)), (2, (1, 3))]);
        let ctx = ProductContext::cfree(vec![
            FunctionalPair::new(phi_a.clone(), delta_functional(0)).unwrap(),
            FunctionalPair::new(phi_b.clone(), delta_functional(1)).unwrap(),
        ])
        .unwrap();
        let got = ctx.weighted_cfree_eval(&parse_word("X0*Y0*X0").unwrap()).unwrap();
        let expected = CExact::from_ratio(3, 2) * CExact::from_i64(5) * CExact::from_ratio(3, 2);
        assert_eq!(got, expected);
    }

    #[test]
    fn monotone_case_with_mixed_weights() {
        // weight_A = delta, weight_B = phi_B: phi(b0 a b1) = phi(a) phi(b0) phi(b1).
        let phi_a = table(0, &[(1, (3, 2)), (2, (2, 1))]);
        let phi_b = table(1, &[(1, (5, 1)), (2, (1, 3)), (3, (2, 9)), (4, (1, 1))]);
        let ctx = ProductContext::cfree(vec![
            FunctionalPair::new(phi_a.clone(), delta_functional(0)).unwrap(),
            FunctionalPair::new(phi_b.clone(), phi_b.clone()).unwrap(),
        ])
        .unwrap();
        let got = ctx.weighted_cfree_eval(&parse_word("Y0*X0*Y0^2").unwrap()).unwrap();
        let expected = CExact::from_ratio(3, 2) * CExact::from_i64(5) * CExact::from_ratio(1, 3);
        assert_eq!(got, expected);
    }

    #[test]
    fn cfree_pair_on_single_letter_extends_inputs() {
        let phi_a = table(0, &[(1, (3, 1))]);
        let psi_a = table(0, &[(1, (1, 2))]);
        let phi_b = table(1, &[(1, (-2, 1))]);
        let psi_b = table(1, &[(1, (1, 7))]);
        let ctx = ProductContext::cfree(vec![
            FunctionalPair::new(phi_a, psi_a).unwrap(),
            FunctionalPair::new(phi_b, psi_b).unwrap(),
        ])
        .unwrap();
        let (psi, phi) = ctx.cfree_product_eval(&parse_word("X0").unwrap()).unwrap();
        assert_eq!(psi, CExact::from_ratio(1, 2));
        assert_eq!(phi, CExact::from_i64(3));
    }

    #[test]
    fn cyclic_omega_of_two_letters_matches_expansion() {
        // omega(ab) = phi(a)phi(b) - psi(a)phi(b) - phi(a)psi(b) + psi(a)psi(b)
        //           + psi(a)omega(b) + omega(a)psi(b) - omega(1)psi(a)psi(b)
        let (pa, fa, oa) = ((1i64, 2i64), (3i64, 1i64), (5i64, 4i64));
        let (pb, fb, ob) = ((2, 7), (-1, 3), (1, 6));
        let omega_one = CExact::from_ratio(2, 3);
        let psi_a = table(0, &[(1, pa)]);
        let phi_a = table(0, &[(1, fa)]);
        let mut oa_t = BTreeMap::new();
        oa_t.insert(Word::empty(), omega_one.clone());
        oa_t.insert(Word::power(0, 1), CExact::from_ratio(oa.0, oa.1));
        let omega_a = MomentFunctional::from_table(0, oa_t, true).unwrap();
        let psi_b = table(1, &[(1, pb)]);
        let phi_b = table(1, &[(1, fb)]);
        let mut ob_t = BTreeMap::new();
        ob_t.insert(Word::empty(), omega_one.clone());
        ob_t.insert(Word::power(1, 1), CExact::from_ratio(ob.0, ob.1));
        let omega_b = MomentFunctional::from_table(1, ob_t, true).unwrap();
        let ctx = ProductContext::cyclic(vec![
            FunctionalTriple::new(psi_a, phi_a, omega_a).unwrap(),
            FunctionalTriple::new(psi_b, phi_b, omega_b).unwrap(),
        ])
        .unwrap();

        let val = |n: i64, d: i64| CExact::from_ratio(n, d);
        let (psi_a, phi_a, omega_a) = (val(pa.0, pa.1), val(fa.0, fa.1), val(oa.0, oa.1));
        let (psi_b, phi_b, omega_b) = (val(pb.0, pb.1), val(fb.0, fb.1), val(ob.0, ob.1));
        let expected = phi_a.clone() * phi_b.clone()
            - psi_a.clone() * phi_b.clone()
            - phi_a * psi_b.clone()
            + psi_a.clone() * psi_b.clone()
            + psi_a.clone() * omega_b
            + omega_a * psi_b.clone()
            - omega_one.clone() * psi_a * psi_b;
        let got = ctx.cyclic_cfree_eval(&parse_word("X0*Y0").unwrap()).unwrap();
        assert_eq!(got, expected);
        // omega(1) is the shared constant.
        assert_eq!(ctx.cyclic_cfree_eval(&Word::empty()).unwrap(), omega_one);
    }

    #[test]
    fn cyclic_product_requires_matching_omega_one() {
        let mk = |family: u32, at_one: CExact| {
            let mut t = BTreeMap::new();
            t.insert(Word::empty(), at_one);
            t.insert(Word::power(family, 1), CExact::from_i64(1));
            FunctionalTriple::new(
                dirac_functional(family, CExact::from_i64(1)),
                dirac_functional(family, CExact::from_i64(1)),
                MomentFunctional::from_table(family, t, true).unwrap(),
            )
            .unwrap()
        };
        let err = ProductContext::cyclic(vec![
            mk(0, CExact::from_i64(0)),
            mk(1, CExact::from_i64(1)),
        ]);
        assert!(matches!(err, Err(ProductError::OmegaUnitMismatch)));
    }

    #[test]
    fn ordered_product_extends_componentwise() {
        let phi_a = table(0, &[(1, (3, 1))]);
        let psi_a = table(0, &[(1, (1, 2))]);
        let phi_b = table(1, &[(1, (-2, 1))]);
        let psi_b = table(1, &[(1, (1, 7))]);
        let ctx = ProductContext::ordered(
            FunctionalPair::new(phi_a, psi_a).unwrap(),
            FunctionalPair::new(phi_b, psi_b).unwrap(),
        )
        .unwrap();
        let (phi, psi) = ctx.ordered_product_eval(&parse_word("X0").unwrap()).unwrap();
        assert_eq!(phi, CExact::from_i64(3));
        assert_eq!(psi, CExact::from_ratio(1, 2));
    }

    #[test]
    fn ordered_product_kills_mixed_centered_words() {
        // Family-1 letters psi-centered, family-2 letters phi-centered:
        // both components vanish.
        let phi_a = table(0, &[(1, (3, 1)), (2, (2, 1))]);
        let psi_a = table(0, &[(1, (1, 2)), (2, (1, 3))]);
        let phi_b = table(1, &[(1, (-2, 1)), (2, (4, 1))]);
        let psi_b = table(1, &[(1, (1, 7)), (2, (1, 1))]);
        let ctx = ProductContext::ordered(
            FunctionalPair::new(phi_a, psi_a.clone()).unwrap(),
            FunctionalPair::new(phi_b.clone(), psi_b).unwrap(),
        )
        .unwrap();
        let a = psi_a.center(&crate::word::parse_polynomial("X0").unwrap()).unwrap();
        let b = phi_b.center(&crate::word::parse_polynomial("Y0").unwrap()).unwrap();
        let word = multiply(&a, &b);
        assert_eq!(ctx.eval_poly(Component::Phi, &word).unwrap(), CExact::zero());
        assert_eq!(ctx.eval_poly(Component::Psi, &word).unwrap(), CExact::zero());
        let longer = multiply(&word, &multiply(&a, &b));
        assert_eq!(ctx.eval_poly(Component::Phi, &longer).unwrap(), CExact::zero());
        assert_eq!(ctx.eval_poly(Component::Psi, &longer).unwrap(), CExact::zero());
    }

    #[test]
    fn second_order_covariance_examples() {
        let fa = table(0, &[(1, (0, 1)), (2, (2, 1)), (3, (0, 1)), (4, (9, 1))]);
        let fb = table(1, &[(1, (0, 1)), (2, (3, 1)), (3, (0, 1)), (4, (20, 1))]);
        let ctx = ProductContext::free(vec![fa, fb]).unwrap();
        // Mixed centered single letters: psi(ab) = 0.
        let a = Polynomial::from_word(Word::power(0, 1));
        let b = Polynomial::from_word(Word::power(1, 1));
        assert_eq!(ctx.second_order_covariance(&a, &b).unwrap(), CExact::zero());
        // Same-family centered single letters: psi_A(a a') by the k = 0 term.
        assert_eq!(ctx.second_order_covariance(&a, &a).unwrap(), CExact::from_i64(2));
        // Mismatched factor counts vanish.
        let ab = multiply(&a, &b);
        assert_eq!(ctx.second_order_covariance(&a, &ab).unwrap(), CExact::zero());
        // n = m = 2: psi(a1 b1) psi(a2 b2) + psi(a1 b2) psi(a2 b1) over the
        // reversed second tuple; for P = Q = a b this is psi(aa) psi(bb) on
        // the offset pairing and zero on the aligned one.
        let var = ctx.second_order_covariance(&ab, &ab).unwrap();
        assert_eq!(var, CExact::from_i64(6));
        // Vanishes when either argument is 1.
        assert_eq!(
            ctx.second_order_covariance(&Polynomial::one(), &ab).unwrap(),
            CExact::zero()
        );
    }
}
