//! Structural properties of the product evaluators on random rational
//! functionals: extension, collapse identities, traciality, and the
//! independent specialization formulas.

mod common;

use common::*;
use num::{One, Zero};
use rand::rngs::StdRng;
use rand::SeedableRng;
use vortex_core::products::{Component, ProductContext};
use vortex_core::scalar::{CExact, Scalar};
use vortex_core::word::{multiply, Polynomial, Word};
use vortex_core::{FunctionalPair, FunctionalTriple, MomentFunctional};

fn rand_triple(rng: &mut StdRng, family: u32, maxlen: usize, omega_one: CExact) -> FunctionalTriple<CExact> {
    FunctionalTriple::new(
        rand_unital(rng, family, maxlen),
        rand_unital(rng, family, maxlen),
        rand_functional(rng, family, maxlen, omega_one),
    )
    .unwrap()
}

#[test]
fn products_restrict_to_their_inputs() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let psi_a = rand_unital(&mut rng, 0, 6);
        let psi_b = rand_unital(&mut rng, 1, 6);
        let ctx = ProductContext::free(vec![psi_a.clone(), psi_b.clone()]).unwrap();
        for k in 1..=6 {
            let w = Word::power(0, k);
            assert_eq!(ctx.free_product_eval(&w).unwrap(), psi_a.value(&w).unwrap());
            let w = Word::power(1, k);
            assert_eq!(ctx.free_product_eval(&w).unwrap(), psi_b.value(&w).unwrap());
        }
    }
}

#[test]
fn cfree_with_equal_pair_collapses_to_free() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..10 {
        let f_a = rand_unital(&mut rng, 0, 6);
        let f_b = rand_unital(&mut rng, 1, 6);
        let free = ProductContext::free(vec![f_a.clone(), f_b.clone()]).unwrap();
        let cfree = ProductContext::cfree(vec![
            FunctionalPair::new(f_a.clone(), f_a).unwrap(),
            FunctionalPair::new(f_b.clone(), f_b).unwrap(),
        ])
        .unwrap();
        for w in all_words(&[0, 1], 6) {
            let (psi, phi) = cfree.cfree_product_eval(&w).unwrap();
            let free_val = free.free_product_eval(&w).unwrap();
            assert_eq!(psi, free_val, "{w}");
            assert_eq!(phi, free_val, "{w}");
        }
    }
}

#[test]
fn ordered_with_equal_pairs_collapses_to_free() {
    let mut rng = StdRng::seed_from_u64(37);
    for _ in 0..10 {
        let f_a = rand_unital(&mut rng, 0, 6);
        let f_b = rand_unital(&mut rng, 1, 6);
        let free = ProductContext::free(vec![f_a.clone(), f_b.clone()]).unwrap();
        let ordered = ProductContext::ordered(
            FunctionalPair::new(f_a.clone(), f_a).unwrap(),
            FunctionalPair::new(f_b.clone(), f_b).unwrap(),
        )
        .unwrap();
        for w in all_words(&[0, 1], 6) {
            let (phi, psi) = ordered.ordered_product_eval(&w).unwrap();
            let free_val = free.free_product_eval(&w).unwrap();
            assert_eq!(phi, free_val, "{w}");
            assert_eq!(psi, free_val, "{w}");
        }
    }
}

#[test]
fn indented_specializations() {
    let mut rng = StdRng::seed_from_u64(41);
    for _ in 0..8 {
        let phi_a = rand_unital(&mut rng, 0, 6);
        let psi_a = rand_unital(&mut rng, 0, 6);
        let phi_b = rand_unital(&mut rng, 1, 6);
        let psi_b = rand_unital(&mut rng, 1, 6);
        // (phi1, psi1, psi1) against (phi2, phi2, psi2) recovers the ordered
        // product in the first and third components.
        let indented = ProductContext::indented(
            (phi_a.clone(), psi_a.clone(), psi_a.clone()),
            (phi_b.clone(), phi_b.clone(), psi_b.clone()),
        )
        .unwrap();
        let ordered = ProductContext::ordered(
            FunctionalPair::new(phi_a.clone(), psi_a.clone()).unwrap(),
            FunctionalPair::new(phi_b.clone(), psi_b.clone()).unwrap(),
        )
        .unwrap();
        for w in all_words(&[0, 1], 5) {
            let (i_phi, _, i_theta) = indented.indented_product_eval(&w).unwrap();
            let (o_phi, o_psi) = ordered.ordered_product_eval(&w).unwrap();
            assert_eq!(i_phi, o_phi, "{w}");
            assert_eq!(i_theta, o_psi, "{w}");
        }
        // All slots equal on each side: every component is the free product.
        let free = ProductContext::free(vec![phi_a.clone(), phi_b.clone()]).unwrap();
        let collapsed = ProductContext::indented(
            (phi_a.clone(), phi_a.clone(), phi_a.clone()),
            (phi_b.clone(), phi_b.clone(), phi_b.clone()),
        )
        .unwrap();
        for w in all_words(&[0, 1], 5) {
            let (p, s, t) = collapsed.indented_product_eval(&w).unwrap();
            let f = free.free_product_eval(&w).unwrap();
            assert_eq!(p, f);
            assert_eq!(s, f);
            assert_eq!(t, f);
        }
    }
}

#[test]
fn cyclic_eval_is_tracial() {
    let mut rng = StdRng::seed_from_u64(53);
    for round in 0..6 {
        let omega_one = small_rational(&mut rng);
        let ctx = ProductContext::cyclic(vec![
            rand_triple(&mut rng, 0, 8, omega_one.clone()),
            rand_triple(&mut rng, 1, 8, omega_one.clone()),
        ])
        .unwrap();
        for w in all_words(&[0, 1], 8) {
            let base = ctx.cyclic_cfree_eval(&w).unwrap();
            for k in 1..w.len() {
                let rotated = w.rotate_left(k);
                assert_eq!(
                    ctx.cyclic_cfree_eval(&rotated).unwrap(),
                    base,
                    "round {round}: {w} vs rotation {rotated}"
                );
            }
        }
    }
}

#[test]
fn cyclic_extends_inputs_and_shares_omega_one() {
    let mut rng = StdRng::seed_from_u64(61);
    let omega_one = small_rational(&mut rng);
    let t_a = rand_triple(&mut rng, 0, 6, omega_one.clone());
    let t_b = rand_triple(&mut rng, 1, 6, omega_one.clone());
    let omega_a = t_a.omega.clone();
    let ctx = ProductContext::cyclic(vec![t_a, t_b]).unwrap();
    assert_eq!(ctx.cyclic_cfree_eval(&Word::empty()).unwrap(), omega_one);
    for k in 1..=6 {
        let w = Word::power(0, k);
        assert_eq!(ctx.cyclic_cfree_eval(&w).unwrap(), omega_a.value(&w).unwrap());
    }
}

/// Direct formula for infinitesimal freeness: on a word with alternating
/// phi-centered blocks, omega is the sum over positions of omega(a_i) times
/// the free-product value of the cyclic rest.
fn infinitesimal_oracle(
    free: &ProductContext<CExact>,
    omegas: &[&MomentFunctional<CExact>],
    blocks: &[(u32, Polynomial<CExact>)],
) -> CExact {
    let mut total = CExact::zero();
    for i in 0..blocks.len() {
        let omega_i = omegas[blocks[i].0 as usize].evaluate(&blocks[i].1).unwrap();
        let mut rest = Polynomial::one();
        for j in 1..blocks.len() {
            let (_, p) = &blocks[(i + j) % blocks.len()];
            rest = multiply(&rest, p);
        }
        total = total + omega_i * free.eval_poly(Component::Psi, &rest).unwrap();
    }
    total
}

#[test]
fn cyclic_with_equal_psi_phi_matches_infinitesimal_formula() {
    let mut rng = StdRng::seed_from_u64(71);
    for _ in 0..10 {
        let phi_a = rand_unital(&mut rng, 0, 8);
        let phi_b = rand_unital(&mut rng, 1, 8);
        let omega_a = rand_functional(&mut rng, 0, 8, CExact::zero());
        let omega_b = rand_functional(&mut rng, 1, 8, CExact::zero());
        let free = ProductContext::free(vec![phi_a.clone(), phi_b.clone()]).unwrap();
        let cyclic = ProductContext::cyclic(vec![
            FunctionalTriple::new(phi_a.clone(), phi_a.clone(), omega_a.clone()).unwrap(),
            FunctionalTriple::new(phi_b.clone(), phi_b.clone(), omega_b.clone()).unwrap(),
        ])
        .unwrap();
        let phis = [&phi_a, &phi_b];
        let omegas = [&omega_a, &omega_b];
        // Alternating centered block words up to 6 letters.
        for shape in even_alternating_words(6) {
            for start in 0..2u32 {
                let blocks: Vec<(u32, Polynomial<CExact>)> = shape
                    .iter()
                    .map(|&(fam, p)| {
                        let fam = (fam + start) % 2;
                        let poly = Polynomial::from_word(Word::power(fam, p));
                        (fam, phis[fam as usize].center(&poly).unwrap())
                    })
                    .collect();
                let mut word_poly = Polynomial::one();
                for (_, p) in &blocks {
                    word_poly = multiply(&word_poly, p);
                }
                let got = cyclic.eval_poly(Component::Omega, &word_poly).unwrap();
                let expected = infinitesimal_oracle(&free, &omegas, &blocks);
                assert_eq!(got, expected);
            }
        }
    }
}

#[test]
fn second_order_covariance_matches_hand_pairing() {
    // n = m = 2 general check with random tables: factors (a1, a2), (b2, b1).
    let mut rng = StdRng::seed_from_u64(83);
    for _ in 0..10 {
        let psi_a = rand_unital(&mut rng, 0, 8);
        let psi_b = rand_unital(&mut rng, 1, 8);
        let ctx = ProductContext::free(vec![psi_a.clone(), psi_b.clone()]).unwrap();
        let a1 = psi_a.center(&Polynomial::from_word(Word::power(0, 1))).unwrap();
        let a2 = psi_b.center(&Polynomial::from_word(Word::power(1, 2))).unwrap();
        let b1 = psi_a.center(&Polynomial::from_word(Word::power(0, 2))).unwrap();
        let b2 = psi_b.center(&Polynomial::from_word(Word::power(1, 1))).unwrap();
        let p = multiply(&a1, &a2);
        let q = multiply(&b2, &b1); // factor order (b2, b1)
        let psi = |x: &Polynomial<CExact>, y: &Polynomial<CExact>| {
            ctx.eval_poly(Component::Psi, &multiply(x, y)).unwrap()
        };
        let expected = psi(&a1, &b1) * psi(&a2, &b2) + psi(&a1, &b2) * psi(&a2, &b1);
        let got = ctx.second_order_covariance(&p, &q).unwrap();
        assert_eq!(got, expected);
        // Kronecker delta on factor counts.
        assert_eq!(
            ctx.second_order_covariance(&a1, &p).unwrap(),
            CExact::zero()
        );
    }
}

#[test]
fn memoization_is_consistent_across_repeats() {
    let mut rng = StdRng::seed_from_u64(97);
    let omega_one = CExact::zero();
    let ctx = ProductContext::cyclic(vec![
        rand_triple(&mut rng, 0, 8, omega_one.clone()),
        rand_triple(&mut rng, 1, 8, omega_one),
    ])
    .unwrap();
    let w = power_word(&[(0, 2), (1, 1), (0, 1), (1, 3)]);
    let first = ctx.cyclic_cfree_eval(&w).unwrap();
    for _ in 0..3 {
        assert_eq!(ctx.cyclic_cfree_eval(&w).unwrap(), first);
    }
}
