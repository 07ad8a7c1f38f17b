//! Shared helpers for integration tests: seeded random rational functionals
//! and word enumerators.

use num::{BigInt, BigRational};
use rand::rngs::StdRng;
use rand::Rng;
use std::collections::BTreeMap;
use vortex_core::scalar::{CExact, Scalar};
use vortex_core::word::{Generator, Word};
use vortex_core::MomentFunctional;

pub fn small_rational(rng: &mut StdRng) -> CExact {
    let num: i64 = rng.gen_range(-4..=4);
    let den: i64 = rng.gen_range(1..=4);
    CExact::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
}

/// Nonzero variant, for weights that should not degenerate.
pub fn small_rational_nonzero(rng: &mut StdRng) -> CExact {
    loop {
        let v = small_rational(rng);
        if !num::Zero::is_zero(&v) {
            return v;
        }
    }
}

/// Random table functional on powers of the family's generator 0, with the
/// prescribed value at the empty word. Single-generator tables are tracial.
pub fn rand_functional(
    rng: &mut StdRng,
    family: u32,
    maxlen: usize,
    value_at_one: CExact,
) -> MomentFunctional<CExact> {
    let mut table = BTreeMap::new();
    table.insert(Word::empty(), value_at_one);
    for k in 1..=maxlen {
        table.insert(Word::power(family, k), small_rational(rng));
    }
    MomentFunctional::from_table(family, table, true).unwrap()
}

pub fn rand_unital(rng: &mut StdRng, family: u32, maxlen: usize) -> MomentFunctional<CExact> {
    rand_functional(rng, family, maxlen, num::One::one())
}

/// All words of length 1..=maxlen over one generator per listed family.
pub fn all_words(families: &[u32], maxlen: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Generator>> = vec![Vec::new()];
    for _ in 0..maxlen {
        let mut next = Vec::new();
        for prefix in &stack {
            for &f in families {
                let mut w = prefix.clone();
                w.push(Generator::new(f, 0));
                out.push(Word::from_letters(w.clone()));
                next.push(w);
            }
        }
        stack = next;
    }
    out
}

/// Alternating power words `X^{p1} Y^{q1} ... X^{pn} Y^{qn}` (families 0, 1)
/// over all compositions with total length <= max_total.
pub fn even_alternating_words(max_total: usize) -> Vec<Vec<(u32, usize)>> {
    let mut out = Vec::new();
    for pairs in 1..=(max_total / 2) {
        let mut shape = vec![1usize; 2 * pairs];
        loop {
            let total: usize = shape.iter().sum();
            if total <= max_total {
                out.push(
                    shape
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| ((i % 2) as u32, p))
                        .collect(),
                );
            }
            // Next composition with entries >= 1 and total <= max_total.
            let mut i = 0;
            loop {
                if i == shape.len() {
                    break;
                }
                shape[i] += 1;
                if shape.iter().sum::<usize>() <= max_total {
                    break;
                }
                shape[i] = 1;
                i += 1;
            }
            if i == shape.len() {
                break;
            }
        }
    }
    out
}

pub fn power_word(blocks: &[(u32, usize)]) -> Word {
    let mut letters = Vec::new();
    for &(fam, p) in blocks {
        for _ in 0..p {
            letters.push(Generator::new(fam, 0));
        }
    }
    Word::from_letters(letters)
}
