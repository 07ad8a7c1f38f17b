//! The noncrossing partition lattice NC(n): enumeration, Kreweras
//! complements, and the moment/free-cumulant transform.
//!
//! [`mixed_moment_oracle`] sums cumulants of the odd-position blocks against
//! moments of the even-position blocks over Kreweras-complementary pairs,
//! giving an independent route to free-product mixed moments that the product
//! engine is checked against.

use crate::functionals::{FunctionalError, MomentFunctional};
use crate::scalar::Scalar;
use crate::word::{multiply, Block, Polynomial, Word};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum NcError {
    #[error("ground-set size {0} outside supported range 1..={1}")]
    SizeGuard(usize, usize),
    #[error("blocks must strictly alternate between the two families")]
    NotAlternating,
    #[error("expected an even number of alternating blocks, got {0}")]
    OddBlockCount(usize),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

const MAX_ENUM: usize = 12;
const MAX_CUMULANT_LEN: usize = 10;

/// A partition of {1..n} with no crossing pair of blocks. Blocks are kept
/// sorted internally and ordered by their least element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NoncrossingPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl NoncrossingPartition {
    /// Builds from blocks (1-based elements), normalizing order.
    /// Panics if the blocks do not partition {1..n} or cross.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in blocks.iter_mut() {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        let p = NoncrossingPartition { n, blocks };
        assert!(p.is_valid_partition(), "blocks must partition 1..={n}");
        assert!(p.is_noncrossing(), "blocks must be noncrossing");
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn singletons(n: usize) -> Self {
        NoncrossingPartition { n, blocks: (1..=n).map(|i| vec![i]).collect() }
    }

    pub fn one_block(n: usize) -> Self {
        NoncrossingPartition { n, blocks: vec![(1..=n).collect()] }
    }

    fn is_valid_partition(&self) -> bool {
        let mut seen = vec![false; self.n + 1];
        let mut count = 0;
        for b in &self.blocks {
            if b.is_empty() {
                return false;
            }
            for &x in b {
                if x == 0 || x > self.n || seen[x] {
                    return false;
                }
                seen[x] = true;
                count += 1;
            }
        }
        count == self.n
    }

    /// No a < b < c < d with {a, c} in one block and {b, d} in another.
    pub fn is_noncrossing(&self) -> bool {
        let mut label = vec![0usize; self.n + 1];
        for (bi, b) in self.blocks.iter().enumerate() {
            for &x in b {
                label[x] = bi;
            }
        }
        // Scan with a stack of open blocks.
        let mut last = vec![0usize; self.blocks.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            last[bi] = *b.last().unwrap();
        }
        let mut stack: Vec<usize> = Vec::new();
        for x in 1..=self.n {
            let bi = label[x];
            match stack.last() {
                Some(&top) if top == bi => {}
                _ => {
                    if stack.contains(&bi) {
                        return false; // reopened a non-top block: crossing
                    }
                    stack.push(bi);
                }
            }
            if last[bi] == x {
                stack.pop();
            }
        }
        true
    }

    /// Debug rendering such as `{1,3}{2}`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push('{');
            for (i, x) in b.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&x.to_string());
            }
            out.push('}');
        }
        out
    }
}

/// All noncrossing partitions of {1..n}, each exactly once, ordered
/// lexicographically by sorted block lists (leaders ascending).
pub fn enumerate_nc(n: usize) -> Result<Vec<NoncrossingPartition>, NcError> {
    if n == 0 || n > MAX_ENUM {
        return Err(NcError::SizeGuard(n, MAX_ENUM));
    }
    let ground: Vec<usize> = (1..=n).collect();
    let mut out: Vec<NoncrossingPartition> = nc_blocks(&ground)
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_by_key(|b| b[0]);
            NoncrossingPartition { n, blocks }
        })
        .collect();
    out.sort_by(|a, b| a.blocks.cmp(&b.blocks));
    Ok(out)
}

/// Recursive construction over an ordered ground set: choose the block of
/// the least element; every other block must then live inside one of the
/// gaps it cuts out, so the gaps partition independently.
fn nc_blocks(ground: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if ground.is_empty() {
        return vec![Vec::new()];
    }
    let first = ground[0];
    let rest = &ground[1..];
    let k = rest.len();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << k) {
        let mut block = vec![first];
        let mut gaps: Vec<Vec<usize>> = vec![Vec::new()];
        for (i, &x) in rest.iter().enumerate() {
            if mask & (1 << i) != 0 {
                block.push(x);
                gaps.push(Vec::new());
            } else {
                gaps.last_mut().unwrap().push(x);
            }
        }
        let mut partial: Vec<Vec<Vec<usize>>> = vec![vec![block]];
        for gap in &gaps {
            if gap.is_empty() {
                continue;
            }
            let gap_parts = nc_blocks(gap);
            let mut next = Vec::with_capacity(partial.len() * gap_parts.len());
            for p in &partial {
                for g in &gap_parts {
                    let mut q = p.clone();
                    q.extend(g.iter().cloned());
                    next.push(q);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

/// The Kreweras complement: the largest partition `K(pi)` of the primed
/// copies {1' .. n'} such that `pi ⊔ K(pi)` is noncrossing on the interleaved
/// set {1 < 1' < 2 < 2' < ... < n < n'}.
///
/// Construction directly on the interleaved set: i' and j' (i < j) may share
/// a block exactly when the interval {i+1, ..., j} is a union of pi-blocks;
/// the complement is the transitive closure of that relation.
pub fn kreweras(pi: &NoncrossingPartition) -> NoncrossingPartition {
    let n = pi.n;
    let mut block_of = vec![0usize; n + 1];
    for (bi, b) in pi.blocks.iter().enumerate() {
        for &x in b {
            block_of[x] = bi;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect(); // primed elements, 0-based
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            // Is {i+1..j} a union of pi-blocks?
            let mut inside = vec![false; pi.blocks.len()];
            for x in (i + 1)..=j {
                inside[block_of[x]] = true;
            }
            let closed = pi
                .blocks
                .iter()
                .enumerate()
                .filter(|(bi, _)| inside[*bi])
                .all(|(_, b)| b.iter().all(|&x| x > i && x <= j));
            if closed {
                let (ri, rj) = (find(&mut parent, i - 1), find(&mut parent, j - 1));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x in 0..n {
        groups.entry(find(&mut parent, x)).or_default().push(x + 1);
    }
    NoncrossingPartition::new(n, groups.into_values().collect())
}

/// Multilinear free cumulants of a single functional, on tuples of words,
/// via the moment-cumulant recursion
/// `kappa(w_1..w_d) = f(w_1...w_d) - sum_{pi != max} prod_V kappa(w_V)`.
pub struct CumulantCalculator<'a, S: Scalar> {
    f: &'a MomentFunctional<S>,
    memo: HashMap<Vec<Word>, S>,
}

impl<'a, S: Scalar> CumulantCalculator<'a, S> {
    pub fn new(f: &'a MomentFunctional<S>) -> Self {
        CumulantCalculator { f, memo: HashMap::new() }
    }

    pub fn cumulant(&mut self, tuple: &[Word]) -> Result<S, NcError> {
        let d = tuple.len();
        if d == 0 {
            return Ok(S::zero());
        }
        if d > MAX_CUMULANT_LEN {
            return Err(NcError::SizeGuard(d, MAX_CUMULANT_LEN));
        }
        if let Some(v) = self.memo.get(tuple) {
            return Ok(v.clone());
        }
        let mut concat = Word::empty();
        for w in tuple {
            concat = concat.concat(w);
        }
        let mut value = self.f.value(&concat)?;
        for pi in enumerate_nc(d)? {
            if pi.num_blocks() == 1 {
                continue; // the maximal partition carries kappa_d itself
            }
            value = value - self.cumulant_over(&pi, tuple)?;
        }
        self.memo.insert(tuple.to_vec(), value.clone());
        Ok(value)
    }

    /// `prod_{V in pi} kappa(tuple restricted to V)`.
    pub fn cumulant_over(
        &mut self,
        pi: &NoncrossingPartition,
        tuple: &[Word],
    ) -> Result<S, NcError> {
        let mut acc = S::one();
        for block in pi.blocks() {
            let sub: Vec<Word> = block.iter().map(|&i| tuple[i - 1].clone()).collect();
            acc = acc * self.cumulant(&sub)?;
        }
        Ok(acc)
    }
}

/// Cumulant values on the powers of the family's generator 0, up to length
/// `maxlen`, consistent with the moments via the noncrossing sum.
pub struct FreeCumulantTable<S: Scalar> {
    pub family: u32,
    pub kappa: BTreeMap<Word, S>,
}

pub fn moments_to_cumulants<S: Scalar>(
    f: &MomentFunctional<S>,
    maxlen: usize,
) -> Result<FreeCumulantTable<S>, NcError> {
    if maxlen == 0 || maxlen > MAX_CUMULANT_LEN {
        return Err(NcError::SizeGuard(maxlen, MAX_CUMULANT_LEN));
    }
    let mut calc = CumulantCalculator::new(f);
    let mut kappa = BTreeMap::new();
    let gen = Word::power(f.family(), 1);
    for d in 1..=maxlen {
        let tuple = vec![gen.clone(); d];
        kappa.insert(Word::power(f.family(), d), calc.cumulant(&tuple)?);
    }
    Ok(FreeCumulantTable { family: f.family(), kappa })
}

/// Recovers the moment of `X^d` from a cumulant table by the forward sum
/// `m_d = sum_{pi in NC(d)} prod_V kappa_{|V|}`; the round-trip inverse.
pub fn cumulants_to_moment<S: Scalar>(
    table: &FreeCumulantTable<S>,
    d: usize,
) -> Result<S, NcError> {
    let mut acc = S::zero();
    for pi in enumerate_nc(d)? {
        let mut prod = S::one();
        for block in pi.blocks() {
            let w = Word::power(table.family, block.len());
            prod = prod
                * table
                    .kappa
                    .get(&w)
                    .cloned()
                    .ok_or_else(|| NcError::SizeGuard(block.len(), MAX_CUMULANT_LEN))?;
        }
        acc = acc + prod;
    }
    Ok(acc)
}

/// Free-product mixed moment of an alternating sequence a1 b1 ... a_n b_n by
/// the noncrossing sum: cumulants of the a-blocks over `pi`, moments of the
/// b-blocks over the Kreweras complement `K(pi)`, summed over `pi in NC(n)`.
pub fn mixed_moment_oracle<S: Scalar>(
    f_a: &MomentFunctional<S>,
    f_b: &MomentFunctional<S>,
    blocks: &[Block<S>],
) -> Result<S, NcError> {
    if blocks.len() % 2 != 0 {
        return Err(NcError::OddBlockCount(blocks.len()));
    }
    let n = blocks.len() / 2;
    if n == 0 {
        return Ok(S::one());
    }
    for (i, b) in blocks.iter().enumerate() {
        let expected = if i % 2 == 0 { f_a.family() } else { f_b.family() };
        if b.family != expected || !b.content.is_supported_on(expected) {
            return Err(NcError::NotAlternating);
        }
    }
    let a_blocks: Vec<&Polynomial<S>> = blocks.iter().step_by(2).map(|b| &b.content).collect();
    let b_blocks: Vec<&Polynomial<S>> =
        blocks.iter().skip(1).step_by(2).map(|b| &b.content).collect();

    // Multilinear expansion of the a-slots into word tuples.
    let mut expansions: Vec<(S, Vec<Word>)> = vec![(S::one(), Vec::new())];
    for p in &a_blocks {
        let mut next = Vec::new();
        for (coeff, tuple) in &expansions {
            for (w, c) in p.terms() {
                let mut t = tuple.clone();
                t.push(w.clone());
                next.push((coeff.clone() * c.clone(), t));
            }
        }
        expansions = next;
    }

    let mut calc = CumulantCalculator::new(f_a);
    let mut total = S::zero();
    for pi in enumerate_nc(n)? {
        let complement = kreweras(&pi);
        // Moments of the b-blocks over the complement.
        let mut b_part = S::one();
        for block in complement.blocks() {
            let mut prod = Polynomial::one();
            for &j in block {
                prod = multiply(&prod, b_blocks[j - 1]);
            }
            b_part = b_part * f_b.evaluate(&prod)?;
        }
        // Cumulants of the a-blocks over pi, multilinearly.
        let mut a_part = S::zero();
        for (coeff, tuple) in &expansions {
            a_part = a_part + coeff.clone() * calc.cumulant_over(&pi, tuple)?;
        }
        total = total + a_part * b_part;
    }
    Ok(total)
}
