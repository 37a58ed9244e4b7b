//! Brute-force expansion of `D²_{s_n}…D²_{s_1} e^Y / e^Y`.
//!
//! Terms are products of factors `D_S Y` with `|S| ∈ {1, 2}`: third
//! derivatives of the quadratic functional `Y` vanish. The expansion is built
//! by applying the product rule twice per variable with exact rational
//! coefficients, then frozen at a node tuple to recover `G_n^m` independently
//! of the recurrences in [`crate::gnm`].

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::gnm::Kernels;
use crate::scalar::Ring;

/// Largest `n` accepted by [`differentiate`].
pub const MAX_SYMBOLIC_ORDER: usize = 4;

/// `D_{s_i} Y` or `D_{s_i s_j} Y` (with `i ≤ j`, indices 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DerivativeFactor {
    Single(u8),
    Double(u8, u8),
}

impl DerivativeFactor {
    /// `D_s` applied to this factor; `None` when the result vanishes.
    fn differentiate(self, s: u8) -> Option<DerivativeFactor> {
        match self {
            DerivativeFactor::Single(a) => Some(DerivativeFactor::Double(a.min(s), a.max(s))),
            DerivativeFactor::Double(..) => None,
        }
    }

    pub fn indices(self) -> Vec<u8> {
        match self {
            DerivativeFactor::Single(a) => vec![a],
            DerivativeFactor::Double(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for DerivativeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivativeFactor::Single(a) => write!(f, "D_{{s{a}}}Y"),
            DerivativeFactor::Double(a, b) => write!(f, "D_{{s{a}s{b}}}Y"),
        }
    }
}

/// `coefficient · Π factors`, factors kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivativeTerm {
    pub coefficient: Rational64,
    pub factors: Vec<DerivativeFactor>,
}

impl DerivativeTerm {
    pub fn singleton_count(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| matches!(f, DerivativeFactor::Single(_)))
            .count()
    }

    /// How many times index `i` occurs across all factors.
    pub fn index_count(&self, i: u8) -> usize {
        self.factors
            .iter()
            .flat_map(|f| f.indices())
            .filter(|&j| j == i)
            .count()
    }
}

impl fmt::Display for DerivativeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coefficient)?;
        for factor in &self.factors {
            write!(f, " * {factor}")?;
        }
        Ok(())
    }
}

/// Full expansion of `D²_{s_n}…D²_{s_1} F / F` for `F = e^Y`.
pub fn differentiate(n: usize) -> Result<Vec<DerivativeTerm>> {
    if n == 0 || n > MAX_SYMBOLIC_ORDER {
        return Err(Error::Capacity {
            what: "symbolic order n",
            requested: n as u64,
            cap: MAX_SYMBOLIC_ORDER as u64,
        });
    }
    let mut terms: BTreeMap<Vec<DerivativeFactor>, Rational64> = BTreeMap::new();
    terms.insert(Vec::new(), Rational64::one());
    for s in 1..=n as u8 {
        for _ in 0..2 {
            terms = apply_derivative(&terms, s);
        }
    }
    let mut out: Vec<DerivativeTerm> = terms
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(factors, coefficient)| DerivativeTerm {
            coefficient,
            factors,
        })
        .collect();
    out.sort_by(|a, b| {
        a.factors
            .len()
            .cmp(&b.factors.len())
            .then_with(|| a.factors.cmp(&b.factors))
    });
    Ok(out)
}

/// `D_s (F·K) = F·(D_sY·K + D_sK)`, with the product rule on `K`.
fn apply_derivative(
    terms: &BTreeMap<Vec<DerivativeFactor>, Rational64>,
    s: u8,
) -> BTreeMap<Vec<DerivativeFactor>, Rational64> {
    let mut next: BTreeMap<Vec<DerivativeFactor>, Rational64> = BTreeMap::new();
    let mut add = |mut factors: Vec<DerivativeFactor>, c: Rational64| {
        factors.sort();
        *next.entry(factors).or_insert_with(Rational64::zero) += c;
    };
    for (factors, &c) in terms {
        let mut with_new = factors.clone();
        with_new.push(DerivativeFactor::Single(s));
        add(with_new, c);
        for (p, &f) in factors.iter().enumerate() {
            if let Some(df) = f.differentiate(s) {
                let mut replaced = factors.clone();
                replaced[p] = df;
                add(replaced, c);
            }
        }
    }
    next
}

/// Freezes every term and collects powers of `X_t²`.
///
/// `D_{s_i}Y ↦ −2·E_i·σ_i·X_t` and `D_{s_i s_j}Y ↦ −2·K_ij·σ_i·σ_j`. Each index
/// appears exactly twice in every term, so the σ's always multiply to
/// `Πσ(s_i)²` and are divided out symbolically: the result is `[G_n^0, …, G_n^n]`.
pub fn freeze_and_collect<S: Ring>(terms: &[DerivativeTerm], kernels: &Kernels<S>) -> Vec<S> {
    let n = kernels.len();
    let mut out = vec![S::zero(); n + 1];
    let minus_two = S::from_i64_exact(-2);
    for term in terms {
        let m = term.singleton_count() / 2;
        let mut v = S::from_i64_exact(*term.coefficient.numer())
            / S::from_i64_exact(*term.coefficient.denom());
        for f in &term.factors {
            let k = match *f {
                DerivativeFactor::Single(i) => kernels.endpoint(i as usize - 1).clone(),
                DerivativeFactor::Double(i, j) => {
                    kernels.pair(i as usize - 1, j as usize - 1).clone()
                }
            };
            v = v * minus_two.clone() * k;
        }
        out[m] = out[m].clone() + v;
    }
    out
}

/// One block of a term, named after the partition cases of the
/// `{1,1,2,2,…,n,n}` catalogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    /// Case 1, `{i}`: `D_{s_i}Y`.
    Singleton(u8),
    /// Case 2, `{i,i}`: `D²_{s_i}Y`.
    Square(u8),
    /// Case 3, `{i,i,j,j}`: `2(D_{s_i s_j}Y)²`.
    TwoCycle(u8, u8),
    /// Case 4, `k ≥ 3` indices around a cycle: `2^k Π D_{s_a s_b}Y`.
    Cycle(Vec<u8>),
    /// Case 5, `k ≥ 2` indices along a chain whose ends also carry singletons:
    /// `2^k D_{s_{i_1}s_{i_2}}Y … D_{s_{i_{k−1}}s_{i_k}}Y`.
    Chain(Vec<u8>),
}

impl Block {
    pub fn case(&self) -> u8 {
        match self {
            Block::Singleton(_) => 1,
            Block::Square(_) => 2,
            Block::TwoCycle(..) => 3,
            Block::Cycle(_) => 4,
            Block::Chain(_) => 5,
        }
    }

    /// Catalogue prefactor of the block.
    pub fn prefactor(&self) -> i64 {
        match self {
            Block::Singleton(_) | Block::Square(_) => 1,
            Block::TwoCycle(..) => 2,
            Block::Cycle(v) | Block::Chain(v) => 1 << v.len(),
        }
    }
}

/// Classification of a term's factors into catalogue blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionShape {
    pub blocks: Vec<Block>,
}

impl PartitionShape {
    pub fn predicted_coefficient(&self) -> i64 {
        self.blocks.iter().map(Block::prefactor).product()
    }

    pub fn count_case(&self, case: u8) -> usize {
        self.blocks.iter().filter(|b| b.case() == case).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("index {index} appears {count} times")]
    IndexCount { index: u8, count: usize },
    #[error("component {0:?} matches no catalogue case")]
    Unclassifiable(Vec<u8>),
    #[error("coefficient {actual} differs from the catalogue prefactor {predicted}")]
    Coefficient { actual: Rational64, predicted: i64 },
}

/// Assigns each factor of `term` to a catalogue block and checks that the
/// term's coefficient equals the product of block prefactors.
pub fn classify(term: &DerivativeTerm) -> std::result::Result<PartitionShape, ClassifyError> {
    let mut indices: Vec<u8> = term.factors.iter().flat_map(|f| f.indices()).collect();
    indices.sort();
    indices.dedup();
    for &i in &indices {
        let count = term.index_count(i);
        if count != 2 {
            return Err(ClassifyError::IndexCount { index: i, count });
        }
    }

    let mut singles: BTreeMap<u8, usize> = BTreeMap::new();
    let mut squares = Vec::new();
    let mut edges: Vec<(u8, u8)> = Vec::new();
    for f in &term.factors {
        match *f {
            DerivativeFactor::Single(i) => *singles.entry(i).or_default() += 1,
            DerivativeFactor::Double(i, j) if i == j => squares.push(i),
            DerivativeFactor::Double(i, j) => edges.push((i, j)),
        }
    }

    let mut blocks = Vec::new();
    for &i in &squares {
        blocks.push(Block::Square(i));
    }
    let mut visited: Vec<u8> = squares.clone();
    for &i in &indices {
        if visited.contains(&i) {
            continue;
        }
        // collect the connected component through the off-diagonal edges
        let mut comp = vec![i];
        let mut frontier = vec![i];
        while let Some(v) = frontier.pop() {
            for &(a, b) in &edges {
                let other = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !comp.contains(&other) {
                    comp.push(other);
                    frontier.push(other);
                }
            }
        }
        visited.extend(&comp);
        comp.sort();
        let comp_edges: Vec<(u8, u8)> = edges
            .iter()
            .copied()
            .filter(|(a, _)| comp.contains(a))
            .collect();
        let ends: Vec<u8> = comp
            .iter()
            .copied()
            .filter(|v| singles.get(v).copied().unwrap_or(0) > 0)
            .collect();

        match (comp.len(), comp_edges.len(), ends.len()) {
            (1, 0, 1) if singles[&comp[0]] == 2 => {
                blocks.push(Block::Singleton(comp[0]));
                blocks.push(Block::Singleton(comp[0]));
            }
            (2, 2, 0) => blocks.push(Block::TwoCycle(comp[0], comp[1])),
            (k, e, 0) if k >= 3 && e == k => {
                blocks.push(Block::Cycle(walk(&comp_edges, comp[0], k)?))
            }
            (k, e, 2) if k >= 2 && e == k - 1 => {
                blocks.push(Block::Singleton(ends[0]));
                blocks.push(Block::Chain(walk(&comp_edges, ends[0], k)?));
                blocks.push(Block::Singleton(ends[1]));
            }
            _ => return Err(ClassifyError::Unclassifiable(comp)),
        }
    }

    let shape = PartitionShape { blocks };
    let predicted = shape.predicted_coefficient();
    if term.coefficient != Rational64::from_integer(predicted) {
        return Err(ClassifyError::Coefficient {
            actual: term.coefficient,
            predicted,
        });
    }
    Ok(shape)
}

/// Orders the vertices of a path or cycle by walking its edges from `start`.
fn walk(edges: &[(u8, u8)], start: u8, len: usize) -> std::result::Result<Vec<u8>, ClassifyError> {
    let mut order = vec![start];
    let mut used = vec![false; edges.len()];
    let mut cur = start;
    while order.len() < len {
        let next = edges.iter().enumerate().find_map(|(idx, &(a, b))| {
            if used[idx] {
                return None;
            }
            let other = if a == cur {
                b
            } else if b == cur {
                a
            } else {
                return None;
            };
            (!order.contains(&other)).then_some((idx, other))
        });
        let Some((idx, other)) = next else {
            return Err(ClassifyError::Unclassifiable(order));
        };
        used[idx] = true;
        order.push(other);
        cur = other;
    }
    Ok(order)
}

/// Human-readable expansion, one `coefficient * factors` line per term, in a
/// stable order suitable for golden-file diffs.
pub fn dump_terms(n: usize) -> Result<String> {
    let mut out = String::new();
    for term in differentiate(n)? {
        out.push_str(&term.to_string());
        out.push('\n');
    }
    Ok(out)
}
