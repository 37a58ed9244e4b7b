//! Pointwise evaluation of the polynomials `G_n^m(s_1, …, s_n)`.
//!
//! `G_n^m` is the coefficient of `Πσ(s_i)² · X_t^{2m}` in the frozen iterated
//! derivative `ω^t∘(D²_{s_n}…D²_{s_1}F) / ω^t∘F`. The recurrences only ever
//! delete variables, so every intermediate value is `G` restricted to a subset
//! of the original nodes. [`GnmTable`] fills a table keyed by
//! `(bitmask of active nodes, m)` in increasing mask order; a strict subset
//! always has a smaller mask, so each entry only reads finished entries.
//!
//! Chain and cycle sums run over *ordered* sequences of distinct interior
//! nodes. For cycles through the distinguished node this counts each cycle of
//! length ≥ 3 once per direction, which is exactly the `2^k` weight of a
//! `k`-cycle; the symbolic oracle confirms it term by term.

use crate::error::{Error, Result};
use crate::model::DriftIntegralCache;
use crate::scalar::Ring;

/// Default cap on `n`.
pub const DEFAULT_MAX_ORDER: usize = 6;
/// Hard cap imposed by the bitmask representation and table size.
pub const HARD_MAX_ORDER: usize = 16;

/// Engine configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnmConfig {
    max_order: usize,
}

impl Default for GnmConfig {
    fn default() -> Self {
        GnmConfig {
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

impl GnmConfig {
    pub fn with_max_order(max_order: usize) -> Result<Self> {
        if max_order > HARD_MAX_ORDER {
            return Err(Error::Capacity {
                what: "max order",
                requested: max_order as u64,
                cap: HARD_MAX_ORDER as u64,
            });
        }
        Ok(GnmConfig { max_order })
    }

    /// Largest `n` the engine accepts.
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if n > self.max_order {
            return Err(Error::Capacity {
                what: "n",
                requested: n as u64,
                cap: self.max_order as u64,
            });
        }
        Ok(())
    }
}

/// The frozen kernels at one node tuple.
///
/// `endpoint[i]` is the kernel between `s_i` and the valuation time `t`
/// (`T − s_i` without drift) and `pair[i][j]` the kernel between `s_i` and
/// `s_j` (`T − s_i ∨ s_j` without drift), including the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels<S> {
    n: usize,
    endpoint: Vec<S>,
    pair: Vec<S>,
}

impl<S: Ring> Kernels<S> {
    pub fn from_parts(endpoint: Vec<S>, pair: Vec<S>) -> Self {
        let n = endpoint.len();
        assert_eq!(pair.len(), n * n, "pair kernel must be n × n");
        Kernels { n, endpoint, pair }
    }

    /// Kernels for `k ≡ 0`: `T − s_i` and `T − s_i ∨ s_j`.
    pub fn zero_drift(nodes: &[S], maturity: &S) -> Self {
        let n = nodes.len();
        let endpoint = nodes.iter().map(|s| maturity.clone() - s.clone()).collect();
        let mut pair = Vec::with_capacity(n * n);
        for a in nodes {
            for b in nodes {
                let hi = if a >= b { a } else { b };
                pair.push(maturity.clone() - hi.clone());
            }
        }
        Kernels { n, endpoint, pair }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn endpoint(&self, i: usize) -> &S {
        &self.endpoint[i]
    }

    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> &S {
        &self.pair[i * self.n + j]
    }
}

impl Kernels<f64> {
    /// Kernels for a time-dependent drift: `k̃(s_i ∨ t)` and `k̃(s_i ∨ s_j)`.
    pub fn time_dependent(
        t: f64,
        nodes: &[f64],
        maturity: f64,
        cache: &DriftIntegralCache,
    ) -> Self {
        let n = nodes.len();
        let endpoint = nodes
            .iter()
            .map(|&s| cache.kappa_tilde(s, t, maturity))
            .collect();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = cache.kappa_tilde(nodes[i], nodes[j], maturity);
                pair[i * n + j] = v;
                pair[j * n + i] = v;
            }
        }
        Kernels { n, endpoint, pair }
    }
}

/// All `G^m` values on every subset of one node tuple, for `m ≤ max_m`.
#[derive(Debug, Clone)]
pub struct GnmTable<S> {
    n: usize,
    max_m: usize,
    values: Vec<S>,
}

impl<S: Ring> GnmTable<S> {
    pub fn build(kernels: &Kernels<S>, max_m: usize) -> Self {
        let n = kernels.len();
        let width = max_m + 1;
        let masks = 1usize << n;
        let mut values = vec![S::zero(); masks * width];
        values[0] = S::one();
        for mask in 1..masks {
            let size = mask.count_ones() as usize;
            for m in 0..=max_m.min(size) {
                let v = if m == 0 {
                    cycle_recurrence(kernels, &values, width, mask)
                } else {
                    path_recurrence(kernels, &values, width, mask, m)
                };
                values[mask * width + m] = v;
            }
        }
        GnmTable { n, max_m, values }
    }

    /// `G^m` on the subset `mask`. Zero when `m` exceeds the subset size.
    pub fn get(&self, mask: usize, m: usize) -> S {
        assert!(m <= self.max_m, "m = {m} beyond table width {}", self.max_m);
        self.values[mask * (self.max_m + 1) + m].clone()
    }

    /// `G_n^m` on the full node tuple.
    pub fn value(&self, m: usize) -> S {
        if m > self.n {
            return S::zero();
        }
        self.get((1 << self.n) - 1, m)
    }

    /// `[G_n^0, …, G_n^{max_m}]` on the full node tuple.
    pub fn values(&self) -> Vec<S> {
        (0..=self.max_m).map(|m| self.value(m)).collect()
    }
}

fn coef<S: Ring>(sign_positive: bool, power_of_two: u32) -> S {
    let mag = 1i64 << power_of_two;
    S::from_i64_exact(if sign_positive { mag } else { -mag })
}

/// `m = 0`: the cycle through the highest active node `top`.
///
/// `G^0 = −2 K(top,top) G^0(∖top)
///      + Σ_k Σ_{ordered i_1..i_k} (−1)^{k+1} 2^{2k+1}
///          K(top,i_1) K(i_1,i_2)…K(i_k,top) G^0(∖{top, i_1..i_k})`.
fn cycle_recurrence<S: Ring>(kernels: &Kernels<S>, values: &[S], width: usize, mask: usize) -> S {
    let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
    let rest = mask & !(1 << top);
    let mut acc =
        coef::<S>(false, 1) * kernels.pair(top, top).clone() * values[rest * width].clone();

    fn walk<S: Ring>(
        kernels: &Kernels<S>,
        values: &[S],
        width: usize,
        top: usize,
        cur: usize,
        free: usize,
        prod: &S,
        k: u32,
        acc: &mut S,
    ) {
        let mut bits = free;
        while bits != 0 {
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let p = prod.clone() * kernels.pair(cur, c).clone();
            let kk = k + 1;
            let remaining = free & !(1 << c);
            let closed =
                p.clone() * kernels.pair(c, top).clone() * values[remaining * width].clone();
            *acc = acc.clone() + coef::<S>(kk % 2 == 1, 2 * kk + 1) * closed;
            walk(kernels, values, width, top, c, remaining, &p, kk, acc);
        }
    }

    walk(
        kernels,
        values,
        width,
        top,
        top,
        rest,
        &S::one(),
        0,
        &mut acc,
    );
    acc
}

/// `m ≥ 1`: single nodes carrying both singleton factors, and open chains
/// `i → i_1 → … → i_k → j` with singleton factors at both ends.
///
/// `G^m = (1/m) [ Σ_i 4 E_i² G^{m−1}(∖i)
///      + Σ_{i<j} Σ_{ordered interior} (−1)^{k+1} 2^{2k+5}
///          E_i K(i,i_1)…K(i_k,j) E_j G^{m−1}(∖chain) ]`.
fn path_recurrence<S: Ring>(
    kernels: &Kernels<S>,
    values: &[S],
    width: usize,
    mask: usize,
    m: usize,
) -> S {
    let mut acc = S::zero();
    let four = S::from_i64_exact(4);
    let mut bits = mask;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let e = kernels.endpoint(i).clone();
        let without = mask & !(1 << i);
        acc = acc + four.clone() * e.clone() * e.clone() * values[without * width + m - 1].clone();
    }

    #[allow(clippy::too_many_arguments)]
    fn walk<S: Ring>(
        kernels: &Kernels<S>,
        values: &[S],
        width: usize,
        m: usize,
        start: usize,
        cur: usize,
        free: usize,
        prod: &S,
        interior: u32,
        acc: &mut S,
    ) {
        let mut bits = free;
        while bits != 0 {
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let p = prod.clone() * kernels.pair(cur, c).clone();
            let remaining = free & !(1 << c);
            if c > start {
                let closed = p.clone()
                    * kernels.endpoint(c).clone()
                    * values[remaining * width + m - 1].clone();
                *acc = acc.clone() + coef::<S>(interior % 2 == 1, 2 * interior + 5) * closed;
            }
            walk(
                kernels,
                values,
                width,
                m,
                start,
                c,
                remaining,
                &p,
                interior + 1,
                acc,
            );
        }
    }

    let mut bits = mask;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let free = mask & !(1 << i);
        let start = kernels.endpoint(i).clone();
        walk(kernels, values, width, m, i, i, free, &start, 0, &mut acc);
    }
    acc / S::from_i64_exact(m as i64)
}

/// `G_n^m(s_1, …, s_n)` for `k ≡ 0` with maturity `T`.
pub fn g_const<S: Ring>(
    n: usize,
    m: usize,
    nodes: &[S],
    maturity: &S,
    cfg: &GnmConfig,
) -> Result<S> {
    check_nodes(n, nodes.len(), cfg)?;
    if m > n {
        return Ok(S::zero());
    }
    let kernels = Kernels::zero_drift(nodes, maturity);
    Ok(GnmTable::build(&kernels, m).value(m))
}

/// `G_n^m(t, s_1, …, s_n)` for a time-dependent drift, kernels from `cache`.
pub fn g_timedep(
    n: usize,
    m: usize,
    t: f64,
    nodes: &[f64],
    maturity: f64,
    cache: &DriftIntegralCache,
    cfg: &GnmConfig,
) -> Result<f64> {
    check_nodes(n, nodes.len(), cfg)?;
    if m > n {
        return Ok(0.0);
    }
    let kernels = Kernels::time_dependent(t, nodes, maturity, cache);
    Ok(GnmTable::build(&kernels, m).value(m))
}

fn check_nodes(n: usize, len: usize, cfg: &GnmConfig) -> Result<()> {
    cfg.check(n)?;
    if len != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} nodes, got {len}"
        )));
    }
    Ok(())
}

/// Proven growth bound `(α/m!)(8/β)^m (4+β)^n n! τ^{n+m}` on `sup |G_n^m|`.
pub fn growth_bound(n: usize, m: usize, tau: f64, alpha: f64, beta: f64) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    alpha / fact(m)
        * (8.0 / beta).powi(m as i32)
        * (4.0 + beta).powi(n as i32)
        * fact(n)
        * tau.powi((n + m) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientFunction;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn cfg() -> GnmConfig {
        GnmConfig::default()
    }

    #[test]
    fn base_cases() {
        assert_eq!(g_const(0, 0, &[], &1.0, &cfg()).unwrap(), 1.0);
        assert!((g_const(1, 0, &[0.8f64], &1.0, &cfg()).unwrap() + 0.4).abs() < 1e-15);
        assert!((g_const(1, 1, &[0.8f64], &1.0, &cfg()).unwrap() - 0.16).abs() < 1e-15);
        assert!((g_const(2, 0, &[0.8f64, 0.9], &1.0, &cfg()).unwrap() - 0.16).abs() < 1e-15);
        assert!((g_const(2, 2, &[0.8f64, 0.9], &1.0, &cfg()).unwrap() - 0.0064).abs() < 1e-16);
        assert_eq!(g_const(2, 3, &[0.8f64, 0.9], &1.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn exact_rational_values() {
        let r = |a, b| Rational64::new(a, b);
        let nodes = [r(4, 5), r(9, 10)];
        let one = r(1, 1);
        assert_eq!(g_const(2, 0, &nodes, &one, &cfg()).unwrap(), r(4, 25));
        assert_eq!(g_const(2, 2, &nodes, &one, &cfg()).unwrap(), r(16, 2500));
        // G_2^1 = −8κ1κ2(κ1+κ2) − 32κ1κ2κ12 with κ = (1/5, 1/10), κ12 = 1/10
        let expect = r(-8, 50) * r(3, 10) - r(32, 500);
        assert_eq!(g_const(2, 1, &nodes, &one, &cfg()).unwrap(), expect);
    }

    #[test]
    fn three_cycle_counted_per_direction() {
        // G_3^0 from the leg-matching expansion: three self-loops, three
        // (self-loop × 2-cycle) terms and the 3-cycle with weight 8.
        let s = [0.81, 0.87, 0.95];
        let k = |a: f64, b: f64| 1.0 - a.max(b);
        let b = |a, c| -2.0 * k(a, c);
        let expect = b(s[0], s[0]) * b(s[1], s[1]) * b(s[2], s[2])
            + 2.0 * b(s[0], s[1]).powi(2) * b(s[2], s[2])
            + 2.0 * b(s[0], s[2]).powi(2) * b(s[1], s[1])
            + 2.0 * b(s[1], s[2]).powi(2) * b(s[0], s[0])
            + 8.0 * b(s[0], s[1]) * b(s[1], s[2]) * b(s[2], s[0]);
        let v = g_const(3, 0, &s, &1.0, &cfg()).unwrap();
        assert!((v - expect).abs() < 1e-15 * expect.abs().max(1.0));
    }

    #[test]
    fn time_dependent_examples() {
        let k1 = CoefficientFunction::constant(1.0);
        let cache = DriftIntegralCache::new(&k1, 1.0).unwrap();
        let kt = (-0.1f64).exp() * (1.0 - (-0.2f64).exp()) / 2.0;
        let g11 = g_timedep(1, 1, 0.8, &[0.9], 1.0, &cache, &cfg()).unwrap();
        assert!((g11 - 4.0 * kt * kt).abs() < 1e-14);
        assert!((g11 - 0.026_902).abs() < 5e-7);
        // the self-pairing kernel is k̃(s ∨ s), not k̃(s ∨ t)
        let k_self = (1.0 - (-0.2f64).exp()) / 2.0;
        let g10 = g_timedep(1, 0, 0.8, &[0.9], 1.0, &cache, &cfg()).unwrap();
        assert!((g10 + 2.0 * k_self).abs() < 1e-14);
    }

    #[test]
    fn capacity_and_shape_errors() {
        let nodes = [0.9; 7];
        assert!(matches!(
            g_const(7, 0, &nodes, &1.0, &cfg()),
            Err(Error::Capacity {
                requested: 7,
                cap: 6,
                ..
            })
        ));
        assert!(g_const(2, 0, &[0.9], &1.0, &cfg()).is_err());
        assert_eq!(GnmConfig::default().max_order(), 6);
        assert_eq!(GnmConfig::with_max_order(4).unwrap().max_order(), 4);
        let zero = GnmConfig::with_max_order(0).unwrap();
        assert_eq!(zero.max_order(), 0);
        assert_eq!(g_const(0, 0, &[], &1.0, &zero).unwrap(), 1.0);
        assert!(g_const(1, 0, &[0.9], &1.0, &zero).is_err());
        assert!(GnmConfig::with_max_order(17).is_err());
    }

    #[test]
    fn zero_drift_reduction() {
        let cache = DriftIntegralCache::new(&CoefficientFunction::zero(), 1.0).unwrap();
        let nodes = [0.83, 0.97, 0.8, 0.91];
        for n in 0..=4 {
            for m in 0..=n {
                let a = g_const(n, m, &nodes[..n], &1.0, &cfg()).unwrap();
                let b = g_timedep(n, m, 0.8, &nodes[..n], 1.0, &cache, &cfg()).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "n={n} m={m}");
            }
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn symmetric_under_permutation(nodes in prop::collection::vec(0.0f64..1.0, 1..=5)) {
            let n = nodes.len();
            let k1 = CoefficientFunction::parse_expression("0.5 + s").unwrap();
            let cache = DriftIntegralCache::new(&k1, 1.0).unwrap();
            let base_c: Vec<f64> = (0..=n).map(|m| g_const(n, m, &nodes, &1.0, &cfg()).unwrap()).collect();
            let base_t: Vec<f64> = (0..=n).map(|m| g_timedep(n, m, 0.0, &nodes, 1.0, &cache, &cfg()).unwrap()).collect();
            for perm in permutations(n) {
                let p: Vec<f64> = perm.iter().map(|&i| nodes[i]).collect();
                for m in 0..=n {
                    let a = g_const(n, m, &p, &1.0, &cfg()).unwrap();
                    prop_assert!((a - base_c[m]).abs() <= 1e-12 * base_c[m].abs());
                    let b = g_timedep(n, m, 0.0, &p, 1.0, &cache, &cfg()).unwrap();
                    prop_assert!((b - base_t[m]).abs() <= 1e-12 * base_t[m].abs());
                }
            }
        }

        #[test]
        fn vanishes_above_diagonal(nodes in prop::collection::vec(0.8f64..1.0, 0..=6)) {
            let n = nodes.len();
            for m in n + 1..=n + 2 {
                prop_assert_eq!(g_const(n, m, &nodes, &1.0, &cfg()).unwrap(), 0.0);
            }
            let table = GnmTable::build(&Kernels::zero_drift(&nodes, &1.0), 6);
            for mask in 0..(1usize << n) {
                for m in (mask.count_ones() as usize + 1)..=6 {
                    prop_assert_eq!(table.get(mask, m), 0.0);
                }
            }
        }

        #[test]
        fn respects_growth_bound(nodes in prop::collection::vec(0.0f64..1.0, 0..=6), t in 0.0f64..0.5) {
            let scaled: Vec<f64> = nodes.iter().map(|s| t + (1.0 - t) * s).collect();
            let n = scaled.len();
            let table = GnmTable::build(&Kernels::zero_drift(&scaled, &1.0), n);
            for m in 0..=n {
                let bound = growth_bound(n, m, 1.0 - t, 1.0, 9.0);
                prop_assert!(table.value(m).abs() <= bound);
            }
        }
    }
}
