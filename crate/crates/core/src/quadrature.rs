//! Gauss–Legendre rules in one dimension and on hypercubes `[t, T]^n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};

/// Default number of nodes per axis.
pub const DEFAULT_NODES: usize = 8;
/// Default cap on integrand evaluations for one hypercube integral.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

const CHUNK: usize = 1024;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule<S> {
    nodes: Vec<S>,
    weights: Vec<S>,
}

impl<S: Scalar> QuadratureRule<S> {
    /// Builds the `q`-point rule by Newton iteration on the Legendre recurrence.
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument(
                "quadrature order must be at least 1".into(),
            ));
        }
        let mut nodes = vec![S::zero(); q];
        let mut weights = vec![S::zero(); q];
        let one = S::one();
        let two = S::of(2.0);
        let qf = S::of(q as f64);
        let pi = S::of(std::f64::consts::PI);
        for i in 0..q.div_ceil(2) {
            let mut x = (pi * (S::of(i as f64) + S::of(0.75)) / (qf + S::of(0.5))).cos();
            let mut dp = S::zero();
            for _ in 0..100 {
                let (p, d) = legendre(q, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= S::epsilon() * (one + x.abs()) {
                    break;
                }
            }
            let (_, d) = legendre(q, x);
            if d != S::zero() {
                dp = d;
            }
            let w = two / ((one - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[q - 1 - i] = x;
            weights[i] = w;
            weights[q - 1 - i] = w;
        }
        if q % 2 == 1 {
            nodes[q / 2] = S::zero();
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: S, b: S) -> (Vec<S>, Vec<S>) {
        let half = (b - a) / S::of(2.0);
        let mid = (a + b) / S::of(2.0);
        let nodes = self.nodes.iter().map(|&x| mid + half * x).collect();
        let weights = self.weights.iter().map(|&w| half * w).collect();
        (nodes, weights)
    }

    /// Integrates `f` over `[a, b]`. Non-finite integrand values are errors.
    pub fn integrate<F: Fn(S) -> S>(&self, f: F, a: S, b: S) -> Result<S> {
        let (nodes, weights) = self.mapped(a, b);
        let mut terms = Vec::with_capacity(nodes.len());
        for (&x, &w) in nodes.iter().zip(&weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    node: vec![x.to_f64_lossy()],
                    value: v.to_f64_lossy(),
                });
            }
            terms.push(w * v);
        }
        Ok(pairwise_sum(&terms))
    }
}

/// Legendre polynomial `P_q(x)` and its derivative.
fn legendre<S: Scalar>(q: usize, x: S) -> (S, S) {
    let one = S::one();
    let (mut p0, mut p1) = (one, x);
    if q == 0 {
        return (one, S::zero());
    }
    for j in 2..=q {
        let jf = S::of(j as f64);
        let p2 = ((S::of(2.0) * jf - one) * x * p1 - (jf - one) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let qf = S::of(q as f64);
    let dp = qf * (x * p1 - p0) / (x * x - one);
    (p1, dp)
}

/// Gauss–Legendre approximation of `∫_a^b f` with `q` nodes.
pub fn integrate_1d<S: Scalar, F: Fn(S) -> S>(f: F, a: S, b: S, q: usize) -> Result<S> {
    if a > b {
        return Err(Error::InvalidArgument(format!(
            "integration bounds out of order: {a} > {b}"
        )));
    }
    QuadratureRule::gauss_legendre(q)?.integrate(f, a, b)
}

/// How the n-dimensional integral over `[t, T]^n` is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HypercubeMode {
    /// Full tensor product, `q^n` evaluations.
    Tensor,
    /// Tensor product restricted to sorted multi-indices with multinomial
    /// weights. Valid only for symmetric integrands.
    Symmetric,
    /// Collapsed-coordinate rule on the ordered simplex `t ≤ s_1 ≤ … ≤ s_n ≤ T`,
    /// scaled by `n!`. Valid only for symmetric integrands; it never places
    /// nodes across the diagonals `s_i = s_j`, where `T − s_i ∨ s_j` has a kink.
    #[default]
    Simplex,
}

/// The `n`-fold product of a one-dimensional rule on `[t, T]`.
#[derive(Debug, Clone)]
pub struct TensorGrid<S> {
    dim: usize,
    nodes: Vec<S>,
    weights: Vec<S>,
}

impl<S: Scalar> TensorGrid<S> {
    pub fn new(dim: usize, rule: &QuadratureRule<S>, t: S, maturity: S) -> Self {
        let (nodes, weights) = rule.mapped(t, maturity);
        TensorGrid {
            dim,
            nodes,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> u64 {
        (self.nodes.len() as u64).saturating_pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decodes flat index `flat` into a point and returns its weight.
    pub fn point(&self, mut flat: u64, out: &mut [S]) -> S {
        let q = self.nodes.len() as u64;
        let mut w = S::one();
        for slot in out.iter_mut().take(self.dim) {
            let i = (flat % q) as usize;
            flat /= q;
            *slot = self.nodes[i];
            w = w * self.weights[i];
        }
        w
    }

    /// Sum of all product weights; equals `(T − t)^n` up to rounding.
    pub fn total_weight(&self) -> S {
        let one_d = pairwise_sum(&self.weights);
        (0..self.dim).fold(S::one(), |acc, _| acc * one_d)
    }
}

/// Configuration for [`integrate_hypercube`].
#[derive(Debug, Clone, Copy)]
pub struct HypercubeConfig {
    pub q: usize,
    pub mode: HypercubeMode,
    pub budget: u64,
}

impl Default for HypercubeConfig {
    fn default() -> Self {
        HypercubeConfig {
            q: DEFAULT_NODES,
            mode: HypercubeMode::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Number of integrand evaluations the chosen mode needs.
pub fn evaluation_count(n: usize, q: usize, mode: HypercubeMode) -> u64 {
    match mode {
        HypercubeMode::Tensor | HypercubeMode::Simplex => (q as u64).saturating_pow(n as u32),
        // multisets of size n from q symbols
        HypercubeMode::Symmetric => binomial(q as u64 + n as u64 - 1, n as u64),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(u64::MAX as u128) as u64
}

/// Integrates `f` over `[t, T]^n`.
pub fn integrate_hypercube<S, F>(
    n: usize,
    f: F,
    t: S,
    maturity: S,
    cfg: &HypercubeConfig,
) -> Result<S>
where
    S: Scalar,
    F: Fn(&[S]) -> S + Sync,
{
    let out = integrate_hypercube_many(
        n,
        1,
        |x: &[S], out: &mut [S]| out[0] = f(x),
        t,
        maturity,
        cfg,
    )?;
    Ok(out[0])
}

/// Integrates a vector-valued integrand of length `width` over `[t, T]^n`.
///
/// Grid points are processed in fixed chunks whose partial sums are combined
/// by pairwise summation, so the result does not depend on the thread count.
pub fn integrate_hypercube_many<S, F>(
    n: usize,
    width: usize,
    f: F,
    t: S,
    maturity: S,
    cfg: &HypercubeConfig,
) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(&[S], &mut [S]) + Sync,
{
    if t > maturity {
        return Err(Error::InvalidArgument(format!(
            "integration window out of order: {t} > {maturity}"
        )));
    }
    let requested = evaluation_count(n, cfg.q, cfg.mode);
    if requested > cfg.budget {
        return Err(Error::Budget {
            requested,
            budget: cfg.budget,
        });
    }
    let rule = QuadratureRule::<S>::gauss_legendre(cfg.q)?;
    if n == 0 {
        let mut out = vec![S::zero(); width];
        f(&[], &mut out);
        check_finite(&[], &out)?;
        return Ok(out);
    }
    match cfg.mode {
        HypercubeMode::Tensor => {
            let grid = TensorGrid::new(n, &rule, t, maturity);
            reduce(grid.len(), n, width, |idx, x| grid.point(idx, x), &f)
        }
        HypercubeMode::Symmetric => {
            let grid = TensorGrid::new(n, &rule, t, maturity);
            let indices = sorted_multi_indices(n, cfg.q);
            let fact: Vec<f64> = factorials(n);
            reduce(
                indices.len() as u64,
                n,
                width,
                |idx, x| {
                    let mi = &indices[idx as usize];
                    let mut w = S::one();
                    let mut mult = fact[n];
                    let mut run = 1usize;
                    for (k, &i) in mi.iter().enumerate() {
                        x[k] = grid.nodes[i];
                        w = w * grid.weights[i];
                        if k > 0 && mi[k - 1] == i {
                            run += 1;
                        } else {
                            mult /= fact[run];
                            run = 1;
                        }
                    }
                    mult /= fact[run];
                    w * S::of(mult)
                },
                &f,
            )
        }
        HypercubeMode::Simplex => {
            let (u, wu) = rule.mapped(S::zero(), S::one());
            let q = cfg.q as u64;
            let n_fact = S::of(factorials(n)[n]);
            reduce(
                requested,
                n,
                width,
                |mut flat, x| {
                    let mut lower = t;
                    let mut w = n_fact;
                    for slot in x.iter_mut().take(n) {
                        let i = (flat % q) as usize;
                        flat /= q;
                        let span = maturity - lower;
                        let s = lower + span * u[i];
                        w = w * span * wu[i];
                        *slot = s;
                        lower = s;
                    }
                    w
                },
                &f,
            )
        }
    }
}

fn check_finite<S: Scalar>(x: &[S], out: &[S]) -> Result<()> {
    if let Some(v) = out.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            node: x.iter().map(|v| v.to_f64_lossy()).collect(),
            value: v.to_f64_lossy(),
        });
    }
    Ok(())
}

fn reduce<S, P, F>(count: u64, n: usize, width: usize, point: P, f: &F) -> Result<Vec<S>>
where
    S: Scalar,
    P: Fn(u64, &mut [S]) -> S + Sync,
    F: Fn(&[S], &mut [S]) + Sync,
{
    let chunks = count.div_ceil(CHUNK as u64);
    let partials: Vec<Vec<S>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK as u64;
            let hi = (lo + CHUNK as u64).min(count);
            let mut x = vec![S::zero(); n];
            let mut val = vec![S::zero(); width];
            let mut cols: Vec<Vec<S>> = vec![Vec::with_capacity((hi - lo) as usize); width];
            for idx in lo..hi {
                let w = point(idx, &mut x);
                val.iter_mut().for_each(|v| *v = S::zero());
                f(&x, &mut val);
                check_finite(&x, &val)?;
                for (col, &v) in cols.iter_mut().zip(&val) {
                    col.push(w * v);
                }
            }
            Ok(cols.iter().map(|col| pairwise_sum(col)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..width)
        .map(|j| {
            let col: Vec<S> = partials.iter().map(|p| p[j]).collect();
            pairwise_sum(&col)
        })
        .collect())
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn sorted_multi_indices(n: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    loop {
        out.push(cur.clone());
        // advance to the next non-decreasing sequence
        let mut k = n;
        while k > 0 && cur[k - 1] == q - 1 {
            k -= 1;
        }
        if k == 0 {
            return out;
        }
        let v = cur[k - 1] + 1;
        for slot in cur.iter_mut().skip(k - 1) {
            *slot = v;
        }
    }
}
