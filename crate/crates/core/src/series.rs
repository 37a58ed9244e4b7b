//! Series coefficients `A_m(t, T)` and the bond price built from them.
//!
//! `A_m = Σ_{n=m}^N 1/(2ⁿ n!) ∫_{[t,T]^n} G_n^m Π σ(s_j)² ds`, and
//! `P(t, T) = A₀^d · exp(−(L − A₁/A₀) r_t)` where `L` is the drift-discounted
//! length of the window.

use crate::error::{Error, Result};
use crate::gnm::{GnmConfig, GnmTable, Kernels, DEFAULT_MAX_ORDER};
use crate::model::{DriftIntegralCache, EcirModel, PricingWindow};
use crate::quadrature::{
    integrate_hypercube_many, HypercubeConfig, HypercubeMode, DEFAULT_BUDGET, DEFAULT_NODES,
};

/// Exponent used in the time factor `L = ∫_t^T exp(−c ∫_t^s k) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeFactor {
    /// `c = 2`, the value implied by the OU factors `dX = −k X ds + σ dW`.
    #[default]
    Doubled,
    /// `c = 1`, the single exponent as the pricing formula is usually printed.
    Printed,
}

#[derive(Debug, Clone)]
pub struct SeriesConfig {
    /// Truncation order `N`.
    pub order: usize,
    pub q: usize,
    /// Relative size below which a term stops the sum (once `n ≥ m + 1`).
    pub tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mode: HypercubeMode,
    pub budget: u64,
    pub max_order: usize,
    pub time_factor: TimeFactor,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            order: 4,
            q: DEFAULT_NODES,
            tol: 1e-10,
            alpha: 1.0,
            beta: 9.0,
            mode: HypercubeMode::default(),
            budget: DEFAULT_BUDGET,
            max_order: DEFAULT_MAX_ORDER,
            time_factor: TimeFactor::default(),
        }
    }
}

impl SeriesConfig {
    pub fn with_order(order: usize) -> Self {
        SeriesConfig {
            order,
            ..Default::default()
        }
    }

    fn hypercube(&self) -> HypercubeConfig {
        HypercubeConfig {
            q: self.q,
            mode: self.mode,
            budget: self.budget,
        }
    }
}

/// `A₀, …, A_M` with their per-`n` contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    /// `terms[m][n]` is the order-`n` contribution to `A_m` (zero for `n < m`
    /// and for orders skipped by the stopping rule).
    pub terms: Vec<Vec<f64>>,
    /// Highest order actually summed for each `m`.
    pub orders: Vec<usize>,
    /// Geometric tail bound for each `m`; `+∞` when it does not apply.
    pub tail_bounds: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn value(&self, m: usize) -> f64 {
        self.partial(m, usize::MAX)
    }

    /// `A_m` truncated at order `n_max`.
    pub fn partial(&self, m: usize, n_max: usize) -> f64 {
        let terms = &self.terms[m];
        let upto = n_max.min(terms.len() - 1);
        let mut acc = 0.0;
        // smallest terms first
        for n in (0..=upto).rev() {
            acc += terms[n];
        }
        acc
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.terms.len()).map(|m| self.value(m)).collect()
    }

    pub fn max_m(&self) -> usize {
        self.terms.len() - 1
    }
}

/// Computes `A₀, …, A_{max_m}`, one hypercube pass per order `n`.
///
/// Drift kernels come from `cache` unless `k ≡ 0`.
pub fn compute_coefficients(
    max_m: usize,
    window: &PricingWindow,
    model: &EcirModel,
    cfg: &SeriesConfig,
) -> Result<SeriesCoefficients> {
    let n_max = cfg.order;
    if max_m > n_max {
        return Err(Error::InvalidArgument(format!(
            "coefficient index m = {max_m} exceeds the truncation order N = {n_max}"
        )));
    }
    let gnm = GnmConfig::with_max_order(cfg.max_order)?;
    gnm.check(n_max)?;
    model.validate(window.maturity())?;
    let cache = if model.has_zero_drift() {
        None
    } else {
        Some(DriftIntegralCache::new(&model.k, window.maturity())?)
    };
    compute_with(max_m, window, model, cache.as_ref(), cfg)
}

fn compute_with(
    max_m: usize,
    window: &PricingWindow,
    model: &EcirModel,
    cache: Option<&DriftIntegralCache>,
    cfg: &SeriesConfig,
) -> Result<SeriesCoefficients> {
    let (t, maturity) = (window.t(), window.maturity());
    let n_max = cfg.order;
    let mut terms = vec![vec![0.0; n_max + 1]; max_m + 1];
    terms[0][0] = 1.0;
    let mut orders = vec![0usize; max_m + 1];
    let mut done = vec![false; max_m + 1];
    let hyper = cfg.hypercube();
    let sigma_zero = model.sigma.is_zero();

    let mut weight = 1.0;
    for n in 1..=n_max {
        weight /= 2.0 * n as f64;
        if done.iter().all(|&d| d) {
            break;
        }
        let width = max_m.min(n) + 1;
        let values = if sigma_zero || t >= maturity {
            vec![0.0; width]
        } else {
            integrate_hypercube_many(
                n,
                width,
                |x: &[f64], out: &mut [f64]| {
                    let kernels = match cache {
                        Some(c) => Kernels::time_dependent(t, x, maturity, c),
                        None => Kernels::zero_drift(x, &maturity),
                    };
                    let table = GnmTable::build(&kernels, width - 1);
                    let var: f64 = x.iter().map(|&s| model.sigma.eval(s).powi(2)).product();
                    for (m, o) in out.iter_mut().enumerate() {
                        *o = table.value(m) * var;
                    }
                },
                t,
                maturity,
                &hyper,
            )?
        };
        for m in 0..width {
            if done[m] {
                continue;
            }
            let term = weight * values[m];
            terms[m][n] = term;
            orders[m] = n;
            let running: f64 = terms[m].iter().sum();
            if n > m && term.abs() < cfg.tol * running.abs().max(f64::MIN_POSITIVE) {
                done[m] = true;
            }
        }
    }

    let tail_bounds = (0..=max_m)
        .map(|m| truncation_bound(orders[m].max(m), m, window, model, cfg.alpha, cfg.beta))
        .collect();
    Ok(SeriesCoefficients {
        terms,
        orders,
        tail_bounds,
    })
}

/// `A_m(t, T)` truncated at `cfg.order`.
pub fn compute_a(
    m: usize,
    window: &PricingWindow,
    model: &EcirModel,
    cfg: &SeriesConfig,
) -> Result<f64> {
    Ok(compute_coefficients(m, window, model, cfg)?.value(m))
}

/// Price with its affine decomposition `P = A · exp(−B r_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondPrice {
    pub price: f64,
    /// `A = A₀^d`.
    pub a: f64,
    /// `B = L − A₁/A₀`.
    pub b: f64,
    pub a0: f64,
    pub a1: f64,
    /// Drift-discounted window length `L`.
    pub time_factor: f64,
    pub r_t: f64,
    pub order: usize,
    pub q: usize,
    pub tail_bound: f64,
    /// `partial_prices[j]` is the price truncated at order `j + 1`.
    pub partial_prices: Vec<f64>,
}

/// Price for `k ≡ 0`.
///
/// `r_t` defaults to `r₀` when `t = 0`; for `t > 0` it must be supplied.
pub fn price_const_k(
    window: &PricingWindow,
    model: &EcirModel,
    r_t: Option<f64>,
    cfg: &SeriesConfig,
) -> Result<BondPrice> {
    if !model.has_zero_drift() {
        return Err(Error::InvalidArgument(
            "price_const_k needs k ≡ 0; use price_timedep".into(),
        ));
    }
    price_timedep(window, model, r_t, cfg)
}

/// Price for a time-dependent drift `k(s)`.
pub fn price_timedep(
    window: &PricingWindow,
    model: &EcirModel,
    r_t: Option<f64>,
    cfg: &SeriesConfig,
) -> Result<BondPrice> {
    let r_t = resolve_rate(window, model, r_t)?;
    let coeffs = compute_coefficients(1.min(cfg.order), window, model, cfg)?;
    let cache = DriftIntegralCache::new(&model.k, window.maturity())?;
    let time_factor = cache.discounted_length(
        window.t(),
        window.maturity(),
        cfg.time_factor == TimeFactor::Doubled,
    );
    assemble(&coeffs, time_factor, model.d, r_t, cfg)
}

fn resolve_rate(window: &PricingWindow, model: &EcirModel, r_t: Option<f64>) -> Result<f64> {
    let r = match r_t {
        Some(r) => r,
        None if window.t() == 0.0 => model.r0,
        None => {
            return Err(Error::InvalidArgument(format!(
                "r_t must be supplied when t = {} > 0",
                window.t()
            )))
        }
    };
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "r_t must be finite and ≥ 0, got {r}"
        )));
    }
    Ok(r)
}

fn affine(
    a0: f64,
    a1: f64,
    time_factor: f64,
    d: u32,
    r_t: f64,
    tail: f64,
) -> Result<(f64, f64, f64)> {
    if !(a0 > 0.0) {
        return Err(Error::SeriesDivergence {
            a0,
            tail_bound: tail,
        });
    }
    let a = a0.powi(d as i32);
    let b = time_factor - a1 / a0;
    Ok((a * (-b * r_t).exp(), a, b))
}

fn assemble(
    coeffs: &SeriesCoefficients,
    time_factor: f64,
    d: u32,
    r_t: f64,
    cfg: &SeriesConfig,
) -> Result<BondPrice> {
    let a0 = coeffs.value(0);
    let a1 = if coeffs.max_m() >= 1 {
        coeffs.value(1)
    } else {
        0.0
    };
    let tail = coeffs.tail_bounds[0];
    let (price, a, b) = affine(a0, a1, time_factor, d, r_t, tail)?;
    let partial_prices = (1..=cfg.order)
        .map(|n| {
            let a1 = if coeffs.max_m() >= 1 {
                coeffs.partial(1, n)
            } else {
                0.0
            };
            affine(coeffs.partial(0, n), a1, time_factor, d, r_t, tail).map(|(p, _, _)| p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BondPrice {
        price,
        a,
        b,
        a0,
        a1,
        time_factor,
        r_t,
        order: coeffs.orders.iter().copied().max().unwrap_or(0),
        q: cfg.q,
        tail_bound: tail,
        partial_prices,
    })
}

/// The affine pair `(A, B)` with `P = A · exp(−B r_t)`.
pub fn riccati_from_series(
    window: &PricingWindow,
    model: &EcirModel,
    cfg: &SeriesConfig,
) -> Result<(f64, f64)> {
    let p = price_timedep(window, model, Some(0.0), cfg)?;
    Ok((p.a, p.b))
}

/// Geometric tail estimate for `A_m` beyond order `N` from the growth bound
/// `|G_n^m| ≤ (α/m!)(8/β)^m (4+β)^n n! τ^{n+m}`.
///
/// Returns `+∞` when the ratio `(4+β) M² τ² / 2` is at least one.
pub fn truncation_bound(
    n: usize,
    m: usize,
    window: &PricingWindow,
    model: &EcirModel,
    alpha: f64,
    beta: f64,
) -> f64 {
    let tau = window.tau();
    if tau == 0.0 {
        return 0.0;
    }
    let big_m = model.sigma.bound(window.maturity());
    let ratio = (4.0 + beta) * big_m * big_m * tau * tau / 2.0;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    let m_fact: f64 = (1..=m).map(|v| v as f64).product();
    alpha / m_fact * (8.0 / beta).powi(m as i32) * tau.powi(m as i32) * ratio.powi(n as i32 + 1)
        / (1.0 - ratio)
}
