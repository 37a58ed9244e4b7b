//! The extended CIR model, its coefficient functions and the drift kernel.
//!
//! The short rate follows
//! `dr = (d·σ(s)² − 2k(s)·r) ds + 2σ(s)·√r dW`, which is the sum of `d`
//! squared Ornstein–Uhlenbeck factors `dX = −k(s)X ds + σ(s) dW`. The
//! mean-reversion level `θ = dσ²/(2k)` is derived, never stored, so `k ≡ 0`
//! is an ordinary model.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::quadrature::QuadratureRule;

/// Shape of a coefficient function.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientKind {
    Const(f64),
    /// `maturity − s`
    LinearDecay {
        maturity: f64,
    },
    /// `exp(−rate·s)`
    ExpDecay {
        rate: f64,
    },
    /// `sin(s)`
    Sin,
    Expression(Arc<Expr>),
}

/// A deterministic function of time, used for `k(s)` and `σ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFunction {
    kind: CoefficientKind,
}

impl CoefficientFunction {
    pub fn new(kind: CoefficientKind) -> Self {
        CoefficientFunction { kind }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(CoefficientKind::Const(c))
    }

    pub fn linear_decay(maturity: f64) -> Self {
        Self::new(CoefficientKind::LinearDecay { maturity })
    }

    pub fn exp_decay(rate: f64) -> Self {
        Self::new(CoefficientKind::ExpDecay { rate })
    }

    pub fn sin() -> Self {
        Self::new(CoefficientKind::Sin)
    }

    pub fn expression(expr: Expr) -> Self {
        Self::new(CoefficientKind::Expression(Arc::new(expr)))
    }

    pub fn parse_expression(text: &str) -> Result<Self> {
        Ok(Self::expression(parse_expression(text)?))
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Const(c) => *c,
            CoefficientKind::LinearDecay { maturity } => maturity - s,
            CoefficientKind::ExpDecay { rate } => (-rate * s).exp(),
            CoefficientKind::Sin => s.sin(),
            CoefficientKind::Expression(e) => e.eval(s),
        }
    }

    /// Like [`eval`](Self::eval) but rejects non-finite values.
    pub fn eval_checked(&self, name: &str, s: f64) -> Result<f64> {
        let v = self.eval(s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Coefficient {
                name: name.to_string(),
                at: s,
                value: v,
            })
        }
    }

    /// Identically zero. Only constant shapes can be recognised.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            CoefficientKind::Const(c) => *c == 0.0,
            CoefficientKind::Expression(e) => e.is_constant() && e.eval(0.0) == 0.0,
            _ => false,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            CoefficientKind::Const(c) => Some(*c),
            CoefficientKind::Expression(e) if e.is_constant() => Some(e.eval(0.0)),
            _ => None,
        }
    }

    /// Uniform bound `M ≥ sup |f|` on `[0, horizon]`.
    ///
    /// Presets use their closed form. Expressions are sampled on a dense grid,
    /// so their bound is an estimate.
    pub fn bound(&self, horizon: f64) -> f64 {
        let h = horizon.max(0.0);
        match &self.kind {
            CoefficientKind::Const(c) => c.abs(),
            CoefficientKind::LinearDecay { maturity } => maturity.abs().max((maturity - h).abs()),
            CoefficientKind::ExpDecay { rate } => 1.0f64.max((-rate * h).exp()),
            CoefficientKind::Sin => {
                if h >= std::f64::consts::FRAC_PI_2 {
                    1.0
                } else {
                    h.sin()
                }
            }
            CoefficientKind::Expression(e) => {
                const SAMPLES: usize = 4096;
                (0..=SAMPLES)
                    .map(|i| e.eval(h * i as f64 / SAMPLES as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Checks the function is finite on a dense grid of `[0, horizon]`.
    pub fn validate(&self, name: &str, horizon: f64) -> Result<()> {
        const SAMPLES: usize = 1024;
        for i in 0..=SAMPLES {
            self.eval_checked(name, horizon * i as f64 / SAMPLES as f64)?;
        }
        Ok(())
    }
}

impl fmt::Display for CoefficientFunction {
    /// Canonical text accepted back by the configuration parser.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CoefficientKind::Const(c) => write!(f, "const:{c}"),
            CoefficientKind::LinearDecay { maturity } => write!(f, "linear_decay:{maturity}"),
            CoefficientKind::ExpDecay { rate } => write!(f, "exp_decay:{rate}"),
            CoefficientKind::Sin => write!(f, "sin"),
            CoefficientKind::Expression(e) => write!(f, "{e}"),
        }
    }
}

/// Extended CIR model with integer dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EcirModel {
    pub k: CoefficientFunction,
    pub sigma: CoefficientFunction,
    pub d: u32,
    pub r0: f64,
}

impl EcirModel {
    pub fn new(
        k: CoefficientFunction,
        sigma: CoefficientFunction,
        d: u32,
        r0: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "dimension d must be at least 1".into(),
            ));
        }
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial rate r0 must be finite and non-negative, got {r0}"
            )));
        }
        Ok(EcirModel { k, sigma, d, r0 })
    }

    /// `θ(s) = dσ(s)²/(2k(s))`; `None` where `k(s) = 0`.
    pub fn theta(&self, s: f64) -> Option<f64> {
        let k = self.k.eval(s);
        (k != 0.0).then(|| self.d as f64 * self.sigma.eval(s).powi(2) / (2.0 * k))
    }

    /// Drift of the short rate, `dσ² − 2k·r`.
    #[inline]
    pub fn drift(&self, s: f64, r: f64) -> f64 {
        self.d as f64 * self.sigma.eval(s).powi(2) - 2.0 * self.k.eval(s) * r
    }

    /// Initial value of every OU factor, `√(r0/d)`.
    pub fn x0(&self) -> f64 {
        (self.r0 / self.d as f64).sqrt()
    }

    pub fn has_zero_drift(&self) -> bool {
        self.k.is_zero()
    }

    /// Checks both coefficients are finite on `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        self.k.validate("k", horizon)?;
        self.sigma.validate("sigma", horizon)
    }
}

/// Valuation time `t` and maturity `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingWindow {
    t: f64,
    maturity: f64,
}

impl PricingWindow {
    pub fn new(t: f64, maturity: f64) -> Result<Self> {
        if !(t.is_finite() && maturity.is_finite()) {
            return Err(Error::InvalidArgument(
                "window bounds must be finite".into(),
            ));
        }
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "valuation time t = {t} is negative"
            )));
        }
        if t > maturity {
            return Err(Error::InvalidArgument(format!(
                "valuation time t = {t} is after maturity T = {maturity}"
            )));
        }
        Ok(PricingWindow { t, maturity })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }
}

/// How [`DriftIntegralCache`] interpolates between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    /// Cubic Hermite using `k` itself as the derivative at each node.
    #[default]
    CubicHermite,
}

pub const DEFAULT_CACHE_CELLS: usize = 2048;
const CELL_RULE: usize = 4;
const KERNEL_RULE: usize = 16;

/// Precomputed antiderivative `K(s) = ∫_0^s k(u) du` on a uniform grid.
#[derive(Debug, Clone)]
pub struct DriftIntegralCache {
    horizon: f64,
    step: f64,
    zero: bool,
    integral: Vec<f64>,
    rate: Vec<f64>,
    interpolation: Interpolation,
    kernel_rule: QuadratureRule<f64>,
}

impl DriftIntegralCache {
    pub fn new(k: &CoefficientFunction, horizon: f64) -> Result<Self> {
        Self::with_resolution(k, horizon, DEFAULT_CACHE_CELLS, Interpolation::default())
    }

    pub fn with_resolution(
        k: &CoefficientFunction,
        horizon: f64,
        cells: usize,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) || cells == 0 {
            return Err(Error::InvalidArgument(format!(
                "drift cache needs a finite horizon ≥ 0 and at least one cell (got {horizon}, {cells})"
            )));
        }
        let kernel_rule = QuadratureRule::gauss_legendre(KERNEL_RULE)?;
        let zero = k.is_zero();
        let step = horizon / cells as f64;
        let mut integral = vec![0.0; cells + 1];
        let mut rate = vec![0.0; cells + 1];
        if !zero {
            let rule = QuadratureRule::gauss_legendre(CELL_RULE)?;
            for i in 0..=cells {
                rate[i] = k.eval_checked("k", i as f64 * step)?;
            }
            for i in 0..cells {
                let a = i as f64 * step;
                let piece = rule
                    .integrate(|s| k.eval(s), a, a + step)
                    .map_err(|_| bad_k(k, a, a + step))?;
                integral[i + 1] = integral[i] + piece;
            }
        }
        Ok(DriftIntegralCache {
            horizon,
            step,
            zero,
            integral,
            rate,
            interpolation,
            kernel_rule,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_zero_drift(&self) -> bool {
        self.zero
    }

    /// `K(s) = ∫_0^s k`.
    pub fn integral(&self, s: f64) -> f64 {
        if self.zero || self.step == 0.0 {
            return 0.0;
        }
        let s = s.clamp(0.0, self.horizon);
        let cells = self.integral.len() - 1;
        let i = ((s / self.step) as usize).min(cells - 1);
        let h = self.step;
        let x = (s - i as f64 * h) / h;
        let (y0, y1) = (self.integral[i], self.integral[i + 1]);
        match self.interpolation {
            Interpolation::Linear => y0 + (y1 - y0) * x,
            Interpolation::CubicHermite => {
                let (m0, m1) = (self.rate[i] * h, self.rate[i + 1] * h);
                let x2 = x * x;
                let x3 = x2 * x;
                (2.0 * x3 - 3.0 * x2 + 1.0) * y0
                    + (x3 - 2.0 * x2 + x) * m0
                    + (-2.0 * x3 + 3.0 * x2) * y1
                    + (x3 - x2) * m1
            }
        }
    }

    /// `∫_a^b k`.
    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.integral(b) - self.integral(a)
    }

    /// `k̃(a ∨ b) = ∫_{a∨b}^T exp(−∫_a^s k − ∫_b^s k) ds`.
    ///
    /// Symmetric in `(a, b)` bit for bit. Zero when `a ∨ b ≥ T`.
    pub fn kappa_tilde(&self, a: f64, b: f64, maturity: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi >= maturity {
            return 0.0;
        }
        if self.zero {
            return maturity - hi;
        }
        let offset = self.integral(lo) + self.integral(hi);
        let (nodes, weights) = self.kernel_rule.mapped(hi, maturity);
        let mut acc = 0.0;
        for (&s, &w) in nodes.iter().zip(&weights) {
            acc += w * (offset - 2.0 * self.integral(s)).exp();
        }
        acc
    }

    /// `∫_t^T exp(−c·∫_t^s k) ds` for `c ∈ {1, 2}`.
    pub fn discounted_length(&self, t: f64, maturity: f64, doubled: bool) -> f64 {
        if doubled {
            return self.kappa_tilde(t, t, maturity);
        }
        if t >= maturity {
            return 0.0;
        }
        if self.zero {
            return maturity - t;
        }
        let base = self.integral(t);
        let (nodes, weights) = self.kernel_rule.mapped(t, maturity);
        nodes
            .iter()
            .zip(&weights)
            .map(|(&s, &w)| w * (base - self.integral(s)).exp())
            .sum()
    }
}

fn bad_k(k: &CoefficientFunction, a: f64, b: f64) -> Error {
    let at = (a + b) / 2.0;
    Error::Coefficient {
        name: "k".into(),
        at,
        value: k.eval(at),
    }
}

/// `k̃(a ∨ b)` for a model, building a drift cache on `[0, T]`.
pub fn kappa_tilde(a: f64, b: f64, maturity: f64, model: &EcirModel) -> Result<f64> {
    for v in [a, b] {
        if !(0.0..=maturity).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "kernel argument {v} is outside [0, {maturity}]"
            )));
        }
    }
    Ok(DriftIntegralCache::new(&model.k, maturity)?.kappa_tilde(a, b, maturity))
}

/// Brownian increments on a uniform grid starting at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    pub dt: f64,
    pub increments: Vec<f64>,
}

/// One OU factor value at time `t` from the explicit solution
/// `x0·e^{−K(t)} + ∫_0^t e^{−(K(t)−K(u))} σ(u) dW_u`, with the stochastic
/// integral discretised on the noise grid (left-point σ).
pub fn ou_path_x(t: f64, model: &EcirModel, noise: &BrownianIncrements) -> Result<f64> {
    let cache = DriftIntegralCache::new(&model.k, t)?;
    ou_path_x_cached(t, model, noise, &cache)
}

pub fn ou_path_x_cached(
    t: f64,
    model: &EcirModel,
    noise: &BrownianIncrements,
    cache: &DriftIntegralCache,
) -> Result<f64> {
    if !(noise.dt > 0.0) {
        return Err(Error::InvalidArgument(
            "noise grid step must be positive".into(),
        ));
    }
    let steps = (t / noise.dt).round() as usize;
    if steps > noise.increments.len() {
        return Err(Error::InvalidArgument(format!(
            "noise covers {} steps but t = {t} needs {steps}",
            noise.increments.len()
        )));
    }
    let kt = cache.integral(t);
    let mut x = model.x0() * (-kt).exp();
    for (j, dw) in noise.increments[..steps].iter().enumerate() {
        let u = j as f64 * noise.dt;
        let sigma = model.sigma.eval_checked("sigma", u)?;
        x += (cache.integral(u) - kt).exp() * sigma * dw;
    }
    Ok(x)
}
