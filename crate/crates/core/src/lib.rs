//! Zero-coupon bond pricing under the extended CIR model
//! `dr = (dσ² − 2k r) ds + 2σ√r dW` by an iterated Malliavin-derivative
//! series, with symbolic, Monte Carlo and Riccati cross-checks.

pub mod cli;
pub mod error;
pub mod expr;
pub mod gnm;
pub mod model;
pub mod oracles;
pub mod quadrature;
pub mod scalar;
pub mod series;
pub mod symbolic;

pub use error::{ConfigError, Error, ExprError, Result};
pub use gnm::{g_const, g_timedep, growth_bound, GnmConfig, GnmTable, Kernels};
pub use model::{CoefficientFunction, DriftIntegralCache, EcirModel, PricingWindow};
pub use quadrature::{HypercubeConfig, HypercubeMode, QuadratureRule};
pub use scalar::{Ring, Scalar};
pub use series::{
    compute_a, compute_coefficients, price_const_k, price_timedep, riccati_from_series,
    truncation_bound, BondPrice, SeriesCoefficients, SeriesConfig, TimeFactor,
};

pub type QuadratureRule64 = QuadratureRule<f64>;
pub type QuadratureRule32 = QuadratureRule<f32>;
pub type Kernels64 = Kernels<f64>;
pub type KernelsExact = Kernels<num_rational::Rational64>;
pub type GnmTable64 = GnmTable<f64>;
pub type GnmTableExact = GnmTable<num_rational::Rational64>;
