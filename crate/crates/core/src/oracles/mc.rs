//! Monte Carlo estimate of `E[exp(−∫_t^T r ds) | r_t]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EcirModel, PricingWindow};
use crate::scalar::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McScheme {
    /// Full-truncation Euler on `dr = (dσ² − 2k r) ds + 2σ√r dW`.
    #[default]
    DirectSde,
    /// `d` independent OU factors `dX = −k X ds + σ dW` by Euler, `r = Σ X²`.
    OuSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
    pub scheme: McScheme,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 1_000_000,
            steps: 400,
            seed: 20_240_601,
            scheme: McScheme::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√paths`.
    pub stderr: f64,
    pub paths: u64,
}

/// Path `i` draws from ChaCha8 seeded with `seed` on stream `i`, so the
/// estimate does not depend on how paths are scheduled.
pub fn mc_price(
    window: &PricingWindow,
    model: &EcirModel,
    r_start: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if cfg.paths == 0 || cfg.steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least one path and one step (got {} paths, {} steps)",
            cfg.paths, cfg.steps
        )));
    }
    if !(r_start >= 0.0 && r_start.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "starting rate must be finite and ≥ 0, got {r_start}"
        )));
    }
    model.validate(window.maturity())?;

    let dt = window.tau() / cfg.steps as f64;
    let grid: Vec<(f64, f64)> = (0..cfg.steps)
        .map(|j| {
            let s = window.t() + j as f64 * dt;
            Ok((
                model.k.eval_checked("k", s)?,
                model.sigma.eval_checked("sigma", s)?,
            ))
        })
        .collect::<Result<_>>()?;
    let sqrt_dt = dt.sqrt();
    let d = model.d as usize;

    let values: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            let integral = match cfg.scheme {
                McScheme::DirectSde => {
                    direct_path(&grid, model.d as f64, r_start, dt, sqrt_dt, &mut rng)
                }
                McScheme::OuSum => ou_sum_path(&grid, d, r_start, dt, sqrt_dt, &mut rng),
            };
            (-integral).exp()
        })
        .collect();

    let n = values.len() as f64;
    if values.iter().all(|&v| v == values[0]) {
        return Ok(McEstimate {
            mean: values[0],
            stderr: 0.0,
            paths: cfg.paths,
        });
    }
    let mean = pairwise_sum(&values) / n;
    let stderr = if values.len() > 1 {
        let sq: Vec<f64> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&sq) / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        paths: cfg.paths,
    })
}

fn direct_path(
    grid: &[(f64, f64)],
    d: f64,
    r0: f64,
    dt: f64,
    sqrt_dt: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut r = r0;
    let mut integral = 0.0;
    for &(k, sigma) in grid {
        let rp = r.max(0.0);
        let z: f64 = StandardNormal.sample(rng);
        let next =
            r + (d * sigma * sigma - 2.0 * k * rp) * dt + 2.0 * sigma * rp.sqrt() * sqrt_dt * z;
        integral += 0.5 * (rp + next.max(0.0)) * dt;
        r = next;
    }
    integral
}

fn ou_sum_path(
    grid: &[(f64, f64)],
    d: usize,
    r0: f64,
    dt: f64,
    sqrt_dt: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let x0 = (r0 / d as f64).sqrt();
    let mut x = vec![x0; d];
    let mut r = r0;
    let mut integral = 0.0;
    for &(k, sigma) in grid {
        let mut next = 0.0;
        for xi in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *xi += -k * *xi * dt + sigma * sqrt_dt * z;
            next += *xi * *xi;
        }
        integral += 0.5 * (r + next) * dt;
        r = next;
    }
    integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientFunction;

    fn cfg(paths: u64, scheme: McScheme) -> McConfig {
        McConfig {
            paths,
            steps: 100,
            seed: 7,
            scheme,
        }
    }

    #[test]
    fn deterministic_path_is_exact() {
        let w = PricingWindow::new(0.8, 1.0).unwrap();
        let m = EcirModel::new(
            CoefficientFunction::zero(),
            CoefficientFunction::zero(),
            1,
            0.5,
        )
        .unwrap();
        for scheme in [McScheme::DirectSde, McScheme::OuSum] {
            let e = mc_price(&w, &m, 0.5, &cfg(50, scheme)).unwrap();
            assert!((e.mean - (-0.1f64).exp()).abs() < 1e-15);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let w = PricingWindow::new(0.8, 1.0).unwrap();
        let m = EcirModel::new(
            CoefficientFunction::zero(),
            CoefficientFunction::constant(1.0),
            2,
            0.5,
        )
        .unwrap();
        let a = mc_price(&w, &m, 0.5, &cfg(2000, McScheme::DirectSde)).unwrap();
        let b = mc_price(&w, &m, 0.5, &cfg(2000, McScheme::DirectSde)).unwrap();
        assert_eq!(a, b);
        let mut other = cfg(2000, McScheme::DirectSde);
        other.seed = 8;
        assert_ne!(a.mean, mc_price(&w, &m, 0.5, &other).unwrap().mean);
    }

    #[test]
    fn schemes_agree() {
        let w = PricingWindow::new(0.8, 1.0).unwrap();
        let m = EcirModel::new(
            CoefficientFunction::constant(1.0),
            CoefficientFunction::constant(1.0),
            2,
            0.5,
        )
        .unwrap();
        let a = mc_price(&w, &m, 0.5, &cfg(20_000, McScheme::DirectSde)).unwrap();
        let b = mc_price(&w, &m, 0.5, &cfg(20_000, McScheme::OuSum)).unwrap();
        let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(
            (a.mean - b.mean).abs() < 3.0 * combined + 1e-5,
            "{a:?} {b:?}"
        );
    }

    #[test]
    fn price_in_unit_interval() {
        let w = PricingWindow::new(0.0, 1.0).unwrap();
        let m = EcirModel::new(
            CoefficientFunction::zero(),
            CoefficientFunction::sin(),
            1,
            0.3,
        )
        .unwrap();
        let e = mc_price(&w, &m, 0.3, &cfg(500, McScheme::DirectSde)).unwrap();
        assert!(e.mean > 0.0 && e.mean <= 1.0);
        assert!(e.stderr > 0.0);
    }

    #[test]
    fn rejects_empty_budget() {
        let w = PricingWindow::new(0.0, 1.0).unwrap();
        let m = EcirModel::new(
            CoefficientFunction::zero(),
            CoefficientFunction::sin(),
            1,
            0.3,
        )
        .unwrap();
        assert!(mc_price(&w, &m, 0.3, &cfg(0, McScheme::DirectSde)).is_err());
        assert!(mc_price(&w, &m, -0.1, &cfg(10, McScheme::DirectSde)).is_err());
    }
}
