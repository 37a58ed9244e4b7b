//! Backward RK4 solution of the affine Riccati system for `P = A e^{−B r}`.

use crate::error::{ConfigError, Error, Result};
use crate::model::{EcirModel, PricingWindow};
use crate::scalar::Scalar;

/// Largest number of RK4 steps accepted by [`riccati_solve`].
pub const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RiccatiConvention {
    /// `B' = 2kB + 2σ²B² − 1`, `(ln A)' = dσ²B`, matching `dr = (dσ² − 2kr)ds + 2σ√r dW`.
    #[default]
    Doubled,
    /// `B' = kB + ½σ²B² − 1`, `(ln A)' = ½dσ²B`.
    Printed,
}

/// `B(·, T)` and `A(·, T)` on the grid `times`, which runs from `T` down to `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub h: f64,
}

impl RiccatiSolution {
    /// `B(t, T)` at the start of the window.
    pub fn b_start(&self) -> f64 {
        *self.b.last().unwrap()
    }

    pub fn a_start(&self) -> f64 {
        *self.a.last().unwrap()
    }

    pub fn price(&self, r_t: f64) -> f64 {
        self.a_start() * (-self.b_start() * r_t).exp()
    }
}

/// Classic RK4 for `y' = f(s, y)` from `y(from)` down to `to` in `steps`
/// equal steps. Returns every state, starting with `y(from)`.
pub fn rk4_backward<S, F, const D: usize>(
    f: F,
    y_end: [S; D],
    from: S,
    to: S,
    steps: usize,
) -> Vec<[S; D]>
where
    S: Scalar,
    F: Fn(S, &[S; D]) -> [S; D],
{
    let h = (to - from) / S::of(steps as f64);
    let half = S::of(0.5);
    let sixth = S::one() / S::of(6.0);
    let two = S::of(2.0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y_end;
    out.push(y);
    for j in 0..steps {
        let s = from + h * S::of(j as f64);
        let shift = |y: &[S; D], k: &[S; D], c: S| -> [S; D] {
            let mut r = *y;
            for i in 0..D {
                r[i] = y[i] + c * h * k[i];
            }
            r
        };
        let k1 = f(s, &y);
        let k2 = f(s + half * h, &shift(&y, &k1, half));
        let k3 = f(s + half * h, &shift(&y, &k2, half));
        let k4 = f(s + h, &shift(&y, &k3, S::one()));
        for i in 0..D {
            y[i] = y[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

/// Integrates the Riccati system backward from `B(T) = 0`, `A(T) = 1` with
/// step close to `h` (the window is split into `⌈τ/h⌉` equal steps).
pub fn riccati_solve(
    window: &PricingWindow,
    model: &EcirModel,
    h: f64,
    convention: RiccatiConvention,
) -> Result<RiccatiSolution> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(ConfigError::Invalid {
            field: "riccati.h".into(),
            message: format!("step must be positive and finite, got {h}"),
        }
        .into());
    }
    let tau = window.tau();
    let steps = (tau / h).ceil();
    if steps > MAX_STEPS as f64 {
        return Err(ConfigError::Invalid {
            field: "riccati.h".into(),
            message: format!("step {h} needs {steps} steps over τ = {tau}, more than {MAX_STEPS}"),
        }
        .into());
    }
    let steps = steps as usize;
    model.validate(window.maturity())?;
    let (kc, sc, ac) = match convention {
        RiccatiConvention::Doubled => (2.0, 2.0, 1.0),
        RiccatiConvention::Printed => (1.0, 0.5, 0.5),
    };
    let d = model.d as f64;
    let rhs = |s: f64, y: &[f64; 2]| -> [f64; 2] {
        let k = model.k.eval(s);
        let sigma2 = model.sigma.eval(s).powi(2);
        let b = y[0];
        [kc * k * b + sc * sigma2 * b * b - 1.0, ac * d * sigma2 * b]
    };
    let states = rk4_backward(rhs, [0.0, 0.0], window.maturity(), window.t(), steps);
    if let Some(bad) = states
        .iter()
        .find(|y| !y[0].is_finite() || !y[1].is_finite())
    {
        return Err(Error::Evaluation {
            node: vec![],
            value: if bad[0].is_finite() { bad[1] } else { bad[0] },
        });
    }
    let step = if steps == 0 { 0.0 } else { tau / steps as f64 };
    Ok(RiccatiSolution {
        times: (0..=steps)
            .map(|j| window.maturity() - j as f64 * step)
            .collect(),
        b: states.iter().map(|y| y[0]).collect(),
        a: states.iter().map(|y| y[1].exp()).collect(),
        h: step,
    })
}

/// `B` for `k ≡ 0` and constant `σ` under the doubled convention:
/// `tanh(σ√2 τ)/(σ√2)`, or `τ` when `σ = 0`.
pub fn riccati_closed_form_b(sigma: f64, tau: f64) -> f64 {
    if sigma == 0.0 {
        return tau;
    }
    let c = sigma.abs() * std::f64::consts::SQRT_2;
    (c * tau).tanh() / c
}
