use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cli::config::RunConfig;
use crate::error::Result;
use crate::gnm::{GnmTable, Kernels};
use crate::model::{CoefficientFunction, DriftIntegralCache, EcirModel};
use crate::oracles::{mc_price, riccati_solve, McEstimate};
use crate::series::{price_timedep, BondPrice};
use crate::symbolic::{differentiate, dump_terms};

pub const EXPERIMENT_HEADER: &str =
    "preset,t,T,terms,price_series,price_mc,stderr_mc,price_riccati,abs_diff_mc,abs_diff_riccati";

/// Volatility presets swept by `experiment-s4`.
pub const S4_PRESETS: [&str; 3] = ["linear_decay", "exp_decay", "sin"];

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn series_price(cfg: &RunConfig, model: &EcirModel) -> Result<BondPrice> {
    price_timedep(&cfg.window, model, Some(cfg.rate()), &cfg.series)
}

fn riccati_price(cfg: &RunConfig, model: &EcirModel) -> Result<f64> {
    let sol = riccati_solve(
        &cfg.window,
        model,
        cfg.riccati_step(),
        cfg.riccati_convention,
    )?;
    Ok(sol.price(cfg.rate()))
}

/// `price`: the series price and its decomposition.
pub fn run_price(cfg: &RunConfig) -> Result<String> {
    let p = series_price(cfg, &cfg.model)?;
    let mut out = String::from("t,T,r_t,price,A,B,A0,A1,time_factor,order,q,tail_bound\n");
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        f(cfg.window.t()),
        f(cfg.window.maturity()),
        f(p.r_t),
        f(p.price),
        f(p.a),
        f(p.b),
        f(p.a0),
        f(p.a1),
        f(p.time_factor),
        p.order,
        p.q,
        f(p.tail_bound)
    )
    .unwrap();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub series: f64,
    pub mc: McEstimate,
    pub riccati: f64,
    pub breaches: Vec<String>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.breaches.is_empty()
    }
}

/// Series, Monte Carlo and Riccati prices with the configured tolerance checks.
pub fn compare(cfg: &RunConfig) -> Result<Comparison> {
    let series = series_price(cfg, &cfg.model)?.price;
    let mc = mc_price(&cfg.window, &cfg.model, cfg.rate(), &cfg.mc)?;
    let riccati = riccati_price(cfg, &cfg.model)?;
    let tol = &cfg.compare;
    let mut breaches = Vec::new();
    if mc.stderr > tol.max_stderr {
        breaches.push(format!(
            "mc: standard error {:e} exceeds compare.max_stderr {:e}",
            mc.stderr, tol.max_stderr
        ));
    }
    let mc_tol = (tol.mc_sigmas * mc.stderr).max(tol.mc_floor);
    let diff_mc = (series - mc.mean).abs();
    if diff_mc > mc_tol {
        breaches.push(format!(
            "mc: |series − mc| = {diff_mc:e} exceeds {mc_tol:e}"
        ));
    }
    let diff_riccati = (series - riccati).abs();
    if diff_riccati > tol.tol_riccati {
        breaches.push(format!(
            "riccati: |series − riccati| = {diff_riccati:e} exceeds compare.tol_riccati {:e}",
            tol.tol_riccati
        ));
    }
    Ok(Comparison {
        series,
        mc,
        riccati,
        breaches,
    })
}

pub fn render_comparison(cfg: &RunConfig, c: &Comparison) -> String {
    let mut out = String::from(
        "t,T,price_series,price_mc,stderr_mc,price_riccati,abs_diff_mc,abs_diff_riccati,status\n",
    );
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        f(cfg.window.t()),
        f(cfg.window.maturity()),
        f(c.series),
        f(c.mc.mean),
        f(c.mc.stderr),
        f(c.riccati),
        f((c.series - c.mc.mean).abs()),
        f((c.series - c.riccati).abs()),
        if c.passed() { "pass" } else { "breach" }
    )
    .unwrap();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub preset: &'static str,
    pub t: f64,
    pub maturity: f64,
    pub terms: usize,
    pub price_series: f64,
    pub price_mc: f64,
    pub stderr_mc: f64,
    pub price_riccati: f64,
}

impl ExperimentRow {
    pub fn abs_diff_mc(&self) -> f64 {
        (self.price_series - self.price_mc).abs()
    }

    pub fn abs_diff_riccati(&self) -> f64 {
        (self.price_series - self.price_riccati).abs()
    }
}

/// Series price by term count for each volatility preset, against Monte Carlo
/// and Riccati. Drift, dimension, rate and window come from `cfg`.
pub fn experiment_s4(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    let maturity = cfg.window.maturity();
    let mut rows = Vec::new();
    for preset in S4_PRESETS {
        let sigma = match preset {
            "linear_decay" => CoefficientFunction::linear_decay(maturity),
            "exp_decay" => CoefficientFunction::exp_decay(1.0),
            _ => CoefficientFunction::sin(),
        };
        let model = EcirModel::new(cfg.model.k.clone(), sigma, cfg.model.d, cfg.model.r0)?;
        let series = series_price(cfg, &model)?;
        let mc = mc_price(&cfg.window, &model, cfg.rate(), &cfg.mc)?;
        let riccati = riccati_price(cfg, &model)?;
        for (j, &p) in series.partial_prices.iter().enumerate() {
            rows.push(ExperimentRow {
                preset,
                t: cfg.window.t(),
                maturity,
                terms: j + 1,
                price_series: p,
                price_mc: mc.mean,
                stderr_mc: mc.stderr,
                price_riccati: riccati,
            });
        }
    }
    Ok(rows)
}

pub fn render_experiment(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(EXPERIMENT_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.preset,
            f(r.t),
            f(r.maturity),
            r.terms,
            f(r.price_series),
            f(r.price_mc),
            f(r.stderr_mc),
            f(r.price_riccati),
            f(r.abs_diff_mc()),
            f(r.abs_diff_riccati())
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    /// `(drift label, n, max relative error over tuples and m)`.
    pub cases: Vec<(&'static str, usize, f64)>,
    pub tuples: usize,
}

impl OracleCheck {
    pub fn max_error(&self) -> f64 {
        self.cases.iter().map(|c| c.2).fold(0.0, f64::max)
    }
}

/// Symbolic expansion against the recurrences on random node tuples in
/// `[t, T]`, for `k ≡ 0` and `k ≡ 1`.
pub fn oracle_check(
    t: f64,
    maturity: f64,
    max_n: usize,
    tuples: usize,
    seed: u64,
) -> Result<OracleCheck> {
    let caches = [
        ("k=0", None),
        (
            "k=1",
            Some(DriftIntegralCache::new(
                &CoefficientFunction::constant(1.0),
                maturity,
            )?),
        ),
    ];
    let mut cases = Vec::new();
    for n in 1..=max_n {
        let terms = differentiate(n)?;
        for (label, cache) in &caches {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let mut worst: f64 = 0.0;
            for _ in 0..tuples {
                let nodes: Vec<f64> = (0..n).map(|_| rng.random_range(t..=maturity)).collect();
                let kernels = match cache {
                    Some(c) => Kernels::time_dependent(t, &nodes, maturity, c),
                    None => Kernels::zero_drift(&nodes, &maturity),
                };
                let symbolic = crate::symbolic::freeze_and_collect(&terms, &kernels);
                let table = GnmTable::build(&kernels, n);
                for (m, &s) in symbolic.iter().enumerate() {
                    let g = table.value(m);
                    let scale = s.abs().max(g.abs());
                    let err = if scale == 0.0 {
                        0.0
                    } else {
                        (s - g).abs() / scale
                    };
                    worst = worst.max(err);
                }
            }
            cases.push((*label, n, worst));
        }
    }
    Ok(OracleCheck { cases, tuples })
}

pub fn render_oracle_check(check: &OracleCheck) -> String {
    let mut out = String::from("drift,n,tuples,max_rel_error\n");
    for (label, n, err) in &check.cases {
        writeln!(out, "{label},{n},{},{}", check.tuples, f(*err)).unwrap();
    }
    out
}

pub fn run_dump_terms(n: usize) -> Result<String> {
    dump_terms(n)
}
