//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{ConfigError, Error, Result};
use crate::model::{CoefficientFunction, EcirModel, PricingWindow};
use crate::oracles::{McConfig, McScheme, RiccatiConvention};
use crate::quadrature::HypercubeMode;
use crate::series::{SeriesConfig, TimeFactor};

const KEYS: &[&str] = &[
    "model.k",
    "model.sigma",
    "model.d",
    "model.r0",
    "window.t",
    "window.T",
    "window.r_t",
    "series.N",
    "series.q",
    "series.tol",
    "series.alpha",
    "series.beta",
    "series.mode",
    "series.budget",
    "series.max_order",
    "series.time_factor",
    "mc.paths",
    "mc.steps",
    "mc.seed",
    "mc.scheme",
    "riccati.h",
    "riccati.convention",
    "compare.tol_riccati",
    "compare.mc_sigmas",
    "compare.mc_floor",
    "compare.max_stderr",
    "output.path",
    "output.format",
];

const REQUIRED: &[&str] = &["model.sigma", "model.d", "model.r0", "window.t", "window.T"];

/// Cross-method tolerances for `compare`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareTolerances {
    pub tol_riccati: f64,
    pub mc_sigmas: f64,
    pub mc_floor: f64,
    pub max_stderr: f64,
}

impl Default for CompareTolerances {
    fn default() -> Self {
        CompareTolerances {
            tol_riccati: 1e-5,
            mc_sigmas: 3.0,
            mc_floor: 1e-4,
            max_stderr: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: EcirModel,
    pub window: PricingWindow,
    /// Short rate at `t`; `None` means `r0`.
    pub r_t: Option<f64>,
    pub series: SeriesConfig,
    pub mc: McConfig,
    /// RK4 step; `None` means `τ/1000`.
    pub riccati_h: Option<f64>,
    pub riccati_convention: RiccatiConvention,
    pub compare: CompareTolerances,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn rate(&self) -> f64 {
        self.r_t.unwrap_or(self.model.r0)
    }

    pub fn riccati_step(&self) -> f64 {
        match self.riccati_h {
            Some(h) => h,
            None if self.window.tau() > 0.0 => self.window.tau() / 1000.0,
            None => 1.0,
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

/// Parses and validates a configuration, applying defaults for optional keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<&'static str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            }
            .into());
        };
        let key = key.trim();
        let value = unquote(value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "missing key before `=`".into(),
            }
            .into());
        }
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            }
            .into());
        };
        if entries.contains_key(known) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            }
            .into());
        }
        entries.insert(
            known,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    for key in REQUIRED {
        if !entries.contains_key(key) {
            return Err(ConfigError::Invalid {
                field: key.to_string(),
                message: "required key is missing".into(),
            }
            .into());
        }
    }

    let get = |key: &str| entries.get(key).map(|e| e.value.as_str());
    let num = |key: &str| -> Result<Option<f64>> {
        entries
            .get(key)
            .map(|e| parse_value::<f64>(key, e.line, &e.value))
            .transpose()
    };
    let int = |key: &str| -> Result<Option<u64>> {
        entries
            .get(key)
            .map(|e| parse_value::<u64>(key, e.line, &e.value.replace('_', "")))
            .transpose()
    };

    let t = num("window.t")?.unwrap();
    let maturity = num("window.T")?.unwrap();
    if !(t.is_finite() && maturity.is_finite()) {
        return Err(invalid("window", "t and T must be finite"));
    }
    if t < 0.0 {
        return Err(ConfigError::Constraint {
            constraint: "0 ≤ window.t".into(),
        }
        .into());
    }
    if t > maturity {
        return Err(ConfigError::Constraint {
            constraint: "window.t ≤ window.T".into(),
        }
        .into());
    }
    let window = PricingWindow::new(t, maturity)?;

    let sigma = parse_coefficient_spec(get("model.sigma").unwrap(), maturity)
        .map_err(|e| field_err("model.sigma", e))?;
    let k = match get("model.k") {
        Some(v) => parse_coefficient_spec(v, maturity).map_err(|e| field_err("model.k", e))?,
        None => CoefficientFunction::zero(),
    };
    let d = int("model.d")?.unwrap();
    if d == 0 || d > u32::MAX as u64 {
        return Err(invalid("model.d", "dimension must be a positive integer"));
    }
    let r0 = num("model.r0")?.unwrap();
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(invalid("model.r0", "must be finite and ≥ 0"));
    }
    let model = EcirModel::new(k, sigma, d as u32, r0).map_err(|e| field_err("model", e))?;
    model
        .validate(maturity)
        .map_err(|e| field_err("model", e))?;

    let r_t = num("window.r_t")?;
    if let Some(r) = r_t {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("window.r_t", "must be finite and ≥ 0"));
        }
    }

    let mut series = SeriesConfig::default();
    if let Some(n) = int("series.N")? {
        series.order = n as usize;
    }
    if let Some(q) = int("series.q")? {
        if q == 0 {
            return Err(invalid("series.q", "need at least one node"));
        }
        series.q = q as usize;
    }
    if let Some(tol) = num("series.tol")? {
        if !(tol >= 0.0) {
            return Err(invalid("series.tol", "must be ≥ 0"));
        }
        series.tol = tol;
    }
    if let Some(alpha) = num("series.alpha")? {
        if !(alpha >= 1.0) {
            return Err(invalid("series.alpha", "must be ≥ 1"));
        }
        series.alpha = alpha;
    }
    if let Some(beta) = num("series.beta")? {
        if !(beta > 2.0) {
            return Err(invalid("series.beta", "must be > 2"));
        }
        series.beta = beta;
    }
    if let Some(mode) = get("series.mode") {
        series.mode = match mode {
            "simplex" => HypercubeMode::Simplex,
            "tensor" => HypercubeMode::Tensor,
            "symmetric" => HypercubeMode::Symmetric,
            other => {
                return Err(invalid(
                    "series.mode",
                    &format!("expected simplex, tensor or symmetric, got `{other}`"),
                ))
            }
        };
    }
    if let Some(budget) = int("series.budget")? {
        series.budget = budget;
    }
    if let Some(max_order) = int("series.max_order")? {
        series.max_order = max_order as usize;
    }
    if let Some(tf) = get("series.time_factor") {
        series.time_factor = match tf {
            "doubled" => TimeFactor::Doubled,
            "printed" => TimeFactor::Printed,
            other => {
                return Err(invalid(
                    "series.time_factor",
                    &format!("expected doubled or printed, got `{other}`"),
                ))
            }
        };
    }
    if series.order == 0 {
        return Err(invalid("series.N", "truncation order must be at least 1"));
    }
    if series.order > series.max_order {
        return Err(ConfigError::Constraint {
            constraint: format!("series.N ≤ series.max_order ({})", series.max_order),
        }
        .into());
    }

    let mut mc = McConfig::default();
    if let Some(paths) = int("mc.paths")? {
        if paths == 0 {
            return Err(invalid("mc.paths", "must be at least 1"));
        }
        mc.paths = paths;
    }
    if let Some(steps) = int("mc.steps")? {
        if steps == 0 {
            return Err(invalid("mc.steps", "must be at least 1"));
        }
        mc.steps = steps as usize;
    }
    if let Some(seed) = int("mc.seed")? {
        mc.seed = seed;
    }
    if let Some(scheme) = get("mc.scheme") {
        mc.scheme = match scheme {
            "direct-sde" => McScheme::DirectSde,
            "ou-sum" => McScheme::OuSum,
            other => {
                return Err(invalid(
                    "mc.scheme",
                    &format!("expected direct-sde or ou-sum, got `{other}`"),
                ))
            }
        };
    }

    let riccati_h = num("riccati.h")?;
    if let Some(h) = riccati_h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("riccati.h", "step must be positive"));
        }
        if window.tau() > 0.0 && h > window.tau() {
            return Err(ConfigError::Constraint {
                constraint: "riccati.h ≤ window.T − window.t".into(),
            }
            .into());
        }
    }
    let riccati_convention = match get("riccati.convention") {
        None | Some("doubled") => RiccatiConvention::Doubled,
        Some("printed") => RiccatiConvention::Printed,
        Some(other) => {
            return Err(invalid(
                "riccati.convention",
                &format!("expected doubled or printed, got `{other}`"),
            ))
        }
    };

    let mut compare = CompareTolerances::default();
    for (key, slot) in [
        ("compare.tol_riccati", &mut compare.tol_riccati),
        ("compare.mc_sigmas", &mut compare.mc_sigmas),
        ("compare.mc_floor", &mut compare.mc_floor),
        ("compare.max_stderr", &mut compare.max_stderr),
    ] {
        if let Some(v) = num(key)? {
            if !(v >= 0.0) {
                return Err(invalid(key, "must be ≥ 0"));
            }
            *slot = v;
        }
    }

    let output_path = get("output.path").map(PathBuf::from);
    let format = match get("output.format") {
        None | Some("csv") => OutputFormat::Csv,
        Some(other) => {
            return Err(invalid(
                "output.format",
                &format!("only csv is supported, got `{other}`"),
            ))
        }
    };

    Ok(RunConfig {
        model,
        window,
        r_t,
        series,
        mc,
        riccati_h,
        riccati_convention,
        compare,
        output_path,
        format,
    })
}

/// Preset name (`const:c`, `linear_decay[:T]`, `exp_decay[:r]`, `sin`) or an
/// expression in `s`. `linear_decay` without a parameter uses `maturity`.
pub fn parse_coefficient_spec(text: &str, maturity: f64) -> Result<CoefficientFunction> {
    let text = unquote(text.trim());
    let (name, param) = match text.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (text, None),
    };
    let number = |p: &str| -> Result<f64> {
        p.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("preset parameter `{p}` is not a finite number"))
            })
    };
    match (name, param) {
        ("const", Some(p)) => Ok(CoefficientFunction::constant(number(p)?)),
        ("linear_decay", None) => Ok(CoefficientFunction::linear_decay(maturity)),
        ("linear_decay", Some(p)) => Ok(CoefficientFunction::linear_decay(number(p)?)),
        ("exp_decay", None) => Ok(CoefficientFunction::exp_decay(1.0)),
        ("exp_decay", Some(p)) => Ok(CoefficientFunction::exp_decay(number(p)?)),
        ("sin", None) => Ok(CoefficientFunction::sin()),
        (_, Some(_)) => Err(Error::InvalidArgument(format!(
            "unknown coefficient preset `{name}`"
        ))),
        _ => CoefficientFunction::parse_expression(text),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(v)
}

fn parse_value<T: FromStr>(key: &str, line: usize, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| invalid(key, &format!("line {line}: cannot parse `{v}`")))
}

fn invalid(field: &str, message: &str) -> Error {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.to_string(),
    }
    .into()
}

fn field_err(field: &str, e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => invalid(field, &other.to_string()),
    }
}
