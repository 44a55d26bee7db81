//! Mean-square convergence experiments.
//!
//! All step sizes of a run share one family of Brownian paths: each path is
//! drawn once on the finest grid and coarser steps sum its increments.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bseries::{builtin_setdrk, parse_method, MethodError, MethodSpec};
use crate::numint::{BrownianPath, Integrator, NumError, SDEProblem, StepOptions, VectorField};
use crate::stochalg::Interp;

/// A-power truncation of the built-in method at run time.
pub const RUNTIME_TRUNCATION: u32 = 4;

/// Fine cells per finest step when a run does not say otherwise.
pub const DEFAULT_RUN_N_SUB: usize = 8;

/// Ratio of the finest step to the reference step for problems without a
/// closed-form solution.
pub const REFERENCE_REFINEMENT: usize = 8;

const EXACT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown problem '{0}' (known: gbm(a,b), stiff2d(lambda,b), det(a), sinnoise(b))")]
    UnknownProblem(String),
    #[error("bad problem parameters in '{0}'")]
    BadPreset(String),
    #[error("unknown built-in method '{0}' (known: builtin:setdrk)")]
    UnknownMethod(String),
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Method(#[from] MethodError),
}

/// Parses `"-1"`, `"0.5"` or `"1/2"`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d) = (n.trim().parse::<f64>().ok()?, d.trim().parse::<f64>().ok()?);
            (d != 0.0).then_some(n / d)
        }
        None => s.parse().ok().filter(|x: &f64| x.is_finite()),
    }
}

/// Parses a step size: a decimal, a fraction, or `2^-k`.
pub fn parse_step(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(e) = s.strip_prefix("2^") {
        let e: i32 = e.trim_start_matches('(').trim_end_matches(')').parse().ok()?;
        return Some(2f64.powi(e));
    }
    parse_number(s)
}

/// Parses a comma-separated list of step sizes.
pub fn parse_steps(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_step).collect()
}

fn field(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> VectorField {
    Arc::new(move |x: &DVector<f64>| x.map(&f))
}

/// Named test problems: `gbm(a,b)`, `stiff2d(lambda,b)`, `det(a)` and
/// `sinnoise(b)` (`dX = b sin X ⋆dW`, closed form under Stratonovich only).
/// Parameters may be omitted to take the defaults `gbm(-1,1/2)`,
/// `stiff2d(20,1/2)`, `det(-1)` and `sinnoise(1)`.
pub fn problem_preset(name: &str, interp: Interp) -> Result<SDEProblem, HarnessError> {
    let name = name.trim();
    let (kind, args) = match name.split_once('(') {
        Some((k, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| HarnessError::BadPreset(name.into()))?;
            let args = inner
                .split(',')
                .map(|a| parse_number(a.split_once('=').map_or(a, |(_, v)| v)))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| HarnessError::BadPreset(name.into()))?;
            (k.trim(), args)
        }
        None => (name, Vec::new()),
    };
    let params = |defaults: &[f64]| -> Result<Vec<f64>, HarnessError> {
        match args.len() {
            0 => Ok(defaults.to_vec()),
            n if n == defaults.len() => Ok(args.clone()),
            _ => Err(HarnessError::BadPreset(name.into())),
        }
    };
    let canonical = |p: &[f64]| {
        let list: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        format!("{kind}({})", list.join(","))
    };
    match kind {
        "gbm" => {
            let p = params(&[-1.0, 0.5])?;
            let (a, b) = (p[0], p[1]);
            let drift = match interp {
                Interp::Ito => a - b * b / 2.0,
                Interp::Stratonovich => a,
            };
            let prob = SDEProblem::new(
                &canonical(&p),
                dmatrix![a],
                vec![field(|_| 0.0), field(move |x| b * x)],
                interp,
                dvector![1.0],
            )?;
            Ok(prob.with_exact(Arc::new(move |t, w, x0| x0 * (drift * t + b * w[0]).exp())))
        }
        "stiff2d" => {
            let p = params(&[20.0, 0.5])?;
            let (lambda, b) = (p[0], p[1]);
            let a = DMatrix::from_diagonal(&dvector![-lambda, -2.0 * lambda]);
            Ok(SDEProblem::new(
                &canonical(&p),
                a,
                vec![field(f64::sin), field(move |x| b * x)],
                interp,
                dvector![1.0, 1.0],
            )?)
        }
        "det" => {
            let p = params(&[-1.0])?;
            let a = p[0];
            let prob = SDEProblem::new(
                &canonical(&p),
                dmatrix![a],
                vec![field(|_| 1.0), field(|_| 0.0)],
                interp,
                dvector![1.0],
            )?;
            Ok(prob.with_exact(Arc::new(move |t, _w, x0| {
                let growth = if a == 0.0 { t } else { (a * t).exp_m1() / a };
                x0 * (a * t).exp() + DVector::from_element(x0.len(), growth)
            })))
        }
        "sinnoise" => {
            let p = params(&[1.0])?;
            let b = p[0];
            let prob = SDEProblem::new(
                &canonical(&p),
                dmatrix![0.0],
                vec![field(|_| 0.0), field(move |x| b * x.sin())],
                interp,
                dvector![1.0],
            )?;
            // G' = b sin G with G(0) = x0 solves the Stratonovich equation pathwise
            Ok(match interp {
                Interp::Stratonovich => prob.with_exact(Arc::new(move |_t, w, x0| {
                    x0.map(|x| 2.0 * ((x / 2.0).tan() * (b * w[0]).exp()).atan())
                })),
                Interp::Ito => prob,
            })
        }
        _ => Err(HarnessError::UnknownProblem(name.into())),
    }
}

/// Resolves `builtin:setdrk` or a method document already read into memory.
pub fn builtin_method(source: &str, interp: Interp, truncation: u32) -> Result<MethodSpec, HarnessError> {
    match source {
        "builtin:setdrk" => Ok(builtin_setdrk(truncation, interp)),
        other => Err(HarnessError::UnknownMethod(other.into())),
    }
}

/// Parses a method document and re-expresses it under `interp`.
pub fn method_from_document(doc: &str, interp: Interp) -> Result<MethodSpec, HarnessError> {
    Ok(parse_method(doc)?.with_interp(interp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    /// Strictly decreasing dyadic step sizes.
    pub steps: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    /// Fine cells per finest step.
    pub n_sub: usize,
    pub t_end: f64,
    pub options: StepOptions,
}

impl ConvergenceConfig {
    pub fn new(steps: Vec<f64>, paths: usize, seed: u64) -> Self {
        ConvergenceConfig { steps, paths, seed, n_sub: DEFAULT_RUN_N_SUB, t_end: 1.0, options: StepOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRun {
    pub method: String,
    pub problem: String,
    pub interp: Interp,
    pub steps: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub rms: Vec<f64>,
    /// Standard error of each RMS estimate.
    pub rms_se: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_se: Option<f64>,
    /// Set when the errors are at round-off level and no slope is fitted.
    pub notice: Option<String>,
}

/// Pairwise summation with a fixed reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Least squares `y = intercept + slope x`; returns `(slope, intercept, stderr)`,
/// with the standard error `NaN` for two points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some((slope, intercept, se))
}

fn whole(x: f64) -> Option<usize> {
    let r = x.round();
    (r >= 1.0 && (x - r).abs() <= 1e-9 * x).then_some(r as usize)
}

/// Root-mean-square error at `t_end` for each step size over common paths.
pub fn run_convergence(
    spec: &MethodSpec,
    problem: &SDEProblem,
    config: &ConvergenceConfig,
) -> Result<ConvergenceRun, HarnessError> {
    if config.paths < 2 {
        return Err(HarnessError::Config(format!("need at least 2 paths, got {}", config.paths)));
    }
    if config.steps.is_empty() {
        return Err(HarnessError::Config("no step sizes".into()));
    }
    if config.n_sub == 0 {
        return Err(HarnessError::Config("n_sub must be positive".into()));
    }
    if config.steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::Config("step sizes must be strictly decreasing".into()));
    }
    let h_min = *config.steps.last().unwrap();
    let mut factors = Vec::new();
    for &h in &config.steps {
        match whole(h / h_min) {
            Some(f) if f.is_power_of_two() => factors.push(f),
            _ => return Err(HarnessError::Config(format!("step {h} is not a dyadic multiple of {h_min}"))),
        }
        if whole(config.t_end / h).is_none() {
            return Err(HarnessError::Config(format!("horizon {} is not a multiple of step {h}", config.t_end)));
        }
    }
    let exact = problem.exact.is_some();
    if !exact && config.n_sub % REFERENCE_REFINEMENT != 0 {
        return Err(HarnessError::Config(format!(
            "reference solutions need n_sub divisible by {REFERENCE_REFINEMENT}, got {}",
            config.n_sub
        )));
    }
    let dt = h_min / config.n_sub as f64;
    let cells = whole(config.t_end / dt).expect("checked above");
    let integrators = config
        .steps
        .iter()
        .map(|&h| Integrator::new(spec, problem, h, config.options))
        .collect::<Result<Vec<_>, _>>()?;
    let reference = if exact {
        None
    } else {
        Some(Integrator::new(spec, problem, h_min / REFERENCE_REFINEMENT as f64, config.options)?)
    };
    let noises = problem.noises() as usize;

    let per_path: Vec<Result<Vec<f64>, NumError>> = (0..config.paths)
        .into_par_iter()
        .map(|p| {
            let path = BrownianPath::sample(config.seed, p as u64, noises, cells, dt);
            let truth = match &reference {
                None => problem.exact_at(config.t_end, &path.w_at(cells)).expect("exact solution"),
                Some(r) => r.integrate(&path, cells / (config.n_sub / REFERENCE_REFINEMENT))?,
            };
            integrators
                .iter()
                .zip(&factors)
                .map(|(integ, f)| {
                    let y = integ.integrate(&path, cells / (config.n_sub * f))?;
                    Ok((y - &truth).norm_squared())
                })
                .collect()
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = config.paths as f64;
    let mut rms = Vec::new();
    let mut rms_se = Vec::new();
    for level in 0..config.steps.len() {
        let sq: Vec<f64> = per_path.iter().map(|e| e[level]).collect();
        let mean = pairwise_sum(&sq) / n;
        let dev: Vec<f64> = sq.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        let r = mean.sqrt();
        rms.push(r);
        rms_se.push(if r > 0.0 { (var / n).sqrt() / (2.0 * r) } else { 0.0 });
    }

    let degenerate = rms.iter().all(|&e| e <= EXACT_THRESHOLD) || rms.iter().any(|&e| e == 0.0);
    let (slope, intercept, slope_se, notice) = if degenerate {
        let notice = format!(
            "errors at round-off level (max {:.3e}); the method integrates this problem exactly and no slope is fitted",
            rms.iter().copied().fold(0.0, f64::max)
        );
        (None, None, None, Some(notice))
    } else {
        let x: Vec<f64> = config.steps.iter().map(|h| h.log2()).collect();
        let y: Vec<f64> = rms.iter().map(|e| e.log2()).collect();
        match fit_line(&x, &y) {
            Some((s, i, se)) => (Some(s), Some(i), se.is_finite().then_some(se), None),
            None => (None, None, None, None),
        }
    };
    Ok(ConvergenceRun {
        method: spec.name.clone(),
        problem: problem.name.clone(),
        interp: problem.interp,
        steps: config.steps.clone(),
        paths: config.paths,
        seed: config.seed,
        rms,
        rms_se,
        slope,
        intercept,
        slope_se,
        notice,
    })
}

fn sci(x: Option<f64>) -> String {
    format!("{:.16e}", x.unwrap_or(f64::NAN))
}

/// `h,rms_error` rows followed by `slope,` and `stderr,` rows; values carry
/// 17 significant digits, undefined values print as `NaN`.
pub fn emit_csv(run: &ConvergenceRun) -> String {
    let mut out = String::from("h,rms_error\n");
    for (h, e) in run.steps.iter().zip(&run.rms) {
        let _ = writeln!(out, "{h:.16e},{e:.16e}");
    }
    let _ = writeln!(out, "slope,{}", sci(run.slope));
    let _ = writeln!(out, "stderr,{}", sci(run.slope_se));
    out
}

/// Experiment file: `{"method", "problem", "interpretation", "steps", "paths", "seed"}`,
/// with an optional `n_sub`. Steps are numbers or strings such as `"2^-4"`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub method: String,
    pub problem: String,
    pub interpretation: Interp,
    pub steps: Vec<StepValue>,
    pub paths: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sub: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum StepValue {
    Number(f64),
    Text(String),
}

impl Experiment {
    pub fn from_json(doc: &str) -> Result<Experiment, HarnessError> {
        serde_json::from_str(doc).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn step_sizes(&self) -> Result<Vec<f64>, HarnessError> {
        self.steps
            .iter()
            .map(|s| match s {
                StepValue::Number(x) => Ok(*x),
                StepValue::Text(t) => parse_step(t).ok_or_else(|| HarnessError::Config(format!("bad step '{t}'"))),
            })
            .collect()
    }

    pub fn config(&self) -> Result<ConvergenceConfig, HarnessError> {
        let mut c = ConvergenceConfig::new(self.step_sizes()?, self.paths, self.seed);
        if let Some(n) = self.n_sub {
            c.n_sub = n;
        }
        Ok(c)
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::from_json(s)
    }
}
