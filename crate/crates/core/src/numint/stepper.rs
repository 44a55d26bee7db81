//! The explicit stage method
//!
//! ```text
//! H_i     = e^{c_i h A} Y_n + Σ_m Σ_{j<i} Z_ij^{(m)}(A) g_m(H_j)
//! Y_{n+1} = e^{hA} Y_n     + Σ_m Σ_i   z_i^{(m)}(A)  g_m(H_i)
//! ```
//!
//! with each coefficient a power series `Σ_q (realized scalar) A^q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::paths::{BrownianGrid, BrownianPath, CompiledPoly, WordTable, DEFAULT_MAX_WORD_LEN};
use super::{expm, phi1, NumError, SDEProblem};
use crate::bseries::{MethodSpec, StageKey, WeightKey};
use crate::stochalg::{rational_to_f64, Word, WordPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoeffKey {
    Stage(StageKey),
    Weight(WeightKey),
}

/// Realized `Z` and `z` scalars for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEvaluation {
    keys: Arc<Vec<CoeffKey>>,
    values: Vec<f64>,
}

impl CoefficientEvaluation {
    pub fn get(&self, key: CoeffKey) -> Option<f64> {
        self.keys.binary_search(&key).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (CoeffKey, f64)> + '_ {
        self.keys.iter().copied().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Highest power of `A` kept in random coefficient series.
    pub q_max: u32,
    /// Fine cells per linear piece when accumulating iterated integrals.
    pub group: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { q_max: 4, group: 1 }
    }
}

#[derive(Debug, Clone)]
enum Action {
    Matrix(DMatrix<f64>),
    // (q, index into the coefficient list), sorted by q
    Powers(Vec<(u32, usize)>),
}

#[derive(Debug, Clone)]
struct Term {
    m: usize,
    j: usize,
    action: Action,
}

/// A method bound to a problem and a step size, ready to step.
#[derive(Debug, Clone)]
pub struct Integrator {
    h: f64,
    a: DMatrix<f64>,
    exp_h: DMatrix<f64>,
    stage_exp: Vec<Option<DMatrix<f64>>>,
    stage_terms: Vec<Vec<Term>>,
    weight_terms: Vec<Term>,
    keys: Arc<Vec<CoeffKey>>,
    polys: Vec<CompiledPoly>,
    originals: Vec<WordPoly>,
    table: WordTable,
    options: StepOptions,
    problem: SDEProblem,
}

fn closed_form_power(series: &BTreeMap<u32, &WordPoly>, truncation: Option<u32>) -> Option<usize> {
    let top = truncation?;
    if top == 0 || series.len() != top as usize + 1 || series.keys().copied().ne(0..=top) {
        return None;
    }
    (0..=1).find(|&k| {
        series.iter().all(|(&q, p)| **p == WordPoly::h_power_over_factorial(p.interp(), q as usize + k))
    })
}

impl Integrator {
    pub fn new(spec: &MethodSpec, problem: &SDEProblem, h: f64, options: StepOptions) -> Result<Self, NumError> {
        spec.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(NumError::Grid(format!("step size {h} must be positive")));
        }
        if spec.noises > problem.noises() {
            return Err(NumError::Noises { method: spec.noises, problem: problem.noises() });
        }
        let d = problem.dim();
        let a = problem.a.clone();
        let exp_h = expm(&a, h)?;
        let stage_exp = spec
            .c
            .iter()
            .map(|c| {
                let c = rational_to_f64(c);
                if c == 0.0 {
                    Ok(None)
                } else {
                    expm(&a, c * h).map(Some)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut table = WordTable::new(DEFAULT_MAX_WORD_LEN);
        let mut keys = Vec::new();
        let mut originals = Vec::new();
        for (k, p) in &spec.stage {
            if k.q <= options.q_max {
                keys.push(CoeffKey::Stage(*k));
                originals.push(p.clone());
            }
        }
        for (k, p) in &spec.weights {
            if k.q <= options.q_max {
                keys.push(CoeffKey::Weight(*k));
                originals.push(p.clone());
            }
        }
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by_key(|&i| keys[i]);
        let keys: Vec<CoeffKey> = order.iter().map(|&i| keys[i]).collect();
        let originals: Vec<WordPoly> = order.iter().map(|&i| originals[i].clone()).collect();
        let polys = originals
            .iter()
            .map(|p| CompiledPoly::new(p, h, &mut table))
            .collect::<Result<Vec<_>, _>>()?;
        let slot = |key: CoeffKey| keys.binary_search(&key).expect("key listed");

        let powers_of_a = {
            let top = spec.max_q().min(options.q_max) as usize;
            let mut out = vec![DMatrix::<f64>::identity(d, d)];
            for q in 1..=top {
                out.push(&out[q - 1] * &a);
            }
            out
        };
        let build = |series: BTreeMap<u32, &WordPoly>, slots: Vec<(u32, usize)>| -> Result<Action, NumError> {
            match closed_form_power(&series, spec.truncation) {
                Some(0) => return Ok(Action::Matrix(exp_h.clone())),
                Some(_) => return Ok(Action::Matrix(phi1(&a, h)? * h)),
                None => {}
            }
            if slots.iter().all(|&(_, s)| polys[s].as_constant().is_some()) {
                let mut m = DMatrix::zeros(d, d);
                for &(q, s) in &slots {
                    m += &powers_of_a[q as usize] * polys[s].as_constant().unwrap();
                }
                return Ok(Action::Matrix(m));
            }
            Ok(Action::Powers(slots))
        };

        let mut stage_groups: BTreeMap<(usize, u32, usize), (BTreeMap<u32, &WordPoly>, Vec<(u32, usize)>)> =
            BTreeMap::new();
        for (k, p) in &spec.stage {
            let e = stage_groups.entry((k.i, k.m, k.j)).or_default();
            e.0.insert(k.q, p);
            if k.q <= options.q_max {
                e.1.push((k.q, slot(CoeffKey::Stage(*k))));
            }
        }
        let mut stage_terms: Vec<Vec<Term>> = vec![Vec::new(); spec.nu + 1];
        for ((i, m, j), (series, slots)) in stage_groups {
            if slots.is_empty() {
                continue;
            }
            stage_terms[i].push(Term { m: m as usize, j, action: build(series, slots)? });
        }
        let mut weight_groups: BTreeMap<(u32, usize), (BTreeMap<u32, &WordPoly>, Vec<(u32, usize)>)> =
            BTreeMap::new();
        for (k, p) in &spec.weights {
            let e = weight_groups.entry((k.m, k.i)).or_default();
            e.0.insert(k.q, p);
            if k.q <= options.q_max {
                e.1.push((k.q, slot(CoeffKey::Weight(*k))));
            }
        }
        let mut weight_terms = Vec::new();
        for ((m, i), (series, slots)) in weight_groups {
            if slots.is_empty() {
                continue;
            }
            weight_terms.push(Term { m: m as usize, j: i, action: build(series, slots)? });
        }

        Ok(Integrator {
            h,
            a,
            exp_h,
            stage_exp,
            stage_terms,
            weight_terms,
            keys: Arc::new(keys),
            polys,
            originals,
            table,
            options,
            problem: problem.clone(),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Fine cells per step on `path`, if the step size is a whole multiple of its cell width.
    pub fn cells_per_step(&self, path: &BrownianPath) -> Result<usize, NumError> {
        let ratio = self.h / path.dt();
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(NumError::Grid(format!("step {} is not a multiple of the cell width {}", self.h, path.dt())));
        }
        Ok(n as usize)
    }

    /// Coefficients realized on fine cells `[first, first + n_cells)`.
    pub fn coefficients(&self, path: &BrownianPath, first: usize, n_cells: usize, buf: &mut Vec<f64>) -> CoefficientEvaluation {
        self.table.sample(path, first, n_cells, self.options.group, buf);
        CoefficientEvaluation { keys: self.keys.clone(), values: self.polys.iter().map(|p| p.eval(buf)).collect() }
    }

    /// Coefficients from given values of the iterated integrals, read in the
    /// method's own interpretation.
    pub fn coefficients_from(&self, word_value: impl Fn(&Word) -> f64) -> CoefficientEvaluation {
        let values = self.originals.iter().map(|p| p.eval(self.h, &word_value)).collect();
        CoefficientEvaluation { keys: self.keys.clone(), values }
    }

    fn apply(&self, action: &Action, v: &DVector<f64>, coeffs: &CoefficientEvaluation) -> DVector<f64> {
        match action {
            Action::Matrix(m) => m * v,
            Action::Powers(slots) => {
                let mut out = DVector::zeros(v.len());
                let mut power = v.clone();
                let mut q_at = 0;
                for &(q, s) in slots {
                    while q_at < q {
                        power = &self.a * power;
                        q_at += 1;
                    }
                    out.axpy(coeffs.values[s], &power, 1.0);
                }
                out
            }
        }
    }

    /// One step from `y`.
    pub fn step(&self, y: &DVector<f64>, coeffs: &CoefficientEvaluation) -> Result<DVector<f64>, NumError> {
        let nu = self.stage_exp.len();
        let m_count = self.problem.g.len();
        let mut stages: Vec<DVector<f64>> = Vec::with_capacity(nu);
        // g values indexed by [stage][m]
        let mut g_cache: Vec<Vec<Option<DVector<f64>>>> = vec![vec![None; m_count]; nu];
        let g_at = |cache: &mut Vec<Vec<Option<DVector<f64>>>>, stages: &[DVector<f64>], m: usize, j: usize| {
            if cache[j - 1][m].is_none() {
                let v = (self.problem.g[m])(&stages[j - 1]);
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(NumError::NonFinite("vector field value"));
                }
                cache[j - 1][m] = Some(v);
            }
            Ok(cache[j - 1][m].clone().unwrap())
        };
        for i in 1..=nu {
            let mut hi = match &self.stage_exp[i - 1] {
                Some(e) => e * y,
                None => y.clone(),
            };
            for term in &self.stage_terms[i] {
                let g = g_at(&mut g_cache, &stages, term.m, term.j)?;
                hi += self.apply(&term.action, &g, coeffs);
            }
            stages.push(hi);
        }
        let mut out = &self.exp_h * y;
        for term in &self.weight_terms {
            let g = g_at(&mut g_cache, &stages, term.m, term.j)?;
            out += self.apply(&term.action, &g, coeffs);
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(NumError::NonFinite("step result"));
        }
        Ok(out)
    }

    /// `steps` steps from `x0` along `path`, starting at cell 0.
    pub fn integrate(&self, path: &BrownianPath, steps: usize) -> Result<DVector<f64>, NumError> {
        self.integrate_from(&self.problem.x0, path, steps)
    }

    pub fn integrate_from(&self, x0: &DVector<f64>, path: &BrownianPath, steps: usize) -> Result<DVector<f64>, NumError> {
        let cps = self.cells_per_step(path)?;
        if steps * cps > path.cells() {
            return Err(NumError::Grid(format!("{steps} steps need {} cells, path has {}", steps * cps, path.cells())));
        }
        if (self.problem.noises() as usize) > path.noises() && path.noises() != 0 {
            return Err(NumError::Grid("path has fewer noises than the problem".into()));
        }
        let mut y = x0.clone();
        let mut buf = Vec::new();
        for n in 0..steps {
            let coeffs = self.coefficients(path, n * cps, cps, &mut buf);
            y = self.step(&y, &coeffs)?;
        }
        Ok(y)
    }
}

/// Integrates `problem` with `spec` on the coarse steps of `grid` up to time `t_end`.
pub fn integrate(
    spec: &MethodSpec,
    problem: &SDEProblem,
    grid: &BrownianGrid<'_>,
    t_end: f64,
    options: StepOptions,
) -> Result<DVector<f64>, NumError> {
    let h = grid.h();
    let n = (t_end / h).round();
    if n < 0.0 || (t_end - n * h).abs() > 1e-9 * h.max(t_end) {
        return Err(NumError::Grid(format!("horizon {t_end} is not a multiple of the step {h}")));
    }
    let n = n as usize;
    if n > grid.steps() {
        return Err(NumError::Grid(format!("horizon needs {n} steps, grid has {}", grid.steps())));
    }
    Integrator::new(spec, problem, h, options)?.integrate(grid.path, n)
}
