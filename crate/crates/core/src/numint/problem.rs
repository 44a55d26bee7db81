use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::NumError;
use crate::stochalg::Interp;

/// `g_m : ℝ^d → ℝ^d`.
pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// `(t, W(t) per noise, x0) ↦ X(t)`.
pub type ExactSolution = Arc<dyn Fn(f64, &[f64], &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// `dX = (AX + g_0(X)) dt + Σ_m g_m(X) ⋆ dW_m`.
#[derive(Clone)]
pub struct SDEProblem {
    pub name: String,
    pub a: DMatrix<f64>,
    /// `g[0]` is the drift nonlinearity, `g[m]` the diffusion of noise `m`.
    pub g: Vec<VectorField>,
    pub interp: Interp,
    pub x0: DVector<f64>,
    pub exact: Option<ExactSolution>,
}

impl SDEProblem {
    pub fn new(
        name: &str,
        a: DMatrix<f64>,
        g: Vec<VectorField>,
        interp: Interp,
        x0: DVector<f64>,
    ) -> Result<Self, NumError> {
        let d = x0.len();
        if d == 0 {
            return Err(NumError::Dimension("dimension must be at least 1".into()));
        }
        if a.nrows() != d || a.ncols() != d {
            return Err(NumError::Dimension(format!("A is {}x{} but x0 has length {d}", a.nrows(), a.ncols())));
        }
        if g.is_empty() {
            return Err(NumError::Dimension("g_0 is required".into()));
        }
        Ok(SDEProblem { name: name.to_string(), a, g, interp, x0, exact: None })
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn noises(&self) -> u32 {
        (self.g.len() - 1) as u32
    }

    pub fn exact_at(&self, t: f64, w: &[f64]) -> Option<DVector<f64>> {
        self.exact.as_ref().map(|f| f(t, w, &self.x0))
    }
}

impl fmt::Debug for SDEProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SDEProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("noises", &self.noises())
            .field("interp", &self.interp)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}
