use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Lower bound on the relative-error denominator, so gradients that are
    /// zero on both sides compare as equal.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-6,
        }
    }
}

impl GradCheckConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct InputReport {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.inputs.iter().all(|r| r.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.inputs.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InputReport> {
        self.inputs.iter().filter(|r| !r.passed)
    }
}

/// Compares reverse-mode gradients of the scalar function `f` against
/// central differences, input by input.
///
/// `f` receives the inputs as tape variables in the order given. It must be
/// deterministic. The analytic pass can be routed through a tape with a
/// corrupted backward rule via `corrupt`, which exists only to prove the
/// check has teeth.
pub fn grad_check<F>(f: F, inputs: &[(String, Tensor)], cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    grad_check_with(f, inputs, cfg, false)
}

#[doc(hidden)]
pub fn grad_check_with<F>(
    f: F,
    inputs: &[(String, Tensor)],
    cfg: GradCheckConfig,
    corrupt: bool,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        tape.corrupt_backward(corrupt);
        let vars: Vec<Var<'_>> = inputs.iter().map(|(_, t)| tape.param(t.clone())).collect();
        let out = f(&tape, &vars)?;
        if out.shape().iter().product::<usize>() != 1 {
            return Err(Error::Contract("grad_check needs a scalar-valued function".into()));
        }
        let grads = tape.backward(out)?;
        vars.iter().map(|v| grads.wrt(*v)).collect()
    };

    let eval = |values: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = values.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let mut work: Vec<Tensor> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let mut reports = Vec::with_capacity(inputs.len());
    for (i, (name, _)) in inputs.iter().enumerate() {
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for j in 0..work[i].numel() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + cfg.step;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - cfg.step;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let exact = analytic[i].data()[j];
            let abs = (numeric - exact).abs();
            let rel = abs / numeric.abs().max(exact.abs()).max(cfg.floor);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        reports.push(InputReport {
            name: name.clone(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            passed: max_rel <= cfg.tol,
        });
    }
    Ok(GradCheckReport {
        inputs: reports,
        tol: cfg.tol,
    })
}
