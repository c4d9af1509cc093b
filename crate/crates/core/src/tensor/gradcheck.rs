use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients with central finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(param index, flat coordinate)` where the maximum was observed.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Checks the tape gradient of a scalar function against central differences.
///
/// `f` receives a fresh tape and one leaf per entry of `params` and must
/// return the scalar output.
pub fn grad_check<F>(f: F, params: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::with_finite_checks(true);
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.wrt(&tape, v)).collect();

    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::with_finite_checks(true);
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item()
    };
    compare_gradients(eval, &analytic, params, eps)
}

/// Compares supplied analytic gradients against central differences of `eval`.
///
/// The relative error per coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn compare_gradients<E>(
    eval: E,
    analytic: &[Tensor<f64>],
    params: &[Tensor<f64>],
    eps: f64,
) -> Result<GradCheckReport>
where
    E: Fn(&[Tensor<f64>]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::Contract(format!(
            "{} analytic gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    for (a, p) in analytic.iter().zip(params) {
        if a.shape() != p.shape() {
            return Err(Error::dim("grad_check", a.shape(), p.shape()));
        }
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step {eps}")));
    }

    let first = eval(params)?;
    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::Contract(format!(
            "function is not deterministic: {first} then {second}"
        )));
    }

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for ci in 0..grad.len() {
            let orig = work[pi].data()[ci];
            work[pi].data_mut()[ci] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[ci] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[ci];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                report.worst = Some((pi, ci));
            }
        }
    }
    Ok(report)
}
