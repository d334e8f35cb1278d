use super::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so coordinates whose true gradient
/// is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Outcome of a central-difference gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name, flat coordinate, analytic and numeric derivative of the
    /// worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Compares `analytic` against `(f(θ+ε) − f(θ−ε)) / 2ε` for every coordinate
/// of every parameter in `params` (all parameters when `None`).
///
/// `f` must be a pure function of the store: dropout and any other randomness
/// must be frozen by the caller. A second evaluation at the unperturbed point
/// must reproduce the first bit for bit, otherwise the check fails with
/// [`Error::NonDeterministic`].
pub fn finite_difference_check<F>(
    store: &ParamStore,
    analytic: &Gradients,
    params: Option<&[ParamId]>,
    eps: f64,
    tolerance: f64,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let first = f(store)?;
    let second = f(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let ids: Vec<ParamId> = match params {
        Some(p) => p.to_vec(),
        None => store.ids().collect(),
    };
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        tolerance,
    };
    for id in ids {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + eps;
            let plus = f(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig - eps;
            let minus = f(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = analytic.get(id).data()[k];
            let err = relative_error(exact, numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.name(id).to_string(), k, exact, numeric));
            }
        }
    }
    Ok(report)
}
