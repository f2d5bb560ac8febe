//! Finite-difference checks of tape gradients.

use super::{Tape, Var};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Step used by [`gradcheck`] for central differences.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Largest discrepancy found by [`gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    /// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-3)`, maximized over entries.
    pub max_rel_error: f64,
    /// `(input, entry)` where the maximum occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step `h`.
///
/// `f` records the function on a fresh tape given one parameter per input
/// and must return a `1 × 1` value. It is called `1 + 2·Σ|input|` times, so
/// any randomness inside it has to be fixed (e.g. a precomputed dropout mask).
pub fn gradcheck<F>(inputs: &[Matrix], h: f64, f: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.parameter(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out);
        if v.shape() != (1, 1) {
            return Err(Error::input("gradcheck function must return a scalar"));
        }
        Ok(v.item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.parameter(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = inputs.to_vec();
    for (k, &var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(var, &tape);
        for e in 0..inputs[k].len() {
            let orig = inputs[k].data()[e];
            probe[k].data_mut()[e] = orig + h;
            let up = eval(&probe)?;
            probe[k].data_mut()[e] = orig - h;
            let down = eval(&probe)?;
            probe[k].data_mut()[e] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            if rel > report.max_rel_error || rel.is_nan() {
                report = GradcheckReport {
                    max_rel_error: rel,
                    worst: (k, e),
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}
