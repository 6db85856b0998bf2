//! Finite-difference gradient verification.

use crate::error::{Error, Result};
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

/// Compare the taped gradient of a deterministic scalar function
/// against central differences, coordinate by coordinate.
///
/// Returns the worst relative error, with denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&Tape, &Tensor) -> Result<Tensor>,
{
    if !x.requires_grad() {
        return Err(Error::invalid("grad_check: probe tensor must require grad"));
    }
    x.clear_grad();

    let tape = Tape::new();
    let loss = f(&tape, x)?;
    if loss.numel() != 1 {
        return Err(Error::invalid(format!(
            "grad_check: f must be scalar-valued, got {:?}",
            loss.shape()
        )));
    }
    let base = loss.item();
    tape.backward(&loss)?;
    let analytic = x
        .grad()
        .ok_or_else(|| Error::Graph("grad_check: no gradient reached the probe".into()))?;

    let eval = |x: &Tensor| -> Result<f64> {
        let tape = Tape::no_grad();
        let out = f(&tape, x)?;
        let v = out.item();
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check probe evaluation".into()));
        }
        Ok(v)
    };
    // Determinism guard: re-evaluating at the base point must reproduce
    // the taped forward value bitwise.
    let recheck = eval(x)?;
    if recheck.to_bits() != base.to_bits() {
        return Err(Error::invalid(
            "grad_check: f is not deterministic (re-evaluation differs)",
        ));
    }

    let n = x.numel();
    let mut worst = 0.0f64;
    for i in 0..n {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = eval(x)?;
        x.data_mut()[i] = orig - h;
        let minus = eval(x)?;
        x.data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
