use super::{Tape, Tensor, VarId};
use crate::{Error, Result};

/// Compares reverse-mode gradients against central finite differences.
///
/// `build` records a scalar loss on the tape given one leaf per entry of
/// `params`. Returns the largest `|analytic - numeric| / max(1, |analytic|)`
/// over every parameter entry. `h` must lie in `[1e-7, 1e-3]`.
pub fn grad_check<F>(mut build: F, params: &[Tensor], h: f64) -> Result<f64>
where
    F: FnMut(&mut Tape, &[VarId]) -> Result<VarId>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }

    let mut eval = |values: &[Tensor]| -> Result<(f64, Tape, Vec<VarId>, VarId)> {
        let mut tape = Tape::new();
        let leaves: Vec<VarId> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &leaves)?;
        let v = tape.value(loss);
        if v.shape() != (1, 1) {
            return Err(Error::NotScalar(v.shape()));
        }
        let v = v.get(0, 0);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss {v} during grad_check")));
        }
        Ok((v, tape, leaves, loss))
    };

    let (_, tape, leaves, loss) = eval(params)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor> = params.to_vec();
    for (p, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(*leaf).expect("leaf gradient").clone();
        for k in 0..params[p].as_slice().len() {
            let orig = params[p].as_slice()[k];
            work[p].as_mut_slice()[k] = orig + h;
            let (plus, ..) = eval(&work)?;
            work[p].as_mut_slice()[k] = orig - h;
            let (minus, ..) = eval(&work)?;
            work[p].as_mut_slice()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.as_slice()[k];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite("gradient entry".into()));
            }
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
