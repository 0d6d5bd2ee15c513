//! Closed forms for genealogy statistics.

use crate::error::{Error, Result};
use crate::model::Model;

fn check_order(model: &Model, r: usize, n: usize) -> Result<()> {
    if r >= n {
        return Err(Error::OutOfRange(format!("need r < n, got r={r}, n={n}")));
    }
    if n > model.horizon() {
        return Err(Error::OutOfRange(format!(
            "generation {n} beyond horizon {}",
            model.horizon()
        )));
    }
    Ok(())
}

/// Expected number of times `X_{r,j}` is chosen as mother at steps
/// `r+1, ..., n`: `w_{r,j} sum_{m=r}^{n-1} 1/W_m`.
pub fn mother_count_expectation(model: &Model, r: usize, j: usize, n: usize) -> Result<f64> {
    check_order(model, r, n)?;
    let ln_w = model.ln_point_weight(r, j)?;
    if ln_w == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let series = model.series();
    Ok((r..n).map(|m| (ln_w - series.ln_big_w(m)).exp()).sum())
}

/// Probability that `X_{r,i}` is an ancestor of any fixed point of a later
/// generation: `w_{r,i} / W_r`.
pub fn ancestor_probability(model: &Model, r: usize, i: usize) -> Result<f64> {
    let ln_w = model.ln_point_weight(r, i)?;
    Ok((ln_w - model.series().ln_big_w(r)).exp())
}

/// Mean number of generation-`n` points with an ancestor in generation `r`:
/// `k_n pi_r`.
pub fn ancestry_mean(model: &Model, r: usize, n: usize) -> Result<f64> {
    check_order(model, r, n)?;
    Ok(model.k(n)? as f64 * model.series().pi(r))
}
