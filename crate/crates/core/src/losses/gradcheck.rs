use crate::error::{Error, Result};

/// Magnitudes below this are compared absolutely rather than relatively.
const MAGNITUDE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compare the analytic gradient of `loss_fn` at `point` with central finite
/// differences of step `h`.
///
/// `loss_fn` returns the loss and its gradient. The error per coordinate is
/// `|a - n| / max(|a|, |n|, 1e-4)`; the report carries the worst one.
pub fn grad_check<F>(loss_fn: F, point: &[f64], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::invalid("finite-difference step must be > 0"));
    }
    let (value, analytic) = loss_fn(point);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("loss is {value} at the check point")));
    }
    if analytic.len() != point.len() {
        return Err(Error::invalid(format!(
            "gradient has {} entries for a {}-dimensional point",
            analytic.len(),
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = loss_fn(&x).0;
        x[i] = orig - h;
        let down = loss_fn(&x).0;
        x[i] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss perturbing coordinate {i}")));
        }
        numeric.push((up - down) / (2.0 * h));
    }
    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(MAGNITUDE_FLOOR))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradCheckReport {
        max_rel_error,
        worst_index,
        analytic,
        numeric,
    })
}
