use crate::error::Result;

/// Relative mismatch between a central difference of `objective` along
/// `direction` and the analytic directional derivative `gradient · direction`.
pub fn directional_error<F>(
    objective: F,
    gradient: &[f64],
    phi: &[f64],
    direction: &[f64],
    eps: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let shifted =
        |s: f64| -> Vec<f64> { phi.iter().zip(direction).map(|(p, d)| p + s * d).collect() };
    let fd = (objective(&shifted(eps))? - objective(&shifted(-eps))?) / (2.0 * eps);
    let exact: f64 = gradient.iter().zip(direction).map(|(g, d)| g * d).sum();
    Ok((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
}
