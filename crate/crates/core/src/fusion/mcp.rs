use crate::error::{Error, Result};

/// Minimax concave penalty `λ∫₀^norm (1 − x/(γλ))₊ dx` at a nonnegative norm.
pub fn mcp_penalty(norm: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("MCP gamma must exceed 1, got {gamma}")));
    }
    if !(lambda >= 0.0) || !(norm >= 0.0) {
        return Err(Error::InvalidParameter("MCP needs lambda >= 0 and norm >= 0".into()));
    }
    Ok(penalty(norm, lambda, gamma))
}

#[inline]
pub(crate) fn penalty(norm: f64, lambda: f64, gamma: f64) -> f64 {
    if norm < gamma * lambda {
        lambda * norm - norm * norm / (2.0 * gamma)
    } else {
        0.5 * gamma * lambda * lambda
    }
}

/// Group MCP thresholding used for the slack update: identity beyond `γλ`,
/// otherwise group soft-thresholding at `λ/θ` rescaled by `1/(1 − 1/(γθ))`.
pub fn mcp_threshold(z: &[f64], lambda: f64, gamma: f64, theta: f64) -> Result<Vec<f64>> {
    super::validate_solver(gamma, theta)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut out = z.to_vec();
    threshold_in_place(&mut out, lambda, gamma, theta);
    Ok(out)
}

#[inline]
pub(crate) fn threshold_in_place(z: &mut [f64], lambda: f64, gamma: f64, theta: f64) {
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > gamma * lambda {
        return;
    }
    let shrink = if norm > 0.0 { (1.0 - lambda / (theta * norm)).max(0.0) } else { 0.0 };
    let scale = shrink / (1.0 - 1.0 / (gamma * theta));
    z.iter_mut().for_each(|x| *x *= scale);
}
