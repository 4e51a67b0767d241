use crate::{Error, Result};

/// Two-sided 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue.
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// (R_ach, R_up): mean log2(1 + γ) and the same scaled by 1 − τ/Tc.
pub fn achievable_rate(sinr: &[f64], pilot_len: usize, coherence_len: usize) -> Result<(f64, f64)> {
    if sinr.is_empty() {
        return Err(Error::domain("achievable rate of an empty sample"));
    }
    if pilot_len > coherence_len || coherence_len == 0 {
        return Err(Error::domain(format!(
            "pilot length {pilot_len} exceeds coherence length {coherence_len}"
        )));
    }
    let ach = sinr.iter().map(|g| (1.0 + g).log2()).sum::<f64>() / sinr.len() as f64;
    Ok((ach, (1.0 - pilot_len as f64 / coherence_len as f64) * ach))
}

/// Step CDF evaluated at the sorted sample points; ties collapse to the
/// highest probability.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::domain("CDF of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}
