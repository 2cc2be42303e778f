use crate::error::{domain, Result};

/// `log sum exp(v_i)`, shifted by the maximum so nothing overflows.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    let max = max_of(values)?;
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log((1/n) sum exp(v_i))`.
///
/// The `log n` correction is applied to the shifted sum before the maximum is
/// added back, so `n` equal inputs return that input bit-for-bit.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    let max = max_of(values)?;
    if !max.is_finite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + (sum.ln() - (values.len() as f64).ln()))
}

/// Sample mean and the standard error of that mean (`s / sqrt(n)`).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn max_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("logsumexp of an empty vector"));
    }
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_values() {
        assert!((logsumexp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(logsumexp(&[1000.0, 1000.0]).unwrap(), 1000.0 + 2f64.ln());
        assert_eq!(logsumexp(&[-3.25]).unwrap(), -3.25);
        assert!(logsumexp(&[]).is_err());
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_mean_exp_of_equal_values_is_exact() {
        for n in 1..50 {
            let v = vec![-17.123456789; n];
            assert_eq!(log_mean_exp(&v).unwrap(), -17.123456789);
        }
    }

    proptest! {
        #[test]
        fn shift_invariance(v in prop::collection::vec(-400.0f64..400.0, 1..20), c in -300.0f64..300.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = logsumexp(&shifted).unwrap();
            let b = logsumexp(&v).unwrap() + c;
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
