use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope (0 for two points or an exact fit).
    pub stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<Fit> {
    if x.len() != y.len() {
        return Err(invalid("fit", "x and y differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("fit", "non-finite data"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(Fit {
        slope,
        intercept,
        r2,
        stderr,
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Difference of means of `a` and `b` in units of the Welch standard error
/// `sqrt(s_a^2 / n_a + s_b^2 / n_b)`. Infinite when both samples are constant
/// and differ.
pub fn welch_separation(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, sa) = mean_std(a)?;
    let (mb, sb) = mean_std(b)?;
    let se = (sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt();
    let diff = ma - mb;
    Some(if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 1.25, 1.5, 2.0];
        let y: Vec<f64> = x.iter().map(|a| 3.7 * a - 0.4).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.7).abs() < 1e-12);
        assert!((f.intercept + 0.4).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn noisy_fit_statistics() {
        // hand computation: x = 0,1,2,3; y = 0,2,1,3
        let f = linear_fit(&[0.0, 1.0, 2.0, 3.0], &[0.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-12);
        assert!((f.intercept - 0.3).abs() < 1e-12);
        // sse = 1.8, syy = 5
        assert!((f.r2 - 0.64).abs() < 1e-12);
        assert!((f.stderr - (0.9f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn welch() {
        assert_eq!(mean_std(&[2.0, 4.0]), Some((3.0, 2f64.sqrt())));
        let s = welch_separation(&[2.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
        assert_eq!(welch_separation(&[1.0], &[1.0]), Some(0.0));
        assert!(welch_separation(&[], &[1.0]).is_none());
    }
}
