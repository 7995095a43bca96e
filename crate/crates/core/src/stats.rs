//! Small statistics kit: regression, bootstrap, circular uniformity.

use rand::Rng;

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// `None` for fewer than three points or constant `x`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<LinearFit> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr: (ss_res / (nf - 2.0) / sxx).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
    })
}

/// Least squares `y = slope x`; `r_squared` compares against the mean of `y`.
pub fn fit_through_origin(pts: &[(f64, f64)]) -> Option<LinearFit> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - slope * p.0).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    Some(LinearFit {
        slope,
        intercept: 0.0,
        slope_stderr: (ss_res / (n as f64 - 1.0) / sxx).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
    })
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(v: &[f64]) -> f64 {
    let m = mean(v);
    let den: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

/// Standard deviation of `statistic` over `resamples` bootstrap draws of
/// `0..n` with replacement.
pub fn bootstrap_stderr(
    n: usize,
    resamples: usize,
    rng: &mut impl Rng,
    mut statistic: impl FnMut(&[usize]) -> f64,
) -> f64 {
    let mut idx = vec![0usize; n];
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
            statistic(&idx)
        })
        .filter(|v| v.is_finite())
        .collect();
    variance(&draws).sqrt()
}

/// Rayleigh test of circular uniformity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RayleighTest {
    /// Mean resultant length.
    pub mean_resultant: f64,
    /// `n R̄²`.
    pub z: f64,
    /// Zar's approximation to the p-value.
    pub p_value: f64,
}

pub fn rayleigh_test(angles: &[f64]) -> RayleighTest {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = (s * s + c * c).sqrt();
    let rbar = r / n;
    let z = n * rbar * rbar;
    let p = ((1.0 + 4.0 * n + 4.0 * (n * n - r * r)).sqrt() - (1.0 + 2.0 * n)).exp();
    RayleighTest {
        mean_resultant: rbar,
        z,
        p_value: p.clamp(0.0, 1.0),
    }
}
