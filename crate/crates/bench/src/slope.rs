//! Least-squares slopes on log-log data.

use crate::BenchError;

/// Largest admissible RMS residual, in decades.
pub const MAX_RESIDUAL: f64 = 0.5;

/// Ordinary least-squares slope of `log y` against `log x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64, BenchError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if logs.len() < 2 || logs.len() < points.len() {
        return Err(BenchError::TooFewPoints(logs.len()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(BenchError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let rms = (logs
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if rms > MAX_RESIDUAL {
        return Err(BenchError::NoisyData(rms));
    }
    Ok(slope)
}

/// Points in the asymptotic window: `x <= cutoff` and `y > noise_floor`.
pub fn asymptotic_window(points: &[(f64, f64)], noise_floor: f64, cutoff: f64) -> Vec<(f64, f64)> {
    points
        .iter()
        .copied()
        .filter(|&(x, y)| x <= cutoff && y > noise_floor)
        .collect()
}

/// [`fit_slope`] on the asymptotic window.
pub fn windowed_slope(points: &[(f64, f64)], noise_floor: f64, cutoff: f64) -> Result<f64, BenchError> {
    fit_slope(&asymptotic_window(points, noise_floor, cutoff))
}
