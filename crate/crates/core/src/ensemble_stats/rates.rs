use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub r_values: Vec<f64>,
    pub distances: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Least squares of log(distance) on log(R).
pub fn rate_fit(ladder: &[(f64, f64)]) -> Result<RateFit> {
    if ladder.len() < 3 {
        return domain(format!("rate fit needs at least 3 ladder points, got {}", ladder.len()));
    }
    if let Some(&(r, d)) = ladder.iter().find(|(r, d)| !(*d > 0.0) || !(*r > 0.0)) {
        return domain(format!("rate fit needs positive R and distance, got ({r}, {d})"));
    }
    let xs: Vec<f64> = ladder.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = ladder.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        r_values: ladder.iter().map(|p| p.0).collect(),
        distances: ladder.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        slope_stderr,
    })
}
