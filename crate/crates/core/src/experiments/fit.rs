//! Least-squares power-law fits in log-log coordinates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `value ∝ ε^a`.
    EpsPower,
    /// `value ∝ σ^b`.
    SigmaPower,
    /// `value ∝ ε^a σ^b`.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub eps: f64,
    pub sigma: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub model: FitModel,
    /// One exponent per regressor: `[a]`, `[b]` or `[a, b]`.
    pub exponents: Vec<f64>,
    /// Log of the prefactor.
    pub intercept: f64,
    /// Root-mean-square residual of the log values.
    pub residual: f64,
    /// 95% confidence half-widths of the exponents from the residual spread.
    pub half_width: Vec<f64>,
    pub points: usize,
}

impl FitReport {
    pub fn slope(&self) -> f64 {
        *self.exponents.last().expect("at least one exponent")
    }
}

/// Straight-line fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub half_width: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let rows: Vec<Vec<f64>> = x.iter().map(|xi| vec![1.0, *xi]).collect();
    let (beta, residual, se) = least_squares(&rows, y)?;
    let half = confidence(y.len(), 2, se[1]);
    Ok(LineFit {
        slope: beta[1],
        intercept: beta[0],
        residual,
        half_width: half,
    })
}

pub fn fit_exponents(measurements: &[Measurement], model: FitModel) -> Result<FitReport> {
    if measurements.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "exponent fits need at least 3 points, got {}",
            measurements.len()
        )));
    }
    for (i, m) in measurements.iter().enumerate() {
        for value in [m.value, m.eps, m.sigma] {
            if !(value > 0.0) {
                return Err(Error::NonPositive { index: i, value });
            }
        }
    }
    let y: Vec<f64> = measurements.iter().map(|m| m.value.ln()).collect();
    let rows: Vec<Vec<f64>> = measurements
        .iter()
        .map(|m| match model {
            FitModel::EpsPower => vec![1.0, m.eps.ln()],
            FitModel::SigmaPower => vec![1.0, m.sigma.ln()],
            FitModel::Joint => vec![1.0, m.eps.ln(), m.sigma.ln()],
        })
        .collect();
    let (beta, residual, se) = least_squares(&rows, &y)?;
    let p = beta.len();
    Ok(FitReport {
        model,
        exponents: beta[1..].to_vec(),
        intercept: beta[0],
        residual,
        half_width: se[1..].iter().map(|s| confidence(y.len(), p, *s)).collect(),
        points: y.len(),
    })
}

fn confidence(n: usize, p: usize, se: f64) -> f64 {
    if n <= p {
        return f64::INFINITY;
    }
    let t = StudentsT::new(0.0, 1.0, (n - p) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    t * se
}

/// Ordinary least squares through the normal equations. Returns the
/// coefficients, the RMS residual and the coefficient standard errors.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..p {
            b[i] += r[i] * yi;
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    let inv = invert(&a).ok_or_else(|| Error::InvalidParameter("regressors are degenerate".into()))?;
    let beta: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i][j] * b[j]).sum()).collect();
    let sse: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| {
            let fit: f64 = r.iter().zip(&beta).map(|(x, c)| x * c).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let n = y.len();
    let residual = (sse / n as f64).sqrt();
    let s2 = if n > p { sse / (n - p) as f64 } else { 0.0 };
    let se = (0..p).map(|i| (s2 * inv[i][i]).max(0.0).sqrt()).collect();
    Ok((beta, residual, se))
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let p = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot);
        let d = m[col][col];
        m[col].iter_mut().for_each(|x| *x /= d);
        for r in 0..p {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * p {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[p..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_series(f: impl Fn(f64) -> f64) -> Vec<Measurement> {
        [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&sigma| Measurement {
                eps: 1.0,
                sigma,
                value: f(sigma),
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let r = fit_exponents(&sigma_series(|s| 3.0 * s.powf(0.5)), FitModel::SigmaPower).unwrap();
        assert!((r.slope() - 0.5).abs() < 1e-12);
        assert!(r.residual < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let r = fit_exponents(&sigma_series(|_| 2.0), FitModel::SigmaPower).unwrap();
        assert!(r.slope().abs() < 1e-12);
    }

    #[test]
    fn joint_fit_separates_exponents() {
        let mut pts = Vec::new();
        for eps in [0.01, 0.02, 0.04] {
            for sigma in [2.0, 4.0, 8.0] {
                pts.push(Measurement {
                    eps,
                    sigma,
                    value: eps.powi(4) * sigma.powf(0.25),
                });
            }
        }
        let r = fit_exponents(&pts, FitModel::Joint).unwrap();
        assert!((r.exponents[0] - 4.0).abs() < 1e-10);
        assert!((r.exponents[1] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let mut pts = sigma_series(|s| s);
        pts[1].value = 0.0;
        assert!(matches!(
            fit_exponents(&pts, FitModel::SigmaPower),
            Err(Error::NonPositive { index: 1, .. })
        ));
        assert!(fit_exponents(&pts[..2], FitModel::SigmaPower).is_err());
        let same: Vec<Measurement> = (0..3)
            .map(|_| Measurement {
                eps: 1.0,
                sigma: 2.0,
                value: 1.0,
            })
            .collect();
        assert!(fit_exponents(&same, FitModel::SigmaPower).is_err());
    }
}
