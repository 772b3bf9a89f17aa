//! Conserved quantities, the potential functional, weighted and mixed norms.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::kernel::validate_gamma;
use crate::spectral::ops::{apply_j, density_potential, free_propagate, vector_l2_norm};
use crate::spectral::{ComplexField, HartreeKernel};
use crate::trajectory::Trajectory;

/// Exponents used by the coefficient estimates:
/// `r = 4d/(2d-γ)`, `q = 8/γ`, `α = 8/(4-γ)`, `θ = γ/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzExponents {
    pub gamma: f64,
    pub d: usize,
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl StrichartzExponents {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        if d != 1 && d != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {d}")));
        }
        let df = d as f64;
        Ok(StrichartzExponents {
            gamma,
            d,
            r: 4.0 * df / (2.0 * df - gamma),
            q: 8.0 / gamma,
            alpha: 8.0 / (4.0 - gamma),
            theta: gamma / 4.0,
        })
    }

    /// `2/q + d/r - d/2`, zero for an admissible pair.
    pub fn admissibility_residual(&self) -> f64 {
        let d = self.d as f64;
        2.0 / self.q + d / self.r - d / 2.0
    }

    /// `1/q' - 1/q - 2/α`.
    pub fn holder_residual(&self) -> f64 {
        (1.0 - 1.0 / self.q) - 1.0 / self.q - 2.0 / self.alpha
    }

    /// Decay exponent `d(r-2)/(2r)` of the `L^r` norm along the free flow.
    pub fn theta_from_r(&self) -> f64 {
        let d = self.d as f64;
        d * (self.r - 2.0) / (2.0 * self.r)
    }

    /// Power `2γ/(4-γ)` of the tail integrand governing profile convergence.
    pub fn tail_power(&self) -> f64 {
        2.0 * self.gamma / (4.0 - self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub value: f64,
    pub t: f64,
}

/// Named norms and functionals, each with the time it was evaluated at.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormLedger {
    entries: BTreeMap<String, NormEntry>,
}

impl NormLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, value: f64, t: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ledger entry {key} must be finite and nonnegative, got {value}"
            )));
        }
        self.entries.insert(key.to_string(), NormEntry { value, t });
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).map(|e| e.value)
    }

    pub fn entries(&self) -> &BTreeMap<String, NormEntry> {
        &self.entries
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `∫|u|² dx`.
pub fn mass(u: &ComplexField) -> f64 {
    u.l2_norm().powi(2)
}

/// `‖∇u‖₂²`, computed from the spectrum.
pub fn kinetic(u: &ComplexField) -> f64 {
    let hat = u.to_frequency();
    let s: f64 = hat
        .values()
        .iter()
        .zip(u.grid().k2())
        .map(|(z, k2)| k2 * z.norm_sqr())
        .sum();
    s * u.grid().cell_volume()
}

/// `‖x u‖₂`.
pub fn moment_norm(u: &ComplexField) -> f64 {
    let u = u.to_position();
    let g = u.grid();
    let s: f64 = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| g.radius2(i) * z.norm_sqr())
        .sum();
    (s * g.cell_volume()).sqrt()
}

/// `Q(u) = ¼ ∫ (|x|^-γ * |u|²) |u|²`.
pub fn potential_q(u: &ComplexField, kernel: &HartreeKernel) -> f64 {
    let u = u.to_position();
    let v = density_potential(&u, kernel);
    let s: f64 = v.iter().zip(u.values()).map(|(p, z)| p * z.norm_sqr()).sum();
    0.25 * s * u.grid().cell_volume()
}

/// `E(u) = ½‖∇u‖₂² + Q(u)`.
pub fn energy(u: &ComplexField, kernel: &HartreeKernel) -> f64 {
    0.5 * kinetic(u) + potential_q(u, kernel)
}

/// L², gradient, moment, H¹, FH¹ and Σ norms. `Sigma = H1 + moment`.
pub fn weighted_norms(u: &ComplexField) -> NormLedger {
    weighted_norms_at(u, 0.0)
}

pub fn weighted_norms_at(u: &ComplexField, t: f64) -> NormLedger {
    let l2 = u.l2_norm();
    let grad = kinetic(u).sqrt();
    let moment = moment_norm(u);
    let h1 = (l2 * l2 + grad * grad).sqrt();
    let fh1 = (l2 * l2 + moment * moment).sqrt();
    let mut ledger = NormLedger::new();
    for (key, value) in [
        ("mass", l2 * l2),
        ("L2", l2),
        ("grad", grad),
        ("moment", moment),
        ("H1", h1),
        ("FH1", fh1),
        ("Sigma", h1 + moment),
    ] {
        ledger.insert(key, value, t).expect("norms are finite and nonnegative");
    }
    ledger
}

/// `‖u‖_Σ = ‖u‖_{H¹} + ‖xu‖₂`.
pub fn sigma_norm(u: &ComplexField) -> f64 {
    weighted_norms(u).get("Sigma").unwrap_or(0.0)
}

/// Pointwise-Euclidean `L^r` norm of a vector of fields.
pub fn vector_lr_norm(components: &[ComplexField], r: f64) -> f64 {
    let first = &components[0];
    let n = first.len();
    let pos: Vec<ComplexField> = components.iter().map(|c| c.to_position()).collect();
    let modulus = (0..n).map(|i| pos.iter().map(|c| c.values()[i].norm_sqr()).sum::<f64>().sqrt());
    if r.is_infinite() {
        return modulus.fold(0.0, f64::max);
    }
    let s: f64 = modulus.map(|m| m.powf(r)).sum();
    (s * first.grid().cell_volume()).powf(1.0 / r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayRow {
    pub t: f64,
    pub lr_norm: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub theta: f64,
    pub rows: Vec<DecayRow>,
    /// Largest observed ratio: the fitted constant of the decay bound.
    pub constant: f64,
    /// Log-log slope of the `L^r` norm between the last two times.
    pub tail_slope: f64,
}

/// Compares `‖e^{itΔ}φ‖_r` with `t^-θ ‖φ‖₂^{1-θ} ‖J(t)e^{itΔ}φ‖₂^θ`.
pub fn decay_check(phi: &ComplexField, times: &[f64], exps: &StrichartzExponents) -> Result<DecayReport> {
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("decay check requires t > 0".into()));
    }
    let theta = exps.theta;
    let l2 = phi.l2_norm();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let u = free_propagate(phi, t);
        let lr = u.lp_norm(exps.r);
        let j = vector_l2_norm(&apply_j(&u, t));
        let bound = t.powf(-theta) * l2.powf(1.0 - theta) * j.powf(theta);
        let ratio = if bound > 0.0 { lr / bound } else { 0.0 };
        rows.push(DecayRow {
            t,
            lr_norm: lr,
            bound,
            ratio,
        });
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let tail_slope = match rows.as_slice() {
        [.., a, b] if a.lr_norm > 0.0 && b.lr_norm > 0.0 => (b.lr_norm / a.lr_norm).ln() / (b.t / a.t).ln(),
        _ => 0.0,
    };
    Ok(DecayReport {
        theta,
        rows,
        constant,
        tail_slope,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpacetimeNorm {
    pub value: f64,
    /// Richardson-extrapolated value, when the time grid is uniform with an even number of intervals.
    pub richardson: Option<f64>,
}

/// Composite trapezoid in `t` of `‖u(t)‖_r^q`, raised to `1/q`. `q = ∞` takes the
/// maximum over stored samples, a lower bound of the true supremum.
pub fn spacetime_norm(traj: &Trajectory, q: f64, r: f64) -> Result<SpacetimeNorm> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let norms: Vec<f64> = traj.fields().iter().map(|f| f.to_position().lp_norm(r)).collect();
    Ok(spacetime_from_samples(traj.times(), &norms, q))
}

/// Same quadrature as [`spacetime_norm`] from precomputed spatial norms.
pub fn spacetime_from_samples(times: &[f64], norms: &[f64], q: f64) -> SpacetimeNorm {
    if q.is_infinite() {
        return SpacetimeNorm {
            value: norms.iter().copied().fold(0.0, f64::max),
            richardson: None,
        };
    }
    let f: Vec<f64> = norms.iter().map(|n| n.powf(q)).collect();
    let fine = trapezoid(times, &f);
    let intervals = times.len().saturating_sub(1);
    let uniform = intervals >= 2 && {
        let h = times[1] - times[0];
        times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
    };
    let richardson = (uniform && intervals % 2 == 0).then(|| {
        let t2: Vec<f64> = times.iter().step_by(2).copied().collect();
        let f2: Vec<f64> = f.iter().step_by(2).copied().collect();
        let coarse = trapezoid(&t2, &f2);
        (fine + (fine - coarse) / 3.0).max(0.0).powf(1.0 / q)
    });
    SpacetimeNorm {
        value: fine.powf(1.0 / q),
        richardson,
    }
}

/// Composite trapezoid rule; the sign follows the orientation of `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]).abs() * 0.5 * (v[0] + v[1]))
        .sum()
}

/// `‖f‖_{L∞L²} + ‖f‖_{L^q L^r}` over the trajectory.
pub fn y_norm(traj: &Trajectory, exps: &StrichartzExponents) -> Result<f64> {
    Ok(spacetime_norm(traj, f64::INFINITY, 2.0)?.value + spacetime_norm(traj, exps.q, exps.r)?.value)
}

/// `Y(f) + Y(J f) + Y(∇f)` with vector-valued pieces measured pointwise in the Euclidean norm.
pub fn x_norm(traj: &Trajectory, exps: &StrichartzExponents) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let times = traj.times();
    let mut base = (Vec::new(), Vec::new());
    let mut jv = (Vec::new(), Vec::new());
    let mut grad = (Vec::new(), Vec::new());
    for (t, f) in times.iter().zip(traj.fields()) {
        let f = f.to_position();
        base.0.push(f.l2_norm());
        base.1.push(f.lp_norm(exps.r));
        let j = apply_j(&f, *t);
        jv.0.push(vector_l2_norm(&j));
        jv.1.push(vector_lr_norm(&j, exps.r));
        let g = crate::spectral::gradient(&f);
        grad.0.push(vector_l2_norm(&g));
        grad.1.push(vector_lr_norm(&g, exps.r));
    }
    let y = |pair: &(Vec<f64>, Vec<f64>)| {
        spacetime_from_samples(times, &pair.0, f64::INFINITY).value + spacetime_from_samples(times, &pair.1, exps.q).value
    };
    Ok(y(&base) + y(&jv) + y(&grad))
}

/// `(t, value)` rows with a header line.
pub fn write_time_series<W: Write>(mut w: W, rows: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "t,value")?;
    for (t, v) in rows {
        writeln!(w, "{t:.17e},{v:.17e}")?;
    }
    Ok(())
}

/// `Re <a, b>` helper used by several identities.
pub fn real_inner(a: &ComplexField, b: &ComplexField) -> f64 {
    let z: Complex64 = a.inner(b);
    z.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn gaussian_mass_is_sqrt_pi() {
        let g = Grid::new(1, 512, 16.0).unwrap();
        let u = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        assert!((mass(&u) - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_moment_equals_gradient() {
        let g = Grid::new(1, 512, 16.0).unwrap();
        let u = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let n = weighted_norms(&u);
        let (m, d) = (n.get("moment").unwrap(), n.get("grad").unwrap());
        assert!((m - d).abs() < 1e-10 * m);
    }

    #[test]
    fn zero_field_norms_vanish() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let n = weighted_norms(&ComplexField::zeros(&g));
        assert!(n.entries().values().all(|e| e.value == 0.0));
    }

    #[test]
    fn ledger_rejects_negative() {
        let mut l = NormLedger::new();
        assert!(l.insert("L2", -1.0, 0.0).is_err());
        assert!(l.insert("L2", f64::NAN, 0.0).is_err());
        l.insert("L2", 1.0, 0.5).unwrap();
        let json = l.to_json().unwrap();
        assert!(json.contains("\"L2\""));
    }

    #[test]
    fn exponents_at_three_halves() {
        let e = StrichartzExponents::new(2, 1.5).unwrap();
        assert!((e.r - 3.2).abs() < 1e-14);
        assert!((e.q - 16.0 / 3.0).abs() < 1e-14);
        assert!((e.theta - 0.375).abs() < 1e-14);
        assert!((e.tail_power() - 1.2).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_of_linear_function_is_exact() {
        let t = [0.0, 0.5, 1.0, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 8.0).abs() < 1e-14);
    }
}
