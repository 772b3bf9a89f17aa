use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Position,
    Frequency,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples of a function on a periodic [`Grid`].
///
/// In the position representation the L² inner product carries the volume
/// element `dx^d`; the frequency representation holds unitary DFT
/// coefficients, so `l2_norm` agrees between the two up to the grid scale.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    repr: Representation,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            repr: Representation::Position,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>, repr: Representation) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
            repr,
        })
    }

    /// Samples `f(x)` at every grid point (position representation).
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        ComplexField {
            grid: grid.clone(),
            values,
            repr: Representation::Position,
        }
    }

    /// `amplitude * exp(-|x - center|^2 / (2 width^2))` modulated by `exp(i k . x)`.
    pub fn gaussian(grid: &Grid, amplitude: f64, width: f64, center: [f64; 2], momentum: [f64; 2]) -> Self {
        Self::from_fn(grid, |p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            let env = amplitude * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
            Complex64::from_polar(env, momentum[0] * p[0] + momentum[1] * p[1])
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::Representation {
                expected: repr.name(),
                found: self.repr.name(),
            })
        }
    }

    /// Unitary discrete Fourier transform; the representation must match the direction.
    pub fn transform(&self, direction: Direction) -> Result<ComplexField> {
        let mut out = self.clone();
        out.transform_in_place(direction)?;
        Ok(out)
    }

    pub fn transform_in_place(&mut self, direction: Direction) -> Result<()> {
        let (from, to, inverse) = match direction {
            Direction::Forward => (Representation::Position, Representation::Frequency, false),
            Direction::Inverse => (Representation::Frequency, Representation::Position, true),
        };
        self.expect(from)?;
        self.grid.fft_in_place(&mut self.values, inverse);
        self.repr = to;
        Ok(())
    }

    pub fn to_position(&self) -> ComplexField {
        match self.repr {
            Representation::Position => self.clone(),
            Representation::Frequency => self.transform(Direction::Inverse).expect("matching representation"),
        }
    }

    pub fn to_frequency(&self) -> ComplexField {
        match self.repr {
            Representation::Frequency => self.clone(),
            Representation::Position => self.transform(Direction::Forward).expect("matching representation"),
        }
    }

    /// Plain `l2` norm of the stored samples (no volume element).
    pub fn sample_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Continuum L² norm `(sum |u|^2 dx^d)^(1/2)`, valid in either representation.
    pub fn l2_norm(&self) -> f64 {
        self.sample_norm() * self.grid.cell_volume().sqrt()
    }

    /// Continuum L^r norm in the position representation; `r = inf` gives the sup norm.
    pub fn lp_norm(&self, r: f64) -> f64 {
        debug_assert_eq!(self.repr, Representation::Position);
        if r.is_infinite() {
            return self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        let sum: f64 = self.values.iter().map(|z| z.norm().powf(r)).sum();
        (sum * self.grid.cell_volume()).powf(1.0 / r)
    }

    /// Continuum inner product `<self, other> = sum self * conj(other) dx^d`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn scale(&self, c: Complex64) -> ComplexField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|z| *z *= c);
        out
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: Complex64, other: &ComplexField) {
        debug_assert_eq!(self.repr, other.repr);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &ComplexField) -> ComplexField {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &ComplexField) -> ComplexField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// L² distance, transforming `other` into this field's representation if needed.
    pub fn distance(&self, other: &ComplexField) -> f64 {
        let other = match (self.repr, other.repr) {
            (a, b) if a == b => std::borrow::Cow::Borrowed(other),
            (Representation::Position, _) => std::borrow::Cow::Owned(other.to_position()),
            _ => std::borrow::Cow::Owned(other.to_frequency()),
        };
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Pointwise product (position representation).
    pub fn mul_pointwise(&self, other: &ComplexField) -> ComplexField {
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a *= b;
        }
        out
    }

    /// Fraction of the mass lying outside the centered ball of radius `radius`.
    pub fn mass_fraction_outside(&self, radius: f64) -> f64 {
        debug_assert_eq!(self.repr, Representation::Position);
        let r2 = radius * radius;
        let mut total = 0.0;
        let mut outside = 0.0;
        for (i, z) in self.values.iter().enumerate() {
            let m = z.norm_sqr();
            total += m;
            if self.grid.radius2(i) > r2 {
                outside += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }

    /// Smallest radius (resolved to the grid) outside which at most `fraction` of the mass lies.
    pub fn mass_radius(&self, fraction: f64) -> f64 {
        debug_assert_eq!(self.repr, Representation::Position);
        let mut shells: Vec<(f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| (self.grid.radius2(i), z.norm_sqr()))
            .collect();
        let total: f64 = shells.iter().map(|s| s.1).sum();
        if total == 0.0 {
            return 0.0;
        }
        shells.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut outside = 0.0;
        for (r2, m) in shells {
            if (outside + m) / total > fraction {
                return r2.sqrt();
            }
            outside += m;
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let hat = f.transform(Direction::Forward).unwrap();
        assert!((hat.values()[0] - Complex64::new(4.0, 0.0)).norm() < 1e-14);
        for z in &hat.values()[1..] {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn transform_rejects_wrong_representation() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let f = ComplexField::zeros(&g);
        assert!(f.transform(Direction::Inverse).is_err());
        let hat = f.transform(Direction::Forward).unwrap();
        assert!(hat.transform(Direction::Forward).is_err());
    }

    #[test]
    fn gaussian_spectrum_matches_analytic_transform() {
        // Continuum transform of exp(-x^2/2) is sqrt(2 pi) exp(-xi^2/2); the unitary DFT
        // coefficient relates to it by (-1)^k / (dx sqrt(n)) from the grid offset -L.
        let g = Grid::new(1, 256, 16.0).unwrap();
        let f = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let hat = f.to_frequency();
        let scale = g.dx() * (g.n() as f64).sqrt();
        for (k, z) in hat.values().iter().enumerate() {
            let xi = g.wavenumbers()[k];
            let sign = if g.signed_index(k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let expected = (2.0 * std::f64::consts::PI).sqrt() * (-xi * xi / 2.0).exp();
            let got = z * scale * sign;
            assert!(got.im.abs() < 1e-12);
            assert!((got.re - expected).abs() < 1e-12, "k = {k}: {} vs {expected}", got.re);
        }
    }

    #[test]
    fn mass_radius_of_gaussian() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let f = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        // |u|^2 = exp(-r^2) in 2D: fraction outside r is exp(-r^2).
        let r = f.mass_radius(1e-8);
        assert!((r - (1e8f64).ln().sqrt()).abs() < 0.3, "{r}");
        assert!(f.mass_fraction_outside(r + 0.3) <= 1.1e-8);
    }
}
