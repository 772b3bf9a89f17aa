use num_complex::Complex64;

use super::field::{ComplexField, Representation};
use super::grid::Grid;
use super::kernel::HartreeKernel;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Multiplies frequency-representation samples by `exp(-i |xi|^2 t)` in place.
pub fn propagate_spectrum(grid: &Grid, hat: &mut [Complex64], t: f64) {
    if t == 0.0 {
        return;
    }
    for (z, k2) in hat.iter_mut().zip(grid.k2()) {
        *z *= Complex64::from_polar(1.0, -k2 * t);
    }
}

/// `e^{it Delta} f`, returned in the position representation.
pub fn free_propagate(f: &ComplexField, t: f64) -> ComplexField {
    if t == 0.0 {
        return f.to_position();
    }
    let mut hat = f.to_frequency();
    propagate_spectrum(f.grid(), hat.values_mut(), t);
    hat.to_position()
}

fn check_kernel(f: &ComplexField, kernel: &HartreeKernel) -> Result<()> {
    if f.grid().same_as(kernel.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub(crate) fn apply_dealias(grid: &Grid, hat: &mut [Complex64]) {
    for (idx, z) in hat.iter_mut().enumerate() {
        if !grid.dealias_keep(idx) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Convolution `K * rho` of position samples `rho`, in place.
pub(crate) fn convolve_in_place(kernel: &HartreeKernel, rho: &mut [Complex64]) {
    let grid = kernel.grid();
    grid.fft_in_place(rho, false);
    if kernel.dealias() {
        apply_dealias(grid, rho);
    }
    for (z, m) in rho.iter_mut().zip(kernel.multiplier()) {
        *z *= m;
    }
    grid.fft_in_place(rho, true);
}

/// `|x|^-gamma * (a conj(b))` in the position representation.
pub fn hartree_potential(a: &ComplexField, b: &ComplexField, kernel: &HartreeKernel) -> Result<ComplexField> {
    a.check_same_grid(b)?;
    check_kernel(a, kernel)?;
    let a = a.to_position();
    let b = b.to_position();
    let mut rho: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(x, y)| x * y.conj()).collect();
    convolve_in_place(kernel, &mut rho);
    ComplexField::from_values(a.grid(), rho, Representation::Position)
}

/// Real potential `|x|^-gamma * |u|^2` sampled on the grid.
pub fn density_potential(u: &ComplexField, kernel: &HartreeKernel) -> Vec<f64> {
    let u = u.to_position();
    let mut rho: Vec<Complex64> = u.values().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    convolve_in_place(kernel, &mut rho);
    rho.iter().map(|z| z.re).collect()
}

/// Multiplies `potential * w` and applies the final dealiasing projection.
pub(crate) fn potential_times(kernel: &HartreeKernel, potential: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = potential.iter().zip(w).map(|(p, z)| p * z).collect();
    if kernel.dealias() {
        let grid = kernel.grid();
        grid.fft_in_place(&mut out, false);
        apply_dealias(grid, &mut out);
        grid.fft_in_place(&mut out, true);
    }
    out
}

/// `T(u, v, w) = (|x|^-gamma * (u conj(v))) w`.
pub fn trilinear_t(u: &ComplexField, v: &ComplexField, w: &ComplexField, kernel: &HartreeKernel) -> Result<ComplexField> {
    u.check_same_grid(w)?;
    let potential = hartree_potential(u, v, kernel)?;
    let w = w.to_position();
    let out = potential_times(kernel, potential.values(), w.values());
    ComplexField::from_values(u.grid(), out, Representation::Position)
}

/// Multiplication by `M(t) = exp(i |x|^2 / (4t))`; `t = 0` is rejected by the caller.
pub fn apply_m(f: &ComplexField, t: f64) -> ComplexField {
    let f = f.to_position();
    let grid = f.grid().clone();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(idx, z)| z * Complex64::from_polar(1.0, grid.radius2(idx) / (4.0 * t)))
        .collect();
    ComplexField::from_values(&grid, values, Representation::Position).expect("same length")
}

/// Spectral gradient, one component per axis, position representation.
pub fn gradient(f: &ComplexField) -> Vec<ComplexField> {
    let grid = f.grid().clone();
    let hat = f.to_frequency();
    (0..grid.dim())
        .map(|axis| {
            let values = hat
                .values()
                .iter()
                .enumerate()
                .map(|(idx, z)| {
                    let xi = grid.frequency(idx)[axis];
                    // The Nyquist mode has no odd partner; its derivative is dropped.
                    if grid.signed_index(grid.axis_index(idx, axis)) == -(grid.n() as i64) / 2 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        I * xi * z
                    }
                })
                .collect();
            ComplexField::from_values(&grid, values, Representation::Frequency)
                .expect("same length")
                .to_position()
        })
        .collect()
}

/// Multiplication by the coordinate `x_axis`.
pub fn multiply_coordinate(f: &ComplexField, axis: usize) -> ComplexField {
    let f = f.to_position();
    let grid = f.grid().clone();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(idx, z)| z * grid.point(idx)[axis])
        .collect();
    ComplexField::from_values(&grid, values, Representation::Position).expect("same length")
}

/// `J(t) f = e^{it Delta} x e^{-it Delta} f`, one component per axis.
pub fn apply_j(f: &ComplexField, t: f64) -> Vec<ComplexField> {
    let back = free_propagate(f, -t);
    (0..f.grid().dim())
        .map(|axis| free_propagate(&multiply_coordinate(&back, axis), t))
        .collect()
}

/// `J(t) f = M(t) (2it grad) M(-t) f`; needs the chirp of `M(-t)` resolved on the grid.
pub fn apply_j_factored(f: &ComplexField, t: f64) -> Vec<ComplexField> {
    if t == 0.0 {
        return (0..f.grid().dim()).map(|axis| multiply_coordinate(f, axis)).collect();
    }
    let chirped = apply_m(f, -t);
    gradient(&chirped)
        .into_iter()
        .map(|g| apply_m(&g.scale(2.0 * I * t), t))
        .collect()
}

/// `(sum_axis ||J_axis f||^2)^(1/2)`.
pub fn vector_l2_norm(components: &[ComplexField]) -> f64 {
    components.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_field(grid: &Grid) -> ComplexField {
        ComplexField::from_fn(grid, |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            Complex64::new((-r2 / 2.0).exp(), 0.3 * p[0] * (-r2 / 3.0).exp())
        })
    }

    #[test]
    fn propagation_at_zero_time_is_identity() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let f = smooth_field(&g);
        assert!(free_propagate(&f, 0.0).distance(&f) < 1e-15);
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let g = Grid::new(1, 1024, 64.0).unwrap();
        let f = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        for t in [1.0, 5.0] {
            let z = Complex64::new(1.0, 2.0 * t);
            let exact = ComplexField::from_fn(&g, |p| z.powf(-0.5) * (-(p[0] * p[0]) / (2.0 * z)).exp());
            let err = free_propagate(&f, t).distance(&exact);
            assert!(err < 1e-8, "t = {t}: {err}");
        }
    }

    #[test]
    fn potential_of_zero_is_zero() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        let z = ComplexField::zeros(&g);
        let v = hartree_potential(&z, &z, &k).unwrap();
        assert_eq!(v.sample_norm(), 0.0);
    }

    #[test]
    fn j_at_zero_is_coordinate_multiplication() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let f = smooth_field(&g);
        let j = apply_j(&f, 0.0);
        assert!(j[0].distance(&multiply_coordinate(&f, 0)) < 1e-12);
    }

    #[test]
    fn gradient_of_plane_wave() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let k0 = g.dxi() * 3.0;
        let f = ComplexField::from_fn(&g, |p| Complex64::from_polar(1.0, k0 * p[0]));
        let df = gradient(&f);
        assert!(df[0].distance(&f.scale(I * k0)) < 1e-12);
    }
}
