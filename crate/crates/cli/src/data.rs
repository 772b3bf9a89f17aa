//! Construction of the data fields named in the configuration.

use hnls_core::functionals::sigma_norm;
use hnls_core::spectral::io::load_field;
use hnls_core::{ComplexField, Grid, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{DataConfig, DataKind};

/// Plane waves in a random field.
const MODES: usize = 8;

/// `stream` separates the draws of different fields under one seed.
pub fn build(d: &DataConfig, grid: &Grid, seed: u64, stream: u64) -> Result<ComplexField> {
    let field = match d.kind {
        DataKind::Gaussian => ComplexField::gaussian(grid, d.amplitude, d.width, d.center, d.momentum),
        DataKind::Random => random_field(d, grid, seed, stream),
        DataKind::File => {
            let path = d.path.as_ref().expect("validated");
            let (f, _) = load_field(path)?;
            if !f.grid().same_as(grid) {
                return Err(hnls_core::Error::InvalidParameter(format!(
                    "{} holds a field on a different grid than the configuration",
                    path.display()
                )));
            }
            f.to_position()
        }
    };
    Ok(match d.sigma_norm {
        Some(target) => {
            let now = sigma_norm(&field);
            if now == 0.0 {
                field
            } else {
                field.scale(Complex64::new(target / now, 0.0))
            }
        }
        None => field,
    })
}

/// Gaussian envelope times a superposition of plane waves with normal
/// momenta and complex normal weights, rescaled to peak `amplitude`.
fn random_field(d: &DataConfig, grid: &Grid, seed: u64, stream: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let waves: Vec<([f64; 2], Complex64)> = (0..MODES)
        .map(|_| ([normal(), normal()], Complex64::new(normal(), normal())))
        .collect();
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let envelope = ComplexField::gaussian(grid, 1.0, d.width, d.center, d.momentum);
    let dim = grid.dim();
    let noise = ComplexField::from_fn(grid, |x| {
        waves
            .iter()
            .map(|(k, c)| {
                let kx = k[0] * x[0] + if dim > 1 { k[1] * x[1] } else { 0.0 };
                c * Complex64::from_polar(1.0, kx + phase)
            })
            .sum()
    });
    let f = envelope.mul_pointwise(&noise);
    let peak = f.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    f.scale(Complex64::new(d.amplitude / peak, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_depend_only_on_seed_and_stream() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let d = DataConfig {
            kind: DataKind::Random,
            ..Default::default()
        };
        let a = build(&d, &g, 7, 0).unwrap();
        assert_eq!(a.values(), build(&d, &g, 7, 0).unwrap().values());
        assert!(a.distance(&build(&d, &g, 8, 0).unwrap()) > 0.0);
        assert!(a.distance(&build(&d, &g, 7, 1).unwrap()) > 0.0);
        let peak = a.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((peak - d.amplitude).abs() < 1e-14);
    }

    #[test]
    fn sigma_norm_target_is_met() {
        let g = Grid::new(2, 64, 12.0).unwrap();
        let d = DataConfig {
            sigma_norm: Some(0.25),
            ..Default::default()
        };
        assert!((sigma_norm(&build(&d, &g, 0, 0).unwrap()) - 0.25).abs() < 1e-12);
    }
}
