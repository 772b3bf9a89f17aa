//! Time-indexed sequences of fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::NormLedger;
use crate::spectral::io::{self, Precision};
use crate::spectral::ops::free_propagate;
use crate::spectral::{ComplexField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    /// Samples are `u(t)`.
    Physical,
    /// Samples are the profiles `e^{-itΔ} u(t)`.
    Interaction,
}

impl Picture {
    pub fn name(self) -> &'static str {
        match self {
            Picture::Physical => "physical",
            Picture::Interaction => "interaction",
        }
    }
}

/// Fields sampled at strictly monotone times on one grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<ComplexField>,
    picture: Picture,
    ledger_series: Option<Vec<NormLedger>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<ComplexField>, picture: Picture) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        check_monotone(&times)?;
        let first = &fields[0];
        for f in &fields[1..] {
            first.check_same_grid(f)?;
        }
        Ok(Trajectory {
            times,
            fields,
            picture,
            ledger_series: None,
        })
    }

    /// Field constant in time.
    pub fn constant(times: Vec<f64>, field: &ComplexField, picture: Picture) -> Result<Self> {
        let fields = vec![field.clone(); times.len()];
        Self::new(times, fields, picture)
    }

    pub fn with_ledger_series(mut self, series: Vec<NormLedger>) -> Result<Self> {
        if series.len() != self.times.len() {
            return Err(Error::InvalidParameter("ledger series length differs from trajectory".into()));
        }
        self.ledger_series = Some(series);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ComplexField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &ComplexField {
        &self.fields[i]
    }

    pub fn last(&self) -> &ComplexField {
        self.fields.last().expect("trajectories are nonempty")
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn ledger_series(&self) -> Option<&[NormLedger]> {
        self.ledger_series.as_deref()
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the stored sample closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    pub fn push(&mut self, t: f64, field: ComplexField) -> Result<()> {
        self.fields[0].check_same_grid(&field)?;
        let last = *self.times.last().expect("nonempty");
        let dir = if self.times.len() >= 2 {
            self.times[1] - self.times[0]
        } else {
            t - last
        };
        if !((t - last) * dir > 0.0) {
            return Err(Error::InvalidParameter("times must be strictly monotone".into()));
        }
        self.times.push(t);
        self.fields.push(field);
        self.ledger_series = None;
        Ok(())
    }

    /// `e^{-itΔ} u(t)` at every sample.
    pub fn to_interaction(&self) -> Result<Trajectory> {
        if self.picture != Picture::Physical {
            return Err(Error::Picture { expected: "physical" });
        }
        self.map_picture(-1.0, Picture::Interaction)
    }

    /// `e^{itΔ} p(t)` at every sample.
    pub fn to_physical(&self) -> Result<Trajectory> {
        if self.picture != Picture::Interaction {
            return Err(Error::Picture { expected: "interaction" });
        }
        self.map_picture(1.0, Picture::Physical)
    }

    fn map_picture(&self, sign: f64, picture: Picture) -> Result<Trajectory> {
        let fields = self
            .times
            .iter()
            .zip(&self.fields)
            .map(|(t, f)| free_propagate(f, sign * t))
            .collect();
        Trajectory::new(self.times.clone(), fields, picture)
    }

    /// Largest L² distance between matching samples of two trajectories.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::InvalidParameter("trajectories have different lengths".into()));
        }
        Ok(self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max))
    }

    /// `sup_t ‖u(t)‖₂` over stored samples.
    pub fn sup_l2(&self) -> f64 {
        self.fields.iter().map(|f| f.l2_norm()).fold(0.0, f64::max)
    }

    pub fn save(&self, path: &std::path::Path, gamma: Option<f64>) -> Result<()> {
        let records: Vec<(f64, &ComplexField)> = self.times.iter().copied().zip(self.fields.iter()).collect();
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        io::write_records(file, &records, gamma, self.picture == Picture::Interaction, Precision::Complex128)
    }

    pub fn load(path: &std::path::Path) -> Result<(Trajectory, Option<f64>)> {
        let c = io::read_container(std::io::BufReader::new(std::fs::File::open(path)?))?;
        let picture = if c.interaction {
            Picture::Interaction
        } else {
            Picture::Physical
        };
        let (times, fields) = c.records.into_iter().unzip();
        Ok((Trajectory::new(times, fields, picture)?, c.gamma))
    }
}

fn check_monotone(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dir = times[1] - times[0];
    if dir == 0.0 || times.windows(2).any(|w| !((w[1] - w[0]) * dir > 0.0)) {
        return Err(Error::InvalidParameter("times must be strictly monotone".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone_times() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let f = ComplexField::zeros(&g);
        assert!(Trajectory::new(vec![0.0, 1.0, 0.5], vec![f.clone(), f.clone(), f.clone()], Picture::Physical).is_err());
        assert!(Trajectory::new(vec![1.0, 0.0], vec![f.clone(), f.clone()], Picture::Physical).is_ok());
        assert!(Trajectory::new(vec![], vec![], Picture::Physical).is_err());
    }

    #[test]
    fn free_trajectory_has_constant_profile() {
        let g = Grid::new(1, 128, 16.0).unwrap();
        let phi = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.5, 0.0]);
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
        let fields = times.iter().map(|t| free_propagate(&phi, *t)).collect();
        let traj = Trajectory::new(times, fields, Picture::Physical).unwrap();
        let prof = traj.to_interaction().unwrap();
        for f in prof.fields() {
            assert!(f.distance(&phi) < 1e-12 * phi.l2_norm());
        }
        assert!(prof.to_interaction().is_err());
        let back = prof.to_physical().unwrap();
        assert!(back.sup_distance(&traj).unwrap() < 1e-12);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let phi = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let traj = Trajectory::constant(vec![0.0, 0.5], &phi, Picture::Interaction).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.bin");
        traj.save(&path, Some(1.5)).unwrap();
        let (back, gamma) = Trajectory::load(&path).unwrap();
        assert_eq!(gamma, Some(1.5));
        assert_eq!(back.picture(), Picture::Interaction);
        assert_eq!(back.times(), traj.times());
        assert_eq!(back.last().values(), phi.values());
    }
}
