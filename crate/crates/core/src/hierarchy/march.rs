//! Joint marching of the coefficients `w_0 .. w_K`, auxiliary nonlinear
//! solutions, per-class forcing parts and the remainder table on one time grid.
//!
//! Every unknown is advanced sample by sample away from the anchor, so memory
//! stays proportional to the number of unknowns rather than to the number of
//! time samples.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::duhamel::{
    anchor_coefficient, axpy, field_from_samples, field_from_spectrum, march_order, norm, solve_local, Accumulator,
    Anchor, Evaluator, IterationControl, TimeGrid,
};
use crate::error::{Error, Result};
use crate::spectral::{ComplexField, HartreeKernel};
use crate::trajectory::{Picture, Trajectory};

/// Source of the base solution `w_0`.
#[derive(Clone, Copy)]
pub enum Base<'a> {
    /// Solve for `w_0` with this anchor value.
    Data(&'a ComplexField),
    /// Prescribed physical samples on exactly the march grid.
    Trajectory(&'a Trajectory),
}

pub struct MarchSpec<'a> {
    pub kernel: &'a HartreeKernel,
    pub anchor: Anchor,
    pub time_grid: TimeGrid,
    /// Highest coefficient index solved; 0 solves the base only.
    pub order: usize,
    pub base: Base<'a>,
    /// Anchor value of `w_1`; `w_k` for `k ≥ 2` is anchored at zero.
    pub direction: Option<&'a ComplexField>,
    /// Anchor values of additional full nonlinear solutions.
    pub extras: Vec<ComplexField>,
    /// For each ε an extra solution anchored at `base + ε direction` is added and
    /// compared against the partial sums of the series.
    pub remainder_eps: Vec<f64>,
    /// Order whose forcing is split by index multiset.
    pub parts_order: Option<usize>,
    /// Store physical samples every this many grid steps.
    pub record_every: Option<usize>,
    pub control: IterationControl,
}

impl<'a> MarchSpec<'a> {
    pub fn new(kernel: &'a HartreeKernel, anchor: Anchor, time_grid: TimeGrid, base: Base<'a>) -> Self {
        MarchSpec {
            kernel,
            anchor,
            time_grid,
            order: 0,
            base,
            direction: None,
            extras: Vec::new(),
            remainder_eps: Vec::new(),
            parts_order: None,
            record_every: None,
            control: IterationControl::default(),
        }
    }
}

/// Contribution of one index multiset to the far-end profile of its order.
#[derive(Debug, Clone)]
pub struct PartIntegral {
    pub indices: [usize; 3],
    pub summands: usize,
    pub value: ComplexField,
}

/// Profiles at an intermediate time, used for extrapolation in the horizon.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub t: f64,
    pub orders: Vec<ComplexField>,
    pub extras: Vec<ComplexField>,
    pub parts: Vec<ComplexField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderRow {
    pub eps: f64,
    /// `sup_t ‖u^ε - Σ_{k≤N} ε^k w_k‖₂` for `N = 0..=K`.
    pub remainders: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct OrderStats {
    pub max_iterations: usize,
    pub max_contraction: f64,
    /// `sup_t ‖w_k(t)‖₂` over every grid sample.
    pub sup_l2: f64,
}

pub struct MarchOutput {
    pub anchor: Anchor,
    pub time_grid: TimeGrid,
    /// Recorded times in increasing order.
    pub times: Vec<f64>,
    /// Physical samples per order at the recorded times.
    pub orders: Vec<Vec<ComplexField>>,
    pub extras: Vec<Vec<ComplexField>>,
    /// Profiles `e^{-itΔ} w_k(t)` at the far end of the march.
    pub far: Vec<ComplexField>,
    pub extras_far: Vec<ComplexField>,
    /// Profiles at `T/4` and `T/2` (initial anchor with `M` divisible by 4).
    pub checkpoints: Vec<Checkpoint>,
    pub parts: Vec<PartIntegral>,
    pub remainder: Vec<RemainderRow>,
    pub stats: Vec<OrderStats>,
    pub extra_stats: Vec<OrderStats>,
}

impl MarchOutput {
    pub fn trajectory(&self, k: usize) -> Result<Trajectory> {
        let fields = self.orders.get(k).ok_or(Error::MissingCoefficient(k))?;
        Trajectory::new(self.times.clone(), fields.clone(), Picture::Physical)
    }

    pub fn extra_trajectory(&self, i: usize) -> Result<Trajectory> {
        let fields = self
            .extras
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("no auxiliary solution {i}")))?;
        Trajectory::new(self.times.clone(), fields.clone(), Picture::Physical)
    }
}

/// Sorted index triples summing to `n`.
pub fn multisets(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=n / 3 {
        for b in a..=(n - a) / 2 {
            out.push([a, b, n - a - b]);
        }
    }
    out
}

/// Distinct orderings of a triple.
pub fn permutations(m: [usize; 3]) -> Vec<[usize; 3]> {
    let [a, b, c] = m;
    let mut out = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    out.sort_unstable();
    out.dedup();
    out
}

struct Unknown {
    anchor: Vec<Complex64>,
    acc: Accumulator,
    profile: Vec<Complex64>,
    physical: Vec<Complex64>,
    records: Vec<ComplexField>,
    stats: OrderStats,
}

impl Unknown {
    fn new(anchor: Vec<Complex64>) -> Self {
        let len = anchor.len();
        Unknown {
            profile: anchor.clone(),
            anchor,
            acc: Accumulator::new(len),
            physical: Vec::new(),
            records: Vec::new(),
            stats: OrderStats::default(),
        }
    }

    fn base(&self, coef: Complex64) -> Vec<Complex64> {
        let mut b = self.anchor.clone();
        axpy(&mut b, coef, &self.acc.partial());
        b
    }
}

/// Pair potentials `|x|^-γ * (w_i conj w_j)` at one sample.
struct PairCache<'e, 'k> {
    ev: &'e Evaluator<'k>,
    map: HashMap<(usize, usize), Vec<Complex64>>,
}

impl<'e, 'k> PairCache<'e, 'k> {
    fn get(&mut self, i: usize, j: usize, phys: &[&[Complex64]]) -> &[Complex64] {
        if !self.map.contains_key(&(i, j)) {
            let v = match self.map.get(&(j, i)) {
                Some(w) => w.iter().map(|z| z.conj()).collect(),
                None => self.ev.potential(phys[i], phys[j]),
            };
            self.map.insert((i, j), v);
        }
        &self.map[&(i, j)]
    }
}

fn nonlinear_forcing(ev: &Evaluator, p: &[Complex64], phases: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let phys = ev.physical(p, phases);
    let v = ev.potential(&phys, &phys);
    let f = v.iter().zip(&phys).map(|(a, b)| a * b).collect();
    (phys.clone(), ev.pull_back(f, phases))
}

fn spectrum_of(field: &ComplexField, spec: &MarchSpec) -> Result<Vec<Complex64>> {
    if !field.grid().same_as(spec.kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(field.to_frequency().into_values())
}

fn advance_nonlinear(
    u: &mut Unknown,
    first: bool,
    coef: Complex64,
    ev: &Evaluator,
    phases: &[Complex64],
    control: IterationControl,
) -> Result<Vec<Complex64>> {
    if first {
        let (phys, g) = nonlinear_forcing(ev, &u.profile, phases);
        u.physical = phys;
        return Ok(g);
    }
    let base = u.base(coef);
    let sol = solve_local(&base, coef * 0.5, u.profile.clone(), control, |p| nonlinear_forcing(ev, p, phases))?;
    u.stats.max_iterations = u.stats.max_iterations.max(sol.iterations);
    u.stats.max_contraction = u.stats.max_contraction.max(sol.contraction);
    u.profile = sol.profile;
    u.physical = sol.physical;
    Ok(sol.forcing)
}

pub fn march(spec: &MarchSpec) -> Result<MarchOutput> {
    let ev = Evaluator::new(spec.kernel);
    let grid = ev.grid.clone();
    let tg = spec.time_grid;
    let k_max = spec.order;
    if k_max > 0 && spec.direction.is_none() {
        return Err(Error::InvalidParameter("coefficients beyond w_0 need a direction".into()));
    }
    if let Some(n) = spec.parts_order {
        if n > k_max {
            return Err(Error::MissingCoefficient(n));
        }
    }
    let zero = vec![Complex64::new(0.0, 0.0); grid.len()];
    let base_data = match spec.base {
        Base::Data(u0) => Some(spectrum_of(u0, spec)?),
        Base::Trajectory(traj) => {
            if traj.picture() != Picture::Physical {
                return Err(Error::Picture { expected: "physical" });
            }
            if !traj.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
            let given = TimeGrid::from_times(traj.times())?;
            if given.intervals != tg.intervals || (given.horizon - tg.horizon).abs() > 1e-12 * tg.horizon {
                return Err(Error::InvalidParameter("base trajectory must be sampled on the march grid".into()));
            }
            None
        }
    };
    let direction = spec.direction.map(|v| spectrum_of(v, spec)).transpose()?;

    let mut orders: Vec<Unknown> = (0..=k_max)
        .map(|k| match k {
            0 => Unknown::new(base_data.clone().unwrap_or_else(|| zero.clone())),
            1 => Unknown::new(direction.clone().expect("checked above")),
            _ => Unknown::new(zero.clone()),
        })
        .collect();

    let mut extra_data = Vec::new();
    for e in &spec.extras {
        extra_data.push(spectrum_of(e, spec)?);
    }
    if !spec.remainder_eps.is_empty() {
        let (Some(b), Some(d)) = (&base_data, &direction) else {
            return Err(Error::InvalidParameter(
                "remainder table needs base data and a direction".into(),
            ));
        };
        for &eps in &spec.remainder_eps {
            let mut data = b.clone();
            axpy(&mut data, Complex64::new(eps, 0.0), d);
            extra_data.push(data);
        }
    }
    let first_remainder = spec.extras.len();
    let mut extras: Vec<Unknown> = extra_data.into_iter().map(Unknown::new).collect();

    let classes: Vec<([usize; 3], Vec<[usize; 3]>)> = spec
        .parts_order
        .map(|n| multisets(n).into_iter().map(|m| (m, permutations(m))).collect())
        .unwrap_or_default();
    let mut part_acc: Vec<Accumulator> = classes.iter().map(|_| Accumulator::new(grid.len())).collect();

    let coef = anchor_coefficient(spec.anchor, tg.step());
    let dv = grid.cell_volume().sqrt();
    let checkpoint_at: Vec<usize> = if spec.anchor == Anchor::Initial && tg.intervals % 4 == 0 {
        vec![tg.intervals / 4, tg.intervals / 2]
    } else {
        Vec::new()
    };
    let mut checkpoints = Vec::new();
    let mut remainder: Vec<RemainderRow> = spec
        .remainder_eps
        .iter()
        .map(|&eps| RemainderRow {
            eps,
            remainders: vec![0.0; k_max + 1],
        })
        .collect();
    let mut times = Vec::new();

    for (step, &m) in march_order(spec.anchor, &tg).iter().enumerate() {
        let s = tg.time(m);
        let phases = ev.phases(s);
        let first = step == 0;

        let g0 = match spec.base {
            Base::Trajectory(traj) => {
                let phys = traj.field(m).to_position().into_values();
                orders[0].profile = ev.profile(phys.clone(), &phases);
                let v = ev.potential(&phys, &phys);
                let f = v.iter().zip(&phys).map(|(a, b)| a * b).collect();
                orders[0].physical = phys;
                ev.pull_back(f, &phases)
            }
            Base::Data(_) => advance_nonlinear(&mut orders[0], first, coef, &ev, &phases, spec.control)?,
        };
        orders[0].acc.push(&g0);

        let mut cache = PairCache {
            ev: &ev,
            map: HashMap::new(),
        };
        for k in 1..=k_max {
            let (lower, rest) = orders.split_at_mut(k);
            let current = &mut rest[0];
            let phys: Vec<&[Complex64]> = lower.iter().map(|u| u.physical.as_slice()).collect();
            let mut source = zero.clone();
            for i in 0..k {
                for j in 0..=k - i {
                    let l = k - i - j;
                    if j == k || l == k {
                        continue;
                    }
                    let v = cache.get(i, j, &phys).to_vec();
                    for ((s, a), b) in source.iter_mut().zip(&v).zip(phys[l]) {
                        *s += a * b;
                    }
                }
            }
            let g_source = ev.pull_back(source, &phases);
            let v00 = cache.get(0, 0, &phys).to_vec();
            let u0 = phys[0];
            let linear = |p: &[Complex64]| {
                let w = ev.physical(p, &phases);
                let v0k = ev.potential(u0, &w);
                let f = (0..w.len())
                    .map(|x| v00[x] * w[x] + (v0k[x] + v0k[x].conj()) * u0[x])
                    .collect();
                (w, ev.pull_back(f, &phases))
            };
            let g_linear = if first {
                let (w, g) = linear(&current.profile);
                current.physical = w;
                g
            } else {
                let mut base = current.base(coef);
                axpy(&mut base, coef * 0.5, &g_source);
                let sol = solve_local(&base, coef * 0.5, current.profile.clone(), spec.control, linear)?;
                current.stats.max_iterations = current.stats.max_iterations.max(sol.iterations);
                current.stats.max_contraction = current.stats.max_contraction.max(sol.contraction);
                current.profile = sol.profile;
                current.physical = sol.physical;
                sol.forcing
            };
            let mut g = g_source;
            axpy(&mut g, Complex64::new(1.0, 0.0), &g_linear);
            current.acc.push(&g);
        }

        if !classes.is_empty() {
            let phys: Vec<&[Complex64]> = orders.iter().map(|u| u.physical.as_slice()).collect();
            for ((_, perms), acc) in classes.iter().zip(part_acc.iter_mut()) {
                let mut f = zero.clone();
                for &[i, j, l] in perms {
                    let v = cache.get(i, j, &phys).to_vec();
                    for ((s, a), b) in f.iter_mut().zip(&v).zip(phys[l]) {
                        *s += a * b;
                    }
                }
                acc.push(&ev.pull_back(f, &phases));
            }
        }
        drop(cache);

        for e in extras.iter_mut() {
            let g = advance_nonlinear(e, first, coef, &ev, &phases, spec.control)?;
            e.acc.push(&g);
        }

        for u in orders.iter_mut().chain(extras.iter_mut()) {
            u.stats.sup_l2 = u.stats.sup_l2.max(norm(&u.profile) * dv);
        }

        for (row, e) in remainder.iter_mut().zip(&extras[first_remainder..]) {
            let mut r = e.profile.clone();
            let mut pow = 1.0;
            for (k, u) in orders.iter().enumerate() {
                axpy(&mut r, Complex64::new(-pow, 0.0), &u.profile);
                row.remainders[k] = row.remainders[k].max(norm(&r) * dv);
                pow *= row.eps;
            }
        }

        if let Some(every) = spec.record_every {
            if m % every.max(1) == 0 || m == tg.intervals {
                times.push(s);
                for u in orders.iter_mut().chain(extras.iter_mut()) {
                    u.records.push(field_from_samples(&grid, u.physical.clone()));
                }
            }
        }

        if checkpoint_at.contains(&m) {
            checkpoints.push(Checkpoint {
                t: s,
                orders: orders.iter().map(|u| field_from_spectrum(&grid, u.profile.clone())).collect(),
                extras: extras.iter().map(|u| field_from_spectrum(&grid, u.profile.clone())).collect(),
                parts: part_acc
                    .iter()
                    .map(|acc| field_from_spectrum(&grid, scaled(acc.trapezoid(), coef)))
                    .collect(),
            });
        }
    }

    if spec.anchor == Anchor::Final {
        times.reverse();
        for u in orders.iter_mut().chain(extras.iter_mut()) {
            u.records.reverse();
        }
    }
    let parts = classes
        .iter()
        .zip(&part_acc)
        .map(|((m, perms), acc)| PartIntegral {
            indices: *m,
            summands: perms.len(),
            value: field_from_spectrum(&grid, scaled(acc.trapezoid(), coef)),
        })
        .collect();
    Ok(MarchOutput {
        anchor: spec.anchor,
        time_grid: tg,
        times,
        far: orders.iter().map(|u| field_from_spectrum(&grid, u.profile.clone())).collect(),
        extras_far: extras.iter().map(|u| field_from_spectrum(&grid, u.profile.clone())).collect(),
        stats: orders.iter().map(|u| u.stats).collect(),
        extra_stats: extras.iter().map(|u| u.stats).collect(),
        orders: orders.into_iter().map(|u| u.records).collect(),
        extras: extras.into_iter().map(|u| u.records).collect(),
        checkpoints,
        parts,
        remainder,
    })
}

fn scaled(mut v: Vec<Complex64>, c: Complex64) -> Vec<Complex64> {
    v.iter_mut().for_each(|z| *z *= c);
    v
}
