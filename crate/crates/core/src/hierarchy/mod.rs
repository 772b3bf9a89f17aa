//! Perturbation coefficients `w_k` of the solution map around a base solution,
//! their scattering-side limits and the series remainder.
//!
//! With `u^ε` the solution for data `u_0 + εv`, formally `u^ε = Σ ε^k w_k`
//! with `w_0 = u`. Order `N` is driven by all ordered triples of lower indices
//! and contains the linear terms `T(u,u,w_N) + T(u,w_N,u) + T(w_N,u,u)`, which
//! are solved as the fixed-point part.

pub mod gronwall;
pub mod march;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use gronwall::{gronwall_sequence, GronwallSequence, IndexConvention};
pub use march::{march, multisets, permutations, Base, MarchOutput, MarchSpec, OrderStats, PartIntegral, RemainderRow};

use crate::duhamel::{Anchor, IterationControl, TimeGrid};
use crate::error::{Error, Result};
use crate::experiments::fit::line_fit;
use crate::functionals::{weighted_norms, x_norm, y_norm, NormLedger, StrichartzExponents};
use crate::spectral::ops::free_propagate;
use crate::spectral::{trilinear_t, ComplexField, HartreeKernel};
use crate::trajectory::{Picture, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    pub anchor: Anchor,
    /// Truncation horizon `T_max`.
    pub horizon: f64,
    /// Largest admissible time step.
    pub ds: f64,
    /// Store trajectories every this many steps.
    pub record_every: usize,
    pub control: IterationControl,
    /// Split the forcing of this order by index multiset.
    pub parts_order: Option<usize>,
    /// Evaluate the Strichartz-type norms on the stored samples.
    pub ledger: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            anchor: Anchor::Initial,
            horizon: 8.0,
            ds: 0.02,
            record_every: 20,
            control: IterationControl::default(),
            parts_order: None,
            ledger: true,
        }
    }
}

impl HierarchyConfig {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        if !(self.ds > 0.0) || self.record_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "need ds > 0 and record_every ≥ 1, got ds = {}, record_every = {}",
                self.ds, self.record_every
            )));
        }
        TimeGrid::with_spacing(self.horizon, self.ds)
    }
}

/// Limit of a profile as the horizon grows, from samples at `T/4`, `T/2`, `T`.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub value: ComplexField,
    /// Profile at `T` itself.
    pub raw: ComplexField,
    pub t_used: f64,
    /// Bound on `‖profile(∞) - profile(T)‖₂` from the `t^{-2γ/(4-γ)}` tail integrand.
    pub tail_estimate: f64,
    /// `‖P(T) - P(T/2)‖ / ‖P(T/2) - P(T/4)‖`.
    pub ratio: f64,
}

/// Richardson extrapolation in the horizon. The observed increment ratio is
/// used for the extrapolation, capped at the ratio implied by the tail power
/// `p = 2γ/(4-γ)`; the reported tail uses `p` itself.
pub fn extract_from_profiles(
    quarter: &ComplexField,
    half: &ComplexField,
    full: &ComplexField,
    t_used: f64,
    gamma: f64,
) -> Result<Extraction> {
    let p = 2.0 * gamma / (4.0 - gamma);
    let d1 = full.sub(half);
    let d0 = half.sub(quarter);
    let (n1, n0) = (d1.l2_norm(), d0.l2_norm());
    let floor = 1e-13 * full.l2_norm().max(f64::MIN_POSITIVE);
    if n0 <= floor && n1 <= floor {
        return Ok(Extraction {
            value: full.clone(),
            raw: full.clone(),
            t_used,
            tail_estimate: n1,
            ratio: 0.0,
        });
    }
    let ratio = n1 / n0;
    if ratio >= 1.0 {
        return Err(Error::NotCauchy);
    }
    let analytic = 2f64.powf(1.0 - p);
    let r = ratio.min(analytic);
    let mut value = full.clone();
    value.axpy(Complex64::new(r / (1.0 - r), 0.0), &d1);
    Ok(Extraction {
        value,
        raw: full.clone(),
        t_used,
        tail_estimate: n1 / (2f64.powf(p - 1.0) - 1.0),
        ratio,
    })
}

/// `w^+ = lim e^{-itΔ} w(t)` from a trajectory whose samples include `T/4`, `T/2` and `T`.
pub fn extract_plus(wk: &Trajectory, gamma: f64) -> Result<Extraction> {
    if wk.picture() != Picture::Physical {
        return Err(Error::Picture { expected: "physical" });
    }
    let t = *wk.times().last().expect("nonempty");
    let profile = |target: f64| -> Result<ComplexField> {
        let i = wk.nearest_index(target);
        let s = wk.times()[i];
        if (s - target).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("trajectory has no sample at t = {target}")));
        }
        Ok(free_propagate(wk.field(i), -s))
    };
    extract_from_profiles(&profile(t / 4.0)?, &profile(t / 2.0)?, &profile(t)?, t, gamma)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Orders that entered the fit.
    pub orders: usize,
}

/// Geometric rate `Λ` from a least-squares fit of `log ‖w_k‖` against `k`,
/// `k = 1..`; vanishing coefficients are skipped.
pub fn lambda_fit(norms: &[f64]) -> Option<LambdaFit> {
    let max = norms.iter().skip(1).copied().fold(0.0, f64::max);
    let (k, y): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, n)| **n > 1e-12 * max)
        .map(|(k, n)| (k as f64, n.ln()))
        .unzip();
    if k.len() < 2 {
        return None;
    }
    let fit = line_fit(&k, &y).ok()?;
    Some(LambdaFit {
        lambda: fit.slope.exp(),
        intercept: fit.intercept,
        residual: fit.residual,
        orders: k.len(),
    })
}

#[derive(Debug, Clone)]
pub struct HierarchyCoefficients {
    pub order: usize,
    pub config: HierarchyConfig,
    pub base_data: ComplexField,
    pub direction: ComplexField,
    /// Index 0 is the base solution.
    pub w: Vec<Trajectory>,
    /// `w_k^+`; for the final anchor these are the prescribed data.
    pub w_plus: Vec<ComplexField>,
    /// Extraction diagnostics per order (initial anchor only).
    pub extraction: Vec<Option<Extraction>>,
    /// Per order: `sup_L2`, `Y`, `X`, `plus_L2`, `plus_Sigma`.
    pub ledger: Vec<NormLedger>,
    pub lambda_fit: Option<LambdaFit>,
    pub parts: Vec<PartIntegral>,
    pub stats: Vec<OrderStats>,
    /// Profiles of every order at the far end of the grid.
    pub far: Vec<ComplexField>,
}

impl HierarchyCoefficients {
    pub fn sup_norms(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.sup_l2).collect()
    }
}

fn assemble(
    out: MarchOutput,
    order: usize,
    cfg: &HierarchyConfig,
    kernel: &HartreeKernel,
    base_data: &ComplexField,
    direction: &ComplexField,
) -> Result<HierarchyCoefficients> {
    let gamma = kernel.gamma();
    let mut w = Vec::with_capacity(order + 1);
    for k in 0..=order {
        w.push(out.trajectory(k)?);
    }
    let (w_plus, extraction): (Vec<ComplexField>, Vec<Option<Extraction>>) = match cfg.anchor {
        Anchor::Initial if out.checkpoints.len() == 2 => {
            let mut plus = Vec::new();
            let mut ex = Vec::new();
            for k in 0..=order {
                let e = extract_from_profiles(
                    &out.checkpoints[0].orders[k],
                    &out.checkpoints[1].orders[k],
                    &out.far[k],
                    out.time_grid.horizon,
                    gamma,
                )?;
                plus.push(e.value.clone());
                ex.push(Some(e));
            }
            (plus, ex)
        }
        Anchor::Initial => (out.far.clone(), vec![None; order + 1]),
        Anchor::Final => {
            let zero = ComplexField::zeros(base_data.grid());
            let plus = (0..=order)
                .map(|k| match k {
                    0 => base_data.clone(),
                    1 => direction.clone(),
                    _ => zero.clone(),
                })
                .collect();
            (plus, vec![None; order + 1])
        }
    };
    let exps = StrichartzExponents::new(kernel.grid().dim(), gamma)?;
    let mut ledger = Vec::new();
    for k in 0..=order {
        let mut l = NormLedger::new();
        let t = out.time_grid.horizon;
        l.insert("sup_L2", out.stats[k].sup_l2, t)?;
        if cfg.ledger && w[k].len() >= 2 {
            l.insert("Y", y_norm(&w[k], &exps)?, t)?;
            l.insert("X", x_norm(&w[k], &exps)?, t)?;
        }
        let plus = weighted_norms(&w_plus[k]);
        l.insert("plus_L2", plus.get("L2").unwrap_or(0.0), t)?;
        l.insert("plus_Sigma", plus.get("Sigma").unwrap_or(0.0), t)?;
        ledger.push(l);
    }
    let sup: Vec<f64> = out.stats.iter().map(|s| s.sup_l2).collect();
    Ok(HierarchyCoefficients {
        order,
        config: *cfg,
        base_data: base_data.clone(),
        direction: direction.clone(),
        w,
        w_plus,
        extraction,
        ledger,
        lambda_fit: lambda_fit(&sup),
        parts: out.parts,
        stats: out.stats,
        far: out.far,
    })
}

/// Coefficients `w_0 ..= w_K` for base data `u0` and direction `v`.
pub fn solve_hierarchy(
    u0: &ComplexField,
    v: &ComplexField,
    order: usize,
    kernel: &HartreeKernel,
    cfg: &HierarchyConfig,
) -> Result<HierarchyCoefficients> {
    let mut spec = MarchSpec::new(kernel, cfg.anchor, cfg.time_grid()?, Base::Data(u0));
    spec.order = order;
    spec.direction = Some(v);
    spec.parts_order = cfg.parts_order;
    spec.record_every = Some(cfg.record_every);
    spec.control = cfg.control;
    let out = march(&spec)?;
    assemble(out, order, cfg, kernel, u0, v)
}

#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub trajectory: Trajectory,
    /// Largest measured contraction factor of the per-sample fixed-point solves.
    pub contraction: f64,
    pub iterations: usize,
}

/// `w_1` along a given base trajectory, which must be sampled uniformly from `t = 0`.
pub fn solve_w1(u_traj: &Trajectory, v: &ComplexField, kernel: &HartreeKernel, cfg: &HierarchyConfig) -> Result<FirstOrder> {
    let tg = TimeGrid::from_times(u_traj.times())?;
    let mut spec = MarchSpec::new(kernel, cfg.anchor, tg, Base::Trajectory(u_traj));
    spec.order = 1;
    spec.direction = Some(v);
    spec.record_every = Some(1);
    spec.control = cfg.control;
    let out = march(&spec)?;
    Ok(FirstOrder {
        trajectory: out.trajectory(1)?,
        contraction: out.stats[1].max_contraction,
        iterations: out.stats[1].max_iterations,
    })
}

/// `w_N`, given coefficients up to at least `N - 1`. Lower orders are marched
/// again alongside, which reproduces them exactly.
pub fn solve_wn(coeffs: &HierarchyCoefficients, n: usize, kernel: &HartreeKernel) -> Result<Trajectory> {
    if n > coeffs.order + 1 {
        return Err(Error::MissingCoefficient(coeffs.order + 1));
    }
    if n <= coeffs.order {
        return Ok(coeffs.w[n].clone());
    }
    let cfg = coeffs.config;
    let mut spec = MarchSpec::new(kernel, cfg.anchor, cfg.time_grid()?, Base::Data(&coeffs.base_data));
    spec.order = n;
    spec.direction = Some(&coeffs.direction);
    spec.record_every = Some(cfg.record_every);
    spec.control = cfg.control;
    march(&spec)?.trajectory(n)
}

#[derive(Debug, Clone)]
pub struct NonlinearTerm {
    pub trajectory: Trajectory,
    /// Estimate of the neglected `∫_T^∞`, from `‖T(T)‖₂` and the tail power.
    pub tail_estimate: f64,
}

/// `𝒩(a,b,c)(t) = i ∫_t^T e^{i(t-s)Δ} T(a,b,c)(s) ds` by the trapezoid rule on
/// the stored samples. Fails when the tail estimate exceeds `tail_tol`.
pub fn nonlinear_n(
    a: &Trajectory,
    b: &Trajectory,
    c: &Trajectory,
    kernel: &HartreeKernel,
    tail_tol: Option<f64>,
) -> Result<NonlinearTerm> {
    for t in [a, b, c] {
        if t.picture() != Picture::Physical {
            return Err(Error::Picture { expected: "physical" });
        }
        if t.times() != a.times() {
            return Err(Error::InvalidParameter("trajectories must share one time grid".into()));
        }
        if !t.grid().same_as(kernel.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    let times = a.times();
    let n = times.len();
    let g: Vec<ComplexField> = (0..n)
        .map(|i| trilinear_t(a.field(i), b.field(i), c.field(i), kernel).map(|f| free_propagate(&f, -times[i])))
        .collect::<Result<_>>()?;
    let grid = a.grid().clone();
    let mut profile = vec![ComplexField::zeros(&grid); n];
    let mut acc = ComplexField::zeros(&grid);
    for i in (0..n.saturating_sub(1)).rev() {
        let h = (times[i + 1] - times[i]).abs();
        let mut step = g[i].add(&g[i + 1]);
        step = step.scale(Complex64::new(0.0, 0.5 * h));
        acc = acc.add(&step);
        profile[i] = acc.clone();
    }
    let fields = profile
        .iter()
        .zip(times)
        .map(|(p, t)| free_propagate(p, *t))
        .collect();
    let horizon = times[n - 1];
    let power = 2.0 * kernel.gamma() / (4.0 - kernel.gamma());
    let tail_estimate = g[n - 1].l2_norm() * horizon / (power - 1.0);
    if let Some(tol) = tail_tol {
        if tail_estimate > tol {
            return Err(Error::Horizon { tail: tail_estimate, tol });
        }
    }
    Ok(NonlinearTerm {
        trajectory: Trajectory::new(times.to_vec(), fields, Picture::Physical)?,
        tail_estimate,
    })
}

#[derive(Debug, Clone)]
pub struct SymmetricSum {
    pub trajectory: Trajectory,
    pub summands: usize,
    pub tail_estimate: f64,
}

/// Sum of `𝒩` over the distinct orderings of a multiset of coefficient labels.
pub fn symmetric_sum(
    labels: [usize; 3],
    w: &[Trajectory],
    kernel: &HartreeKernel,
    tail_tol: Option<f64>,
) -> Result<SymmetricSum> {
    for &l in &labels {
        if l >= w.len() {
            return Err(Error::MissingCoefficient(l));
        }
    }
    let mut sorted = labels;
    sorted.sort_unstable();
    let perms = permutations(sorted);
    let mut total: Option<Trajectory> = None;
    let mut tail = 0.0;
    for [i, j, l] in &perms {
        let term = nonlinear_n(&w[*i], &w[*j], &w[*l], kernel, None)?;
        tail += term.tail_estimate;
        total = Some(match total {
            None => term.trajectory,
            Some(acc) => {
                let fields = acc
                    .fields()
                    .iter()
                    .zip(term.trajectory.fields())
                    .map(|(x, y)| x.add(y))
                    .collect();
                Trajectory::new(acc.times().to_vec(), fields, Picture::Physical)?
            }
        });
    }
    if let Some(tol) = tail_tol {
        if tail > tol {
            return Err(Error::Horizon { tail, tol });
        }
    }
    Ok(SymmetricSum {
        trajectory: total.expect("at least one permutation"),
        summands: perms.len(),
        tail_estimate: tail,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderTable {
    pub rows: Vec<RemainderRow>,
    /// `R_{N+1} / R_N` per row.
    pub ratios: Vec<Vec<f64>>,
    pub lambda_fit: Option<LambdaFit>,
    /// `sup_t ‖w_k‖₂` per order.
    pub sup_norms: Vec<f64>,
    pub stats: Vec<OrderStats>,
}

/// `R_N(ε) = sup_t ‖u^ε - u - Σ_{k=1}^N ε^k w_k‖₂` for `N = 0 ..= n_max`, where
/// `u^ε` solves with data `u0 + εv` by the same discrete scheme.
pub fn verify_remainder(
    u0: &ComplexField,
    v: &ComplexField,
    eps_list: &[f64],
    n_max: usize,
    kernel: &HartreeKernel,
    cfg: &HierarchyConfig,
) -> Result<RemainderTable> {
    let mut spec = MarchSpec::new(kernel, cfg.anchor, cfg.time_grid()?, Base::Data(u0));
    spec.order = n_max;
    spec.direction = Some(v);
    spec.remainder_eps = eps_list.to_vec();
    spec.control = cfg.control;
    let out = march(&spec)?;
    let sup_norms: Vec<f64> = out.stats.iter().map(|s| s.sup_l2).collect();
    let fit = lambda_fit(&sup_norms);
    if let Some(f) = fit {
        if let Some(eps) = eps_list.iter().copied().find(|e| e * f.lambda >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ε = {eps} is outside the convergent regime: εΛ_fit = {} ≥ 1",
                eps * f.lambda
            )));
        }
    }
    let ratios = out
        .remainder
        .iter()
        .map(|row| row.remainders.windows(2).map(|w| w[1] / w[0]).collect())
        .collect();
    Ok(RemainderTable {
        rows: out.remainder,
        ratios,
        lambda_fit: fit,
        sup_norms,
        stats: out.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn small_setup() -> (Grid, HartreeKernel) {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        (g, k)
    }

    #[test]
    fn multiset_enumeration() {
        assert_eq!(multisets(3), vec![[0, 0, 3], [0, 1, 2], [1, 1, 1]]);
        assert_eq!(permutations([0, 0, 3]).len(), 3);
        assert_eq!(permutations([0, 1, 2]).len(), 6);
        assert_eq!(permutations([1, 1, 1]).len(), 1);
    }

    #[test]
    fn lambda_fit_recovers_geometric_rate() {
        let norms: Vec<f64> = (0..6).map(|k| 2.0 * 3f64.powi(k)).collect();
        let f = lambda_fit(&norms).unwrap();
        assert!((f.lambda - 3.0).abs() < 1e-10);
    }

    #[test]
    fn free_first_order_is_free_flow() {
        let (g, k) = small_setup();
        let cfg = HierarchyConfig {
            horizon: 0.4,
            ds: 0.05,
            record_every: 1,
            ledger: false,
            ..Default::default()
        };
        let zero = ComplexField::zeros(&g);
        let v = ComplexField::gaussian(&g, 0.3, 1.0, [0.0; 2], [0.0; 2]);
        let h = solve_hierarchy(&zero, &v, 1, &k, &cfg).unwrap();
        for (t, f) in h.w[1].times().iter().zip(h.w[1].fields()) {
            assert!(f.distance(&free_propagate(&v, *t)) < 1e-13);
        }
        assert!(h.w_plus[1].distance(&v) < 1e-13);
    }

    #[test]
    fn remainder_vanishes_at_zero_eps() {
        let (g, k) = small_setup();
        let cfg = HierarchyConfig {
            horizon: 0.2,
            ds: 0.05,
            ..Default::default()
        };
        let u0 = ComplexField::gaussian(&g, 0.2, 1.0, [0.0; 2], [0.0; 2]);
        let v = ComplexField::gaussian(&g, 0.2, 1.0, [0.5, 0.0], [0.0; 2]);
        let t = verify_remainder(&u0, &v, &[0.0], 2, &k, &cfg).unwrap();
        assert!(t.rows[0].remainders.iter().all(|r| *r == 0.0));
    }
}
