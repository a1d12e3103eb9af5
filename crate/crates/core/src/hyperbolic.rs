//! Hyperbolic–parabolic cross-diffusion driven by a common pressure.
//!
//! `∂t u_i = ∂x(u_i ∂x p)` with `p = (1/N) Σ_j u_j`. Writing `u_i = N p r_i`
//! decouples the system into the porous-medium equation `∂t p = ∂x(p ∂x p)`
//! for the pressure and the transport `∂t r_i = ∂x p ∂x r_i` of the
//! fractions along the pressure velocity `−∂x p`.
//!
//! Two schemes are provided:
//!
//! * splitting: an explicit finite-volume step for `p` and a conservative
//!   upwind step for `N p r_i` that reuses the pressure fluxes, so each species
//!   keeps its mass and every `r_i` is a convex combination of upwind values;
//! * pressure transport: every species is pushed by the one-dimensional
//!   optimal map between consecutive pressures.
//!
//! Whether the second construction coincides with a constrained minimizing
//! movement over `{u : π(u) = p}` is left open; only the constructive map is
//! implemented.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_metric_speed, check_tv_monotone, CheckResult, RunRecord};
use crate::error::{Error, Result};
use crate::fdref::flux_update;
use crate::measures::{Density, DensityVector, Grid1D};
use crate::transport1d::{w2_piecewise, QuantileFunction};

/// Pressure `p = (1/N) Σ u_j` and fractions `r_i = u_i / (N p)` of the first
/// `N − 1` species; the last fraction is `1 − Σ r_i`. Fractions are zero
/// where `p` vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureFraction {
    p: Density,
    r: Vec<Vec<f64>>,
}

impl PressureFraction {
    pub fn new(p: Density, r: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        for (i, ri) in r.iter().enumerate() {
            if ri.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: ri.len(),
                });
            }
            if let Some(c) = ri.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!(
                    "fraction {i} is {} at cell {c}",
                    ri[c]
                )));
            }
        }
        for c in 0..n {
            let s: f64 = r.iter().map(|ri| ri[c]).sum();
            if s > 1.0 + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "fractions sum to {s} at cell {c}"
                )));
            }
        }
        Ok(Self { p, r })
    }

    pub fn p(&self) -> &Density {
        &self.p
    }

    pub fn grid(&self) -> &Grid1D {
        self.p.grid()
    }

    pub fn n_species(&self) -> usize {
        self.r.len() + 1
    }

    /// Fraction of species `i`, including the implied last one.
    pub fn r(&self, i: usize) -> Vec<f64> {
        if i < self.r.len() {
            self.r[i].clone()
        } else {
            self.last_fraction()
        }
    }

    fn last_fraction(&self) -> Vec<f64> {
        let p = self.p.values();
        (0..p.len())
            .map(|c| {
                if p[c] > 0.0 {
                    (1.0 - self.r.iter().map(|ri| ri[c]).sum::<f64>()).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Pressure and fractions of `u`.
pub fn split_state(u: &DensityVector) -> PressureFraction {
    let n = u.n_species();
    let nf = n as f64;
    let cells = u.grid().n_cells();
    let p: Vec<f64> = (0..cells)
        .map(|c| u.iter().map(|d| d.values()[c]).sum::<f64>() / nf)
        .collect();
    let r = (0..n - 1)
        .map(|i| {
            let ui = u.values(i);
            (0..cells)
                .map(|c| {
                    if p[c] > 0.0 {
                        (ui[c] / (nf * p[c])).min(1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    PressureFraction {
        p: Density::from_raw(*u.grid(), p),
        r,
    }
}

/// `u_i = N p r_i`.
pub fn recover_species(pf: &PressureFraction) -> DensityVector {
    let nf = pf.n_species() as f64;
    let p = pf.p.values();
    let species = (0..pf.n_species())
        .map(|i| {
            let r = pf.r(i);
            Density::from_raw(
                *pf.grid(),
                p.iter().zip(&r).map(|(p, r)| nf * p * r).collect(),
            )
        })
        .collect();
    DensityVector::new(species).expect("species share the pressure grid")
}

/// `Σ_c |g_{c+1} − g_c|`.
pub fn tv(field: &[f64]) -> f64 {
    field.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Largest `dt` accepted by [`step_splitting`]: the diffusion bound
/// `½ h² / max p` and the transport bound `h / max |∂x p|`.
pub fn splitting_admissible_dt(p: &Density) -> f64 {
    let h = p.grid().h();
    let v = p.values();
    let pmax = v.iter().fold(0.0f64, |m, x| m.max(*x));
    let gmax = v
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / h)
        .fold(0.0f64, f64::max);
    let diffusion = if pmax > 0.0 {
        0.5 * h * h / pmax
    } else {
        f64::INFINITY
    };
    let transport = if gmax > 0.0 { h / gmax } else { f64::INFINITY };
    diffusion.min(transport)
}

/// Pressures below this are flushed to zero: the fluxes (`∝ p²`) would be
/// subnormal and the fraction quotient would carry no relative accuracy.
const PRESSURE_FLOOR: f64 = 1e-150;

/// One step of the decoupled pressure–fraction system.
///
/// The pressure takes an explicit finite-volume step with flux
/// `p̄ ∂x p`. Each `p r_i` is updated with the same fluxes times the upwind
/// fraction, so `r_i` at the new time is a convex combination of old values
/// and stays in `[0, 1]`.
pub fn step_splitting(pf: &PressureFraction, dt: f64) -> Result<PressureFraction> {
    let admissible = splitting_admissible_dt(&pf.p);
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::CflViolation { dt, admissible });
    }
    let grid = *pf.grid();
    let h = grid.h();
    let p = pf.p.values();
    let n = p.len();
    let mut next_p = flux_update(p, p, dt, h);
    // Change of cell value carried from cell c to c + 1 (negative: leftwards),
    // the same fluxes as in the pressure update.
    let moved: Vec<f64> = (0..n - 1)
        .map(|c| -0.5 * (p[c] + p[c + 1]) * (p[c + 1] - p[c]) * dt / (h * h))
        .collect();
    let mut r = Vec::with_capacity(pf.r.len());
    for ri in &pf.r {
        let mut q: Vec<f64> = p.iter().zip(ri).map(|(p, r)| p * r).collect();
        for (c, &m) in moved.iter().enumerate() {
            let up = if m > 0.0 { ri[c] } else { ri[c + 1] };
            q[c] -= m * up;
            q[c + 1] += m * up;
        }
        let mut out = Vec::with_capacity(n);
        for c in 0..n {
            let v = if next_p[c] > 0.0 {
                q[c] / next_p[c]
            } else {
                0.0
            };
            if next_p[c] > PRESSURE_FLOOR && !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvariantViolated(format!(
                    "fraction {v} outside [0, 1] at cell {c}"
                )));
            }
            out.push(v.clamp(0.0, 1.0));
        }
        r.push(out);
    }
    if let Some(c) = next_p.iter().position(|v| *v < 0.0) {
        return Err(Error::NegativityDetected {
            cell: c,
            value: next_p[c],
        });
    }
    for (c, v) in next_p.iter_mut().enumerate() {
        if *v < PRESSURE_FLOOR {
            *v = 0.0;
            r.iter_mut().for_each(|ri| ri[c] = 0.0);
        }
    }
    Ok(PressureFraction {
        p: Density::from_raw(grid, next_p),
        r,
    })
}

/// Result of [`pressure_transport_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct TransportStep {
    /// The pushed species, averaged onto the grid.
    pub species: DensityVector,
    /// `sqrt(Σ_i W2²(u_i, T#u_i))` for the pushed measures before averaging.
    pub w2_species: f64,
    /// `W2(p_prev, p_next)`.
    pub w2_pressure: f64,
}

/// Relative mass below which two cumulative-mass breakpoints are merged.
const MASS_SNAP: f64 = 1e-13;

/// Exact push-forward of every species and its cell averages.
struct Pushed {
    images: Vec<QuantileFunction>,
    species: DensityVector,
}

/// Both pressures are piecewise constant, so the optimal map between them is
/// piecewise affine on the common refinement of their cumulative masses and
/// sends each piece of a species onto an interval inside one cell of
/// `p_next`.
fn push_exact(u_prev: &DensityVector, p_prev: &Density, p_next: &Density) -> Result<Pushed> {
    let grid = *u_prev.grid();
    if *p_prev.grid() != grid || *p_next.grid() != grid {
        return Err(Error::InvalidInput(
            "pressures and species live on different grids".into(),
        ));
    }
    let n = u_prev.n_species();
    let nf = n as f64;
    let pv = p_prev.values();
    let scale = pv
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
        .max(f64::MIN_POSITIVE);
    for c in 0..grid.n_cells() {
        let avg = u_prev.iter().map(|d| d.values()[c]).sum::<f64>() / nf;
        if (avg - pv[c]).abs() > 1e-9 * scale {
            return Err(Error::InvalidInput(format!(
                "species average {avg} differs from the previous pressure {} at cell {c}",
                pv[c]
            )));
        }
    }
    let q_prev = QuantileFunction::piecewise_constant(p_prev);
    let q_next = QuantileFunction::piecewise_constant(p_next);
    if q_prev.n_pieces() == 0 || q_next.n_pieces() == 0 {
        return Err(Error::DegenerateSupport);
    }
    let total = q_prev.total_mass().min(q_next.total_mass());
    let mut breaks: Vec<f64> = q_prev
        .mass_breaks()
        .into_iter()
        .chain(q_next.mass_breaks())
        .filter(|m| *m < total)
        .collect();
    breaks.push(total);
    breaks.sort_by(f64::total_cmp);
    // Cumulative masses of the two pressures that agree up to round-off
    // (e.g. across a gap in the support) would otherwise leave slivers whose
    // image lands on the far side of the gap.
    breaks.dedup_by(|b, a| *b - *a <= MASS_SNAP * total);

    // Image intervals with the mass of every species on them; zero-mass
    // intervals bridge the gaps of the pushed support.
    let mut image_breaks = Vec::with_capacity(2 * breaks.len());
    let mut image_masses: Vec<Vec<f64>> = vec![Vec::with_capacity(2 * breaks.len()); n];
    let mut cell_masses = vec![vec![0.0; grid.n_cells()]; n];
    for w in breaks.windows(2) {
        let (m0, m1) = (w[0], w[1]);
        if m1 <= m0 {
            continue;
        }
        let (a0, a1) = q_prev.span(m0, m1);
        let (b0, b1) = q_next.span(m0, m1);
        let src = grid.locate(0.5 * (a0 + a1));
        let dst = grid.locate(0.5 * (b0 + b1));
        match image_breaks.last() {
            Some(&last) if b0 > last => {
                image_breaks.push(b0);
                image_masses.iter_mut().for_each(|m| m.push(0.0));
            }
            Some(_) => {}
            None => image_breaks.push(b0),
        }
        image_breaks.push(b1);
        for i in 0..n {
            let share = if pv[src] > 0.0 {
                u_prev.values(i)[src] / pv[src]
            } else {
                0.0
            };
            let mass = share * (m1 - m0);
            image_masses[i].push(mass);
            cell_masses[i][dst] += mass;
        }
    }

    let h = grid.h();
    let images = image_masses
        .iter()
        .map(|m| QuantileFunction::from_intervals(&image_breaks, m))
        .collect();
    let species = DensityVector::new(
        cell_masses
            .into_iter()
            .map(|m| Density::from_raw(grid, m.into_iter().map(|m| m / h).collect()))
            .collect(),
    )?;
    let pn = p_next.values();
    let pmax = pn.iter().fold(0.0f64, |m, v| m.max(*v));
    for c in 0..grid.n_cells() {
        let avg = species.iter().map(|d| d.values()[c]).sum::<f64>() / nf;
        if (avg - pn[c]).abs() > 1e-9 * pmax.max(1.0) {
            return Err(Error::InvariantViolated(format!(
                "pushed species do not average to the pressure at cell {c}"
            )));
        }
    }
    Ok(Pushed { images, species })
}

fn check_speed_bound(w2_species: f64, w2_pressure: f64, n: usize) -> Result<()> {
    if w2_species > (n as f64).sqrt() * w2_pressure + 1e-8 {
        return Err(Error::InvariantViolated(format!(
            "species moved {w2_species} > sqrt(N) × pressure increment {w2_pressure}"
        )));
    }
    Ok(())
}

/// Pushes every species by the optimal map `T` from `p_prev` to `p_next`.
///
/// The increment is measured on the exact push-forward; the returned species
/// are its cell averages, which sum to `N p_next`.
pub fn pressure_transport_step(
    u_prev: &DensityVector,
    p_prev: &Density,
    p_next: &Density,
) -> Result<TransportStep> {
    let pushed = push_exact(u_prev, p_prev, p_next)?;
    let w2_sq: f64 = u_prev
        .iter()
        .zip(&pushed.images)
        .map(|(u, img)| QuantileFunction::piecewise_constant(u).distance_sq(img))
        .sum();
    let w2_species = w2_sq.max(0.0).sqrt();
    let w2_pressure = w2_piecewise(p_prev, p_next)?;
    check_speed_bound(w2_species, w2_pressure, u_prev.n_species())?;
    Ok(TransportStep {
        species: pushed.species,
        w2_species,
        w2_pressure,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Splitting,
    PressureTransport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperbolicOptions {
    pub t_final: f64,
    /// Fixed time step; when absent each step uses `safety` times the
    /// admissible step.
    pub dt: Option<f64>,
    pub safety: f64,
    /// Keep every `output_every`-th state (the last one is always kept).
    pub output_every: usize,
}

impl Default for HyperbolicOptions {
    fn default() -> Self {
        Self {
            t_final: 0.2,
            dt: None,
            safety: 0.9,
            output_every: 1,
        }
    }
}

/// Trajectory at the output times and the run record.
///
/// The record holds, per state, `tv["p"]` and `tv["r{i}"]` (1-based species
/// index) and, per step, the product-metric increments of the species in
/// `w2_increments` and those of the pressure in `series["w2_pressure"]`.
pub fn run_hyperbolic(
    u0: &DensityVector,
    scheme: Scheme,
    opts: &HyperbolicOptions,
) -> Result<(Vec<DensityVector>, RunRecord)> {
    if !(opts.t_final >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "t_final must be nonnegative, got {}",
            opts.t_final
        )));
    }
    if !(opts.safety > 0.0 && opts.safety <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "safety must lie in (0, 1], got {}",
            opts.safety
        )));
    }
    let every = opts.output_every.max(1);
    let n = u0.n_species();
    let mut pf = split_state(u0);
    let mut u = u0.clone();
    let mut record = RunRecord {
        times: vec![0.0],
        ..Default::default()
    };
    record.notes.push(format!(
        "pressure p = (1/N) Σ u_i with N = {n}; ∂t p = ∂x(p ∂x p) without time rescaling"
    ));
    let mut tv_series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let push_tv = |tv_series: &mut BTreeMap<String, Vec<f64>>, pf: &PressureFraction| {
        tv_series
            .entry("p".into())
            .or_default()
            .push(tv(pf.p.values()));
        for i in 0..n {
            tv_series
                .entry(format!("r{}", i + 1))
                .or_default()
                .push(tv(&pf.r(i)));
        }
    };
    push_tv(&mut tv_series, &pf);
    let mut w2_pressure = Vec::new();
    let p0 = pf.p.clone();
    let mut p_cur = p0.clone();
    let mut images: Vec<QuantileFunction> = u0
        .iter()
        .map(QuantileFunction::piecewise_constant)
        .collect();
    let mut trajectory = vec![u0.clone()];
    let mut t = 0.0;
    let mut k = 0usize;
    while t < opts.t_final * (1.0 - 1e-12) {
        let admissible = splitting_admissible_dt(&p_cur);
        let mut dt = match opts.dt {
            Some(dt) => dt,
            None => opts.safety * admissible,
        };
        dt = dt.min(opts.t_final - t);
        let next = step_splitting(
            &PressureFraction {
                p: p_cur.clone(),
                r: pf.r.clone(),
            },
            dt,
        )?;
        match scheme {
            Scheme::Splitting => {
                let next_u = recover_species(&next);
                let mut sq = 0.0;
                for (a, b) in u.iter().zip(next_u.iter()) {
                    sq += w2_piecewise(a, b)?.powi(2);
                }
                record.w2_increments.push(sq.sqrt());
                w2_pressure.push(w2_piecewise(&pf.p, &next.p)?);
                u = next_u;
                p_cur = next.p.clone();
                pf = next;
            }
            Scheme::PressureTransport => {
                // Maps compose: the state after k steps is the push-forward
                // of u0 by the optimal map from p(0) to p(t_k), so the
                // species are never re-averaged between steps.
                let pushed = push_exact(u0, &p0, &next.p)?;
                let w2_sq: f64 = images
                    .iter()
                    .zip(&pushed.images)
                    .map(|(a, b)| a.distance_sq(b))
                    .sum();
                let w2_p = w2_piecewise(&p_cur, &next.p)?;
                let w2_u = w2_sq.max(0.0).sqrt();
                check_speed_bound(w2_u, w2_p, n)?;
                record.w2_increments.push(w2_u);
                w2_pressure.push(w2_p);
                images = pushed.images;
                u = pushed.species;
                // Fractions and TV are read off the species; the averages
                // agree with the porous-medium pressure to round-off.
                pf = split_state(&u);
                p_cur = next.p;
            }
        }
        t += dt;
        k += 1;
        record.taus.push(dt);
        record.times.push(t);
        push_tv(&mut tv_series, &pf);
        if k.is_multiple_of(every) || t >= opts.t_final * (1.0 - 1e-12) {
            trajectory.push(u.clone());
        }
    }
    record.tv = tv_series;
    record
        .series
        .insert("w2_pressure".into(), w2_pressure.clone());

    let tv_p0 = record.tv["p"][0];
    record.push_check(check_tv_monotone(&record, "p")?);
    for i in 0..n {
        record.push_check(check_tv_monotone(&record, &format!("r{}", i + 1))?);
    }
    if scheme == Scheme::PressureTransport {
        let pressure = RunRecord {
            w2_increments: w2_pressure,
            ..Default::default()
        };
        record.push_check(check_metric_speed(&record, &pressure, n, 1e-8)?);
    }
    record.push_check(CheckResult::info(
        "fractions_in_unit_interval",
        true,
        0.0,
        0.0,
        format!("asserted at every step; TV(p0) = {tv_p0}"),
    ));
    Ok((trajectory, record))
}

/// Number of cells where every pair of species is above `threshold` at once.
pub fn overlap_cells(u: &DensityVector, threshold: f64) -> usize {
    (0..u.grid().n_cells())
        .filter(|&c| u.iter().filter(|d| d.values()[c] > threshold).count() >= 2)
        .count()
}
