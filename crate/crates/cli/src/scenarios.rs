//! One runner per scenario id. Each writes its files and returns the checks.

use std::path::Path;

use anyhow::{Context, Result};

use crossdiff::diagnostics::CheckResult;
use crossdiff::energies::{energy_dirichlet, energy_quadratic};
use crossdiff::fdref::{bt4_admissible_dt, l1_error, run_bt_fd, step_bt4_fd};
use crossdiff::hyperbolic::{overlap_cells, run_hyperbolic, Scheme};
use crossdiff::jko::run_jko;
use crossdiff::measures::{Density, DensityVector};
use crossdiff::skt::{compare_correlated_vs_decoupled, run_skt_scenario, DecoupledVariant};

use crate::config::{ScenarioConfig, ScenarioId};
use crate::output::{time_label, Writer};

pub struct Outcome {
    pub checks: Vec<CheckResult>,
    pub files: Vec<std::path::PathBuf>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run(config: &ScenarioConfig, out: &Path) -> Result<Outcome> {
    let mut w = Writer::new(out)?;
    let checks = match config.scenario {
        ScenarioId::ParabolicJko => parabolic(config, &mut w, false)?,
        ScenarioId::BenchmarkClosure => parabolic(config, &mut w, true)?,
        ScenarioId::HyperbolicSplit => hyperbolic(config, &mut w, Scheme::Splitting)?,
        ScenarioId::HyperbolicTransport => hyperbolic(config, &mut w, Scheme::PressureTransport)?,
        ScenarioId::FourthOrder => fourth_order(config, &mut w)?,
        ScenarioId::SktJoint => skt_joint(config, &mut w)?,
        ScenarioId::SktDecoupled => skt_decoupled(config, &mut w)?,
    };
    let params = serde_json::to_value(config)?;
    w.report(config.scenario.name(), &params, &checks)?;
    Ok(Outcome {
        checks,
        files: w.written,
    })
}

/// Index of the state closest to each requested time.
fn snapshot_indices(times: &[f64], requested: &[f64]) -> Vec<(f64, usize)> {
    requested
        .iter()
        .map(|&t| {
            let k = (0..times.len())
                .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
                .expect("nonempty trajectory");
            (t, k)
        })
        .collect()
}

fn write_snapshots(
    w: &mut Writer,
    times: &[f64],
    states: &[DensityVector],
    requested: &[f64],
) -> Result<()> {
    w.densities("u_initial.csv", &states[0])?;
    for (t, k) in snapshot_indices(times, requested) {
        w.densities(&format!("u_t{}.csv", time_label(t)), &states[k])?;
    }
    w.densities("u_final.csv", states.last().expect("nonempty trajectory"))
}

fn parabolic(config: &ScenarioConfig, w: &mut Writer, closure: bool) -> Result<Vec<CheckResult>> {
    let problem = config.problem_1d()?;
    let schedule = config.schedule()?;
    let (states, rec) = run_jko(
        &problem.u0,
        &problem.a,
        &schedule,
        config.solver(),
        &config.jko_options(),
    )
    .context("minimizing-movement run")?;
    write_snapshots(w, &rec.times, &states, &config.snapshot_times)?;
    w.series(
        "series.csv",
        &[
            ("t", &rec.times),
            ("energy", &rec.energy),
            ("entropy", &rec.entropy),
            ("gradient_norm", &rec.gradient_norms),
        ],
    )?;
    let steps: Vec<f64> = (1..=rec.n_steps()).map(|k| k as f64).collect();
    let iters: Vec<f64> = rec.inner_iterations.iter().map(|&i| i as f64).collect();
    let resid: Vec<f64> = rec
        .residuals
        .iter()
        .map(|r| r.iter().copied().fold(0.0, f64::max))
        .collect();
    let mut cols: Vec<(&str, &[f64])> = vec![
        ("step", &steps),
        ("tau", &rec.taus),
        ("w2_increment", &rec.w2_increments),
        ("inner_iterations", &iters),
    ];
    if resid.len() == steps.len() {
        cols.push(("residual", &resid));
    }
    w.series("steps.csv", &cols)?;

    let mut checks = rec.checks.clone();
    let last = states.last().expect("nonempty trajectory");
    let horizon = schedule.horizon();
    if let Some((b, t0)) = problem.oracle {
        let g = *last.grid();
        let exact = Density::new(g, b.cell_averages(t0 + horizon, &g)?)?;
        let err = l1_error(last.species(0), &exact)?;
        checks.push(CheckResult::info(
            "barenblatt_l1",
            err <= 5e-2,
            5e-2 - err,
            0.0,
            format!("L1 error {err:.3e}"),
        ));
    }
    if closure {
        let (fd, n_steps) = run_bt_fd(&problem.u0, &problem.a, horizon, 0.9)
            .context("finite-difference reference")?;
        w.densities("fd_final.csv", &fd)?;
        let gap = (0..last.n_species())
            .map(|i| l1_error(last.species(i), fd.species(i)))
            .collect::<crossdiff::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        checks.push(CheckResult::info(
            "finite_difference_gap",
            gap <= 5e-2,
            5e-2 - gap,
            0.0,
            format!("largest per-species L1 gap {gap:.3e} ({n_steps} reference steps)"),
        ));
    }
    Ok(checks)
}

fn hyperbolic(config: &ScenarioConfig, w: &mut Writer, scheme: Scheme) -> Result<Vec<CheckResult>> {
    let problem = config.problem_1d()?;
    let mut opts = config.hyperbolic_options();
    // Snapshots need every state.
    opts.output_every = 1;
    let (states, rec) = run_hyperbolic(&problem.u0, scheme, &opts).context("hyperbolic run")?;
    write_snapshots(w, &rec.times, &states, &config.snapshot_times)?;
    let mut cols: Vec<(&str, &[f64])> = vec![("t", &rec.times)];
    let names: Vec<&String> = rec.tv.keys().collect();
    for name in &names {
        cols.push((name.as_str(), &rec.tv[*name]));
    }
    w.series("tv.csv", &cols)?;
    let t_steps = &rec.times[1..];
    w.series(
        "steps.csv",
        &[
            ("t", t_steps),
            ("tau", &rec.taus),
            ("w2_species", &rec.w2_increments),
            ("w2_pressure", &rec.series["w2_pressure"]),
        ],
    )?;
    let overlap: Vec<f64> = states
        .iter()
        .map(|u| overlap_cells(u, 0.0) as f64)
        .collect();
    w.series("overlap.csv", &[("t", &rec.times), ("cells", &overlap)])?;
    let mut checks = rec.checks.clone();
    let worst = overlap.iter().copied().fold(0.0, f64::max);
    checks.push(CheckResult::info(
        "support_overlap",
        worst <= 2.0,
        2.0 - worst,
        0.0,
        format!("at most {worst} cells with more than one species present"),
    ));
    Ok(checks)
}

fn fourth_order(config: &ScenarioConfig, w: &mut Writer) -> Result<Vec<CheckResult>> {
    let problem = config.problem_1d()?;
    let schedule = config.schedule()?;
    let fixed = config
        .schedule
        .as_ref()
        .is_some_and(|s| s.tau.is_some() || s.taus.is_some());
    let energy = |u: &DensityVector| -> crossdiff::Result<f64> {
        Ok(energy_quadratic(u, &problem.a)? + energy_dirichlet(u))
    };
    let mut u = problem.u0.clone();
    let mut times = vec![0.0];
    let mut energies = vec![energy(&u)?];
    let mut masses = vec![u.iter().map(Density::mass).sum::<f64>()];
    let mut states = vec![u.clone()];
    for &tau in schedule.taus() {
        let dt = if fixed {
            tau
        } else {
            0.9 * bt4_admissible_dt(&u, &problem.a)?
        };
        u = step_bt4_fd(&u, &problem.a, dt).context("fourth-order step")?;
        times.push(times.last().unwrap() + dt);
        energies.push(energy(&u)?);
        masses.push(u.iter().map(Density::mass).sum());
        states.push(u.clone());
    }
    write_snapshots(w, &times, &states, &config.snapshot_times)?;
    w.series(
        "series.csv",
        &[("t", &times), ("energy", &energies), ("mass", &masses)],
    )?;
    let drift = masses
        .iter()
        .map(|m| (m - masses[0]).abs())
        .fold(0.0, f64::max);
    let rise = energies
        .windows(2)
        .map(|e| e[1] - e[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        CheckResult::info(
            "mass_conserved",
            drift <= 1e-12,
            1e-12 - drift,
            0.0,
            format!("max drift {drift:.3e}"),
        ),
        CheckResult::info(
            "energy_monotone",
            rise <= 0.0,
            -rise,
            0.0,
            format!("largest per-step energy change {rise:.3e}"),
        ),
    ])
}

/// The requested label closest to `t`.
fn label_for(t: f64, requested: &[f64]) -> String {
    let best = requested
        .iter()
        .copied()
        .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
        .unwrap_or(t);
    time_label(best)
}

fn skt_joint(config: &ScenarioConfig, w: &mut Writer) -> Result<Vec<CheckResult>> {
    let skt = config.skt_config();
    let run = run_skt_scenario(&skt).context("joint-density run")?;
    let mut labels = skt.snapshot_times.clone();
    labels.extend([0.0, skt.t_final]);
    for ((t, p), (_, m)) in run.snapshots.iter().zip(&run.marginals) {
        let l = label_for(*t, &labels);
        w.joint(&format!("p_t{l}.csv"), p)?;
        w.marginals(&format!("marginals_t{l}.csv"), m)?;
    }
    let rec = &run.record;
    w.series("entropy.csv", &[("t", &rec.times), ("H_rel", &rec.entropy)])?;
    w.series(
        "band_mass.csv",
        &[("t", &rec.times), ("band_mass", &rec.series["band_mass"])],
    )?;
    Ok(rec.checks.clone())
}

fn skt_decoupled(config: &ScenarioConfig, w: &mut Writer) -> Result<Vec<CheckResult>> {
    let skt = config.skt_config();
    let variant = config.variant.unwrap_or(DecoupledVariant::Quadratic);
    let report =
        compare_correlated_vs_decoupled(&skt, variant).context("joint vs decoupled run")?;
    w.series("gap.csv", &[("t", &report.times), ("gap", &report.gap)])?;
    w.marginals("joint_marginals_final.csv", &report.joint_final)?;
    w.marginals("decoupled_final.csv", &report.decoupled_final)?;
    let final_gap = *report.gap.last().expect("nonempty");
    Ok(vec![
        CheckResult::info(
            "initial_gap",
            report.gap[0] <= 1e-6,
            1e-6 - report.gap[0],
            0.0,
            "marginals of the product",
        ),
        CheckResult::info(
            "final_gap",
            true,
            final_gap,
            0.0,
            format!("reported only: L1 gap {final_gap:.3e}"),
        ),
    ])
}
