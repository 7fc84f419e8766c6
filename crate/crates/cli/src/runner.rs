//! The run loop: builds the state from config, advances with CFL-based
//! steps, writes the time series, spectra, snapshots, and a final summary
//! with the global conservation numbers and normalized budgets.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use helispec_core::rk::Integrator;
use helispec_core::scenario::{abc_pair, forcing_seed, EulerForcing};
use helispec_core::spectra::{self, SpectraSample, SpectrumSeries};
use helispec_core::{DealiasPolicy, Error as CoreError, Ops, SpectralVelocity};

use crate::config::{InitialState, RunConfig};
use crate::output::{write_spectra, SeriesWriter};
use crate::snapshot::{self, SnapshotHeader};

/// Exit status classification for the process-level codes.
#[derive(Debug)]
pub enum RunOutcome {
    Finished,
    Blowup { time: f64, step: u64 },
    ImplicitStall { residual: f64, iters: usize },
}

pub struct RunArtifacts {
    pub outcome: RunOutcome,
    pub out_dir: PathBuf,
}

pub fn run(config: &RunConfig) -> Result<RunArtifacts> {
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating output dir {}", config.out_dir.display()))?;
    // Self-describing run: the resolved configuration is written back.
    std::fs::write(config.out_dir.join("resolved.cfg"), config.kv.canonical())?;

    let ops = Ops::new(config.grid.clone()).map_err(|e| anyhow!("{e}"))?;

    // Initial state.
    let (mut u, mut t_start, mut step_start) = match &config.ic {
        InitialState::AbcPair { k1, k2, energy } => {
            (abc_pair(&ops, *k1, *k2, *energy).map_err(|e| anyhow!("{e}"))?, 0.0, 0)
        }
        InitialState::ForcedSeed { k_f, h_rel, energy, seed } => (
            forcing_seed(&ops, *k_f, *h_rel, *energy, *seed).map_err(|e| anyhow!("{e}"))?,
            0.0,
            0,
        ),
        InitialState::Snapshot(path) => {
            let (header, u) = snapshot::read(path)?;
            if header.grid != config.grid {
                return Err(anyhow!(
                    "snapshot grid ({:?}) does not match configured grid ({:?})",
                    header.grid,
                    config.grid
                ));
            }
            (u, header.time, header.step)
        }
    };
    ops.apply_mask(&mut u);
    ops.project(&mut u);

    let mut integ =
        Integrator::new(ops, config.form, config.tableau.clone(), config.nu).map_err(|e| anyhow!("{e}"))?;
    integ.gauss_tol = config.gauss_tol;
    integ.gauss_max_iter = config.gauss_max_iter;
    integ.t = t_start;
    integ.step_count = step_start;
    if let Some(kf) = config.forcing_kf {
        let f = EulerForcing::new(&integ.ops, kf).map_err(|e| anyhow!("{e}"))?;
        integ.forcing = Some(f);
    }

    let e0 = integ.ops.energy(&u);
    let h0 = integ.ops.helicity(&u);
    let t0 = 1.0 / (e0.sqrt() * config.k_char);
    let t_final = t_start + config.t_end * t0;
    let subsystem0 = integ.forcing.as_ref().map(|f| f.subsystem_invariants(&integ.ops, &u));

    let mut series = SeriesWriter::create(&config.out_dir.join("series.csv"), &config.hash)?;
    let nshell = spectra::shell_count(config.grid.n);
    let mut accum = SpectrumSeries::new(nshell);

    let staggered = integ.staggered();
    let mut spatial_e_max = 0.0f64;
    let mut spatial_h_max = 0.0f64;
    let mut last_good: Option<(f64, u64, SpectralVelocity)> = None;

    let write_snapshot = |tag: &str, t: f64, step: u64, state: &SpectralVelocity| -> Result<()> {
        let header = SnapshotHeader {
            grid: config.grid.clone(),
            time: t,
            step,
            config_hash: config.hash.clone(),
        };
        snapshot::write(&config.out_dir.join(format!("snap_{tag}.hsnp")), &header, state)
    };

    let outcome = loop {
        if integ.t >= t_final {
            break RunOutcome::Finished;
        }
        let dt = integ.cfl_dt(&u, config.cfl, config.dt_max).min(t_final - integ.t);
        let report = match integ.step(&mut u, dt) {
            Ok(r) => r,
            Err(CoreError::NumericalBlowup { time, step }) => {
                if let Some((t, s, state)) = &last_good {
                    write_snapshot("lastgood", *t, *s, state)?;
                }
                break RunOutcome::Blowup { time, step };
            }
            Err(CoreError::ImplicitNoConvergence { residual, iters }) => {
                if let Some((t, s, state)) = &last_good {
                    write_snapshot("lastgood", *t, *s, state)?;
                }
                break RunOutcome::ImplicitStall { residual, iters };
            }
            Err(e) => return Err(anyhow!("{e}")),
        };
        spatial_e_max = spatial_e_max.max((report.conv_e / dt).abs());
        spatial_h_max = spatial_h_max.max((report.conv_h / dt).abs());

        let k = integ.step_count;
        if k % config.series_every as u64 == 0 {
            let (hv, hc) = if staggered { integ.ops.staggered_helicity(&u) } else { (report.h, report.h) };
            series.row(
                integ.t,
                report.e,
                report.h,
                hv,
                hc,
                -report.visc_e / dt,
                -report.visc_h / dt,
                dt,
                report.implicit_iters,
            )?;
        }
        if k % config.spectra_every as u64 == 0 {
            let sample = collect_sample(&mut integ, &u)?;
            let eq = equilibrium_curves(&integ, &u);
            write_spectra(
                &config.out_dir.join(format!("spectra_{k:08}.csv")),
                &config.hash,
                integ.t,
                &sample,
                eq.as_ref(),
                None,
            )?;
            accum.accumulate(&sample);
        }
        if config.snapshot_every > 0 && k % config.snapshot_every as u64 == 0 {
            write_snapshot(&format!("{k:08}"), integ.t, k, &u)?;
            last_good = Some((integ.t, k, u.clone()));
        } else if k % 64 == 0 {
            last_good = Some((integ.t, k, u.clone()));
        }
        t_start = integ.t;
        step_start = k;
    };

    // Final artifacts.
    if matches!(outcome, RunOutcome::Finished) {
        write_snapshot("final", integ.t, integ.step_count, &u)?;
        let mean = accum.mean();
        if accum.samples > 0 {
            let res_e = spectra::stationary_residual(&mean.te, &mean.de);
            let res_h = spectra::stationary_residual(&mean.th, &mean.dh);
            write_spectra(
                &config.out_dir.join("spectra_mean.csv"),
                &config.hash,
                integ.t,
                &mean,
                equilibrium_curves(&integ, &u).as_ref(),
                Some(&(res_e, res_h)),
            )?;
        }
        write_summary(config, &mut integ, &u, e0, h0, t0, subsystem0, spatial_e_max, spatial_h_max, &mean)?;
    }
    series.flush()?;
    let _ = (t_start, step_start);
    Ok(RunArtifacts { outcome, out_dir: config.out_dir.clone() })
}

/// Full shell-spectra sample: E, H, transfers, dissipation and the forcing
/// input spectra (difference between the applied and the standard rhs).
pub fn collect_sample(integ: &mut Integrator, u: &SpectralVelocity) -> Result<SpectraSample> {
    let nshell = spectra::shell_count(u.n);
    let mut s = SpectraSample::zeros(nshell);
    let (e, h) = spectra::shell_spectra(&integ.ops, u);
    s.e = e;
    s.h = h;
    let (te, th) =
        spectra::transfer_spectra(&mut integ.ops, u, integ.form).map_err(|e| anyhow!("{e}"))?;
    s.te = te;
    s.th = th;
    let (de, dh) = spectra::dissipation_spectra(&integ.ops, u, integ.nu);
    s.de = de;
    s.dh = dh;
    if integ.forcing.is_some() {
        let fa = integ.rhs(u).map_err(|e| anyhow!("{e}"))?;
        let mut fs = integ.rhs_unforced(u).map_err(|e| anyhow!("{e}"))?;
        fs.scale(-1.0);
        let mut diff = fa;
        diff.axpy(1.0, &fs);
        let (pe, ph) = spectra::exchange_spectra(&integ.ops, u, &diff);
        s.phi_e = pe;
        s.phi_h = ph;
    }
    Ok(s)
}

/// Kraichnan equilibrium curves when the run is a spherical truncation.
fn equilibrium_curves(integ: &Integrator, u: &SpectralVelocity) -> Option<(Vec<f64>, Vec<f64>)> {
    match integ.ops.grid().dealias {
        DealiasPolicy::Sphere(k_max) => {
            let e = integ.ops.energy(u);
            let h = integ.ops.helicity(u);
            spectra::absolute_equilibrium(e, h, k_max.floor() as usize)
                .ok()
                .map(|(eq_e, eq_h, _, _)| (eq_e, eq_h))
        }
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn write_summary(
    config: &RunConfig,
    integ: &mut Integrator,
    u: &SpectralVelocity,
    e0: f64,
    h0: f64,
    t0: f64,
    subsystem0: Option<(f64, f64)>,
    spatial_e_max: f64,
    spatial_h_max: f64,
    mean: &SpectraSample,
) -> Result<()> {
    let e = integ.ops.energy(u);
    let h = integ.ops.helicity(u);
    let mut text = String::new();
    text.push_str(&format!("config = {}\n", config.hash));
    text.push_str(&format!("preset = {}\n", config.preset.as_deref().unwrap_or("-")));
    text.push_str(&format!(
        "grid = {}^3 {} dealias={}\n",
        config.grid.n,
        config.grid.scheme.token(),
        config.grid.dealias.token()
    ));
    text.push_str(&format!(
        "form = {}, tableau = {}, nu = {}, cfl = {}\n",
        config.form.token(),
        config.tableau.label,
        config.nu,
        config.cfl
    ));
    text.push_str(&format!("t_end = {:.6} ({} t0, t0 = {:.6})\n", integ.t, config.t_end, t0));
    text.push_str(&format!("steps = {}\n", integ.step_count));
    text.push_str(&format!("e0 = {e0:.12e}, e = {e:.12e}, |de|/e0 = {:.3e}\n", (e - e0).abs() / e0));
    text.push_str(&format!(
        "h0 = {h0:.12e}, h = {h:.12e}, |dh|/|h0| = {:.3e}\n",
        (h - h0).abs() / h0.abs().max(1e-300)
    ));
    text.push_str(&format!(
        "max spatial productions: energy {spatial_e_max:.3e}, helicity {spatial_h_max:.3e}\n"
    ));

    if let (Some(forcing), Some((ke0, kh0))) = (integ.forcing.as_ref(), subsystem0) {
        let (ke, kh) = forcing.subsystem_invariants(&integ.ops, u);
        let hrel = spectra::relative_helicity(ke, kh, forcing.k_f);
        text.push_str(&format!(
            "forced subsystem: K_e = {ke:.6e} (start {ke0:.6e}), K_h = {kh:.6e} (start {kh0:.6e}), H_rel = {hrel:.4}\n"
        ));
        // Budgets over resolved shells, normalized as in the reference
        // turbulence tables: e/K_e, h/K_h, sum T/eps.
        let kd = config.grid.retained_band();
        let sum_te = spectra::shell_sum(&mean.te, 0, kd);
        let sum_th = spectra::shell_sum(&mean.th, 0, kd);
        let eps_e = spectra::shell_sum(&mean.de, 0, kd);
        let eps_h = spectra::shell_sum(&mean.dh, 0, kd);
        let me = spectra::shell_sum(&mean.e, 0, kd);
        let mh = spectra::shell_sum(&mean.h, 0, kd);
        text.push_str(&format!("budget: e/K_e = {:.4}, h/K_h = {:.4}\n", me / ke, mh / kh));
        text.push_str(&format!(
            "budget: sum T_e / eps_e = {:.4e}, sum T_h / eps_h = {:.4e}\n",
            sum_te / eps_e,
            sum_th / eps_h
        ));
    }
    std::fs::write(config.out_dir.join("summary.txt"), text)?;
    Ok(())
}
