//! Runge-Kutta time advancement of the projected semi-discrete system,
//! Butcher-tableau algebra with the symplecticity defect, and the implicit
//! (Gauss midpoint) solve by fixed-point iteration.
//!
//! Each step records an energy/helicity budget: the per-stage quadrature
//! of the spatial production terms, and the temporal residual that closes
//! the balance,
//!   Δe = dt Σ b_i <U_i, f(U_i)> + resid_time,
//! so that conservation errors are attributable to space or time.

use crate::convect::{self, ConvectiveForm};
use crate::error::{Error, Result};
use crate::field::{Ops, SpectralVelocity};
use crate::grid::DerivativeScheme;
use crate::scenario::EulerForcing;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableauKind {
    Explicit,
    Implicit,
}

/// Runge-Kutta coefficients a_ij, b_i.
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub label: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub kind: TableauKind,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Classical fourth-order scheme.
    pub fn rk4() -> Self {
        Self::validated(
            "rk4",
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        )
        .unwrap()
    }

    /// One-stage Gauss (implicit midpoint); symplectic.
    pub fn gauss1() -> Self {
        Self::validated("gauss1", vec![vec![0.5]], vec![1.0]).unwrap()
    }

    /// Explicit Euler.
    pub fn euler() -> Self {
        Self::validated("euler", vec![vec![0.0]], vec![1.0]).unwrap()
    }

    pub fn builtin(token: &str) -> Option<Self> {
        match token {
            "rk4" => Some(Self::rk4()),
            "gauss1" => Some(Self::gauss1()),
            "euler" => Some(Self::euler()),
            _ => None,
        }
    }

    /// Builds and validates a tableau: square a, matching b, Σb = 1.
    pub fn validated(label: &str, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidTableau {
                msg: format!("a must be {s}x{s} to match b"),
                line: None,
            });
        }
        let bsum: f64 = b.iter().sum();
        if (bsum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTableau {
                msg: format!("weights must sum to 1, got {bsum}"),
                line: None,
            });
        }
        let explicit = a.iter().enumerate().all(|(i, row)| row[i..].iter().all(|&v| v == 0.0));
        Ok(ButcherTableau {
            label: label.to_string(),
            a,
            b,
            kind: if explicit { TableauKind::Explicit } else { TableauKind::Implicit },
        })
    }

    /// Parses the plain-text tableau format: first line s, next s lines the
    /// rows of a, last line b. Tokens are decimal or rational (p/q).
    pub fn parse(label: &str, text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::InvalidTableau { msg: "empty tableau file".into(), line: None });
        }
        let (sline, stext) = lines[0];
        let s: usize = stext.parse().map_err(|_| Error::InvalidTableau {
            msg: format!("expected stage count, got '{stext}'"),
            line: Some(sline),
        })?;
        if lines.len() != s + 2 {
            return Err(Error::InvalidTableau {
                msg: format!("expected {} data lines after the stage count, got {}", s + 1, lines.len() - 1),
                line: Some(lines.last().map(|(l, _)| *l).unwrap_or(sline)),
            });
        }
        let parse_row = |lineno: usize, text: &str| -> Result<Vec<f64>> {
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|tok| parse_number(tok).ok_or(()))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidTableau {
                    msg: format!("unparsable numeric token in '{text}'"),
                    line: Some(lineno),
                })?;
            if vals.len() != s {
                return Err(Error::InvalidTableau {
                    msg: format!("expected {s} entries, got {}", vals.len()),
                    line: Some(lineno),
                });
            }
            Ok(vals)
        };
        let mut a = Vec::with_capacity(s);
        for i in 0..s {
            let (lineno, text) = lines[1 + i];
            a.push(parse_row(lineno, text)?);
        }
        let (bline, btext) = lines[s + 1];
        let b = parse_row(bline, btext)?;
        Self::validated(label, a, b).map_err(|e| match e {
            Error::InvalidTableau { msg, .. } => Error::InvalidTableau { msg, line: Some(bline) },
            other => other,
        })
    }

    /// Symplecticity defect g_ij = b_i a_ij + b_j a_ji - b_i b_j; zero for
    /// methods that preserve all quadratic invariants.
    pub fn symplecticity_defect(&self) -> (Vec<Vec<f64>>, f64) {
        let s = self.stages();
        let mut g = vec![vec![0.0; s]; s];
        let mut max = 0.0f64;
        for i in 0..s {
            for j in 0..s {
                let v = self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j];
                g[i][j] = v;
                max = max.max(v.abs());
            }
        }
        (g, max)
    }

    pub fn is_symplectic(&self) -> bool {
        self.symplecticity_defect().1 < 1e-14
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    if let Some((p, q)) = tok.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        if q == 0.0 {
            return None;
        }
        Some(p / q)
    } else {
        tok.parse().ok()
    }
}

/// One dense Runge-Kutta step of dy/dt = f(y) for small ODE systems; the
/// reference semantics of a tableau, independent of the spectral solver.
/// Implicit tableaux are solved by fixed-point sweeps to `tol`.
pub fn dense_step(
    tableau: &ButcherTableau,
    y: &[f64],
    dt: f64,
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let s = tableau.stages();
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = vec![f(y); s];
    match tableau.kind {
        TableauKind::Explicit => {
            for i in 0..s {
                let mut yi = y.to_vec();
                for (j, kj) in k.iter().enumerate().take(i) {
                    for d in 0..dim {
                        yi[d] += dt * tableau.a[i][j] * kj[d];
                    }
                }
                k[i] = f(&yi);
            }
        }
        TableauKind::Implicit => {
            let mut converged = false;
            for _ in 0..max_iter {
                let mut next = Vec::with_capacity(s);
                let mut delta = 0.0f64;
                for i in 0..s {
                    let mut yi = y.to_vec();
                    for (j, kj) in k.iter().enumerate() {
                        for d in 0..dim {
                            yi[d] += dt * tableau.a[i][j] * kj[d];
                        }
                    }
                    let ki = f(&yi);
                    for d in 0..dim {
                        delta = delta.max((ki[d] - k[i][d]).abs());
                    }
                    next.push(ki);
                }
                k = next;
                if delta < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::ImplicitNoConvergence { residual: f64::NAN, iters: max_iter });
            }
        }
    }
    let mut out = y.to_vec();
    for (i, ki) in k.iter().enumerate() {
        for d in 0..dim {
            out[d] += dt * tableau.b[i] * ki[d];
        }
    }
    Ok(out)
}

/// Per-step conservation bookkeeping. Production entries are already
/// integrated over the step (quadrature Σ b_i · rate_i · dt).
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub dt: f64,
    pub implicit_iters: usize,
    /// Energy and helicity after the step.
    pub e: f64,
    pub h: f64,
    pub de: f64,
    pub dh: f64,
    /// Spatial convective production (zero for conserving forms).
    pub conv_e: f64,
    pub conv_h: f64,
    /// Viscous contribution.
    pub visc_e: f64,
    pub visc_h: f64,
    /// Forcing contribution (zero without forcing).
    pub force_e: f64,
    pub force_h: f64,
    /// Temporal error: what the RK quadrature fails to account for.
    pub resid_time_e: f64,
    pub resid_time_h: f64,
}

struct StageSample {
    e_dot: f64,
    h_dot: f64,
    conv_e: f64,
    conv_h: f64,
    visc_e: f64,
    visc_h: f64,
}

/// Owns the spatial context and advances the state in time.
pub struct Integrator {
    pub ops: Ops,
    pub form: ConvectiveForm,
    pub tableau: ButcherTableau,
    pub nu: f64,
    pub forcing: Option<EulerForcing>,
    pub gauss_tol: f64,
    pub gauss_max_iter: usize,
    /// Simulation clock, advanced by `step`.
    pub t: f64,
    pub step_count: u64,
}

impl Integrator {
    pub fn new(ops: Ops, form: ConvectiveForm, tableau: ButcherTableau, nu: f64) -> Result<Self> {
        form.check_scheme(ops.grid().scheme)?;
        Ok(Integrator {
            ops,
            form,
            tableau,
            nu,
            forcing: None,
            gauss_tol: 1e-13,
            gauss_max_iter: 200,
            t: 0.0,
            step_count: 0,
        })
    }

    pub fn with_forcing(mut self, forcing: EulerForcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    /// Projected right-hand side f(u) = P(-N(u)) + ν L u, with the
    /// low-wavenumber modes overridden by the truncated Euler subsystem
    /// (rotational form, computed solely from modes |k| <= k_F) when
    /// forcing is active.
    pub fn rhs(&mut self, u: &SpectralVelocity) -> Result<SpectralVelocity> {
        let mut f = self.rhs_unforced(u)?;
        if let Some(forcing) = self.forcing.as_mut() {
            forcing.truncated_rhs_into(u, &mut f)?;
        }
        Ok(f)
    }

    /// The ordinary viscous rhs with no forcing override.
    pub fn rhs_unforced(&mut self, u: &SpectralVelocity) -> Result<SpectralVelocity> {
        let mut f = convect::nonlinear_term(&mut self.ops, u, self.form)?;
        self.ops.project_scaled(&mut f, -1.0);
        if self.nu != 0.0 {
            self.ops.add_scaled_laplacian(self.nu, u, &mut f);
        }
        Ok(f)
    }

    /// Right-hand side plus the stage's conservation bookkeeping, sharing
    /// the single nonlinear-term evaluation. The curl-weighted inner
    /// products are fused passes; no vorticity field is materialized.
    fn rhs_budget(&mut self, u: &SpectralVelocity) -> Result<(SpectralVelocity, StageSample)> {
        let mut f = convect::nonlinear_term(&mut self.ops, u, self.form)?;
        self.ops.project_scaled(&mut f, -1.0);
        let (conv_e, curl_rate, k2e, k2h) = self.ops.budget_rates(u, &f);
        let conv_h = 2.0 * curl_rate;
        let (mut visc_e, mut visc_h) = (0.0, 0.0);
        if self.nu != 0.0 {
            visc_e = -self.nu * k2e;
            visc_h = -2.0 * self.nu * k2h;
            self.ops.add_scaled_laplacian(self.nu, u, &mut f);
        }
        let (mut e_dot, mut h_dot) = (conv_e + visc_e, conv_h + visc_h);
        if let Some(forcing) = self.forcing.as_mut() {
            forcing.truncated_rhs_into(u, &mut f)?;
            e_dot = self.ops.inner(u, &f);
            h_dot = 2.0 * self.ops.inner_curl(u, &f);
        }
        Ok((f, StageSample { e_dot, h_dot, conv_e, conv_h, visc_e, visc_h }))
    }

    /// One time step; dispatches on the tableau kind.
    pub fn step(&mut self, u: &mut SpectralVelocity, dt: f64) -> Result<StepReport> {
        let report = match self.tableau.kind {
            TableauKind::Explicit => self.step_explicit(u, dt),
            TableauKind::Implicit => self.step_implicit(u, dt),
        }?;
        self.t += dt;
        self.step_count += 1;
        Ok(report)
    }

    /// Explicit stepping with per-stage projection (the rhs is projected,
    /// so stage states built from projected data stay solenoidal).
    fn step_explicit(&mut self, u: &mut SpectralVelocity, dt: f64) -> Result<StepReport> {
        if dt <= 0.0 {
            return Err(Error::Infeasible(format!("dt = {dt} must be positive")));
        }
        let s = self.tableau.stages();
        let e0 = self.ops.energy(u);
        let h0 = self.ops.helicity(u);

        let mut ks: Vec<SpectralVelocity> = Vec::with_capacity(s);
        let mut samples: Vec<StageSample> = Vec::with_capacity(s);
        let mut ui = u.clone();
        for i in 0..s {
            let terms: Vec<(f64, &SpectralVelocity)> = ks
                .iter()
                .enumerate()
                .filter(|(j, _)| self.tableau.a[i][*j] != 0.0)
                .map(|(j, kj)| (dt * self.tableau.a[i][j], kj))
                .collect();
            ui.assign_lin(u, &terms);
            let (fi, sample) = self.rhs_budget(&ui)?;
            samples.push(sample);
            ks.push(fi);
        }
        let terms: Vec<(f64, &SpectralVelocity)> =
            ks.iter().enumerate().map(|(i, ki)| (dt * self.tableau.b[i], ki)).collect();
        ui.assign_lin(u, &terms);
        std::mem::swap(u, &mut ui);
        self.ops.project(u);

        self.finish_report(u, dt, 0, e0, h0, &samples)
    }

    /// Implicit stepping by fixed-point sweeps over the coupled stages.
    /// The one-stage Gauss method uses the reflection update
    /// u' = 2U - u, which preserves quadratic invariants exactly at
    /// convergence.
    pub fn step_implicit(&mut self, u: &mut SpectralVelocity, dt: f64) -> Result<StepReport> {
        let s = self.tableau.stages();
        let tol = self.gauss_tol;
        let e0 = self.ops.energy(u);
        let h0 = self.ops.helicity(u);

        let f0 = self.rhs(u)?;
        let mut ks: Vec<SpectralVelocity> = vec![f0; s];
        let mut iters = 0usize;
        let mut residual = f64::INFINITY;
        let mut ui = u.clone();
        while iters < self.gauss_max_iter {
            let mut delta = 0.0f64;
            let mut next: Vec<SpectralVelocity> = Vec::with_capacity(s);
            for i in 0..s {
                let terms: Vec<(f64, &SpectralVelocity)> = ks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| self.tableau.a[i][*j] != 0.0)
                    .map(|(j, kj)| (dt * self.tableau.a[i][j], kj))
                    .collect();
                ui.assign_lin(u, &terms);
                let fi = self.rhs(&ui)?;
                delta = delta.max(dt * fi.max_diff(&ks[i]));
                next.push(fi);
            }
            ks = next;
            iters += 1;
            residual = delta;
            if delta < tol {
                break;
            }
        }
        if residual >= tol {
            return Err(Error::ImplicitNoConvergence { residual, iters });
        }

        // Converged stage states; budget samples share those rhs evaluations.
        let mut samples: Vec<StageSample> = Vec::with_capacity(s);
        let mut stages: Vec<SpectralVelocity> = Vec::with_capacity(s);
        for i in 0..s {
            let terms: Vec<(f64, &SpectralVelocity)> = ks
                .iter()
                .enumerate()
                .filter(|(j, _)| self.tableau.a[i][*j] != 0.0)
                .map(|(j, kj)| (dt * self.tableau.a[i][j], kj))
                .collect();
            ui.assign_lin(u, &terms);
            let (fi, sample) = self.rhs_budget(&ui)?;
            ks[i] = fi;
            samples.push(sample);
            stages.push(ui.clone());
        }

        let midpoint = s == 1 && self.tableau.a[0][0] == 0.5 && self.tableau.b[0] == 1.0;
        if midpoint {
            // u' = 2U - u: algebraically identical at convergence, but the
            // quadratic-invariant identity then holds exactly.
            let mut next = stages.pop().unwrap();
            next.scale(2.0);
            next.axpy(-1.0, u);
            *u = next;
        } else {
            for (i, ki) in ks.iter().enumerate() {
                u.axpy(dt * self.tableau.b[i], ki);
            }
        }
        self.ops.project(u);

        self.finish_report(u, dt, iters, e0, h0, &samples)
    }

    fn finish_report(
        &mut self,
        u: &SpectralVelocity,
        dt: f64,
        implicit_iters: usize,
        e0: f64,
        h0: f64,
        samples: &[StageSample],
    ) -> Result<StepReport> {
        let e1 = self.ops.energy(u);
        if !e1.is_finite() || !u.is_finite() {
            return Err(Error::NumericalBlowup { time: self.t, step: self.step_count });
        }
        let h1 = self.ops.helicity(u);
        let b = &self.tableau.b;
        let quad = |f: &dyn Fn(&StageSample) -> f64| -> f64 {
            dt * samples.iter().zip(b.iter()).map(|(s, &bi)| bi * f(s)).sum::<f64>()
        };
        let conv_e = quad(&|s| s.conv_e);
        let conv_h = quad(&|s| s.conv_h);
        let visc_e = quad(&|s| s.visc_e);
        let visc_h = quad(&|s| s.visc_h);
        let tote = quad(&|s| s.e_dot);
        let toth = quad(&|s| s.h_dot);
        Ok(StepReport {
            dt,
            implicit_iters,
            e: e1,
            h: h1,
            de: e1 - e0,
            dh: h1 - h0,
            conv_e,
            conv_h,
            visc_e,
            visc_h,
            force_e: tote - conv_e - visc_e,
            force_h: toth - conv_h - visc_h,
            resid_time_e: (e1 - e0) - tote,
            resid_time_h: (h1 - h0) - toth,
        })
    }

    /// CFL step size dt = cfl · h / max|u|, capped at dt_max.
    pub fn cfl_dt(&mut self, u: &SpectralVelocity, cfl: f64, dt_max: f64) -> f64 {
        let umax = self.ops.max_velocity(u);
        if umax <= f64::MIN_POSITIVE {
            dt_max
        } else {
            (cfl * self.ops.grid().h() / umax).min(dt_max)
        }
    }

    /// True when the active scheme is the staggered one.
    pub fn staggered(&self) -> bool {
        self.ops.grid().scheme == DerivativeScheme::Fd2Staggered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DealiasPolicy, GridSpec};
    use crate::scenario;

    #[test]
    fn builtin_tableaux_and_defects() {
        let (g, max) = ButcherTableau::gauss1().symplecticity_defect();
        assert_eq!(g, vec![vec![0.0]]);
        assert_eq!(max, 0.0);

        let (g, _) = ButcherTableau::euler().symplecticity_defect();
        assert_eq!(g, vec![vec![-1.0]]);

        // Classical RK4: defect matrix nonzero with max |g_ij| = 1/9.
        let (_, max) = ButcherTableau::rk4().symplecticity_defect();
        assert!((max - 1.0 / 9.0).abs() < 1e-15);
        assert!(!ButcherTableau::rk4().is_symplectic());
        assert!(ButcherTableau::gauss1().is_symplectic());
    }

    #[test]
    fn tableau_parsing_rationals_and_errors() {
        let text = "2\n1/4 0\n1/2 1/4\n1/2 1/2\n";
        let t = ButcherTableau::parse("file", text).unwrap();
        assert_eq!(t.kind, TableauKind::Implicit);
        assert_eq!(t.a[1][0], 0.5);

        // Inconsistent weights rejected.
        let bad = "1\n0\n0.9\n";
        match ButcherTableau::parse("bad", bad) {
            Err(Error::InvalidTableau { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("expected tableau error, got {:?}", other.map(|t| t.label)),
        }

        // Garbled token carries its line number.
        let bad2 = "1\nzz\n1\n";
        match ButcherTableau::parse("bad2", bad2) {
            Err(Error::InvalidTableau { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("expected tableau error, got {:?}", other.map(|t| t.label)),
        }
    }

    #[test]
    fn viscous_decay_matches_exact_exponential() {
        // Single mode, zero nonlinearity (rot form on a Beltrami mode has
        // N = 0), so the dynamics is du/dt = -ν k² u.
        let nu = 0.05;
        let grid = GridSpec::new(16, crate::grid::DerivativeScheme::Spectral, DealiasPolicy::None).unwrap();
        let ops = Ops::new(grid).unwrap();
        let u0 = scenario::abc_field(&ops, &scenario::AbcSpec::unit(3)).unwrap();
        let k2 = 9.0;

        let run = |dt: f64| -> f64 {
            let grid = GridSpec::new(16, crate::grid::DerivativeScheme::Spectral, DealiasPolicy::None).unwrap();
            let mut integ = Integrator::new(
                Ops::new(grid).unwrap(),
                ConvectiveForm::Rotational,
                ButcherTableau::rk4(),
                nu,
            )
            .unwrap();
            let mut u = u0.clone();
            let steps = (0.5 / dt).round() as usize;
            for _ in 0..steps {
                integ.step(&mut u, dt).unwrap();
            }
            let e_exact = integ.ops.energy(&u0) * (-2.0 * nu * k2 * 0.5).exp();
            (integ.ops.energy(&u) - e_exact).abs()
        };
        let err1 = run(0.05);
        let err2 = run(0.025);
        // Global error O(dt^4): halving dt gains ~16x.
        let ratio = err1 / err2;
        assert!(ratio > 10.0 && ratio < 24.0, "RK4 convergence ratio {}", ratio);
    }

    #[test]
    fn beltrami_state_is_steady_euler_solution() {
        let grid = GridSpec::new(16, crate::grid::DerivativeScheme::Spectral, DealiasPolicy::None).unwrap();
        let mut integ = Integrator::new(
            Ops::new(grid).unwrap(),
            ConvectiveForm::Rotational,
            ButcherTableau::rk4(),
            0.0,
        )
        .unwrap();
        let u = scenario::abc_field(&integ.ops, &scenario::AbcSpec::unit(4)).unwrap();
        let f = integ.rhs(&u).unwrap();
        assert!(f.max_coeff_norm() < 1e-12, "single-mode ABC is steady under Euler");
        // And the rhs of any state is divergence-free.
        let div = integ.ops.divergence(&f).unwrap();
        let max = div.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max < 1e-13);
    }

    #[test]
    fn gauss_conserves_quadratics_on_skew_linear_system() {
        // dy/dt = S y with S skew-symmetric: |y|² is invariant.
        let s_mat = [
            [0.0, 1.3, -0.4, 0.2, 0.0, -1.1],
            [-1.3, 0.0, 0.7, -0.3, 0.5, 0.0],
            [0.4, -0.7, 0.0, 0.9, -0.2, 0.3],
            [-0.2, 0.3, -0.9, 0.0, 1.0, -0.6],
            [0.0, -0.5, 0.2, -1.0, 0.0, 0.8],
            [1.1, 0.0, -0.3, 0.6, -0.8, 0.0],
        ];
        let f = move |y: &[f64]| -> Vec<f64> {
            (0..6).map(|i| (0..6).map(|j| s_mat[i][j] * y[j]).sum()).collect()
        };
        let y0: Vec<f64> = vec![1.0, -0.5, 0.3, 0.8, -0.2, 0.6];
        let n0: f64 = y0.iter().map(|v| v * v).sum();

        let gauss = ButcherTableau::gauss1();
        let mut y = y0.clone();
        for _ in 0..1000 {
            y = dense_step(&gauss, &y, 0.01, &f, 1e-15, 500).unwrap();
        }
        let n1: f64 = y.iter().map(|v| v * v).sum();
        assert!((n1 - n0).abs() <= 1e-12 * n0, "gauss drift {}", (n1 - n0).abs() / n0);

        // RK4 loses |y|² monotonically for small dt.
        let rk4 = ButcherTableau::rk4();
        let mut y = y0.clone();
        let mut prev = n0;
        for _ in 0..200 {
            y = dense_step(&rk4, &y, 0.05, &f, 1e-15, 500).unwrap();
            let n: f64 = y.iter().map(|v| v * v).sum();
            assert!(n < prev, "rk4 |y|^2 must decay monotonically");
            prev = n;
        }
    }

    #[test]
    fn cfl_dt_scaling() {
        let grid = GridSpec::new(16, crate::grid::DerivativeScheme::Spectral, DealiasPolicy::None).unwrap();
        let mut integ = Integrator::new(
            Ops::new(grid).unwrap(),
            ConvectiveForm::Rotational,
            ButcherTableau::rk4(),
            0.0,
        )
        .unwrap();
        let zero = SpectralVelocity::zeros(16);
        assert_eq!(integ.cfl_dt(&zero, 0.5, 0.1), 0.1);

        let u = scenario::abc_field(&integ.ops, &scenario::AbcSpec::unit(2)).unwrap();
        let dt1 = integ.cfl_dt(&u, 0.5, 1e9);
        let mut u2 = u.clone();
        u2.scale(2.0);
        let dt2 = integ.cfl_dt(&u2, 0.5, 1e9);
        assert!((dt1 / dt2 - 2.0).abs() < 1e-12, "doubling u halves dt");
    }

    #[test]
    fn mode_zero_momentum_invariant() {
        let grid = GridSpec::new(16, crate::grid::DerivativeScheme::Spectral, DealiasPolicy::None).unwrap();
        let mut integ =
            Integrator::new(Ops::new(grid).unwrap(), ConvectiveForm::SkewSymmetric, ButcherTableau::rk4(), 0.0)
                .unwrap();
        let mut u = scenario::abc_pair(&integ.ops, 4, 6, 1.0).unwrap();
        for _ in 0..5 {
            let dt = integ.cfl_dt(&u, 0.5, 1.0);
            integ.step(&mut u, dt).unwrap();
        }
        let m = u.mean_mode();
        for c in m {
            assert!(c.norm() < 1e-13, "mean momentum drifted: {}", c.norm());
        }
    }
}
