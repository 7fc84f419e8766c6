//! Shell-binned spectra of energy, helicity, their nonlinear transfers and
//! viscous dissipation; absolute-equilibrium reference curves; relative
//! helicity; stationary-balance residuals.

use num_complex::Complex64;

use crate::convect::{self, ConvectiveForm};
use crate::error::{Error, Result};
use crate::field::{Ops, SpectralVelocity};

/// Largest shell index on an n-cube: round(√3 · n/2).
pub fn shell_count(n: usize) -> usize {
    ((3.0f64).sqrt() * (n as f64) / 2.0).round() as usize + 1
}

#[inline]
fn shell_of(kx: i64, ky: i64, kz: i64) -> usize {
    (((kx * kx + ky * ky + kz * kz) as f64).sqrt()).round() as usize
}

/// One evaluation of all shell-binned quantities at a time instant.
#[derive(Debug, Clone)]
pub struct SpectraSample {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    pub te: Vec<f64>,
    pub th: Vec<f64>,
    /// Viscous dissipation spectra 2νk²E, 2νk²H (scheme k2).
    pub de: Vec<f64>,
    pub dh: Vec<f64>,
    /// Forcing input spectra; zero outside the forced shells.
    pub phi_e: Vec<f64>,
    pub phi_h: Vec<f64>,
}

impl SpectraSample {
    pub fn zeros(nshell: usize) -> Self {
        SpectraSample {
            e: vec![0.0; nshell],
            h: vec![0.0; nshell],
            te: vec![0.0; nshell],
            th: vec![0.0; nshell],
            de: vec![0.0; nshell],
            dh: vec![0.0; nshell],
            phi_e: vec![0.0; nshell],
            phi_h: vec![0.0; nshell],
        }
    }
}

/// Accumulates samples for time averaging.
#[derive(Debug, Clone)]
pub struct SpectrumSeries {
    pub nshell: usize,
    pub samples: usize,
    pub sum: SpectraSample,
}

impl SpectrumSeries {
    pub fn new(nshell: usize) -> Self {
        SpectrumSeries { nshell, samples: 0, sum: SpectraSample::zeros(nshell) }
    }

    pub fn accumulate(&mut self, s: &SpectraSample) {
        let add = |dst: &mut [f64], src: &[f64]| {
            for (d, v) in dst.iter_mut().zip(src.iter()) {
                *d += v;
            }
        };
        add(&mut self.sum.e, &s.e);
        add(&mut self.sum.h, &s.h);
        add(&mut self.sum.te, &s.te);
        add(&mut self.sum.th, &s.th);
        add(&mut self.sum.de, &s.de);
        add(&mut self.sum.dh, &s.dh);
        add(&mut self.sum.phi_e, &s.phi_e);
        add(&mut self.sum.phi_h, &s.phi_h);
        self.samples += 1;
    }

    pub fn mean(&self) -> SpectraSample {
        let n = (self.samples.max(1)) as f64;
        let div = |v: &[f64]| v.iter().map(|x| x / n).collect::<Vec<f64>>();
        SpectraSample {
            e: div(&self.sum.e),
            h: div(&self.sum.h),
            te: div(&self.sum.te),
            th: div(&self.sum.th),
            de: div(&self.sum.de),
            dh: div(&self.sum.dh),
            phi_e: div(&self.sum.phi_e),
            phi_h: div(&self.sum.phi_h),
        }
    }
}

/// Shell-binned energy and helicity spectra; their sums reproduce the
/// global invariants exactly (same quadrature).
pub fn shell_spectra(ops: &Ops, u: &SpectralVelocity) -> (Vec<f64>, Vec<f64>) {
    let n = ops.n();
    let ns = shell_count(n);
    let mut e = vec![0.0; ns];
    let mut h = vec![0.0; ns];
    let tab = ops.table();
    let kap = &tab.kappa;
    let kx = &tab.k_exact;
    let i = Complex64::new(0.0, 1.0);
    ops.for_each_mode(|idx, ix, iy, iz| {
        let uc = [u.comps[0].data[idx], u.comps[1].data[idx], u.comps[2].data[idx]];
        let s = shell_of(kx[ix], kx[iy], kx[iz]);
        e[s] += 0.5 * (uc[0].norm_sqr() + uc[1].norm_sqr() + uc[2].norm_sqr());
        let w = [
            i * (kap[iy] * uc[2] - kap[iz] * uc[1]),
            i * (kap[iz] * uc[0] - kap[ix] * uc[2]),
            i * (kap[ix] * uc[1] - kap[iy] * uc[0]),
        ];
        h[s] += (uc[0].conj() * w[0] + uc[1].conj() * w[1] + uc[2].conj() * w[2]).re;
    });
    (e, h)
}

/// Viscous dissipation spectra (2νk²E, 2νk²H) with the scheme's k2 per
/// mode, so the discrete budget closes for emulated schemes too.
pub fn dissipation_spectra(ops: &Ops, u: &SpectralVelocity, nu: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ops.n();
    let ns = shell_count(n);
    let mut de = vec![0.0; ns];
    let mut dh = vec![0.0; ns];
    if nu == 0.0 {
        return (de, dh);
    }
    let tab = ops.table();
    let kap = &tab.kappa;
    let k2t = &tab.k2_eff;
    let kx = &tab.k_exact;
    let i = Complex64::new(0.0, 1.0);
    ops.for_each_mode(|idx, ix, iy, iz| {
        let uc = [u.comps[0].data[idx], u.comps[1].data[idx], u.comps[2].data[idx]];
        let s = shell_of(kx[ix], kx[iy], kx[iz]);
        let k2 = k2t[ix] + k2t[iy] + k2t[iz];
        de[s] += nu * k2 * (uc[0].norm_sqr() + uc[1].norm_sqr() + uc[2].norm_sqr());
        let w = [
            i * (kap[iy] * uc[2] - kap[iz] * uc[1]),
            i * (kap[iz] * uc[0] - kap[ix] * uc[2]),
            i * (kap[ix] * uc[1] - kap[iy] * uc[0]),
        ];
        dh[s] += 2.0
            * nu
            * k2
            * (uc[0].conj() * w[0] + uc[1].conj() * w[1] + uc[2].conj() * w[2]).re;
    });
    (de, dh)
}

/// Per-shell exchange rates of a given rhs contribution f:
/// (Σ Re(û*·f̂), Σ [Re(ŵ*·f̂) + Re(û*·(iκ×f̂))]) — the shell-binned rates
/// dE(k)/dt and dH(k)/dt induced by du/dt = f.
pub fn exchange_spectra(ops: &Ops, u: &SpectralVelocity, f: &SpectralVelocity) -> (Vec<f64>, Vec<f64>) {
    let n = ops.n();
    let ns = shell_count(n);
    let mut pe = vec![0.0; ns];
    let mut ph = vec![0.0; ns];
    let tab = ops.table();
    let kap = &tab.kappa;
    let kx = &tab.k_exact;
    let i = Complex64::new(0.0, 1.0);
    ops.for_each_mode(|idx, ix, iy, iz| {
        let uc = [u.comps[0].data[idx], u.comps[1].data[idx], u.comps[2].data[idx]];
        let fc = [f.comps[0].data[idx], f.comps[1].data[idx], f.comps[2].data[idx]];
        let s = shell_of(kx[ix], kx[iy], kx[iz]);
        pe[s] += (uc[0].conj() * fc[0] + uc[1].conj() * fc[1] + uc[2].conj() * fc[2]).re;
        let w = [
            i * (kap[iy] * uc[2] - kap[iz] * uc[1]),
            i * (kap[iz] * uc[0] - kap[ix] * uc[2]),
            i * (kap[ix] * uc[1] - kap[iy] * uc[0]),
        ];
        let cf = [
            i * (kap[iy] * fc[2] - kap[iz] * fc[1]),
            i * (kap[iz] * fc[0] - kap[ix] * fc[2]),
            i * (kap[ix] * fc[1] - kap[iy] * fc[0]),
        ];
        ph[s] += (w[0].conj() * fc[0] + w[1].conj() * fc[1] + w[2].conj() * fc[2]).re
            + (uc[0].conj() * cf[0] + uc[1].conj() * cf[1] + uc[2].conj() * cf[2]).re;
    });
    (pe, ph)
}

/// Nonlinear transfer spectra T_e(k), T_h(k), with the projected
/// convective term, signed so the Lin equations hold with the solver's rhs.
pub fn transfer_spectra(
    ops: &mut Ops,
    u: &SpectralVelocity,
    form: ConvectiveForm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut np = convect::nonlinear_term(ops, u, form)?;
    np.scale(-1.0);
    ops.project(&mut np);
    Ok(exchange_spectra(ops, u, &np))
}

/// Relative helicity h/(2 k_ref e).
pub fn relative_helicity(e: f64, h: f64, k_ref: f64) -> f64 {
    h / (2.0 * k_ref * e)
}

/// Absolute-equilibrium spectra of the spherically truncated Euler system:
///   E(k) = (4π/α) k² / (1 - (β/α)² k²),
///   H(k) = (8πβ/α²) k⁴ / (1 - (β/α)² k²),
/// with α, β chosen so the shell sums over 1..k_max match the supplied
/// invariants. Returns (E_eq, H_eq, α, β) with arrays indexed by shell.
pub fn absolute_equilibrium(e: f64, h: f64, k_max: usize) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    if !(e > 0.0) {
        return Err(Error::Infeasible(format!("energy must be positive, got {e}")));
    }
    let km = k_max as f64;
    if h.abs() >= 2.0 * km * e {
        return Err(Error::Infeasible(format!(
            "helicity |{h}| at or beyond the maximal 2 k_max e = {}",
            2.0 * km * e
        )));
    }

    // x = (β/α) k_max ∈ (-1, 1); the invariant ratio is monotone in x,
    // so safeguarded bisection is enough.
    let sums = |x: f64| -> (f64, f64) {
        let mut se = 0.0;
        let mut sh = 0.0;
        for k in 1..=k_max {
            let kf = k as f64;
            let d = 1.0 - x * x * kf * kf / (km * km);
            se += kf * kf / d;
            sh += kf.powi(4) / d;
        }
        (se, sh)
    };
    let ratio = |x: f64| -> f64 {
        let (se, sh) = sums(x);
        2.0 * (x / km) * sh / se
    };
    let target = h / e;
    let x = if h == 0.0 {
        0.0
    } else {
        let mut lo = -1.0 + 1e-13;
        let mut hi = 1.0 - 1e-13;
        if ratio(lo) > target || ratio(hi) < target {
            return Err(Error::RootFinding(format!(
                "equilibrium ratio {target} outside attainable range [{}, {}]",
                ratio(lo),
                ratio(hi)
            )));
        }
        let mut x = 0.0;
        for _ in 0..200 {
            x = 0.5 * (lo + hi);
            if ratio(x) < target {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        x
    };

    let (se, _) = sums(x);
    let alpha = 4.0 * std::f64::consts::PI * se / e;
    let beta = alpha * x / km;
    let mut e_eq = vec![0.0; k_max + 1];
    let mut h_eq = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        let kf = k as f64;
        let d = 1.0 - x * x * kf * kf / (km * km);
        e_eq[k] = 4.0 * std::f64::consts::PI / alpha * kf * kf / d;
        h_eq[k] = 8.0 * std::f64::consts::PI * beta / (alpha * alpha) * kf.powi(4) / d;
    }
    Ok((e_eq, h_eq, alpha, beta))
}

/// Stationary-balance residuals r(k) = T(k) - D(k) from time-averaged
/// spectra; meaningful in the unforced range.
pub fn stationary_residual(t: &[f64], d: &[f64]) -> Vec<f64> {
    t.iter().zip(d.iter()).map(|(a, b)| a - b).collect()
}

/// Root-mean-square over an inclusive shell range.
pub fn shell_rms(v: &[f64], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(v.len().saturating_sub(1));
    if lo > hi {
        return 0.0;
    }
    let m = (hi - lo + 1) as f64;
    (v[lo..=hi].iter().map(|x| x * x).sum::<f64>() / m).sqrt()
}

pub fn shell_sum(v: &[f64], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(v.len().saturating_sub(1));
    if lo > hi {
        return 0.0;
    }
    v[lo..=hi].iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DealiasPolicy, DerivativeScheme, GridSpec};
    use crate::scenario::{abc_field, AbcSpec};
    use crate::testutil::random_velocity;

    fn ops(n: usize) -> Ops {
        Ops::new(GridSpec::new(n, DerivativeScheme::Spectral, DealiasPolicy::None).unwrap()).unwrap()
    }

    #[test]
    fn single_abc_mode_concentrates_in_its_shell() {
        let o = ops(16);
        let u = abc_field(&o, &AbcSpec::unit(4)).unwrap();
        let (e, h) = shell_spectra(&o, &u);
        for (k, ek) in e.iter().enumerate() {
            if k == 4 {
                assert!((ek - o.energy(&u)).abs() < 1e-14);
                assert!((h[k] - 2.0 * 4.0 * ek).abs() < 1e-12, "H(4) = 8 E(4)");
            } else {
                assert_eq!(*ek, 0.0);
            }
        }
    }

    #[test]
    fn zero_field_zero_spectra() {
        let o = ops(8);
        let u = SpectralVelocity::zeros(8);
        let (e, h) = shell_spectra(&o, &u);
        assert!(e.iter().all(|&v| v == 0.0) && h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shell_sums_match_global_invariants() {
        let o = ops(16);
        let mut u = random_velocity(16, 3);
        o.project(&mut u);
        let (e, h) = shell_spectra(&o, &u);
        let se: f64 = e.iter().sum();
        let sh: f64 = h.iter().sum();
        assert!((se - o.energy(&u)).abs() <= 1e-12 * se.abs());
        assert!((sh - o.helicity(&u)).abs() <= 1e-12 * sh.abs().max(1.0));
    }

    #[test]
    fn realizability_per_shell() {
        let o = ops(16);
        let mut u = random_velocity(16, 5);
        o.project(&mut u);
        let (e, h) = shell_spectra(&o, &u);
        for k in 0..e.len() {
            // Discrete bound: shells bin |k| up to k + 1/2.
            assert!(h[k].abs() <= 2.0 * (k as f64 + 0.5) * e[k] + 1e-14);
        }
    }

    #[test]
    fn transfer_sums_vanish_for_conserving_forms() {
        let mut o = ops(16);
        let mut u = random_velocity(16, 7);
        o.project(&mut u);
        let (te, th) = transfer_spectra(&mut o, &u, ConvectiveForm::Rotational).unwrap();
        let scale_e = te.iter().map(|v| v.abs()).sum::<f64>().max(1e-30);
        let scale_h = th.iter().map(|v| v.abs()).sum::<f64>().max(1e-30);
        assert!(te.iter().sum::<f64>().abs() <= 1e-11 * scale_e, "rot conserves energy");
        assert!(th.iter().sum::<f64>().abs() <= 1e-11 * scale_h, "rot conserves helicity");

        let (te, th) = transfer_spectra(&mut o, &u, ConvectiveForm::SkewSymmetric).unwrap();
        let scale_e = te.iter().map(|v| v.abs()).sum::<f64>().max(1e-30);
        assert!(te.iter().sum::<f64>().abs() <= 1e-11 * scale_e, "skew conserves energy");
        let scale_h = th.iter().map(|v| v.abs()).sum::<f64>();
        assert!(th.iter().sum::<f64>().abs() > 1e-6 * scale_h, "skew does not conserve helicity");
    }

    #[test]
    fn equilibrium_nonhelical_limit() {
        let (e_eq, h_eq, alpha, beta) = absolute_equilibrium(2.0, 0.0, 15).unwrap();
        assert_eq!(beta, 0.0);
        assert!(h_eq.iter().all(|&v| v.abs() < 1e-12));
        // E(k) = (4π/α) k².
        for k in 1..=15usize {
            let expect = 4.0 * std::f64::consts::PI / alpha * (k * k) as f64;
            assert!((e_eq[k] - expect).abs() < 1e-10);
        }
        // Homogeneity: scaling e scales E_eq linearly.
        let (e2, _, _, _) = absolute_equilibrium(4.0, 0.0, 15).unwrap();
        for k in 1..=15 {
            assert!((e2[k] / e_eq[k] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn equilibrium_sums_reproduce_invariants() {
        let (e_eq, h_eq, _, _) = absolute_equilibrium(1.0, 18.0, 15).unwrap();
        let se: f64 = e_eq.iter().sum();
        let sh: f64 = h_eq.iter().sum();
        assert!((se - 1.0).abs() < 1e-9, "ΣE_eq = e, got {}", se);
        assert!((sh - 18.0).abs() < 1e-7, "ΣH_eq = h, got {}", sh);
        // Realizability of the fitted curves.
        for k in 1..=15 {
            assert!(h_eq[k].abs() <= 2.0 * k as f64 * e_eq[k] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn equilibrium_rejects_infeasible_inputs() {
        assert!(absolute_equilibrium(0.0, 0.0, 10).is_err());
        assert!(absolute_equilibrium(1.0, 20.0, 10).is_err()); // 2 k e = 20
    }

    #[test]
    fn relative_helicity_of_beltrami_is_one() {
        let o = ops(16);
        let u = abc_field(&o, &AbcSpec::unit(5)).unwrap();
        let hrel = relative_helicity(o.energy(&u), o.helicity(&u), 5.0);
        assert!((hrel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_residual_of_balanced_spectra_is_zero() {
        let t = vec![0.0, 1.0, 2.0, 3.0];
        let d = t.clone();
        assert!(stationary_residual(&t, &d).iter().all(|&v| v == 0.0));
    }
}
