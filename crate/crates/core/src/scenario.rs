//! Initial conditions and forcing: Arnold-Beltrami-Childress superpositions,
//! the large-scale helical Euler forcing, and presets for the three
//! experiment families (inviscid conservation, truncated Euler equilibria,
//! forced helical turbulence).

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::convect::ConvectiveForm;
use crate::error::{Error, Result};
use crate::field::{Ops, SpectralVelocity};
use crate::grid::{DealiasPolicy, DerivativeScheme, GridSpec};

/// One ABC (Beltrami) flow component:
/// u = (A sin(kz+φa) + C cos(ky+φc),
///      B sin(kx+φb) + A cos(kz+φa),
///      C sin(ky+φc) + B cos(kx+φb)).
#[derive(Debug, Clone)]
pub struct AbcSpec {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Phase offset per amplitude (A, B, C).
    pub phases: [f64; 3],
    pub energy_target: Option<f64>,
}

impl AbcSpec {
    pub fn unit(k: usize) -> Self {
        AbcSpec { k, a: 1.0, b: 1.0, c: 1.0, phases: [0.0; 3], energy_target: None }
    }

    pub fn with_energy(mut self, e: f64) -> Self {
        self.energy_target = Some(e);
        self
    }
}

/// Builds the exact spectral coefficients of an ABC flow. Beltrami under
/// the spectral curl (ω = k u) and divergence-free under every scheme.
pub fn abc_field(ops: &Ops, spec: &AbcSpec) -> Result<SpectralVelocity> {
    let n = ops.n();
    let k = spec.k;
    if k < 1 || k > n / 2 - 1 {
        return Err(Error::Infeasible(format!("ABC wavenumber {} not resolvable on n = {}", k, n)));
    }
    if spec.a == 0.0 && spec.b == 0.0 && spec.c == 0.0 {
        return Err(Error::Infeasible("ABC amplitudes all zero".into()));
    }
    let mut u = SpectralVelocity::zeros(n);
    let idx = |kx: i64, ky: i64, kz: i64| -> usize {
        let n = n as i64;
        (kx.rem_euclid(n) + n * (ky.rem_euclid(n) + n * kz.rem_euclid(n))) as usize
    };
    let kk = k as i64;
    // sin(k·x + φ): ∓(i/2) e^{±iφ} at ±k; cos(k·x + φ): (1/2) e^{±iφ}.
    let half = Complex64::new(0.5, 0.0);
    let mhalf_i = Complex64::new(0.0, -0.5);
    let put = |fld: &mut crate::field::SpectralField, at: usize, v: Complex64| {
        fld.data[at] += v;
    };
    let [pa, pb, pc] = spec.phases;
    let ea = Complex64::from_polar(1.0, pa);
    let eb = Complex64::from_polar(1.0, pb);
    let ec = Complex64::from_polar(1.0, pc);

    // A terms: sin(kz) in u_x, cos(kz) in u_y.
    put(&mut u.comps[0], idx(0, 0, kk), spec.a * mhalf_i * ea);
    put(&mut u.comps[0], idx(0, 0, -kk), (spec.a * mhalf_i * ea).conj());
    put(&mut u.comps[1], idx(0, 0, kk), spec.a * half * ea);
    put(&mut u.comps[1], idx(0, 0, -kk), (spec.a * half * ea).conj());
    // B terms: sin(kx) in u_y, cos(kx) in u_z.
    put(&mut u.comps[1], idx(kk, 0, 0), spec.b * mhalf_i * eb);
    put(&mut u.comps[1], idx(-kk, 0, 0), (spec.b * mhalf_i * eb).conj());
    put(&mut u.comps[2], idx(kk, 0, 0), spec.b * half * eb);
    put(&mut u.comps[2], idx(-kk, 0, 0), (spec.b * half * eb).conj());
    // C terms: sin(ky) in u_z, cos(ky) in u_x.
    put(&mut u.comps[2], idx(0, kk, 0), spec.c * mhalf_i * ec);
    put(&mut u.comps[2], idx(0, -kk, 0), (spec.c * mhalf_i * ec).conj());
    put(&mut u.comps[0], idx(0, kk, 0), spec.c * half * ec);
    put(&mut u.comps[0], idx(0, -kk, 0), (spec.c * half * ec).conj());

    if let Some(target) = spec.energy_target {
        let e = ops.energy(&u);
        u.scale((target / e).sqrt());
    }
    Ok(u)
}

/// Superposition of two unit ABC flows with equal energies, normalized to
/// the given total energy.
pub fn abc_pair(ops: &Ops, k1: usize, k2: usize, energy: f64) -> Result<SpectralVelocity> {
    let mut u = abc_field(ops, &AbcSpec::unit(k1).with_energy(energy / 2.0))?;
    let u2 = abc_field(ops, &AbcSpec::unit(k2).with_energy(energy / 2.0))?;
    u.axpy(1.0, &u2);
    Ok(u)
}

/// Helical Euler forcing: modes with |k| <= k_F evolve by the Galerkin-
/// truncated inviscid equations, independent of all other modes, so the
/// forced-shell energy and helicity are invariants of the subsystem.
///
/// The truncated rhs is evaluated on a dedicated small grid whose symbol
/// tables are copied from the parent at the forced modes, which keeps the
/// per-step cost independent of the run resolution.
pub struct EulerForcing {
    pub k_f: f64,
    forced: Vec<bool>,
    sub_ops: Ops,
    /// (parent index, sub index) per forced mode.
    map: Vec<(usize, usize)>,
    forced_sub: Vec<bool>,
}

impl EulerForcing {
    pub fn new(ops: &Ops, k_f: f64) -> Result<Self> {
        let grid = ops.grid();
        let cutoff = grid.retained_band() as f64;
        if k_f >= cutoff {
            return Err(Error::Infeasible(format!(
                "forcing cutoff k_F = {} not below the retained-mode cutoff {}",
                k_f, cutoff
            )));
        }
        let n = grid.n;
        let band = k_f.floor() as i64;
        let mut forced = vec![false; grid.modes()];
        let kf2 = k_f * k_f;
        let k: Vec<f64> = (0..n).map(|j| grid.k_of_index(j) as f64).collect();
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    forced[idx] = k[ix] * k[ix] + k[iy] * k[iy] + k[iz] * k[iz] <= kf2;
                    idx += 1;
                }
            }
        }

        // Small companion grid: wide enough that forced-mode products stay
        // alias-free, with the parent's derivative symbols at those modes.
        let n_sub = (4 * band as usize + 8).max(16).min(n);
        let sub_grid = GridSpec::with_box_length(n_sub, grid.box_length, grid.scheme, DealiasPolicy::None)?;
        let mut sub_ops = Ops::new(sub_grid)?;
        {
            let parent = ops.table().clone();
            let tab = sub_ops.table_mut();
            for kk in -band..=band {
                let pj = kk.rem_euclid(n as i64) as usize;
                let sj = kk.rem_euclid(n_sub as i64) as usize;
                tab.kappa[sj] = parent.kappa[pj];
                tab.k1_eff[sj] = parent.k1_eff[pj];
                tab.k2_eff[sj] = parent.k2_eff[pj];
                tab.stagger_shift[sj] = parent.stagger_shift[pj];
                tab.avg_factor[sj] = parent.avg_factor[pj];
            }
        }

        let mut map = Vec::new();
        let mut forced_sub = vec![false; n_sub * n_sub * n_sub];
        for kz in -band..=band {
            for ky in -band..=band {
                for kx in -band..=band {
                    if (kx * kx + ky * ky + kz * kz) as f64 > kf2 {
                        continue;
                    }
                    let wrap = |v: i64, m: usize| v.rem_euclid(m as i64) as usize;
                    let bi = wrap(kx, n) + n * (wrap(ky, n) + n * wrap(kz, n));
                    let si =
                        wrap(kx, n_sub) + n_sub * (wrap(ky, n_sub) + n_sub * wrap(kz, n_sub));
                    map.push((bi, si));
                    forced_sub[si] = true;
                }
            }
        }
        Ok(EulerForcing { k_f, forced, sub_ops, map, forced_sub })
    }

    /// Computes the inviscid Galerkin-truncated rhs of the forced
    /// subsystem (rotational form, parent symbols) and writes it into the
    /// forced modes of `f`.
    pub fn truncated_rhs_into(
        &mut self,
        u: &SpectralVelocity,
        f: &mut SpectralVelocity,
    ) -> Result<()> {
        let ns = self.sub_ops.n();
        let mut us = SpectralVelocity::zeros(ns);
        for &(bi, si) in &self.map {
            for c in 0..3 {
                us.comps[c].data[si] = u.comps[c].data[bi];
            }
        }
        let mut ft =
            crate::convect::bilinear(&mut self.sub_ops, &us, &us, ConvectiveForm::Rotational)?;
        ft.scale(-1.0);
        for c in 0..3 {
            for (v, &keep) in ft.comps[c].data.iter_mut().zip(self.forced_sub.iter()) {
                if !keep {
                    *v = Complex64::default();
                }
            }
        }
        self.sub_ops.project(&mut ft);
        for &(bi, si) in &self.map {
            for c in 0..3 {
                f.comps[c].data[bi] = ft.comps[c].data[si];
            }
        }
        Ok(())
    }

    pub fn forced_mask(&self) -> &[bool] {
        &self.forced
    }

    /// Zeroes every mode outside the forced set.
    pub fn restrict(&self, u: &SpectralVelocity) -> SpectralVelocity {
        let mut out = u.clone();
        for c in 0..3 {
            for (v, &keep) in out.comps[c].data.iter_mut().zip(self.forced.iter()) {
                if !keep {
                    *v = Complex64::default();
                }
            }
        }
        out
    }

    /// Copies the forced modes of `src` into `dst`.
    pub fn overwrite_forced(&self, dst: &mut SpectralVelocity, src: &SpectralVelocity) {
        for c in 0..3 {
            for ((d, s), &f) in
                dst.comps[c].data.iter_mut().zip(src.comps[c].data.iter()).zip(self.forced.iter())
            {
                if f {
                    *d = *s;
                }
            }
        }
    }

    /// Energy and helicity content of the forced subsystem.
    pub fn subsystem_invariants(&self, ops: &Ops, u: &SpectralVelocity) -> (f64, f64) {
        let ut = self.restrict(u);
        (ops.energy(&ut), ops.helicity(&ut))
    }
}

/// Builds the forced-subsystem seed: positive-helicity helical modes on the
/// |k|² ∈ {5, 6} lattice shells, with the energy split between the two
/// shells chosen so the subsystem relative helicity h/(2 k_F e) hits the
/// requested value under the exact curl. Phases are seeded and random.
pub fn forcing_seed(
    ops: &Ops,
    k_f: f64,
    h_rel: f64,
    energy: f64,
    seed: u64,
) -> Result<SpectralVelocity> {
    let n = ops.n();
    let s5 = 5.0f64.sqrt();
    let s6 = 6.0f64.sqrt();
    let x = (h_rel * k_f - s5) / (s6 - s5);
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Infeasible(format!(
            "requested subsystem H_rel = {} outside [{:.4}, {:.4}] for k_F = {}",
            h_rel,
            s5 / k_f,
            s6 / k_f,
            k_f
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralVelocity::zeros(n);

    // Lattice vectors with |k|² = 5 or 6 (one per ± pair).
    let mut pairs: Vec<([i64; 3], f64)> = Vec::new();
    let r = 3i64;
    for kx in -r..=r {
        for ky in -r..=r {
            for kz in -r..=r {
                let q = kx * kx + ky * ky + kz * kz;
                if q != 5 && q != 6 {
                    continue;
                }
                // Keep one representative per conjugate pair.
                if (kz, ky, kx) < (0, 0, 0) || (kz == 0 && (ky, kx) < (0, 0)) || (kz == 0 && ky == 0 && kx < 0)
                {
                    continue;
                }
                pairs.push(([kx, ky, kz], q as f64));
            }
        }
    }
    let n5 = pairs.iter().filter(|(_, q)| *q == 5.0).count() as f64;
    let n6 = pairs.len() as f64 - n5;

    let idx = |k: [i64; 3]| -> usize {
        let nn = n as i64;
        (k[0].rem_euclid(nn) + nn * (k[1].rem_euclid(nn) + nn * k[2].rem_euclid(nn))) as usize
    };

    for (kvec, q) in &pairs {
        let kf = [kvec[0] as f64, kvec[1] as f64, kvec[2] as f64];
        let kn = q.sqrt();
        // Orthonormal frame (e1, e2, k/|k|).
        let ref_axis = if kvec[0] == 0 && kvec[1] == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let mut e1 = [
            kf[1] * ref_axis[2] - kf[2] * ref_axis[1],
            kf[2] * ref_axis[0] - kf[0] * ref_axis[2],
            kf[0] * ref_axis[1] - kf[1] * ref_axis[0],
        ];
        let e1n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        for v in &mut e1 {
            *v /= e1n;
        }
        let e2 = [
            (kf[1] * e1[2] - kf[2] * e1[1]) / kn,
            (kf[2] * e1[0] - kf[0] * e1[2]) / kn,
            (kf[0] * e1[1] - kf[1] * e1[0]) / kn,
        ];
        // Positive-helicity unit vector h+ = (e1 + i e2)/√2.
        let e_pair = if *q == 6.0 { x * energy / n6 } else { (1.0 - x) * energy / n5 };
        let amp = Complex64::from_polar(e_pair.sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
        let at = idx(*kvec);
        let at_conj = idx([-kvec[0], -kvec[1], -kvec[2]]);
        for c in 0..3 {
            let hplus = Complex64::new(e1[c], e2[c]) / 2.0f64.sqrt();
            let v = amp * hplus;
            u.comps[c].data[at] += v;
            u.comps[c].data[at_conj] += v.conj();
        }
    }

    // Clean up under the active scheme's metric and restore the energy.
    ops.project(&mut u);
    let e = ops.energy(&u);
    u.scale((energy / e).sqrt());
    Ok(u)
}

/// How a preset builds its initial state.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    AbcPair { k1: usize, k2: usize, energy: f64 },
    ForcedSeed { k_f: f64, h_rel: f64, energy: f64, seed: u64 },
}

/// A fully specified run configuration; every field is overridable.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub grid: GridSpec,
    pub form: ConvectiveForm,
    pub tableau: &'static str,
    pub nu: f64,
    pub cfl: f64,
    /// Duration in characteristic times t0 = e0^{-1/2} / k_char.
    pub t_end_over_t0: f64,
    pub k_char: f64,
    pub ic: InitialCondition,
    pub forcing_kf: Option<f64>,
}

impl Preset {
    pub fn build_initial(&self, ops: &Ops) -> Result<SpectralVelocity> {
        match &self.ic {
            InitialCondition::AbcPair { k1, k2, energy } => abc_pair(ops, *k1, *k2, *energy),
            InitialCondition::ForcedSeed { k_f, h_rel, energy, seed } => {
                forcing_seed(ops, *k_f, *h_rel, *energy, *seed)
            }
        }
    }

    /// Characteristic time from the initial energy.
    pub fn t0(&self, e0: f64) -> f64 {
        1.0 / (e0.sqrt() * self.k_char)
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    let p = match name {
        "inviscid32" => Preset {
            name: "inviscid32",
            grid: GridSpec::new(32, DerivativeScheme::Spectral, DealiasPolicy::None).ok()?,
            form: ConvectiveForm::Rotational,
            tableau: "gauss1",
            nu: 0.0,
            cfl: 0.5,
            t_end_over_t0: 10.0,
            k_char: 4.0,
            ic: InitialCondition::AbcPair { k1: 4, k2: 6, energy: 1.0 },
            forcing_kf: None,
        },
        "truncated_euler" => Preset {
            name: "truncated_euler",
            grid: GridSpec::new(128, DerivativeScheme::Spectral, DealiasPolicy::Sphere(42.0)).ok()?,
            form: ConvectiveForm::Rotational,
            tableau: "gauss1",
            nu: 0.0,
            cfl: 0.5,
            t_end_over_t0: 100.0,
            k_char: 28.0,
            ic: InitialCondition::AbcPair { k1: 28, k2: 30, energy: 1.0 },
            forcing_kf: None,
        },
        "truncated_euler_desk" => Preset {
            name: "truncated_euler_desk",
            grid: GridSpec::new(48, DerivativeScheme::Spectral, DealiasPolicy::Sphere(15.0)).ok()?,
            form: ConvectiveForm::Rotational,
            tableau: "gauss1",
            nu: 0.0,
            cfl: 0.5,
            t_end_over_t0: 300.0,
            k_char: 10.0,
            ic: InitialCondition::AbcPair { k1: 10, k2: 11, energy: 1.0 },
            forcing_kf: None,
        },
        "forced_helical" => Preset {
            name: "forced_helical",
            grid: GridSpec::new(64, DerivativeScheme::Fd2Colocated, DealiasPolicy::None).ok()?,
            form: ConvectiveForm::Rotational,
            tableau: "rk4",
            nu: 0.0075,
            cfl: 0.5,
            t_end_over_t0: 180.0,
            k_char: 2.5,
            ic: InitialCondition::ForcedSeed { k_f: 2.5, h_rel: 0.967, energy: 0.5, seed: 42 },
            forcing_kf: Some(2.5),
        },
        "forced_helical_ref" => Preset {
            name: "forced_helical_ref",
            grid: GridSpec::new(96, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds).ok()?,
            form: ConvectiveForm::Rotational,
            tableau: "rk4",
            nu: 0.0075,
            cfl: 0.5,
            t_end_over_t0: 180.0,
            k_char: 2.5,
            ic: InitialCondition::ForcedSeed { k_f: 2.5, h_rel: 0.967, energy: 0.5, seed: 42 },
            forcing_kf: Some(2.5),
        },
        _ => return None,
    };
    Some(p)
}

pub fn preset_names() -> &'static [&'static str] {
    &["inviscid32", "truncated_euler", "truncated_euler_desk", "forced_helical", "forced_helical_ref"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra;

    fn ops(n: usize, scheme: DerivativeScheme, dealias: DealiasPolicy) -> Ops {
        Ops::new(GridSpec::new(n, scheme, dealias).unwrap()).unwrap()
    }

    #[test]
    fn abc_is_beltrami_with_ratio_2k() {
        let o = ops(32, DerivativeScheme::Spectral, DealiasPolicy::None);
        let u = abc_field(&o, &AbcSpec::unit(4)).unwrap();
        let e = o.energy(&u);
        let h = o.helicity(&u);
        assert!((e - 1.5).abs() < 1e-14, "unit ABC energy (A²+B²+C²)/2");
        assert!((h / e - 8.0).abs() < 1e-12, "h = 2k e for Beltrami");
        // ω = k u exactly (spectral curl).
        let w = o.curl(&u).unwrap();
        let mut scaled = u.clone();
        scaled.scale(4.0);
        assert!(w.max_diff(&scaled) < 1e-13);
    }

    #[test]
    fn abc_energy_normalization() {
        let o = ops(32, DerivativeScheme::Spectral, DealiasPolicy::None);
        let u = abc_field(&o, &AbcSpec::unit(4).with_energy(1.0)).unwrap();
        assert!((o.energy(&u) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn abc_divergence_free_under_every_scheme() {
        for scheme in [
            DerivativeScheme::Spectral,
            DerivativeScheme::Fd2Colocated,
            DerivativeScheme::Fd2Staggered,
        ] {
            let o = ops(16, scheme, DealiasPolicy::None);
            let u = abc_field(&o, &AbcSpec::unit(3)).unwrap();
            let d = o.divergence(&u).unwrap();
            let max = d.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(max < 1e-14, "{:?}", scheme);
        }
    }

    #[test]
    fn abc_with_phases_still_beltrami() {
        let o = ops(16, DerivativeScheme::Spectral, DealiasPolicy::None);
        let spec =
            AbcSpec { k: 3, a: 1.0, b: 0.7, c: 1.3, phases: [0.3, 1.1, -0.8], energy_target: None };
        let u = abc_field(&o, &spec).unwrap();
        let w = o.curl(&u).unwrap();
        let mut scaled = u.clone();
        scaled.scale(3.0);
        assert!(w.max_diff(&scaled) < 1e-13);
    }

    #[test]
    fn superposed_abc_28_30_relative_helicity() {
        // H_rel = (k1 + k2)/(2 k_max) = 58/84 ≈ 0.690; the reported value
        // is 0.687.
        let o = ops(128, DerivativeScheme::Spectral, DealiasPolicy::Sphere(42.0));
        let u = abc_pair(&o, 28, 30, 1.0).unwrap();
        let e = o.energy(&u);
        let h = o.helicity(&u);
        let hrel = spectra::relative_helicity(e, h, 42.0);
        assert!((hrel - 0.687).abs() < 0.01, "H_rel = {}", hrel);
        assert!((e - 1.0).abs() < 1e-13);
    }

    #[test]
    fn forcing_seed_hits_relative_helicity_target() {
        let o = ops(32, DerivativeScheme::Spectral, DealiasPolicy::None);
        let u = forcing_seed(&o, 2.5, 0.967, 0.5, 7).unwrap();
        let e = o.energy(&u);
        let h = o.helicity(&u);
        assert!((e - 0.5).abs() < 1e-13);
        let hrel = spectra::relative_helicity(e, h, 2.5);
        assert!((hrel - 0.967).abs() < 1e-6, "seed H_rel = {}", hrel);
        // Supported only on |k| <= k_F.
        let f = EulerForcing::new(&o, 2.5).unwrap();
        let outside = {
            let mut v = u.clone();
            for c in 0..3 {
                for (x, &keep) in v.comps[c].data.iter_mut().zip(f.forced_mask().iter()) {
                    if keep {
                        *x = Complex64::default();
                    }
                }
            }
            v.max_coeff_norm()
        };
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn forcing_cutoff_shells() {
        let o = ops(16, DerivativeScheme::Spectral, DealiasPolicy::None);
        let f = EulerForcing::new(&o, 2.5).unwrap();
        let at = |kx: i64, ky: i64, kz: i64| {
            let n = 16i64;
            f.forced_mask()
                [(kx.rem_euclid(n) + n * (ky.rem_euclid(n) + n * kz.rem_euclid(n))) as usize]
        };
        assert!(at(1, 0, 0));
        assert!(at(2, 1, 1)); // |k|² = 6 <= 6.25
        assert!(!at(2, 2, 0)); // |k|² = 8
        assert!(!at(3, 0, 0)); // |k|² = 9
    }

    #[test]
    fn presets_build_valid_states() {
        for name in ["inviscid32", "truncated_euler_desk"] {
            let p = preset(name).unwrap();
            let o = Ops::new(p.grid.clone()).unwrap();
            let mut u = p.build_initial(&o).unwrap();
            let before = u.clone();
            o.project(&mut u);
            assert!(u.max_diff(&before) < 1e-13, "{} initial state already projected", name);
        }
        assert!(preset("nosuch").is_none());
    }
}
