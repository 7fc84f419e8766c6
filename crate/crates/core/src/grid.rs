//! Periodic Fourier grid: wavenumber tables, staggering symbols and
//! truncation masks.
//!
//! All derivative schemes are carried as Fourier symbols on a single
//! colocated mode grid. Finite-difference accuracy is emulated through
//! modified wavenumbers, and the staggered arrangement through half-grid
//! shift and averaging factors, so every scheme shares one code path.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Spatial differentiation scheme emulated by the wavenumber tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeScheme {
    /// Exact spectral differentiation, k1 = k.
    Spectral,
    /// Second-order central differences on a colocated layout,
    /// k1 = sin(kh)/h, k2 = 2(1 - cos(kh))/h^2.
    Fd2Colocated,
    /// Second-order staggered (Harlow-Welch) layout emulated with
    /// half-grid derivative, shift and averaging symbols.
    Fd2Staggered,
}

impl DerivativeScheme {
    pub fn token(&self) -> &'static str {
        match self {
            DerivativeScheme::Spectral => "spectral",
            DerivativeScheme::Fd2Colocated => "fd2",
            DerivativeScheme::Fd2Staggered => "fd2stag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectral" => Some(DerivativeScheme::Spectral),
            "fd2" => Some(DerivativeScheme::Fd2Colocated),
            "fd2stag" => Some(DerivativeScheme::Fd2Staggered),
            _ => None,
        }
    }
}

/// Mode truncation applied to nonlinear products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DealiasPolicy {
    /// Keep every mode (aliased evaluation).
    None,
    /// Zero all modes with any |k| component above n/3.
    TwoThirds,
    /// Zero all modes with |k| above the given radius (Galerkin sphere).
    Sphere(f64),
}

impl DealiasPolicy {
    pub fn token(&self) -> String {
        match self {
            DealiasPolicy::None => "none".to_string(),
            DealiasPolicy::TwoThirds => "twothirds".to_string(),
            DealiasPolicy::Sphere(k) => format!("sphere:{}", k),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DealiasPolicy::None),
            "twothirds" => Some(DealiasPolicy::TwoThirds),
            _ => s
                .strip_prefix("sphere:")
                .and_then(|v| v.parse::<f64>().ok())
                .map(DealiasPolicy::Sphere),
        }
    }
}

/// Cubic periodic grid specification. Determines every wavenumber table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Points per dimension; even and >= 4.
    pub n: usize,
    /// Physical box size, default 2π so integer and physical wavenumbers coincide.
    pub box_length: f64,
    pub scheme: DerivativeScheme,
    pub dealias: DealiasPolicy,
}

impl GridSpec {
    pub fn new(n: usize, scheme: DerivativeScheme, dealias: DealiasPolicy) -> Result<Self> {
        Self::with_box_length(n, 2.0 * PI, scheme, dealias)
    }

    pub fn with_box_length(
        n: usize,
        box_length: f64,
        scheme: DerivativeScheme,
        dealias: DealiasPolicy,
    ) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {} must be even and >= 4", n)));
        }
        if !(box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box_length = {} must be > 0", box_length)));
        }
        if let DealiasPolicy::Sphere(k_max) = dealias {
            let limit = (n / 2 - 1) as f64;
            if !(k_max > 0.0) || k_max > limit {
                return Err(Error::InvalidGrid(format!(
                    "sphere cutoff k_max = {} outside (0, {}]",
                    k_max, limit
                )));
            }
        }
        Ok(GridSpec { n, box_length, scheme, dealias })
    }

    /// Grid spacing h = L/n.
    pub fn h(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Number of modes (= grid points).
    pub fn modes(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Signed integer wavenumber of FFT index j (Nyquist mapped to +n/2).
    pub fn k_of_index(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Largest |k| component retained by the dealias policy (per axis for
    /// the cube mask, radius for the sphere).
    pub fn retained_band(&self) -> usize {
        match self.dealias {
            DealiasPolicy::None => self.n / 2,
            DealiasPolicy::TwoThirds => (self.n - 1) / 3,
            DealiasPolicy::Sphere(k_max) => k_max.floor() as usize,
        }
    }
}

/// Per-axis Fourier symbol tables, indexed by FFT index 0..n.
///
/// `kappa` is the effective complex wavevector component used by every
/// first-derivative operator: `k1_eff` for colocated schemes, and
/// `k1_eff * stagger_shift` for the staggered one, so that i*kappa is
/// always the symbol of a real-space stencil (Hermitian-safe at Nyquist).
#[derive(Debug, Clone)]
pub struct WavenumberTable {
    pub n: usize,
    /// Integer wavenumber per FFT index.
    pub k_exact: Vec<i64>,
    /// Effective first-derivative wavenumber (1/length).
    pub k1_eff: Vec<f64>,
    /// Effective second-derivative wavenumber squared (1/length^2).
    pub k2_eff: Vec<f64>,
    /// Half-grid shift phase exp(+i k h / 2); unit magnitude.
    pub stagger_shift: Vec<Complex64>,
    /// Interpolation attenuation cos(k h / 2), in [-1, 1].
    pub avg_factor: Vec<f64>,
    /// i-free derivative symbol component: k1_eff (colocated) or
    /// k1_eff * stagger_shift (staggered).
    pub kappa: Vec<Complex64>,
}

/// Builds the wavenumber tables for the grid's scheme.
pub fn build_wavenumbers(grid: &GridSpec) -> Result<WavenumberTable> {
    let n = grid.n;
    let h = grid.h();
    let k_unit = 2.0 * PI / grid.box_length;

    let mut k_exact = Vec::with_capacity(n);
    let mut k1_eff = Vec::with_capacity(n);
    let mut k2_eff = Vec::with_capacity(n);
    let mut stagger_shift = Vec::with_capacity(n);
    let mut avg_factor = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);

    for j in 0..n {
        let k_int = grid.k_of_index(j);
        let k_phys = k_unit * k_int as f64;
        let theta = k_phys * h; // in (-π, π]

        let (k1, k2, shift, avg) = match grid.scheme {
            DerivativeScheme::Spectral => {
                // Odd-derivative Nyquist mode zeroed (real-field convention).
                let k1 = if 2 * k_int.unsigned_abs() as usize == n { 0.0 } else { k_phys };
                (k1, k_phys * k_phys, Complex64::new(1.0, 0.0), 1.0)
            }
            DerivativeScheme::Fd2Colocated => {
                let k1 = theta.sin() / h;
                let k2 = 2.0 * (1.0 - theta.cos()) / (h * h);
                (k1, k2, Complex64::new(1.0, 0.0), 1.0)
            }
            DerivativeScheme::Fd2Staggered => {
                let k1 = 2.0 * (0.5 * theta).sin() / h;
                let k2 = k1 * k1;
                let shift = Complex64::from_polar(1.0, 0.5 * theta);
                let avg = (0.5 * theta).cos();
                (k1, k2, shift, avg)
            }
        };

        k_exact.push(k_int);
        k1_eff.push(k1);
        k2_eff.push(k2);
        stagger_shift.push(shift);
        avg_factor.push(avg);
        kappa.push(shift * k1);
    }

    Ok(WavenumberTable { n, k_exact, k1_eff, k2_eff, stagger_shift, avg_factor, kappa })
}

/// Boolean mode mask for the grid's dealias policy (true = keep).
pub fn dealias_mask(grid: &GridSpec) -> Result<Vec<bool>> {
    let n = grid.n;
    let mut mask = vec![true; grid.modes()];
    match grid.dealias {
        DealiasPolicy::None => {}
        DealiasPolicy::TwoThirds => {
            // Strict cutoff 3|k_j| < n: the boundary plane 3|k| = n would
            // still alias its own corner triads, which breaks the
            // product-rule restoration the dealiased scheme exists for.
            let keep: Vec<bool> =
                (0..n).map(|j| 3 * grid.k_of_index(j).unsigned_abs() < n as u64).collect();
            fill_mask(&mut mask, n, |ix, iy, iz| keep[ix] && keep[iy] && keep[iz]);
        }
        DealiasPolicy::Sphere(k_max) => {
            let k: Vec<f64> = (0..n).map(|j| grid.k_of_index(j) as f64).collect();
            let k2_max = k_max * k_max;
            fill_mask(&mut mask, n, |ix, iy, iz| {
                k[ix] * k[ix] + k[iy] * k[iy] + k[iz] * k[iz] <= k2_max
            });
        }
    }
    Ok(mask)
}

fn fill_mask(mask: &mut [bool], n: usize, keep: impl Fn(usize, usize, usize) -> bool) {
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                mask[idx] = keep(ix, iy, iz);
                idx += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, scheme: DerivativeScheme) -> GridSpec {
        GridSpec::new(n, scheme, DealiasPolicy::None).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(15, DerivativeScheme::Spectral, DealiasPolicy::None).is_err());
        assert!(GridSpec::new(2, DerivativeScheme::Spectral, DealiasPolicy::None).is_err());
        // Sphere cutoff beyond resolvable range.
        assert!(GridSpec::new(16, DerivativeScheme::Spectral, DealiasPolicy::Sphere(8.0)).is_err());
        assert!(GridSpec::new(16, DerivativeScheme::Spectral, DealiasPolicy::Sphere(7.0)).is_ok());
    }

    #[test]
    fn spectral_tables_are_identity() {
        let g = grid(16, DerivativeScheme::Spectral);
        let t = build_wavenumbers(&g).unwrap();
        for j in 0..16 {
            let k = g.k_of_index(j) as f64;
            if j != 8 {
                assert_eq!(t.k1_eff[j], k);
            }
            assert_eq!(t.k2_eff[j], k * k);
            assert_eq!(t.avg_factor[j], 1.0);
            assert_eq!(t.stagger_shift[j], Complex64::new(1.0, 0.0));
        }
        // Nyquist first derivative zeroed by convention.
        assert_eq!(t.k1_eff[8], 0.0);
        assert_eq!(t.k2_eff[8], 64.0);
    }

    #[test]
    fn fd2_colocated_nyquist_and_zero_mode() {
        let g = grid(16, DerivativeScheme::Fd2Colocated);
        let h = g.h();
        let t = build_wavenumbers(&g).unwrap();
        assert_eq!(t.k1_eff[0], 0.0);
        assert_eq!(t.k2_eff[0], 0.0);
        // kh = π: k1 = sin(π)/h = 0, k2 = 4/h².
        assert!(t.k1_eff[8].abs() < 1e-15);
        assert!((t.k2_eff[8] - 4.0 / (h * h)).abs() < 1e-12);
    }

    #[test]
    fn fd2_staggered_nyquist() {
        let g = grid(16, DerivativeScheme::Fd2Staggered);
        let h = g.h();
        let t = build_wavenumbers(&g).unwrap();
        // kh = π: half-grid derivative 2/h, averaging factor 0.
        assert!((t.k1_eff[8].abs() - 2.0 / h).abs() < 1e-12);
        assert!(t.avg_factor[8].abs() < 1e-15);
        // The combined symbol is purely imaginary there (Hermitian-safe).
        assert!(t.kappa[8].re.abs() < 1e-12);
        assert!((t.kappa[8].im - 2.0 / h).abs() < 1e-12);
    }

    #[test]
    fn tables_have_correct_parity() {
        for scheme in [
            DerivativeScheme::Spectral,
            DerivativeScheme::Fd2Colocated,
            DerivativeScheme::Fd2Staggered,
        ] {
            let g = grid(16, scheme);
            let t = build_wavenumbers(&g).unwrap();
            for j in 1..8 {
                let jm = 16 - j;
                assert_eq!(t.k1_eff[j], -t.k1_eff[jm], "k1 odd, {:?}", scheme);
                assert_eq!(t.k2_eff[j], t.k2_eff[jm], "k2 even, {:?}", scheme);
                assert!(t.k2_eff[j] >= 0.0);
                // kappa(-k) = -conj(kappa(k)) keeps real fields real.
                let d = t.kappa[jm] + t.kappa[j].conj();
                assert!(d.norm() < 1e-13, "kappa pairing, {:?}", scheme);
                assert!((t.stagger_shift[j].norm() - 1.0).abs() < 1e-15);
                assert!(t.avg_factor[j].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn fd2_converges_to_spectral_at_second_order() {
        // Relative error of the lowest nonzero mode shrinks as (kh)^2.
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = grid(n, DerivativeScheme::Fd2Colocated);
            let t = build_wavenumbers(&g).unwrap();
            errs.push((1.0 - t.k1_eff[1]).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.4, "O(h^2) convergence, got ratio {}", ratio);
        }
    }

    #[test]
    fn two_thirds_mask_cutoff() {
        // n = 192 keeps |k| <= 63 per axis: the 128^3-effective band,
        // alias-free for quadratic products.
        let g = GridSpec::new(192, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds).unwrap();
        let m = dealias_mask(&g).unwrap();
        let at = |kx: i64, ky: i64, kz: i64| {
            let n = 192i64;
            let ix = kx.rem_euclid(n) as usize;
            let iy = ky.rem_euclid(n) as usize;
            let iz = kz.rem_euclid(n) as usize;
            m[ix + 192 * (iy + 192 * iz)]
        };
        assert!(at(63, 0, 0));
        assert!(!at(64, 0, 0));
        assert!(at(63, 63, 63));
        assert!(!at(0, 0, -64));
        // Retained band wide enough that its products cannot alias into it.
        let band = 63i64;
        assert!(2 * band - 192 < -band);
    }

    #[test]
    fn sphere_mask_radius() {
        let g = GridSpec::new(128, DerivativeScheme::Spectral, DealiasPolicy::Sphere(42.0)).unwrap();
        let m = dealias_mask(&g).unwrap();
        let n = 128i64;
        let at = |kx: i64, ky: i64, kz: i64| {
            let ix = kx.rem_euclid(n) as usize;
            let iy = ky.rem_euclid(n) as usize;
            let iz = kz.rem_euclid(n) as usize;
            m[ix + 128 * (iy + 128 * iz)]
        };
        assert!(at(42, 0, 0));
        assert!(!at(30, 30, 0)); // |k|^2 = 1800 > 42^2
    }

    #[test]
    fn none_mask_is_all_true() {
        let g = grid(8, DerivativeScheme::Spectral);
        assert!(dealias_mask(&g).unwrap().iter().all(|&b| b));
    }
}
