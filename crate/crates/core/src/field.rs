//! Core field algebra on the spectral representation: transforms, curl,
//! divergence, gradient, Leray projection, inner products and the global
//! energy/helicity functionals.
//!
//! Every first-derivative operator goes through the complex effective
//! wavevector `kappa` of the active scheme, so the colocated and staggered
//! layouts share one implementation. The consistency pair is G = i kappa
//! and M = i conj(kappa)·, hence G^T = -M by construction.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{self, Fft3};
use crate::grid::{build_wavenumbers, dealias_mask, GridSpec, WavenumberTable};

/// Zero-filled complex buffer through the zeroed-page allocator (the
/// naive `vec![Complex64::default(); m]` does a serial memset pass that
/// shows up badly at 96^3 field sizes).
pub(crate) fn zeroed_complex(m: usize) -> Vec<Complex64> {
    let mut raw = vec![0.0f64; 2 * m];
    assert_eq!(raw.capacity(), 2 * m);
    let ptr = raw.as_mut_ptr() as *mut Complex64;
    std::mem::forget(raw);
    // Safety: Complex64 is repr(C) {re: f64, im: f64} with align 8; the
    // 2m zero f64s are exactly m zero Complex64 values and the capacity
    // covers the same allocation.
    unsafe { Vec::from_raw_parts(ptr, m, m) }
}

/// Scalar complex coefficient field over the mode grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField { n, data: zeroed_complex(n * n * n) }
    }
}

/// Divergence-free 3-component velocity state in spectral space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVelocity {
    pub n: usize,
    pub comps: [SpectralField; 3],
}

/// Vorticity field; curl of a velocity under the active scheme.
pub type SpectralVorticity = SpectralVelocity;

impl SpectralVelocity {
    pub fn zeros(n: usize) -> Self {
        SpectralVelocity {
            n,
            comps: [SpectralField::zeros(n), SpectralField::zeros(n), SpectralField::zeros(n)],
        }
    }

    /// Overwrites self with src, reusing the allocation.
    pub fn copy_from(&mut self, src: &SpectralVelocity) {
        self.n = src.n;
        for c in 0..3 {
            self.comps[c].n = src.comps[c].n;
            self.comps[c].data.clone_from(&src.comps[c].data);
        }
    }

    /// y += s * x, componentwise over all modes.
    pub fn axpy(&mut self, s: f64, x: &SpectralVelocity) {
        for c in 0..3 {
            self.comps[c]
                .data
                .par_iter_mut()
                .zip(x.comps[c].data.par_iter())
                .for_each(|(y, &v)| *y += s * v);
        }
    }

    /// self = base + Σ c_i · terms_i in one pass.
    pub fn assign_lin(&mut self, base: &SpectralVelocity, terms: &[(f64, &SpectralVelocity)]) {
        for c in 0..3 {
            let srcs: Vec<&[Complex64]> = terms.iter().map(|(_, t)| &t.comps[c].data[..]).collect();
            let coefs: Vec<f64> = terms.iter().map(|(s, _)| *s).collect();
            self.comps[c]
                .data
                .par_iter_mut()
                .zip(base.comps[c].data.par_iter())
                .enumerate()
                .for_each(|(i, (y, &b))| {
                    let mut v = b;
                    for (s, src) in coefs.iter().zip(srcs.iter()) {
                        v += *s * src[i];
                    }
                    *y = v;
                });
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in 0..3 {
            self.comps[c].data.par_iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Max |coefficient| over all modes and components.
    pub fn max_coeff_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.data.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    /// Max |a - b| over all modes and components.
    pub fn max_diff(&self, other: &SpectralVelocity) -> f64 {
        let mut d: f64 = 0.0;
        for c in 0..3 {
            for (a, b) in self.comps[c].data.iter().zip(other.comps[c].data.iter()) {
                d = d.max((a - b).norm_sqr());
            }
        }
        d.sqrt()
    }

    /// Mean-flow (mode-0) coefficients per component.
    pub fn mean_mode(&self) -> [Complex64; 3] {
        [self.comps[0].data[0], self.comps[1].data[0], self.comps[2].data[0]]
    }
}

/// Deterministic chunk size for parallel reductions; fixed so sums do not
/// depend on thread count.
const RED_CHUNK: usize = 1 << 15;

fn par_sum_modes(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = len.div_ceil(RED_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * RED_CHUNK;
            let hi = (lo + RED_CHUNK).min(len);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    partials.iter().sum()
}

/// Spectral operator context: grid, wavenumber tables, dealias mask and
/// FFT plans with a reusable transform scratch.
pub struct Ops {
    grid: GridSpec,
    tab: WavenumberTable,
    mask: Vec<bool>,
    fft: Fft3,
    work: Vec<Complex64>,
}

impl Ops {
    pub fn new(grid: GridSpec) -> Result<Self> {
        let tab = build_wavenumbers(&grid)?;
        let mask = dealias_mask(&grid)?;
        let fft = Fft3::new(grid.n);
        Ok(Ops { grid, tab, mask, fft, work: Vec::new() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn table(&self) -> &WavenumberTable {
        &self.tab
    }

    pub(crate) fn table_mut(&mut self) -> &mut WavenumberTable {
        &mut self.tab
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn modes(&self) -> usize {
        self.grid.modes()
    }

    fn check(&self, u: &SpectralVelocity) -> Result<()> {
        if u.n != self.grid.n {
            return Err(Error::GridMismatch(format!("field n = {}, grid n = {}", u.n, self.grid.n)));
        }
        Ok(())
    }

    /// Visits every mode index with its per-axis FFT indices.
    #[inline]
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let n = self.grid.n;
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    f(idx, ix, iy, iz);
                    idx += 1;
                }
            }
        }
    }

    // ----- transforms -----

    pub fn to_physical(&mut self, spec: &SpectralField, phys: &mut Vec<f64>) {
        phys.resize(self.modes(), 0.0);
        fft::spectral_to_physical(&self.fft, &spec.data, phys, &mut self.work);
    }

    pub fn to_physical_pair(
        &mut self,
        a: &SpectralField,
        b: &SpectralField,
        pa: &mut Vec<f64>,
        pb: &mut Vec<f64>,
    ) {
        pa.resize(self.modes(), 0.0);
        pb.resize(self.modes(), 0.0);
        fft::spectral_pair_to_physical(&self.fft, &a.data, &b.data, pa, pb, &mut self.work);
    }

    pub fn to_spectral(&mut self, phys: &[f64], spec: &mut SpectralField) {
        spec.data.resize(self.modes(), Complex64::default());
        fft::physical_to_spectral(&self.fft, phys, &mut spec.data, &mut self.work);
    }

    pub fn to_spectral_pair(
        &mut self,
        pa: &[f64],
        pb: &[f64],
        a: &mut SpectralField,
        b: &mut SpectralField,
    ) {
        a.data.resize(self.modes(), Complex64::default());
        b.data.resize(self.modes(), Complex64::default());
        fft::physical_pair_to_spectral(&self.fft, pa, pb, &mut a.data, &mut b.data, &mut self.work);
    }

    /// Physical samples of all three velocity components (2 FFTs).
    pub fn velocity_to_physical(&mut self, u: &SpectralVelocity) -> [Vec<f64>; 3] {
        let mut px = Vec::new();
        let mut py = Vec::new();
        let mut pz = Vec::new();
        let (c0, rest) = u.comps.split_first().unwrap();
        self.to_physical_pair(c0, &rest[0], &mut px, &mut py);
        self.to_physical(&rest[1], &mut pz);
        [px, py, pz]
    }

    // ----- masks -----

    pub fn apply_mask_scalar(&self, f: &mut SpectralField) {
        f.data.par_iter_mut().zip(self.mask.par_iter()).for_each(|(v, &keep)| {
            if !keep {
                *v = Complex64::default();
            }
        });
    }

    pub fn apply_mask(&self, u: &mut SpectralVelocity) {
        for c in 0..3 {
            self.apply_mask_scalar(&mut u.comps[c]);
        }
    }

    /// out(k) = sym[k_axis] * f(k): multiply by a per-axis symbol table.
    pub fn apply_symbol_along(
        &self,
        f: &SpectralField,
        sym: &[Complex64],
        axis: usize,
    ) -> SpectralField {
        let n = self.grid.n;
        let n2 = n * n;
        let mut out = SpectralField::zeros(n);
        out.data
            .par_chunks_mut(n2)
            .zip(f.data.par_chunks(n2))
            .enumerate()
            .for_each(|(iz, (o, v))| {
                for iy in 0..n {
                    let row = n * iy;
                    match axis {
                        0 => {
                            for ix in 0..n {
                                o[row + ix] = sym[ix] * v[row + ix];
                            }
                        }
                        1 => {
                            let s = sym[iy];
                            for ix in 0..n {
                                o[row + ix] = s * v[row + ix];
                            }
                        }
                        _ => {
                            let s = sym[iz];
                            for ix in 0..n {
                                o[row + ix] = s * v[row + ix];
                            }
                        }
                    }
                }
            });
        out
    }

    // ----- first-derivative operators through kappa -----

    /// Discrete curl: ŵ = i kappa × û.
    pub fn curl(&self, u: &SpectralVelocity) -> Result<SpectralVorticity> {
        self.check(u)?;
        let mut w = SpectralVelocity::zeros(self.grid.n);
        self.curl_into(u, &mut w);
        Ok(w)
    }

    pub fn curl_into(&self, u: &SpectralVelocity, w: &mut SpectralVorticity) {
        let n = self.grid.n;
        let kap = &self.tab.kappa;
        let n2 = n * n;
        let ux = &u.comps[0].data;
        let uy = &u.comps[1].data;
        let uz = &u.comps[2].data;
        let (wx, rest) = w.comps.split_first_mut().unwrap();
        let (wy, wz) = rest.split_first_mut().unwrap();
        let wz = &mut wz[0];
        wx.data
            .par_chunks_mut(n2)
            .zip(wy.data.par_chunks_mut(n2))
            .zip(wz.data.par_chunks_mut(n2))
            .enumerate()
            .for_each(|(iz, ((sx, sy), sz))| {
                let kz = kap[iz];
                let i = Complex64::new(0.0, 1.0);
                for iy in 0..n {
                    let ky = kap[iy];
                    let base = n * (iy + n * iz);
                    for ix in 0..n {
                        let kx = kap[ix];
                        let g = base + ix;
                        let l = ix + n * iy;
                        sx[l] = i * (ky * uz[g] - kz * uy[g]);
                        sy[l] = i * (kz * ux[g] - kx * uz[g]);
                        sz[l] = i * (kx * uy[g] - ky * ux[g]);
                    }
                }
            });
    }

    /// Discrete divergence M û = i conj(kappa) · û.
    pub fn divergence(&self, u: &SpectralVelocity) -> Result<SpectralField> {
        self.check(u)?;
        let n = self.grid.n;
        let mut d = SpectralField::zeros(n);
        let kap = &self.tab.kappa;
        let i = Complex64::new(0.0, 1.0);
        self.for_each_mode(|idx, ix, iy, iz| {
            d.data[idx] = i
                * (kap[ix].conj() * u.comps[0].data[idx]
                    + kap[iy].conj() * u.comps[1].data[idx]
                    + kap[iz].conj() * u.comps[2].data[idx]);
        });
        Ok(d)
    }

    /// Discrete gradient G p̂ = i kappa p̂.
    pub fn gradient(&self, p: &SpectralField) -> Result<SpectralVelocity> {
        if p.n != self.grid.n {
            return Err(Error::GridMismatch("gradient operand".into()));
        }
        let n = self.grid.n;
        let mut g = SpectralVelocity::zeros(n);
        let kap = &self.tab.kappa;
        let i = Complex64::new(0.0, 1.0);
        self.for_each_mode(|idx, ix, iy, iz| {
            let v = p.data[idx];
            g.comps[0].data[idx] = i * kap[ix] * v;
            g.comps[1].data[idx] = i * kap[iy] * v;
            g.comps[2].data[idx] = i * kap[iz] * v;
        });
        Ok(g)
    }

    /// Leray projection onto the discretely divergence-free space:
    /// û -= kappa (conj(kappa)·û)/|kappa|², modes with kappa = 0 untouched.
    pub fn project(&self, u: &mut SpectralVelocity) {
        self.project_scaled(u, 1.0);
    }

    /// û ← s · P û in one pass.
    pub fn project_scaled(&self, u: &mut SpectralVelocity, s: f64) {
        let n = self.grid.n;
        let n2 = n * n;
        let kap = &self.tab.kappa;
        let (c0, rest) = u.comps.split_first_mut().unwrap();
        let (c1, c2) = rest.split_first_mut().unwrap();
        let c2 = &mut c2[0];
        c0.data
            .par_chunks_mut(n2)
            .zip(c1.data.par_chunks_mut(n2))
            .zip(c2.data.par_chunks_mut(n2))
            .enumerate()
            .for_each(|(iz, ((sx, sy), sz))| {
                let kz = kap[iz];
                for iy in 0..n {
                    let ky = kap[iy];
                    for ix in 0..n {
                        let kx = kap[ix];
                        let k2 = kx.norm_sqr() + ky.norm_sqr() + kz.norm_sqr();
                        let l = ix + n * iy;
                        if k2 == 0.0 {
                            if s != 1.0 {
                                sx[l] *= s;
                                sy[l] *= s;
                                sz[l] *= s;
                            }
                            continue;
                        }
                        let div = (kx.conj() * sx[l] + ky.conj() * sy[l] + kz.conj() * sz[l]) / k2;
                        sx[l] = s * (sx[l] - kx * div);
                        sy[l] = s * (sy[l] - ky * div);
                        sz[l] = s * (sz[l] - kz * div);
                    }
                }
            });
    }

    /// Viscous symbol: adds s * k2_sum(k) * û to out (k2 from the scheme).
    pub fn add_scaled_laplacian(&self, s: f64, u: &SpectralVelocity, out: &mut SpectralVelocity) {
        let n = self.grid.n;
        let n2 = n * n;
        let k2t = &self.tab.k2_eff;
        for c in 0..3 {
            out.comps[c]
                .data
                .par_chunks_mut(n2)
                .zip(u.comps[c].data.par_chunks(n2))
                .enumerate()
                .for_each(|(iz, (o, v))| {
                    for iy in 0..n {
                        let k2yz = k2t[iy] + k2t[iz];
                        for ix in 0..n {
                            // L = -(k2_x + k2_y + k2_z)
                            o[ix + n * iy] -= s * (k2t[ix] + k2yz) * v[ix + n * iy];
                        }
                    }
                });
        }
    }

    // ----- inner products and invariants -----

    /// Physical-space mean of the pointwise dot product, evaluated
    /// spectrally via Parseval.
    pub fn inner(&self, a: &SpectralVelocity, b: &SpectralVelocity) -> f64 {
        let len = self.modes();
        let mut total = 0.0;
        for c in 0..3 {
            let av = &a.comps[c].data;
            let bv = &b.comps[c].data;
            total += par_sum_modes(len, |i| av[i].re * bv[i].re + av[i].im * bv[i].im);
        }
        total
    }

    pub fn inner_scalar(&self, a: &SpectralField, b: &SpectralField) -> f64 {
        par_sum_modes(self.modes(), |i| a.data[i].re * b.data[i].re + a.data[i].im * b.data[i].im)
    }

    /// Discrete kinetic energy e = <u·u>/2.
    pub fn energy(&self, u: &SpectralVelocity) -> f64 {
        0.5 * self.inner(u, u)
    }

    /// Discrete helicity h = <u·w> with the scheme's own curl.
    pub fn helicity(&self, u: &SpectralVelocity) -> f64 {
        let n = self.grid.n;
        let n2 = n * n;
        let kap = &self.tab.kappa;
        let len = self.modes();
        let ux = &u.comps[0].data;
        let uy = &u.comps[1].data;
        let uz = &u.comps[2].data;
        par_sum_modes(len, |idx| {
            let ix = idx % n;
            let iy = (idx / n) % n;
            let iz = idx / n2;
            let i = Complex64::new(0.0, 1.0);
            let wx = i * (kap[iy] * uz[idx] - kap[iz] * uy[idx]);
            let wy = i * (kap[iz] * ux[idx] - kap[ix] * uz[idx]);
            let wz = i * (kap[ix] * uy[idx] - kap[iy] * ux[idx]);
            (ux[idx].conj() * wx + uy[idx].conj() * wy + uz[idx].conj() * wz).re
        })
    }

    /// Σ_k k2_sum(k) Re(â*·b̂): the inner product weighted by the scheme's
    /// second-derivative symbol, as appears in viscous rates.
    pub fn inner_k2(&self, a: &SpectralVelocity, b: &SpectralVelocity) -> f64 {
        let n = self.grid.n;
        let n2 = n * n;
        let k2t = &self.tab.k2_eff;
        let len = self.modes();
        let mut total = 0.0;
        for c in 0..3 {
            let av = &a.comps[c].data;
            let bv = &b.comps[c].data;
            total += par_sum_modes(len, |idx| {
                let ix = idx % n;
                let iy = (idx / n) % n;
                let iz = idx / n2;
                (k2t[ix] + k2t[iy] + k2t[iz]) * (av[idx].re * bv[idx].re + av[idx].im * bv[idx].im)
            });
        }
        total
    }

    /// <curl a, b> evaluated in one fused pass (no vorticity field
    /// materialized); equals inner(curl(a), b).
    pub fn inner_curl(&self, a: &SpectralVelocity, b: &SpectralVelocity) -> f64 {
        let n = self.grid.n;
        let n2 = n * n;
        let kap = &self.tab.kappa;
        let ax = &a.comps[0].data;
        let ay = &a.comps[1].data;
        let az = &a.comps[2].data;
        let bx = &b.comps[0].data;
        let by = &b.comps[1].data;
        let bz = &b.comps[2].data;
        par_sum_modes(self.modes(), |idx| {
            let kx = kap[idx % n];
            let ky = kap[(idx / n) % n];
            let kz = kap[idx / n2];
            let i = Complex64::new(0.0, 1.0);
            let wx = i * (ky * az[idx] - kz * ay[idx]);
            let wy = i * (kz * ax[idx] - kx * az[idx]);
            let wz = i * (kx * ay[idx] - ky * ax[idx]);
            (wx.conj() * bx[idx] + wy.conj() * by[idx] + wz.conj() * bz[idx]).re
        })
    }

    /// All per-stage budget rates in one fused pass over (u, f):
    /// (<u,f>, <curl u, f>, Σ k2|û|², Σ k2 Re(û*·ŵ)).
    pub fn budget_rates(&self, u: &SpectralVelocity, f: &SpectralVelocity) -> (f64, f64, f64, f64) {
        let n = self.grid.n;
        let n2 = n * n;
        let kap = &self.tab.kappa;
        let k2t = &self.tab.k2_eff;
        let ux = &u.comps[0].data;
        let uy = &u.comps[1].data;
        let uz = &u.comps[2].data;
        let fx = &f.comps[0].data;
        let fy = &f.comps[1].data;
        let fz = &f.comps[2].data;
        let len = self.modes();
        let chunks = len.div_ceil(RED_CHUNK);
        let partials: Vec<[f64; 4]> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * RED_CHUNK;
                let hi = (lo + RED_CHUNK).min(len);
                let mut acc = [0.0f64; 4];
                let i = Complex64::new(0.0, 1.0);
                for idx in lo..hi {
                    let (jx, jy, jz) = (idx % n, (idx / n) % n, idx / n2);
                    let (kx, ky, kz) = (kap[jx], kap[jy], kap[jz]);
                    let k2 = k2t[jx] + k2t[jy] + k2t[jz];
                    let (a, b, cc) = (ux[idx], uy[idx], uz[idx]);
                    let wx = i * (ky * cc - kz * b);
                    let wy = i * (kz * a - kx * cc);
                    let wz = i * (kx * b - ky * a);
                    acc[0] += (a.conj() * fx[idx] + b.conj() * fy[idx] + cc.conj() * fz[idx]).re;
                    acc[1] += (wx.conj() * fx[idx] + wy.conj() * fy[idx] + wz.conj() * fz[idx]).re;
                    acc[2] += k2 * (a.norm_sqr() + b.norm_sqr() + cc.norm_sqr());
                    acc[3] += k2 * (a.conj() * wx + b.conj() * wy + cc.conj() * wz).re;
                }
                acc
            })
            .collect();
        let mut out = [0.0f64; 4];
        for p in partials {
            for q in 0..4 {
                out[q] += p[q];
            }
        }
        (out[0], out[1], out[2], out[3])
    }

    /// Physical samples of the velocity and its curl in three packed
    /// transforms, with the vorticity coefficients formed on the fly.
    pub fn velocity_and_curl_to_physical(
        &mut self,
        u: &SpectralVelocity,
    ) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
        let n = self.grid.n;
        let n2 = n * n;
        let m = self.modes();
        let kap = self.tab.kappa.clone();
        let i = Complex64::new(0.0, 1.0);
        let ux = &u.comps[0].data;
        let uy = &u.comps[1].data;
        let uz = &u.comps[2].data;

        // Pack (u_x + i u_y), (u_z + i w_x), (w_y + i w_z).
        fn build_packed<F>(m: usize, n: usize, f: F) -> Vec<Complex64>
        where
            F: Fn(usize, usize, usize, usize) -> Complex64 + Sync,
        {
            let n2 = n * n;
            let mut out = zeroed_complex(m);
            out.par_chunks_mut(n2).enumerate().for_each(|(iz, chunk)| {
                let mut idx = iz * n2;
                for iy in 0..n {
                    for ix in 0..n {
                        chunk[ix + n * iy] = f(idx, ix, iy, iz);
                        idx += 1;
                    }
                }
            });
            out
        }
        let _ = n2;
        let wx = |idx: usize, iy: usize, iz: usize| i * (kap[iy] * uz[idx] - kap[iz] * uy[idx]);
        let wy = |idx: usize, ix: usize, iz: usize| i * (kap[iz] * ux[idx] - kap[ix] * uz[idx]);
        let wz = |idx: usize, ix: usize, iy: usize| i * (kap[ix] * uy[idx] - kap[iy] * ux[idx]);

        let pack1 = build_packed(m, n, |idx, _, _, _| {
            let a = ux[idx];
            let b = uy[idx];
            Complex64::new(a.re - b.im, a.im + b.re)
        });
        let pack2 = build_packed(m, n, |idx, _ix, iy, iz| {
            let a = uz[idx];
            let b = wx(idx, iy, iz);
            Complex64::new(a.re - b.im, a.im + b.re)
        });
        let pack3 = build_packed(m, n, |idx, ix, iy, iz| {
            let a = wy(idx, ix, iz);
            let b = wz(idx, ix, iy);
            Complex64::new(a.re - b.im, a.im + b.re)
        });

        let mut unpack = |mut work: Vec<Complex64>| -> (Vec<f64>, Vec<f64>) {
            self.fft_inverse(&mut work);
            let mut pa = vec![0.0; m];
            let mut pb = vec![0.0; m];
            pa.par_iter_mut().zip(pb.par_iter_mut()).zip(work.par_iter()).for_each(
                |((x, y), w)| {
                    *x = w.re;
                    *y = w.im;
                },
            );
            (pa, pb)
        };
        let (p_ux, p_uy) = unpack(pack1);
        let (p_uz, p_wx) = unpack(pack2);
        let (p_wy, p_wz) = unpack(pack3);
        ([p_ux, p_uy, p_uz], [p_wx, p_wy, p_wz])
    }

    pub(crate) fn fft_inverse(&self, work: &mut [Complex64]) {
        self.fft.inverse(work);
    }

    /// Staggered helicity evaluated at cell vertices and centers.
    ///
    /// On the staggered layout the velocity and vorticity components live at
    /// faces and edges, so forming u·w requires interpolations; the two
    /// natural gathering points give two helicity definitions. For colocated
    /// schemes every interpolation symbol is 1 and both reduce to <u·w>.
    pub fn staggered_helicity(&self, u: &SpectralVelocity) -> (f64, f64) {
        let n = self.grid.n;
        let n2 = n * n;
        let kap = &self.tab.kappa;
        let avg = &self.tab.avg_factor;
        let shift = &self.tab.stagger_shift;
        let len = self.modes();
        // A± symbols per axis index.
        let ap: Vec<Complex64> = (0..n).map(|j| avg[j] * shift[j]).collect();
        let am: Vec<Complex64> = (0..n).map(|j| avg[j] * shift[j].conj()).collect();

        let comp = |vertices: bool| {
            par_sum_modes(len, |idx| {
                let ix = idx % n;
                let iy = (idx / n) % n;
                let iz = idx / n2;
                let k = [kap[ix], kap[iy], kap[iz]];
                let uc = [u.comps[0].data[idx], u.comps[1].data[idx], u.comps[2].data[idx]];
                let i = Complex64::new(0.0, 1.0);
                let w = [
                    i * (k[1] * uc[2] - k[2] * uc[1]),
                    i * (k[2] * uc[0] - k[0] * uc[2]),
                    i * (k[0] * uc[1] - k[1] * uc[0]),
                ];
                let a = [[ap[ix], am[ix]], [ap[iy], am[iy]], [ap[iz], am[iz]]];
                let sel = |axis: usize| if vertices { a[axis][0] } else { a[axis][1] };
                let mut s = 0.0;
                for m in 0..3 {
                    let t1 = (m + 1) % 3;
                    let t2 = (m + 2) % 3;
                    let (fu, fw) = if vertices {
                        // u_m averaged along both transverse axes to the vertex,
                        // w_m averaged along its own axis.
                        (sel(t1) * sel(t2) * uc[m], sel(m) * w[m])
                    } else {
                        // u_m averaged to the center, w_m along both transverse axes.
                        (sel(m) * uc[m], sel(t1) * sel(t2) * w[m])
                    };
                    s += (fu.conj() * fw).re;
                }
                s
            })
        };
        (comp(true), comp(false))
    }

    /// Max pointwise |u_c| over components (3 physical fields).
    pub fn max_velocity(&mut self, u: &SpectralVelocity) -> f64 {
        let phys = self.velocity_to_physical(u);
        phys.iter()
            .map(|p| p.par_iter().cloned().map(f64::abs).reduce(|| 0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DealiasPolicy, DerivativeScheme};
    use crate::testutil::random_velocity;

    fn ops(n: usize, scheme: DerivativeScheme) -> Ops {
        Ops::new(GridSpec::new(n, scheme, DealiasPolicy::None).unwrap()).unwrap()
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        for scheme in [
            DerivativeScheme::Spectral,
            DerivativeScheme::Fd2Colocated,
            DerivativeScheme::Fd2Staggered,
        ] {
            let o = ops(8, scheme);
            let u = random_velocity(8, 7);
            // Build a gradient field from the x-component as scalar.
            let p = u.comps[0].clone();
            let g = o.gradient(&p).unwrap();
            let c = o.curl(&g).unwrap();
            assert!(c.max_coeff_norm() < 1e-13, "RG = 0 for {:?}", scheme);
        }
    }

    #[test]
    fn projection_is_idempotent_and_kills_gradients() {
        for scheme in [
            DerivativeScheme::Spectral,
            DerivativeScheme::Fd2Colocated,
            DerivativeScheme::Fd2Staggered,
        ] {
            let o = ops(8, scheme);
            let mut u = random_velocity(8, 11);
            o.project(&mut u);
            let div = o.divergence(&u).unwrap();
            let max_div = div.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(max_div < 1e-13, "projected divergence for {:?}", scheme);

            let once = u.clone();
            o.project(&mut u);
            let mut diff: f64 = 0.0;
            for c in 0..3 {
                for (a, b) in u.comps[c].data.iter().zip(once.comps[c].data.iter()) {
                    diff = diff.max((a - b).norm());
                }
            }
            assert!(diff < 1e-14, "idempotence for {:?}", scheme);

            // Pure gradient goes to zero.
            let p = random_velocity(8, 13).comps[0].clone();
            let mut g = o.gradient(&p).unwrap();
            o.project(&mut g);
            assert!(g.max_coeff_norm() < 1e-13, "projector kernel for {:?}", scheme);
        }
    }

    #[test]
    fn curl_is_symmetric_for_colocated_schemes() {
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Fd2Colocated] {
            let o = ops(8, scheme);
            let u = random_velocity(8, 17);
            let v = random_velocity(8, 19);
            let lhs = o.inner(&u, &o.curl(&v).unwrap());
            let rhs = o.inner(&v, &o.curl(&u).unwrap());
            assert!((lhs - rhs).abs() < 1e-12, "R symmetry for {:?}", scheme);
        }
    }

    #[test]
    fn parseval_matches_physical_quadrature() {
        let mut o = ops(8, DerivativeScheme::Spectral);
        let u = random_velocity(8, 23);
        let v = random_velocity(8, 29);
        let spectral = o.inner(&u, &v);
        let up = o.velocity_to_physical(&u);
        let vp = o.velocity_to_physical(&v);
        let m = o.modes() as f64;
        let mut phys = 0.0;
        for c in 0..3 {
            phys += up[c].iter().zip(vp[c].iter()).map(|(a, b)| a * b).sum::<f64>() / m;
        }
        assert!((spectral - phys).abs() <= 1e-12 * spectral.abs().max(1.0));
    }

    #[test]
    fn energy_and_helicity_of_zero_field() {
        let o = ops(8, DerivativeScheme::Spectral);
        let u = SpectralVelocity::zeros(8);
        assert_eq!(o.energy(&u), 0.0);
        assert_eq!(o.helicity(&u), 0.0);
    }

    #[test]
    fn divergence_of_gradient_is_minus_laplacian_spectral() {
        let o = ops(8, DerivativeScheme::Spectral);
        let p = random_velocity(8, 31).comps[0].clone();
        let g = o.gradient(&p).unwrap();
        let d = o.divergence(&g).unwrap();
        // d should equal -|k|^2 p per mode.
        let k2 = &o.table().k2_eff;
        o.for_each_mode(|idx, ix, iy, iz| {
            let expect = -(k2[ix] + k2[iy] + k2[iz]) * p.data[idx];
            assert!((d.data[idx] - expect).norm() < 1e-11);
        });
    }

    #[test]
    fn staggered_helicity_reduces_to_colocated() {
        let o = ops(8, DerivativeScheme::Spectral);
        let mut u = random_velocity(8, 37);
        o.project(&mut u);
        let h = o.helicity(&u);
        let (hv, hc) = o.staggered_helicity(&u);
        assert!((hv - h).abs() < 1e-12);
        assert!((hc - h).abs() < 1e-12);
    }

    #[test]
    fn pressure_gradient_orthogonal_to_projected_fields() {
        for scheme in [
            DerivativeScheme::Spectral,
            DerivativeScheme::Fd2Colocated,
            DerivativeScheme::Fd2Staggered,
        ] {
            let o = ops(8, scheme);
            let mut u = random_velocity(8, 41);
            o.project(&mut u);
            let p = random_velocity(8, 43).comps[1].clone();
            let g = o.gradient(&p).unwrap();
            // G^T = -M, so <u, Gp> = -<Mu, p> = 0 once projected.
            assert!(o.inner(&u, &g).abs() < 1e-12);
            if scheme != DerivativeScheme::Fd2Staggered {
                // <w, Gp> = <u, RGp> = 0 needs the symmetric (colocated) curl.
                let w = o.curl(&u).unwrap();
                assert!(o.inner(&w, &g).abs() < 1e-12);
            }
        }
    }
}
