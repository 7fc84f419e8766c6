//! Three-dimensional complex FFT on the cubic grid, built on 1-D rustfft
//! plans applied axis by axis.
//!
//! Forward transforms normalize by 1/n^3 so spectral arrays hold Fourier
//! coefficients: u(x) = Σ_k û(k) exp(i k·x). Line batches run in parallel;
//! there are no cross-thread reductions, so results are bitwise
//! deterministic for any thread count.
//!
//! Real fields travel in pairs where possible: two Hermitian-symmetric
//! spectral fields are packed as re/im of one complex transform, halving
//! the FFT count of the pseudo-spectral products.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Planned 3-D FFT for one cube size.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place forward transform (physical -> spectral), normalized by 1/n^3.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.fwd);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_chunks_mut(1 << 14).for_each(|c| {
            for v in c {
                *v *= scale;
            }
        });
    }

    /// In-place inverse transform (spectral -> physical), unnormalized.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.inv);
    }

    fn all_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        let scratch_len = plan.get_inplace_scratch_len();

        // Axis x: lines are contiguous; one batched rustfft call per z-slab.
        data.par_chunks_mut(n * n).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, slab| {
                plan.process_with_scratch(slab, scratch);
            },
        );

        // Axes y and z: copy an n x n tile with contiguous row copies,
        // transpose in cache so the transform axis becomes contiguous, run
        // one batched call, transpose and copy back.
        let n2 = n * n;

        // Axis y: tiles at fixed z; source rows (fixed y) are x-contiguous.
        data.par_chunks_mut(n2).for_each_init(
            || (vec![Complex64::default(); n2], vec![Complex64::default(); scratch_len]),
            |(tile, scratch), slab| {
                tile.copy_from_slice(slab);
                transpose_square(tile, n);
                plan.process_with_scratch(tile, scratch);
                transpose_square(tile, n);
                slab.copy_from_slice(tile);
            },
        );

        // Axis z: tiles at fixed y; rows (fixed z) are x-contiguous with
        // stride n^2 between them.
        let ptr = SendPtr(data.as_mut_ptr());
        (0..n).into_par_iter().for_each_init(
            || (vec![Complex64::default(); n2], vec![Complex64::default(); scratch_len]),
            |(tile, scratch), y| {
                // Safety: distinct y values touch disjoint index sets.
                let data = unsafe { std::slice::from_raw_parts_mut(ptr.get(), n * n2) };
                for z in 0..n {
                    let base = n * y + n2 * z;
                    tile[z * n..(z + 1) * n].copy_from_slice(&data[base..base + n]);
                }
                transpose_square(tile, n);
                plan.process_with_scratch(tile, scratch);
                transpose_square(tile, n);
                for z in 0..n {
                    let base = n * y + n2 * z;
                    data[base..base + n].copy_from_slice(&tile[z * n..(z + 1) * n]);
                }
            },
        );
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    fn get(&self) -> *mut Complex64 {
        self.0
    }
}

/// In-place transpose of an n x n tile (blocked for cache locality).
fn transpose_square(tile: &mut [Complex64], n: usize) {
    const B: usize = 16;
    let mut bi = 0;
    while bi < n {
        let ei = (bi + B).min(n);
        // Diagonal block.
        for i in bi..ei {
            for j in (i + 1)..ei {
                tile.swap(i * n + j, j * n + i);
            }
        }
        let mut bj = ei;
        while bj < n {
            let ej = (bj + B).min(n);
            for i in bi..ei {
                for j in bj..ej {
                    tile.swap(i * n + j, j * n + i);
                }
            }
            bj = ej;
        }
        bi = ei;
    }
}

/// Reversed FFT index: r(0) = 0, r(j) = n - j.
#[inline]
pub fn rev_index(n: usize, j: usize) -> usize {
    if j == 0 {
        0
    } else {
        n - j
    }
}

/// Index of the mode opposite to (ix, iy, iz).
#[inline]
pub fn conj_index(n: usize, ix: usize, iy: usize, iz: usize) -> usize {
    rev_index(n, ix) + n * (rev_index(n, iy) + n * rev_index(n, iz))
}

/// Transforms one Hermitian spectral field to its real physical samples.
pub fn spectral_to_physical(fft: &Fft3, spec: &[Complex64], phys: &mut [f64], work: &mut Vec<Complex64>) {
    work.clear();
    work.extend_from_slice(spec);
    fft.inverse(work);
    phys.par_iter_mut().zip(work.par_iter()).for_each(|(p, w)| *p = w.re);
}

/// Transforms two Hermitian spectral fields in one complex FFT.
pub fn spectral_pair_to_physical(
    fft: &Fft3,
    spec_a: &[Complex64],
    spec_b: &[Complex64],
    phys_a: &mut [f64],
    phys_b: &mut [f64],
    work: &mut Vec<Complex64>,
) {
    work.clear();
    work.extend(
        spec_a.iter().zip(spec_b.iter()).map(|(a, b)| Complex64::new(a.re - b.im, a.im + b.re)),
    );
    fft.inverse(work);
    phys_a
        .par_iter_mut()
        .zip(phys_b.par_iter_mut())
        .zip(work.par_iter())
        .for_each(|((a, b), w)| {
            *a = w.re;
            *b = w.im;
        });
}

/// Transforms one real physical field to spectral coefficients.
pub fn physical_to_spectral(fft: &Fft3, phys: &[f64], spec: &mut [Complex64], work: &mut Vec<Complex64>) {
    work.clear();
    work.extend(phys.iter().map(|&v| Complex64::new(v, 0.0)));
    fft.forward(work);
    spec.copy_from_slice(work);
}

/// Transforms two real physical fields in one complex FFT, splitting the
/// result by Hermitian symmetry. Outputs are exactly Hermitian.
pub fn physical_pair_to_spectral(
    fft: &Fft3,
    phys_a: &[f64],
    phys_b: &[f64],
    spec_a: &mut [Complex64],
    spec_b: &mut [Complex64],
    work: &mut Vec<Complex64>,
) {
    let n = fft.n();
    work.clear();
    work.extend(phys_a.iter().zip(phys_b.iter()).map(|(&a, &b)| Complex64::new(a, b)));
    fft.forward(work);

    // â(k) = (H(k) + H*(-k))/2,  b̂(k) = (H(k) - H*(-k))/(2i)
    let h = &*work;
    let n2 = n * n;
    spec_a
        .par_chunks_mut(n2)
        .zip(spec_b.par_chunks_mut(n2))
        .enumerate()
        .for_each(|(iz, (sa, sb))| {
            let rz = rev_index(n, iz);
            for iy in 0..n {
                let ry = rev_index(n, iy);
                for ix in 0..n {
                    let idx = ix + n * iy;
                    let hic = h[ix + n * (iy + n * iz)];
                    let hmc = h[rev_index(n, ix) + n * (ry + n * rz)].conj();
                    sa[idx] = 0.5 * (hic + hmc);
                    let d = hic - hmc;
                    sb[idx] = 0.5 * Complex64::new(d.im, -d.re);
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_real(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn roundtrip_identity() {
        let n = 8;
        let fft = Fft3::new(n);
        let phys = random_real(n, 1);
        let mut spec = vec![Complex64::default(); n * n * n];
        let mut work = Vec::new();
        physical_to_spectral(&fft, &phys, &mut spec, &mut work);
        let mut back = vec![0.0; n * n * n];
        spectral_to_physical(&fft, &spec, &mut back, &mut work);
        for (a, b) in phys.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn forward_matches_direct_dft_on_single_mode() {
        // u(x) = cos(2 x_0) has coefficients 1/2 at k = (±2, 0, 0).
        let n = 8;
        let fft = Fft3::new(n);
        let mut phys = vec![0.0; n * n * n];
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let x = 2.0 * std::f64::consts::PI * ix as f64 / n as f64;
                    phys[ix + n * (iy + n * iz)] = (2.0 * x).cos();
                }
            }
        }
        let mut spec = vec![Complex64::default(); n * n * n];
        let mut work = Vec::new();
        physical_to_spectral(&fft, &phys, &mut spec, &mut work);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let c = spec[ix + n * (iy + n * iz)];
                    let expect = if iy == 0 && iz == 0 && (ix == 2 || ix == n - 2) { 0.5 } else { 0.0 };
                    assert!((c.re - expect).abs() < 1e-13 && c.im.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn packed_pair_matches_single_transforms() {
        let n = 8;
        let m = n * n * n;
        let fft = Fft3::new(n);
        let pa = random_real(n, 2);
        let pb = random_real(n, 3);
        let mut work = Vec::new();

        let (mut sa, mut sb) = (vec![Complex64::default(); m], vec![Complex64::default(); m]);
        let (mut sa2, mut sb2) = (sa.clone(), sb.clone());
        physical_to_spectral(&fft, &pa, &mut sa, &mut work);
        physical_to_spectral(&fft, &pb, &mut sb, &mut work);
        physical_pair_to_spectral(&fft, &pa, &pb, &mut sa2, &mut sb2, &mut work);
        for i in 0..m {
            assert!((sa[i] - sa2[i]).norm() < 1e-13);
            assert!((sb[i] - sb2[i]).norm() < 1e-13);
        }

        // Inverse direction.
        let (mut qa, mut qb) = (vec![0.0; m], vec![0.0; m]);
        spectral_pair_to_physical(&fft, &sa, &sb, &mut qa, &mut qb, &mut work);
        for i in 0..m {
            assert!((qa[i] - pa[i]).abs() < 1e-12);
            assert!((qb[i] - pb[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn packed_forward_output_is_exactly_hermitian() {
        let n = 8;
        let m = n * n * n;
        let fft = Fft3::new(n);
        let pa = random_real(n, 4);
        let pb = random_real(n, 5);
        let (mut sa, mut sb) = (vec![Complex64::default(); m], vec![Complex64::default(); m]);
        let mut work = Vec::new();
        physical_pair_to_spectral(&fft, &pa, &pb, &mut sa, &mut sb, &mut work);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let i = ix + n * (iy + n * iz);
                    let j = conj_index(n, ix, iy, iz);
                    assert_eq!(sa[i], sa[j].conj());
                    assert_eq!(sb[i], sb[j].conj());
                }
            }
        }
    }
}
