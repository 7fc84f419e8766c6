//! Seeded random field construction shared by tests, property checks and
//! the dense-operator certification layer.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::fft::conj_index;
use crate::field::SpectralVelocity;

/// Random Hermitian-symmetric velocity coefficients, band-limited to
/// |k_j| <= k_band per axis, with zero mean mode and empty Nyquist planes.
/// Not solenoidal; project as needed.
pub fn random_velocity_band(n: usize, seed: u64, k_band: usize) -> SpectralVelocity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralVelocity::zeros(n);
    let half = n / 2;
    let k_of = |j: usize| -> i64 {
        if j <= half {
            j as i64
        } else {
            j as i64 - n as i64
        }
    };
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let idx = ix + n * (iy + n * iz);
                let pidx = conj_index(n, ix, iy, iz);
                if pidx < idx {
                    continue; // filled by its partner
                }
                let (kx, ky, kz) = (k_of(ix), k_of(iy), k_of(iz));
                let off_band = kx.unsigned_abs() as usize > k_band
                    || ky.unsigned_abs() as usize > k_band
                    || kz.unsigned_abs() as usize > k_band;
                let nyquist = ix == half || iy == half || iz == half;
                let zero_mode = kx == 0 && ky == 0 && kz == 0;
                if off_band || nyquist || zero_mode {
                    continue;
                }
                for c in 0..3 {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if pidx == idx {
                        u.comps[c].data[idx] = Complex64::new(v.re, 0.0);
                    } else {
                        u.comps[c].data[idx] = v;
                        u.comps[c].data[pidx] = v.conj();
                    }
                }
            }
        }
    }
    u
}

/// Full-band variant (everything below the Nyquist planes).
pub fn random_velocity(n: usize, seed: u64) -> SpectralVelocity {
    random_velocity_band(n, seed, n / 2 - 1)
}
