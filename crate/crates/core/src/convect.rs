//! The five discretizations of the convective term N(u), evaluated
//! pseudo-spectrally: products in physical space on the native grid,
//! derivatives through the scheme's Fourier symbols, dealiasing as a mask
//! on each product per the grid policy.
//!
//! The staggered Harlow-Welch form is emulated entirely in Fourier
//! symbols: each flux term carries the two half-grid interpolations and
//! the half-grid derivative of the MAC scheme. Every symbol used there is
//! a real-space stencil's, so real fields stay real.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Ops, SpectralField, SpectralVelocity};
use crate::grid::DerivativeScheme;

/// Discretization of the nonlinear term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectiveForm {
    /// u_j ∂_j u_i
    Advective,
    /// ∂_j (u_j u_i)
    Divergence,
    /// Mean of the advective and divergence forms.
    SkewSymmetric,
    /// ω × u; the dynamic-pressure completion is absorbed by projection.
    Rotational,
    /// Harlow-Welch staggered divergence form (requires staggered tables).
    HwStaggered,
}

impl ConvectiveForm {
    pub fn token(&self) -> &'static str {
        match self {
            ConvectiveForm::Advective => "adv",
            ConvectiveForm::Divergence => "div",
            ConvectiveForm::SkewSymmetric => "skew",
            ConvectiveForm::Rotational => "rot",
            ConvectiveForm::HwStaggered => "hw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adv" => Some(ConvectiveForm::Advective),
            "div" => Some(ConvectiveForm::Divergence),
            "skew" => Some(ConvectiveForm::SkewSymmetric),
            "rot" => Some(ConvectiveForm::Rotational),
            "hw" => Some(ConvectiveForm::HwStaggered),
            _ => None,
        }
    }

    pub fn check_scheme(&self, scheme: DerivativeScheme) -> Result<()> {
        match (self, scheme) {
            (ConvectiveForm::HwStaggered, DerivativeScheme::Fd2Staggered) => Ok(()),
            (ConvectiveForm::HwStaggered, s) => Err(Error::FormSchemeMismatch(format!(
                "hw form needs fd2stag tables, scheme is {}",
                s.token()
            ))),
            _ => Ok(()),
        }
    }
}

fn mul_phys(a: &[f64], b: &[f64], out: &mut Vec<f64>) {
    out.resize(a.len(), 0.0);
    out.par_iter_mut()
        .zip(a.par_iter())
        .zip(b.par_iter())
        .for_each(|((o, &x), &y)| *o = x * y);
}

/// Applies the per-axis symbol i*kappa_axis to a scalar spectral field.
fn derivative_along(ops: &Ops, f: &SpectralField, axis: usize) -> SpectralField {
    let i = Complex64::new(0.0, 1.0);
    let sym: Vec<Complex64> = ops.table().kappa.iter().map(|&k| i * k).collect();
    ops.apply_symbol_along(f, &sym, axis)
}

/// Evaluates N(u) = C(u)u for the requested form.
pub fn nonlinear_term(ops: &mut Ops, u: &SpectralVelocity, form: ConvectiveForm) -> Result<SpectralVelocity> {
    form.check_scheme(ops.grid().scheme)?;
    bilinear(ops, u, u, form)
}

/// Evaluates C(u)v, the convective operator of carrier u applied to v.
/// With v = u this is the solver's nonlinear term; the bilinear version
/// feeds the dense-operator assembly.
pub fn bilinear(
    ops: &mut Ops,
    u: &SpectralVelocity,
    v: &SpectralVelocity,
    form: ConvectiveForm,
) -> Result<SpectralVelocity> {
    form.check_scheme(ops.grid().scheme)?;
    match form {
        ConvectiveForm::Advective => advective(ops, u, v),
        ConvectiveForm::Divergence => divergence_form(ops, u, v),
        ConvectiveForm::SkewSymmetric => {
            let mut a = advective(ops, u, v)?;
            let d = divergence_form(ops, u, v)?;
            a.axpy(1.0, &d);
            a.scale(0.5);
            Ok(a)
        }
        ConvectiveForm::Rotational => rotational(ops, u, v),
        ConvectiveForm::HwStaggered => hw_staggered(ops, u, v),
    }
}

/// N_i = Σ_j u_j ∂_j v_i, products in physical space, mask on the result.
fn advective(ops: &mut Ops, u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    let n = ops.n();
    let up = ops.velocity_to_physical(u);

    // ∂_j v_i for all 9 pairs; transform in packed pairs.
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(9);
    let mut pending: Option<SpectralField> = None;
    for i in 0..3 {
        for j in 0..3 {
            let d = derivative_along(ops, &v.comps[i], j);
            if let Some(first) = pending.take() {
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                ops.to_physical_pair(&first, &d, &mut pa, &mut pb);
                derivs.push(pa);
                derivs.push(pb);
            } else {
                pending = Some(d);
            }
        }
    }
    if let Some(last) = pending {
        let mut p = Vec::new();
        ops.to_physical(&last, &mut p);
        derivs.push(p);
    }

    let mut out = SpectralVelocity::zeros(n);
    let mut acc = vec![0.0; ops.modes()];
    let mut pending_spec: Option<(usize, Vec<f64>)> = None;
    for i in 0..3 {
        acc.par_iter_mut().enumerate().for_each(|(p, a)| {
            *a = up[0][p] * derivs[3 * i][p] + up[1][p] * derivs[3 * i + 1][p] + up[2][p] * derivs[3 * i + 2][p];
        });
        if let Some((pi, pa)) = pending_spec.take() {
            let (lo, hi) = split_two(&mut out, pi, i);
            ops.to_spectral_pair(&pa, &acc, lo, hi);
        } else {
            pending_spec = Some((i, acc.clone()));
        }
    }
    if let Some((pi, pa)) = pending_spec {
        ops.to_spectral(&pa, &mut out.comps[pi]);
    }
    ops.apply_mask(&mut out);
    Ok(out)
}

/// N_i = Σ_j ∂_j (u_j v_i); products masked, then differentiated.
fn divergence_form(ops: &mut Ops, u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    let n = ops.n();
    let same = std::ptr::eq(u, v);
    let up = ops.velocity_to_physical(u);
    let vp = if same { None } else { Some(ops.velocity_to_physical(v)) };
    let vp_ref = vp.as_ref().unwrap_or(&up);

    // Spectral products p_ij = F(u_j v_i), masked.
    let mut prods: Vec<SpectralField> = (0..9).map(|_| SpectralField::zeros(n)).collect();
    let mut phys_i = Vec::new();
    let mut phys_j = Vec::new();
    let mut queue: Vec<(usize, usize)> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if same && j < i {
                continue; // symmetric tensor, fill mirror below
            }
            queue.push((i, j));
        }
    }
    let mut it = queue.chunks_exact(2);
    for pair in &mut it {
        let (i0, j0) = pair[0];
        let (i1, j1) = pair[1];
        mul_phys(&up[j0], &vp_ref[i0], &mut phys_i);
        mul_phys(&up[j1], &vp_ref[i1], &mut phys_j);
        let (a, b) = two_mut(&mut prods, 3 * i0 + j0, 3 * i1 + j1);
        ops.to_spectral_pair(&phys_i, &phys_j, a, b);
    }
    if let [(i0, j0)] = it.remainder() {
        mul_phys(&up[*j0], &vp_ref[*i0], &mut phys_i);
        ops.to_spectral(&phys_i, &mut prods[3 * i0 + j0]);
    }
    if same {
        for i in 0..3 {
            for j in 0..i {
                prods[3 * i + j] = prods[3 * j + i].clone();
            }
        }
    }
    for p in prods.iter_mut() {
        ops.apply_mask_scalar(p);
    }

    let mut out = SpectralVelocity::zeros(n);
    for i in 0..3 {
        for j in 0..3 {
            let d = derivative_along(ops, &prods[3 * i + j], j);
            out.comps[i].data.par_iter_mut().zip(d.data.par_iter()).for_each(|(o, &v)| *o += v);
        }
    }
    Ok(out)
}

/// N = ω × v with ω = curl(u); masked after the product.
fn rotational(ops: &mut Ops, u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    let n = ops.n();
    let same = std::ptr::eq(u, v);

    // Vorticity coefficients are formed on the fly inside the packed
    // transforms; nothing is materialized in spectral space.
    let (vp, wp) = if same {
        ops.velocity_and_curl_to_physical(u)
    } else {
        let w = ops.curl(u)?;
        (ops.velocity_to_physical(v), ops.velocity_to_physical(&w))
    };

    let m = ops.modes();
    let mut cx = vec![0.0; m];
    let mut cy = vec![0.0; m];
    let mut cz = vec![0.0; m];
    cx.par_iter_mut()
        .zip(cy.par_iter_mut())
        .zip(cz.par_iter_mut())
        .enumerate()
        .for_each(|(p, ((x, y), z))| {
            *x = wp[1][p] * vp[2][p] - wp[2][p] * vp[1][p];
            *y = wp[2][p] * vp[0][p] - wp[0][p] * vp[2][p];
            *z = wp[0][p] * vp[1][p] - wp[1][p] * vp[0][p];
        });

    let mut out = SpectralVelocity::zeros(n);
    let (c0, rest) = out.comps.split_first_mut().unwrap();
    let (c1, c2) = rest.split_first_mut().unwrap();
    ops.to_spectral_pair(&cx, &cy, c0, c1);
    ops.to_spectral(&cz, &mut c2[0]);
    ops.apply_mask(&mut out);
    Ok(out)
}

/// Harlow-Welch staggered divergence form:
/// N_i = δ_i(Ā_i u_i · Ā_i v_i) + Σ_{j≠i} δ_j^-( A_i^+ u_j · A_j^+ v_i ).
///
/// A±, δ± are the half-grid average/difference stencils with their shift
/// phases included, so the composition reproduces the MAC flux locations
/// exactly while staying on one colocated mode grid.
fn hw_staggered(ops: &mut Ops, u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    let n = ops.n();
    let same = std::ptr::eq(u, v);
    let tab = ops.table();
    // Per-axis symbols.
    let a_plus: Vec<Complex64> =
        (0..n).map(|j| tab.avg_factor[j] * tab.stagger_shift[j]).collect();
    let a_minus: Vec<Complex64> =
        (0..n).map(|j| tab.avg_factor[j] * tab.stagger_shift[j].conj()).collect();
    let d_plus: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(0.0, tab.k1_eff[j]) * tab.stagger_shift[j])
        .collect();
    let d_minus: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(0.0, tab.k1_eff[j]) * tab.stagger_shift[j].conj())
        .collect();

    let apply_axis = |ops: &Ops, f: &SpectralField, sym: &[Complex64], axis: usize| {
        ops.apply_symbol_along(f, sym, axis)
    };

    // Interpolated physical fields, all transforms packed in pairs.
    // diag[c]      = Ā_c u_c at centers,
    // edge[a][b]   = A_a^+ u_b at the (a,b) edge (a ≠ b).
    let build_fields = |ops: &mut Ops, f: &SpectralVelocity| {
        let mut diag: Vec<Vec<f64>> = vec![Vec::new(); 3];
        let mut edge: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); 3]; 3];
        let sd: Vec<SpectralField> =
            (0..3).map(|c| apply_axis(ops, &f.comps[c], &a_minus, c)).collect();
        let (d0, rest) = diag.split_first_mut().unwrap();
        let (d1, d2) = rest.split_first_mut().unwrap();
        ops.to_physical_pair(&sd[0], &sd[1], d0, d1);
        ops.to_physical(&sd[2], &mut d2[0]);
        for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let sab = apply_axis(ops, &f.comps[b], &a_plus, a);
            let sba = apply_axis(ops, &f.comps[a], &a_plus, b);
            let mut pab = Vec::new();
            let mut pba = Vec::new();
            ops.to_physical_pair(&sab, &sba, &mut pab, &mut pba);
            edge[a][b] = pab;
            edge[b][a] = pba;
        }
        (diag, edge)
    };
    let (diag_u, edge_u) = build_fields(ops, u);
    let of_v = if same { None } else { Some(build_fields(ops, v)) };
    let (diag_v, edge_v) = match &of_v {
        Some((d, e)) => (d, e),
        None => (&diag_u, &edge_u),
    };

    // Fluxes P_ij = (A_i^+ u_j)(A_j^+ v_i), at centers for i = j.
    // With v = u the tensor is symmetric; compute the upper triangle only.
    let mut flux: Vec<Vec<SpectralField>> =
        (0..3).map(|_| (0..3).map(|_| SpectralField::zeros(n)).collect()).collect();
    let pairs: Vec<(usize, usize)> = if same {
        vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
    } else {
        (0..9).map(|m| (m / 3, m % 3)).collect()
    };
    let mut phys_a = Vec::new();
    let mut phys_b = Vec::new();
    let flux_phys = |(i, j): (usize, usize), dst: &mut Vec<f64>| {
        if i == j {
            mul_phys(&diag_u[i], &diag_v[i], dst);
        } else {
            mul_phys(&edge_u[i][j], &edge_v[j][i], dst);
        }
    };
    let mut chunks = pairs.chunks_exact(2);
    for pair in &mut chunks {
        flux_phys(pair[0], &mut phys_a);
        flux_phys(pair[1], &mut phys_b);
        let (fa, fb) = flux_two(&mut flux, pair[0], pair[1]);
        ops.to_spectral_pair(&phys_a, &phys_b, fa, fb);
    }
    if let [p] = chunks.remainder() {
        flux_phys(*p, &mut phys_a);
        ops.to_spectral(&phys_a, &mut flux[p.0][p.1]);
    }
    if same {
        for i in 0..3 {
            for j in 0..i {
                flux[i][j] = flux[j][i].clone();
            }
        }
    }
    for row in flux.iter_mut() {
        for f in row.iter_mut() {
            ops.apply_mask_scalar(f);
        }
    }

    // N_i = δ_i^+ P_ii + Σ_{j≠i} δ_j^- P_ij.
    let mut out = SpectralVelocity::zeros(n);
    for i in 0..3 {
        for j in 0..3 {
            let sym = if i == j { &d_plus } else { &d_minus };
            let d = ops.apply_symbol_along(&flux[i][j], sym, j);
            out.comps[i].data.par_iter_mut().zip(d.data.par_iter()).for_each(|(o, &v)| *o += v);
        }
    }
    Ok(out)
}

fn split_two<'a>(
    v: &'a mut SpectralVelocity,
    a: usize,
    b: usize,
) -> (&'a mut SpectralField, &'a mut SpectralField) {
    assert!(a < b);
    let (lo, hi) = v.comps.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a != b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

fn flux_two<'a>(
    flux: &'a mut [Vec<SpectralField>],
    a: (usize, usize),
    b: (usize, usize),
) -> (&'a mut SpectralField, &'a mut SpectralField) {
    assert_ne!(a, b);
    if a.0 == b.0 {
        let row = &mut flux[a.0];
        let (x, y) = two_mut(row, a.1, b.1);
        (x, y)
    } else {
        let (ra, rb) = two_mut(flux, a.0, b.0);
        (&mut ra[a.1], &mut rb[b.1])
    }
}

/// Projected nonlinear term: what the solver's right-hand side uses.
pub fn nonlinear_term_projected(
    ops: &mut Ops,
    u: &SpectralVelocity,
    form: ConvectiveForm,
) -> Result<SpectralVelocity> {
    let mut n = nonlinear_term(ops, u, form)?;
    ops.project(&mut n);
    Ok(n)
}

/// Instantaneous energy input rate of the projected convective term,
/// de/dt|conv = -<u, P N(u)>. Zero for the conserving cells of the
/// conservation table.
pub fn energy_production(ops: &mut Ops, u: &SpectralVelocity, form: ConvectiveForm) -> Result<f64> {
    let n = nonlinear_term_projected(ops, u, form)?;
    Ok(-ops.inner(u, &n))
}

/// Instantaneous helicity input rate, dh/dt|conv = -2 <curl u, P N(u)>,
/// with the scheme's own curl. Zero for the rotational form.
pub fn helicity_production(ops: &mut Ops, u: &SpectralVelocity, form: ConvectiveForm) -> Result<f64> {
    let n = nonlinear_term_projected(ops, u, form)?;
    let w = ops.curl(u)?;
    Ok(-2.0 * ops.inner(&w, &n))
}

/// Rate of change of the staggered center/vertex helicity pair along the
/// projected convective right-hand side. The helicity functionals are
/// quadratic, so the rate is the symmetric cross form evaluated at
/// (u, -P N(u)).
pub fn staggered_helicity_production(
    ops: &mut Ops,
    u: &SpectralVelocity,
    form: ConvectiveForm,
) -> Result<(f64, f64)> {
    let mut f = nonlinear_term_projected(ops, u, form)?;
    f.scale(-1.0);
    Ok(staggered_helicity_cross(ops, u, &f))
}

/// d/dt of the (vertex, center) helicity pair for state u and rate du/dt = f.
pub fn staggered_helicity_cross(ops: &Ops, u: &SpectralVelocity, f: &SpectralVelocity) -> (f64, f64) {
    // h(u) = B(u, u) with B bilinear; dh/dt = B(f, u) + B(u, f).
    let (bv_fu, bc_fu) = staggered_bilinear(ops, f, u);
    let (bv_uf, bc_uf) = staggered_bilinear(ops, u, f);
    (bv_fu + bv_uf, bc_fu + bc_uf)
}

/// B(a, b) = Σ_m <interp(a_m), interp(ω_m(b))> for the two placements.
fn staggered_bilinear(ops: &Ops, a: &SpectralVelocity, b: &SpectralVelocity) -> (f64, f64) {
    let n = ops.n();
    let tab = ops.table();
    let kap = &tab.kappa;
    let ap: Vec<Complex64> = (0..n).map(|j| tab.avg_factor[j] * tab.stagger_shift[j]).collect();
    let am: Vec<Complex64> =
        (0..n).map(|j| tab.avg_factor[j] * tab.stagger_shift[j].conj()).collect();

    let mut vert = 0.0;
    let mut cent = 0.0;
    ops.for_each_mode(|idx, ix, iy, iz| {
        let k = [kap[ix], kap[iy], kap[iz]];
        let av = [a.comps[0].data[idx], a.comps[1].data[idx], a.comps[2].data[idx]];
        let bv = [b.comps[0].data[idx], b.comps[1].data[idx], b.comps[2].data[idx]];
        let i = Complex64::new(0.0, 1.0);
        let w = [
            i * (k[1] * bv[2] - k[2] * bv[1]),
            i * (k[2] * bv[0] - k[0] * bv[2]),
            i * (k[0] * bv[1] - k[1] * bv[0]),
        ];
        let axp = [ap[ix], ap[iy], ap[iz]];
        let axm = [am[ix], am[iy], am[iz]];
        for m in 0..3 {
            let t1 = (m + 1) % 3;
            let t2 = (m + 2) % 3;
            vert += ((axp[t1] * axp[t2] * av[m]).conj() * (axp[m] * w[m])).re;
            cent += ((axm[m] * av[m]).conj() * (axm[t1] * axm[t2] * w[m])).re;
        }
    });
    (vert, cent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DealiasPolicy, GridSpec};
    use crate::testutil::random_velocity_band;

    fn ops(n: usize, scheme: DerivativeScheme, dealias: DealiasPolicy) -> Ops {
        Ops::new(GridSpec::new(n, scheme, dealias).unwrap()).unwrap()
    }

    fn unit_energy(o: &Ops, mut u: SpectralVelocity) -> SpectralVelocity {
        let e = o.energy(&u);
        u.scale((1.0 / e).sqrt());
        u
    }

    /// Full-band random solenoidal state at unit energy; wide enough that
    /// aliasing genuinely occurs on undealiased grids.
    fn projected(o: &Ops, n: usize, seed: u64) -> SpectralVelocity {
        let mut u = random_velocity_band(n, seed, n / 2 - 1);
        o.project(&mut u);
        unit_energy(o, u)
    }

    #[test]
    fn zero_field_gives_zero_for_every_form() {
        let mut o = ops(8, DerivativeScheme::Fd2Staggered, DealiasPolicy::None);
        let u = SpectralVelocity::zeros(8);
        for form in [
            ConvectiveForm::Advective,
            ConvectiveForm::Divergence,
            ConvectiveForm::SkewSymmetric,
            ConvectiveForm::Rotational,
            ConvectiveForm::HwStaggered,
        ] {
            let n = nonlinear_term(&mut o, &u, form).unwrap();
            assert_eq!(n.max_coeff_norm(), 0.0, "{:?}", form);
        }
    }

    #[test]
    fn hw_requires_staggered_tables() {
        let mut o = ops(8, DerivativeScheme::Spectral, DealiasPolicy::None);
        let u = SpectralVelocity::zeros(8);
        assert!(matches!(
            nonlinear_term(&mut o, &u, ConvectiveForm::HwStaggered),
            Err(Error::FormSchemeMismatch(_))
        ));
    }

    #[test]
    fn dealiased_spectral_advective_equals_divergence() {
        // Product rule restored by full dealiasing.
        let mut o = ops(12, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds);
        let mut u = random_velocity_band(12, 5, o.grid().retained_band());
        o.apply_mask(&mut u);
        o.project(&mut u);
        let a = nonlinear_term(&mut o, &u, ConvectiveForm::Advective).unwrap();
        let d = nonlinear_term(&mut o, &u, ConvectiveForm::Divergence).unwrap();
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..3 {
            for (x, y) in a.comps[c].data.iter().zip(d.comps[c].data.iter()) {
                diff = diff.max((x - y).norm());
                scale = scale.max(x.norm());
            }
        }
        assert!(diff <= 1e-12 * scale.max(1.0), "diff {} scale {}", diff, scale);
    }

    #[test]
    fn rotational_energy_production_zero_even_unprojected() {
        let mut o = ops(8, DerivativeScheme::Fd2Colocated, DealiasPolicy::None);
        let u = unit_energy(&o, random_velocity_band(8, 9, 3)); // not solenoidal
        let n = nonlinear_term(&mut o, &u, ConvectiveForm::Rotational).unwrap();
        assert!(o.inner(&u, &n).abs() < 1e-13);
    }

    #[test]
    fn skew_energy_production_zero_for_projected_state() {
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Fd2Colocated] {
            let mut o = ops(8, scheme, DealiasPolicy::None);
            let u = projected(&o, 8, 13);
            let p = energy_production(&mut o, &u, ConvectiveForm::SkewSymmetric).unwrap();
            assert!(p.abs() < 1e-12, "{:?}: {}", scheme, p);
        }
    }

    #[test]
    fn rotational_helicity_production_zero_any_central_scheme() {
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Fd2Colocated] {
            let mut o = ops(8, scheme, DealiasPolicy::None);
            let u = projected(&o, 8, 17);
            let p = helicity_production(&mut o, &u, ConvectiveForm::Rotational).unwrap();
            assert!(p.abs() < 1e-12, "{:?}: {}", scheme, p);
            // A priori: also for unprojected states.
            let v = unit_energy(&o, random_velocity_band(8, 19, 3));
            let p2 = helicity_production(&mut o, &v, ConvectiveForm::Rotational).unwrap();
            assert!(p2.abs() < 1e-12, "{:?} a priori: {}", scheme, p2);
        }
    }

    #[test]
    fn skew_helicity_production_nonzero() {
        let mut o = ops(8, DerivativeScheme::Spectral, DealiasPolicy::None);
        let u = projected(&o, 8, 23);
        let p = helicity_production(&mut o, &u, ConvectiveForm::SkewSymmetric).unwrap();
        assert!(p.abs() > 1e-6, "skew should not conserve helicity, got {}", p);
    }

    #[test]
    fn hw_energy_production_zero_for_projected_state() {
        let mut o = ops(8, DerivativeScheme::Fd2Staggered, DealiasPolicy::None);
        let u = projected(&o, 8, 29);
        let p = energy_production(&mut o, &u, ConvectiveForm::HwStaggered).unwrap();
        assert!(p.abs() < 1e-12, "HW conserves energy given continuity, got {}", p);
    }

    #[test]
    fn momentum_mode_zero_a_priori_for_divergence_and_hw() {
        let mut o = ops(8, DerivativeScheme::Fd2Staggered, DealiasPolicy::None);
        let u = unit_energy(&o, random_velocity_band(8, 31, 3)); // unprojected
        for form in [ConvectiveForm::Divergence, ConvectiveForm::HwStaggered] {
            let n = nonlinear_term(&mut o, &u, form).unwrap();
            let m0 = (0..3).map(|c| n.comps[c].data[0].norm()).fold(0.0, f64::max);
            assert!(m0 < 1e-14, "{:?} mode-0: {}", form, m0);
        }
    }

    #[test]
    fn all_forms_agree_on_dealiased_spectral_grid() {
        let mut o = ops(12, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds);
        let mut u = random_velocity_band(12, 37, o.grid().retained_band());
        o.apply_mask(&mut u);
        o.project(&mut u);
        let reference = nonlinear_term_projected(&mut o, &u, ConvectiveForm::SkewSymmetric).unwrap();
        for form in [ConvectiveForm::Advective, ConvectiveForm::Divergence, ConvectiveForm::Rotational] {
            let n = nonlinear_term_projected(&mut o, &u, form).unwrap();
            let mut diff: f64 = 0.0;
            for c in 0..3 {
                for (x, y) in n.comps[c].data.iter().zip(reference.comps[c].data.iter()) {
                    diff = diff.max((x - y).norm());
                }
            }
            assert!(diff < 1e-10, "{:?} vs skew: {}", form, diff);
        }
    }

    #[test]
    fn hw_output_is_hermitian() {
        let mut o = ops(8, DerivativeScheme::Fd2Staggered, DealiasPolicy::None);
        let u = projected(&o, 8, 41);
        let n = nonlinear_term(&mut o, &u, ConvectiveForm::HwStaggered).unwrap();
        let nn = o.n();
        for c in 0..3 {
            for iz in 0..nn {
                for iy in 0..nn {
                    for ix in 0..nn {
                        let a = n.comps[c].data[ix + nn * (iy + nn * iz)];
                        let b = n.comps[c].data[crate::fft::conj_index(nn, ix, iy, iz)];
                        assert!((a - b.conj()).norm() < 1e-12);
                    }
                }
            }
        }
    }
}
