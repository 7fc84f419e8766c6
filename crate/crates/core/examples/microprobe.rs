use helispec_core::testutil::random_velocity;
use helispec_core::{DealiasPolicy, DerivativeScheme, GridSpec, Ops};
use std::time::Instant;

fn main() {
    let n = 96;
    let grid = GridSpec::new(n, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds).unwrap();
    let mut ops = Ops::new(grid).unwrap();
    let u = random_velocity(n, 1);
    let mut phys = Vec::new();
    let mut spec = helispec_core::SpectralField::zeros(n);

    let t = Instant::now();
    for _ in 0..10 {
        ops.to_physical(&u.comps[0], &mut phys);
    }
    println!("ifft single: {:.1?}/op", t.elapsed() / 10);

    let t = Instant::now();
    for _ in 0..10 {
        ops.to_spectral(&phys, &mut spec);
    }
    println!("fft single:  {:.1?}/op", t.elapsed() / 10);

    let mut pa = Vec::new();
    let mut pb = Vec::new();
    let t = Instant::now();
    for _ in 0..10 {
        ops.to_physical_pair(&u.comps[0], &u.comps[1], &mut pa, &mut pb);
    }
    println!("ifft pair:   {:.1?}/op", t.elapsed() / 10);

    let mut sa = helispec_core::SpectralField::zeros(n);
    let mut sb = helispec_core::SpectralField::zeros(n);
    let t = Instant::now();
    for _ in 0..10 {
        ops.to_spectral_pair(&pa, &pb, &mut sa, &mut sb);
    }
    println!("fft pair:    {:.1?}/op", t.elapsed() / 10);

    let t = Instant::now();
    for _ in 0..10 {
        let _ = ops.curl(&u).unwrap();
    }
    println!("curl:        {:.1?}/op", t.elapsed() / 10);

    let mut v = u.clone();
    let t = Instant::now();
    for _ in 0..10 {
        ops.project(&mut v);
    }
    println!("project:     {:.1?}/op", t.elapsed() / 10);

    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..10 {
        acc += ops.inner(&u, &v);
    }
    println!("inner:       {:.1?}/op ({acc:.2e})", t.elapsed() / 10);

    let t = Instant::now();
    for _ in 0..10 {
        acc += ops.helicity(&u);
    }
    println!("helicity:    {:.1?}/op ({acc:.2e})", t.elapsed() / 10);

    let t = Instant::now();
    for _ in 0..10 {
        acc += ops.inner_k2(&u, &v);
    }
    println!("inner_k2:    {:.1?}/op ({acc:.2e})", t.elapsed() / 10);

    let w = u.clone();
    let t = Instant::now();
    for _ in 0..10 {
        let mut z = helispec_core::SpectralVelocity::zeros(n);
        z.axpy(1.0, &w);
    }
    println!("alloc+axpy:  {:.1?}/op", t.elapsed() / 10);
}
