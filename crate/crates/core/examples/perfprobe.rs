use helispec_core::convect::ConvectiveForm;
use helispec_core::rk::{ButcherTableau, Integrator};
use helispec_core::scenario;
use helispec_core::{DealiasPolicy, DerivativeScheme, GridSpec, Ops};
use std::time::Instant;

fn bench(n: usize, scheme: DerivativeScheme, dealias: DealiasPolicy, form: ConvectiveForm, steps: usize) {
    let grid = GridSpec::new(n, scheme, dealias).unwrap();
    let ops = Ops::new(grid).unwrap();
    let tableau = ButcherTableau::rk4();
    let mut integ = Integrator::new(ops, form, tableau, 0.0075).unwrap();
    let forcing = scenario::EulerForcing::new(&integ.ops, 2.5).unwrap();
    let mut u = scenario::forcing_seed(&integ.ops, 2.5, 0.967, 0.5, 42).unwrap();
    integ.forcing = Some(forcing);
    let t0 = Instant::now();
    let mut dt_last = 0.0;
    for _ in 0..steps {
        let dt = integ.cfl_dt(&u, 0.5, 0.05);
        dt_last = dt;
        integ.step(&mut u, dt).unwrap();
    }
    let el = t0.elapsed();
    println!(
        "n={:3} {:?} {:>4}: {:.3}s/step (dt={:.4}, e={:.4})",
        n,
        form,
        format!("{steps}"),
        el.as_secs_f64() / steps as f64,
        dt_last,
        integ.ops.energy(&u)
    );
}

fn main() {
    bench(64, DerivativeScheme::Fd2Colocated, DealiasPolicy::None, ConvectiveForm::Rotational, 10);
    bench(64, DerivativeScheme::Fd2Colocated, DealiasPolicy::None, ConvectiveForm::SkewSymmetric, 10);
    bench(96, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds, ConvectiveForm::Rotational, 6);
    bench(96, DerivativeScheme::Spectral, DealiasPolicy::TwoThirds, ConvectiveForm::SkewSymmetric, 4);
}
