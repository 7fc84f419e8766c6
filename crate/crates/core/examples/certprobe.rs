use helispec_core::verify;

fn main() {
    for v in verify::standard_variants() {
        for n in [4usize, 8] {
            let t0 = std::time::Instant::now();
            let report = verify::certify(&v, n, 2024).unwrap();
            let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).collect();
            println!(
                "{:20} n={} checks={} failed={} ({:.2?})",
                v.name,
                n,
                report.checks.len(),
                failed.len(),
                t0.elapsed()
            );
            for c in failed {
                println!(
                    "  FAIL {} residual={:.3e} thr={:.1e} expect_zero={}",
                    c.name, c.residual, c.threshold, c.expect_zero
                );
            }
        }
    }
}
