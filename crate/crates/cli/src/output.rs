//! CSV emission: per-step time series and per-shell spectra, each stamped
//! with the config hash so artifacts are traceable to their run.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use helispec_core::spectra::SpectraSample;

pub struct SeriesWriter {
    file: std::io::BufWriter<std::fs::File>,
}

impl SeriesWriter {
    pub fn create(path: &Path, config_hash: &str) -> Result<Self> {
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(file, "# config={config_hash}")?;
        writeln!(file, "t,e,h,h_vert,h_cent,eps_e,eps_h,dt,implicit_iters")?;
        Ok(SeriesWriter { file })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn row(
        &mut self,
        t: f64,
        e: f64,
        h: f64,
        h_vert: f64,
        h_cent: f64,
        eps_e: f64,
        eps_h: f64,
        dt: f64,
        implicit_iters: usize,
    ) -> Result<()> {
        writeln!(
            self.file,
            "{t:.12e},{e:.12e},{h:.12e},{h_vert:.12e},{h_cent:.12e},{eps_e:.12e},{eps_h:.12e},{dt:.12e},{implicit_iters}"
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush()?;
        Ok(())
    }
}

/// One row per shell: k, E, H, Te, Th, E_eq, H_eq, r_e, r_h.
/// Equilibrium and residual columns are NaN when not applicable.
pub fn write_spectra(
    path: &Path,
    config_hash: &str,
    t: f64,
    s: &SpectraSample,
    eq: Option<&(Vec<f64>, Vec<f64>)>,
    residuals: Option<&(Vec<f64>, Vec<f64>)>,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(file, "# config={config_hash} t={t:.12e}")?;
    writeln!(file, "k,E,H,Te,Th,E_eq,H_eq,r_e,r_h")?;
    let pick = |v: Option<&Vec<f64>>, k: usize| -> f64 {
        v.and_then(|v| v.get(k).copied()).unwrap_or(f64::NAN)
    };
    for k in 0..s.e.len() {
        let e_eq = pick(eq.map(|(e, _)| e), k);
        let h_eq = pick(eq.map(|(_, h)| h), k);
        let r_e = pick(residuals.map(|(r, _)| r), k);
        let r_h = pick(residuals.map(|(_, r)| r), k);
        writeln!(
            file,
            "{k},{:.12e},{:.12e},{:.12e},{:.12e},{e_eq:.12e},{h_eq:.12e},{r_e:.12e},{r_h:.12e}",
            s.e[k], s.h[k], s.te[k], s.th[k]
        )?;
    }
    file.flush()?;
    Ok(())
}
