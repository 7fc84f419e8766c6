//! Binary state snapshots: a fixed-layout little-endian header followed by
//! the raw complex coefficients of the three velocity components.
//! Round-trips are bitwise exact.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use helispec_core::grid::{DealiasPolicy, DerivativeScheme, GridSpec};
use helispec_core::{SpectralField, SpectralVelocity};

const MAGIC: &[u8; 4] = b"HSNP";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    pub time: f64,
    pub step: u64,
    pub config_hash: String,
}

fn scheme_code(s: DerivativeScheme) -> u8 {
    match s {
        DerivativeScheme::Spectral => 0,
        DerivativeScheme::Fd2Colocated => 1,
        DerivativeScheme::Fd2Staggered => 2,
    }
}

fn scheme_from(code: u8) -> Result<DerivativeScheme> {
    Ok(match code {
        0 => DerivativeScheme::Spectral,
        1 => DerivativeScheme::Fd2Colocated,
        2 => DerivativeScheme::Fd2Staggered,
        other => bail!("snapshot: unknown scheme code {other}"),
    })
}

fn dealias_code(d: DealiasPolicy) -> (u8, f64) {
    match d {
        DealiasPolicy::None => (0, 0.0),
        DealiasPolicy::TwoThirds => (1, 0.0),
        DealiasPolicy::Sphere(k) => (2, k),
    }
}

fn dealias_from(code: u8, k: f64) -> Result<DealiasPolicy> {
    Ok(match code {
        0 => DealiasPolicy::None,
        1 => DealiasPolicy::TwoThirds,
        2 => DealiasPolicy::Sphere(k),
        other => bail!("snapshot: unknown dealias code {other}"),
    })
}

pub fn write(path: &Path, header: &SnapshotHeader, u: &SpectralVelocity) -> Result<()> {
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(header.grid.n as u32).to_le_bytes())?;
    f.write_all(&header.grid.box_length.to_le_bytes())?;
    f.write_all(&[scheme_code(header.grid.scheme)])?;
    let (dcode, dk) = dealias_code(header.grid.dealias);
    f.write_all(&[dcode])?;
    f.write_all(&dk.to_le_bytes())?;
    f.write_all(&header.time.to_le_bytes())?;
    f.write_all(&header.step.to_le_bytes())?;
    let hash = header.config_hash.as_bytes();
    f.write_all(&(hash.len() as u32).to_le_bytes())?;
    f.write_all(hash)?;
    for c in 0..3 {
        for v in &u.comps[c].data {
            f.write_all(&v.re.to_le_bytes())?;
            f.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<(SnapshotHeader, SpectralVelocity)> {
    let mut f = std::io::BufReader::new(
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        bail!("{}: not a snapshot file", path.display());
    }
    let version = read_u32(&mut f)?;
    if version != VERSION {
        bail!("{}: unsupported snapshot version {version}", path.display());
    }
    let n = read_u32(&mut f)? as usize;
    let box_length = read_f64(&mut f)?;
    let scheme = scheme_from(read_u8(&mut f)?)?;
    let dcode = read_u8(&mut f)?;
    let dk = read_f64(&mut f)?;
    let dealias = dealias_from(dcode, dk)?;
    let grid = GridSpec::with_box_length(n, box_length, scheme, dealias)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let time = read_f64(&mut f)?;
    let step = read_u64(&mut f)?;
    let hlen = read_u32(&mut f)? as usize;
    if hlen > 1024 {
        bail!("snapshot: oversized hash field");
    }
    let mut hash = vec![0u8; hlen];
    f.read_exact(&mut hash)?;
    let config_hash = String::from_utf8(hash).context("snapshot hash not utf-8")?;

    let mut u = SpectralVelocity::zeros(n);
    for c in 0..3 {
        let comp: &mut SpectralField = &mut u.comps[c];
        for v in comp.data.iter_mut() {
            let re = read_f64(&mut f)?;
            let im = read_f64(&mut f)?;
            *v = num_complex::Complex64::new(re, im);
        }
    }
    Ok((SnapshotHeader { grid, time, step, config_hash }, u))
}

fn read_u8(f: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    f.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(f: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    f.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(f: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(f: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    f.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use helispec_core::testutil::random_velocity;

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.hsnp");
        let grid = GridSpec::new(8, DerivativeScheme::Fd2Colocated, DealiasPolicy::Sphere(3.0)).unwrap();
        let u = random_velocity(8, 99);
        let header = SnapshotHeader {
            grid: grid.clone(),
            time: 1.25,
            step: 77,
            config_hash: "abcdef0123456789".into(),
        };
        write(&path, &header, &u).unwrap();
        let (h2, u2) = read(&path).unwrap();
        assert_eq!(h2.grid, grid);
        assert_eq!(h2.time, 1.25);
        assert_eq!(h2.step, 77);
        assert_eq!(h2.config_hash, "abcdef0123456789");
        assert_eq!(u, u2, "payload must round-trip bitwise");
    }
}
