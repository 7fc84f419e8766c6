//! Run configuration: sectioned key = value text files with include
//! support, preset defaults, command-line overrides, and a content hash
//! that stamps every artifact a run produces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use helispec_core::convect::ConvectiveForm;
use helispec_core::grid::{DealiasPolicy, DerivativeScheme, GridSpec};
use helispec_core::rk::ButcherTableau;
use helispec_core::scenario;

/// Flat key-value store with "section.key" addressing.
#[derive(Debug, Clone, Default)]
pub struct KvMap(pub BTreeMap<String, String>);

impl KvMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn parse_into(&mut self, text: &str, dir: &Path, depth: usize) -> Result<()> {
        if depth > 8 {
            bail!("config include depth exceeds 8 (include cycle?)");
        }
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            if key == "include" && section.is_empty() {
                let path = dir.join(value);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading include {}", path.display()))?;
                let parent = path.parent().unwrap_or(Path::new(".")).to_path_buf();
                self.parse_into(&text, &parent, depth + 1)?;
                continue;
            }
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            self.0.insert(full, value.to_string());
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut kv = KvMap::default();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        kv.parse_into(&text, &dir, 0)?;
        Ok(kv)
    }

    pub fn merge_from(&mut self, other: &KvMap) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    /// Canonical text form: sorted "key = value" lines.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// How the initial state is constructed.
#[derive(Debug, Clone)]
pub enum InitialState {
    AbcPair { k1: usize, k2: usize, energy: f64 },
    ForcedSeed { k_f: f64, h_rel: f64, energy: f64, seed: u64 },
    Snapshot(PathBuf),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub form: ConvectiveForm,
    pub tableau: ButcherTableau,
    pub tableau_source: String,
    pub nu: f64,
    pub cfl: f64,
    pub dt_max: f64,
    /// Duration in characteristic times t0 = e0^{-1/2} / k_char.
    pub t_end: f64,
    pub k_char: f64,
    pub ic: InitialState,
    pub forcing_kf: Option<f64>,
    pub seed: u64,
    pub threads: usize,
    pub gauss_tol: f64,
    pub gauss_max_iter: usize,
    pub out_dir: PathBuf,
    pub series_every: usize,
    pub spectra_every: usize,
    pub snapshot_every: usize,
    pub preset: Option<String>,
    /// Canonical key-value view and its hash.
    pub kv: KvMap,
    pub hash: String,
}

fn preset_to_kv(p: &scenario::Preset) -> KvMap {
    let mut kv = KvMap::default();
    kv.set("grid.n", &p.grid.n.to_string());
    kv.set("grid.box_length", &format!("{:.17}", p.grid.box_length));
    kv.set("grid.scheme", p.grid.scheme.token());
    kv.set("grid.dealias", &p.grid.dealias.token());
    kv.set("run.form", p.form.token());
    kv.set("run.tableau", p.tableau);
    kv.set("run.nu", &p.nu.to_string());
    kv.set("run.cfl", &p.cfl.to_string());
    kv.set("run.t_end", &p.t_end_over_t0.to_string());
    kv.set("run.k_char", &p.k_char.to_string());
    match &p.ic {
        scenario::InitialCondition::AbcPair { k1, k2, energy } => {
            kv.set("ic.kind", "abc_pair");
            kv.set("ic.k1", &k1.to_string());
            kv.set("ic.k2", &k2.to_string());
            kv.set("ic.energy", &energy.to_string());
        }
        scenario::InitialCondition::ForcedSeed { k_f, h_rel, energy, seed } => {
            kv.set("ic.kind", "forced_seed");
            kv.set("ic.kf", &k_f.to_string());
            kv.set("ic.h_rel", &h_rel.to_string());
            kv.set("ic.energy", &energy.to_string());
            kv.set("ic.seed", &seed.to_string());
        }
    }
    if let Some(kf) = p.forcing_kf {
        kv.set("forcing.kf", &kf.to_string());
    }
    kv
}

fn get_parse<T: std::str::FromStr>(kv: &KvMap, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(s) => s.parse::<T>().map_err(|_| anyhow!("config key {key}: cannot parse '{s}'")),
    }
}

impl RunConfig {
    /// Resolves precedence: preset defaults <- config file <- --set overrides.
    pub fn resolve(
        config_file: Option<&Path>,
        preset: Option<&str>,
        overrides: &[(String, String)],
        out_dir: Option<&Path>,
        restart: Option<&Path>,
    ) -> Result<RunConfig> {
        let mut file_kv = match config_file {
            Some(p) => KvMap::from_file(p)?,
            None => KvMap::default(),
        };
        for (k, v) in overrides {
            file_kv.set(k, v);
        }

        let preset_name = preset
            .map(|s| s.to_string())
            .or_else(|| file_kv.get("run.preset").map(|s| s.to_string()));
        let mut kv = match &preset_name {
            Some(name) => {
                let p = scenario::preset(name)
                    .ok_or_else(|| anyhow!("unknown preset '{name}'; available: {:?}", scenario::preset_names()))?;
                preset_to_kv(&p)
            }
            None => KvMap::default(),
        };
        kv.merge_from(&file_kv);
        if let Some(name) = &preset_name {
            kv.set("run.preset", name);
        }
        if let Some(dir) = out_dir {
            kv.set("output.dir", &dir.display().to_string());
        }
        if let Some(snap) = restart {
            kv.set("ic.kind", &format!("snapshot:{}", snap.display()));
        }

        let n: usize = get_parse(&kv, "grid.n", 32)?;
        let box_length: f64 = get_parse(&kv, "grid.box_length", 2.0 * std::f64::consts::PI)?;
        let scheme = match kv.get("grid.scheme") {
            None => DerivativeScheme::Spectral,
            Some(s) => DerivativeScheme::parse(s)
                .ok_or_else(|| anyhow!("grid.scheme: unknown token '{s}' (spectral|fd2|fd2stag)"))?,
        };
        let dealias = match kv.get("grid.dealias") {
            None => DealiasPolicy::None,
            Some(s) => DealiasPolicy::parse(s)
                .ok_or_else(|| anyhow!("grid.dealias: unknown token '{s}' (none|twothirds|sphere:K)"))?,
        };
        let grid = GridSpec::with_box_length(n, box_length, scheme, dealias)
            .map_err(|e| anyhow!("{e}"))?;

        let form = match kv.get("run.form") {
            None => ConvectiveForm::Rotational,
            Some(s) => ConvectiveForm::parse(s)
                .ok_or_else(|| anyhow!("run.form: unknown token '{s}' (adv|div|skew|rot|hw)"))?,
        };
        let tableau_source = kv.get("run.tableau").unwrap_or("rk4").to_string();
        let tableau = load_tableau(&tableau_source)?;

        let ic = match kv.get("ic.kind").unwrap_or("abc_pair") {
            "abc_pair" => InitialState::AbcPair {
                k1: get_parse(&kv, "ic.k1", 4usize)?,
                k2: get_parse(&kv, "ic.k2", 6usize)?,
                energy: get_parse(&kv, "ic.energy", 1.0)?,
            },
            "forced_seed" => InitialState::ForcedSeed {
                k_f: get_parse(&kv, "ic.kf", 2.5)?,
                h_rel: get_parse(&kv, "ic.h_rel", 0.967)?,
                energy: get_parse(&kv, "ic.energy", 0.5)?,
                seed: get_parse(&kv, "ic.seed", 42u64)?,
            },
            other => match other.strip_prefix("snapshot:") {
                Some(path) => InitialState::Snapshot(PathBuf::from(path)),
                None => bail!("ic.kind: unknown '{other}' (abc_pair|forced_seed|snapshot:PATH)"),
            },
        };

        let t_end: f64 = get_parse(&kv, "run.t_end", 10.0)?;
        let cfl: f64 = get_parse(&kv, "run.cfl", 0.5)?;
        let series_every: usize = get_parse(&kv, "output.series_every", 1)?;
        let spectra_every: usize = get_parse(&kv, "output.spectra_every", 100)?;
        let snapshot_every: usize = get_parse(&kv, "output.snapshot_every", 0)?;
        if t_end <= 0.0 || cfl <= 0.0 || series_every == 0 || spectra_every == 0 {
            bail!("t_end, cfl and output cadences must be positive");
        }

        let config = RunConfig {
            grid,
            form,
            tableau,
            tableau_source,
            nu: get_parse(&kv, "run.nu", 0.0)?,
            cfl,
            dt_max: get_parse(&kv, "run.dt_max", 0.05)?,
            t_end,
            k_char: get_parse(&kv, "run.k_char", 1.0)?,
            ic,
            forcing_kf: match kv.get("forcing.kf") {
                None => None,
                Some(s) => Some(s.parse::<f64>().map_err(|_| anyhow!("forcing.kf: bad value '{s}'"))?),
            },
            seed: get_parse(&kv, "run.seed", 42u64)?,
            threads: get_parse(&kv, "run.threads", 0usize)?,
            gauss_tol: get_parse(&kv, "run.gauss_tol", 1e-13)?,
            gauss_max_iter: get_parse(&kv, "run.gauss_max_iter", 200usize)?,
            out_dir: PathBuf::from(kv.get("output.dir").unwrap_or("out")),
            series_every,
            spectra_every,
            snapshot_every,
            preset: preset_name,
            hash: hash_kv(&kv),
            kv,
        };
        Ok(config)
    }
}

pub fn load_tableau(source: &str) -> Result<ButcherTableau> {
    if let Some(t) = ButcherTableau::builtin(source) {
        return Ok(t);
    }
    let path = Path::new(source);
    if !path.exists() {
        bail!("run.tableau: '{source}' is neither a builtin token (rk4|gauss1|euler) nor a file");
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading tableau {}", path.display()))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("file");
    ButcherTableau::parse(label, &text).map_err(|e| anyhow!("{e}"))
}

pub fn hash_kv(kv: &KvMap) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(kv.canonical().as_bytes());
    let mut s = String::new();
    for b in digest.iter().take(8) {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_overrides() {
        let cfg = RunConfig::resolve(
            None,
            Some("inviscid32"),
            &[("run.form".into(), "skew".into()), ("run.tableau".into(), "rk4".into())],
            None,
            None,
        )
        .unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.form, ConvectiveForm::SkewSymmetric);
        assert_eq!(cfg.tableau.label, "rk4");
        assert_eq!(cfg.k_char, 4.0);
    }

    #[test]
    fn include_and_hash_stability() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("base.cfg");
        std::fs::write(&base, "[grid]\nn = 16\n[run]\nnu = 0.1\n").unwrap();
        let main = dir.path().join("main.cfg");
        std::fs::write(&main, format!("include = base.cfg\n[run]\nnu = 0.2\n")).unwrap();
        let cfg = RunConfig::resolve(Some(&main), None, &[], None, None).unwrap();
        assert_eq!(cfg.grid.n, 16);
        assert_eq!(cfg.nu, 0.2, "later keys override included ones");

        let cfg2 = RunConfig::resolve(Some(&main), None, &[], None, None).unwrap();
        assert_eq!(cfg.hash, cfg2.hash, "hash is deterministic");
        let cfg3 = RunConfig::resolve(
            Some(&main),
            None,
            &[("run.nu".into(), "0.3".into())],
            None,
            None,
        )
        .unwrap();
        assert_ne!(cfg.hash, cfg3.hash, "different configs hash differently");
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(RunConfig::resolve(None, Some("nope"), &[], None, None).is_err());
        let e = RunConfig::resolve(None, None, &[("grid.scheme".into(), "xyz".into())], None, None);
        assert!(e.is_err());
    }
}
