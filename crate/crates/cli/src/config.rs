use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use xrt_core::io::KeyValues;
use xrt_core::seismo::parse_profile;
use xrt_core::{PhantomSpec, RegionSpec};

/// Up to this many phantom items: `region`, `region_2`, ...
pub const MAX_ITEMS: usize = 4;

/// One command invocation: parameters merged from the config file and
/// `--param` overrides, plus paths and seed.
#[derive(Debug)]
pub struct RunConfig {
    pub command: String,
    pub params: KeyValues,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn load(
        command: &str,
        config: Option<&Path>,
        overrides: &[String],
        input: Option<PathBuf>,
        output: Option<PathBuf>,
        seed: u64,
    ) -> Result<Self> {
        let mut params = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                KeyValues::parse(&text)?
            }
            None => KeyValues::new(),
        };
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                bail!("--param expects KEY=VALUE, got {o:?}");
            };
            params.set(k.trim(), v.trim());
        }
        if let Some(p) = &input {
            if !p.is_file() {
                bail!("input {} does not exist", p.display());
            }
        }
        if let Some(p) = &output {
            check_creatable(p)?;
        }
        Ok(RunConfig {
            command: command.to_string(),
            params,
            input,
            output,
            seed,
        })
    }

    pub fn input(&self) -> Result<&Path> {
        match &self.input {
            Some(p) => Ok(p),
            None => bail!("{} needs --input", self.command),
        }
    }

    pub fn output(&self) -> Result<&Path> {
        match &self.output {
            Some(p) => Ok(p),
            None => bail!("{} needs --out", self.command),
        }
    }

    pub fn allow(&self, keys: &[&str]) -> Result<()> {
        self.params.reject_unknown(keys)?;
        Ok(())
    }
}

pub fn check_creatable(p: &Path) -> Result<()> {
    let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
    }
    Ok(())
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {v:?}"))
        })
        .collect()
}

/// `ball:cx,cy[,cz],r`, `annulus:r_inner,r_outer` or
/// `segment:arc_center_angle,arc_half_width`.
pub fn parse_region(s: &str) -> Result<RegionSpec> {
    let (kind, args) = s
        .split_once(':')
        .with_context(|| format!("region {s:?} needs the form kind:numbers"))?;
    let v = numbers(args)?;
    let region = match (kind.trim(), v.len()) {
        ("ball", 3 | 4) => RegionSpec::ball(&v[..v.len() - 1], v[v.len() - 1]),
        ("annulus", 2) => RegionSpec::annulus(v[0], v[1]),
        ("segment", 2) => RegionSpec::disc_segment(v[0], v[1]),
        _ => bail!("unrecognized region {s:?}"),
    };
    Ok(region)
}

pub fn region_key(kv: &KeyValues, key: &str) -> Result<Option<RegionSpec>> {
    match kv.get(key) {
        None | Some("none") => Ok(None),
        Some(s) => parse_region(s).map(Some),
    }
}

fn suffix(i: usize) -> String {
    if i == 1 {
        String::new()
    } else {
        format!("_{i}")
    }
}

/// Keys read by [`parse_phantom`].
pub fn phantom_keys() -> Vec<String> {
    (1..=MAX_ITEMS)
        .flat_map(|i| {
            let s = suffix(i);
            [format!("region{s}"), format!("profile{s}"), format!("amplitude{s}")]
        })
        .collect()
}

/// Phantom items from `region[_i]`, `profile[_i]` (`bump`, `constant`,
/// `cosine:K`) and `amplitude[_i]`.
pub fn parse_phantom(kv: &KeyValues) -> Result<PhantomSpec> {
    let mut spec = PhantomSpec::new();
    for i in 1..=MAX_ITEMS {
        let s = suffix(i);
        let Some(region) = kv.get(&format!("region{s}")) else {
            continue;
        };
        let region = parse_region(region)?;
        let amplitude = kv.value_or(&format!("amplitude{s}"), 1.0)?;
        let profile = kv.get(&format!("profile{s}")).unwrap_or("bump");
        spec = spec.with(region, parse_profile(profile, amplitude)?);
    }
    if spec.items.is_empty() {
        bail!("phantom needs at least one region");
    }
    Ok(spec)
}

/// Allowed-key list made of fixed names plus the phantom keys.
pub fn with_phantom_keys(fixed: &[&'static str]) -> Vec<String> {
    let mut keys: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    keys.extend(phantom_keys());
    keys
}

pub fn as_strs(keys: &[String]) -> Vec<&str> {
    keys.iter().map(String::as_str).collect()
}
