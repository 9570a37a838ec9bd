//! Run configuration: a TOML file plus `--section.key value` overrides.

use std::path::{Path, PathBuf};

use lumafield::lighting::LightSampling;
use lumafield::neural::NetworkConfig;
use lumafield::shfield::CosineKernel;
use lumafield::training::TrainConfig;
use lumafield::transport::{DensityParams, RenderSettings};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::fail::Failure;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// OBJ file, or `builtin:sphere` / `builtin:sphere-on-plane`.
    pub mesh: Option<String>,
    pub albedo: Option<PathBuf>,
    pub albedo_srgb: bool,
    pub normal: Option<PathBuf>,
    pub hdri: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Output file stem or directory, depending on the command.
    pub output: Option<PathBuf>,
}

impl Paths {
    /// Every referenced input file must exist; builtin meshes are exempt.
    pub fn check_exist(&self) -> Result<(), Failure> {
        let mesh = self.mesh.as_deref().filter(|m| !m.starts_with("builtin:")).map(Path::new);
        let inputs = [mesh, self.albedo.as_deref(), self.normal.as_deref(), self.hdri.as_deref(), self.checkpoint.as_deref(), self.dataset.as_deref()];
        for p in inputs.into_iter().flatten() {
            if !p.exists() {
                return Err(Failure::asset(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub width: usize,
    pub height: usize,
    pub samples_per_ray: usize,
    pub specular_exponent: f64,
    pub shadows: bool,
    /// Jitters samples inside their strata when set.
    pub seed: Option<u64>,
    pub camera_position: [f64; 3],
    pub look_at: [f64; 3],
    pub fov_deg: f64,
    pub exposure: f64,
    pub tile_size: usize,
    pub kernel: CosineKernel,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            samples_per_ray: 64,
            specular_exponent: 32.0,
            shadows: true,
            seed: None,
            camera_position: [0.0, 0.0, 4.0],
            look_at: [0.0; 3],
            fov_deg: 36.0,
            exposure: 1.0,
            tile_size: 16,
            kernel: CosineKernel::Clamped,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub density: DensityParams,
    pub sampling: LightSampling,
    pub render: RenderSection,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn render_settings(&self) -> RenderSettings {
        let r = &self.render;
        RenderSettings {
            density: self.density,
            samples_per_ray: r.samples_per_ray,
            specular_exponent: r.specular_exponent,
            shadows: r.shadows,
            kernel: r.kernel,
            jitter_seed: r.seed,
            tile_size: r.tile_size,
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.render_settings().validate()?;
        self.train.validate()?;
        if self.render.width == 0 || self.render.height == 0 {
            return Err(Failure::config("render.width and render.height must be positive"));
        }
        if !(self.render.exposure > 0.0) {
            return Err(Failure::config("render.exposure must be positive"));
        }
        self.paths.check_exist()
    }

    pub fn output_or(&self, default: &str) -> PathBuf {
        self.paths.output.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    /// Loads `path` (if any), applies overrides, then deserializes and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, Failure> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
                text.parse::<Table>().map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for (key, raw) in overrides {
            apply_override(&mut table, key, raw)?;
        }
        let cfg: RunConfig =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| Failure::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Every `section.key` name accepted on the command line.
pub fn known_keys() -> Vec<String> {
    let Value::Table(t) = Value::try_from(RunConfig::default()).expect("config serializes") else { unreachable!() };
    let mut keys = Vec::new();
    for (section, v) in &t {
        if let Value::Table(inner) = v {
            keys.extend(inner.keys().map(|k| format!("{section}.{k}")));
        }
    }
    // Optional keys are skipped by the serializer when unset.
    for k in ["mesh", "albedo", "normal", "hdri", "checkpoint", "dataset", "output"] {
        keys.push(format!("paths.{k}"));
    }
    keys.push("render.seed".into());
    keys.sort();
    keys.dedup();
    keys
}

/// Resolves a flag name to its dotted key: either `section.key` or a key unique across sections.
pub fn resolve_key(name: &str, known: &[String]) -> Option<String> {
    if known.iter().any(|k| k == name) {
        return Some(name.to_string());
    }
    let matches: Vec<&String> = known.iter().filter(|k| k.rsplit('.').next() == Some(name)).collect();
    (matches.len() == 1).then(|| matches[0].clone())
}

fn parse_value(raw: &str) -> Value {
    match raw {
        "on" | "yes" => return Value::Boolean(true),
        "off" | "no" => return Value::Boolean(false),
        _ => {}
    }
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) if raw.contains(',') && !raw.contains('"') => {
            let items: Vec<Value> = raw.split(',').map(|s| parse_value(s.trim())).collect();
            Value::Array(items)
        }
        Err(_) => Value::String(raw.into()),
    }
}

fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<(), Failure> {
    let (section, name) = key.split_once('.').ok_or_else(|| Failure::config(format!("bad config key '{key}'")))?;
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(inner) = entry else {
        return Err(Failure::config(format!("config section '{section}' is not a table")));
    };
    let mut value = parse_value(raw);
    // Path-like keys stay strings even when they look numeric.
    if section == "paths" && !matches!(value, Value::String(_) | Value::Boolean(_)) {
        value = Value::String(raw.into());
    }
    inner.insert(name.to_string(), value);
    Ok(())
}

/// Splits config overrides out of `args`, leaving everything else for the subcommand parser.
pub fn extract_overrides(args: Vec<String>, reserved: &[&str]) -> Result<(Vec<String>, Vec<(String, String)>), Failure> {
    let known = known_keys();
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    if let Some(bin) = it.next() {
        rest.push(bin);
    }
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.replace('-', "_"), Some(v.to_string())),
            None => (flag.replace('-', "_"), None),
        };
        if reserved.contains(&name.replace('_', "-").as_str()) && !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let Some(key) = resolve_key(&name, &known) else {
            if name.contains('.') {
                return Err(Failure::config(format!("unknown config key '{name}'")));
            }
            rest.push(arg);
            continue;
        };
        let value = match inline {
            Some(v) => v,
            None => match it.peek() {
                Some(next) if !next.starts_with("--") => it.next().unwrap_or_default(),
                _ => "true".into(),
            },
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn dotted_and_bare_overrides() {
        let args = ["lumafield", "render", "--density.delta=2.0", "--shadows=off", "--iterations", "10", "-o", "x"]
            .map(String::from)
            .to_vec();
        let (rest, ov) = extract_overrides(args, &[]).unwrap();
        assert_eq!(rest, vec!["lumafield", "render", "-o", "x"]);
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.density.delta, 2.0);
        assert!(!cfg.render.shadows);
        assert_eq!(cfg.train.iterations, 10);
    }

    #[test]
    fn ambiguous_bare_key_is_left_alone() {
        let known = known_keys();
        assert_eq!(resolve_key("seed", &known), None);
        assert_eq!(resolve_key("delta", &known).as_deref(), Some("density.delta"));
    }

    #[test]
    fn unknown_dotted_key_is_a_config_error() {
        let args = ["lumafield", "render", "--render.bogus=1"].map(String::from).to_vec();
        assert_eq!(extract_overrides(args, &[]).unwrap_err().code, 2);
    }

    #[test]
    fn array_and_path_values() {
        let ov = vec![
            ("render.camera_position".to_string(), "1,2,3".to_string()),
            ("paths.mesh".to_string(), "builtin:sphere".to_string()),
        ];
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.render.camera_position, [1.0, 2.0, 3.0]);
        assert_eq!(cfg.paths.mesh.as_deref(), Some("builtin:sphere"));
    }
}
