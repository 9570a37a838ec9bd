//! Versioned little-endian binary checkpoints.
//!
//! Layout: `"LFLD"`, format `u32`, network descriptor, scene box, then for
//! each network its widths, head activation codes and `f32` parameter blob,
//! and finally an optional optimizer section.

use std::path::Path;

use super::adam::{AdamConfig, AdamState};
use super::mlp::{Activation, Mlp, MlpConfig};
use super::nets::{LightFieldNet, MaterialNet, NetworkConfig, Networks, SceneBox};
use crate::error::{Error, Result};
use crate::lighting::LightCodeSource;
use crate::math::Vec3;

pub const MAGIC: &[u8; 4] = b"LFLD";
pub const FORMAT_VERSION: u32 = 1;

/// Optimizer state of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Completed iterations.
    pub iteration: u64,
    pub material: AdamState<f32>,
    pub light_field: AdamState<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub networks: Networks<f32>,
    pub train_state: Option<TrainState>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        self.u64(v.len() as u64);
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::TruncatedCheckpoint);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.u64()? as usize;
        let bytes = self.take(n.checked_mul(4).ok_or(Error::TruncatedCheckpoint)?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn write_mlp(w: &mut Writer, mlp: &Mlp<f32>) {
    let c = mlp.config();
    w.u32(c.input_width as u32);
    w.u32(c.inject_width as u32);
    w.u32(c.head.len() as u32);
    for a in &c.head {
        w.u8(a.code());
    }
    w.f32s(mlp.params());
}

fn read_mlp(r: &mut Reader, expected: MlpConfig, name: &str) -> Result<Mlp<f32>> {
    let input_width = r.u32()? as usize;
    let inject_width = r.u32()? as usize;
    let heads = r.u32()? as usize;
    let mut head = Vec::with_capacity(heads.min(64));
    for _ in 0..heads {
        let code = r.u8()?;
        head.push(Activation::from_code(code).ok_or_else(|| {
            Error::ArchitectureMismatch(format!("{name}: unknown activation code {code}"))
        })?);
    }
    let found = MlpConfig { input_width, inject_width, head, ..expected.clone() };
    if found != expected {
        return Err(Error::ArchitectureMismatch(format!(
            "{name}: stored input/inject/head widths {}/{}/{} but the descriptor implies {}/{}/{}",
            found.input_width,
            found.inject_width,
            found.head.len(),
            expected.input_width,
            expected.inject_width,
            expected.head.len()
        )));
    }
    let params = r.f32s()?;
    Mlp::from_params(expected, params).map_err(|e| Error::ArchitectureMismatch(format!("{name}: {e}")))
}

fn write_adam(w: &mut Writer, s: &AdamState<f32>) {
    w.u64(s.step);
    w.u64(s.skipped_steps);
    w.f64(s.config.lr);
    w.f64(s.config.beta1);
    w.f64(s.config.beta2);
    w.f64(s.config.eps);
    w.f32s(&s.m);
    w.f32s(&s.v);
}

fn read_adam(r: &mut Reader, params: usize) -> Result<AdamState<f32>> {
    let step = r.u64()?;
    let skipped_steps = r.u64()?;
    let config = AdamConfig { lr: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
    let m = r.f32s()?;
    let v = r.f32s()?;
    if m.len() != params || v.len() != params {
        return Err(Error::ArchitectureMismatch(format!(
            "optimizer moments sized {}/{} for {} parameters",
            m.len(),
            v.len(),
            params
        )));
    }
    Ok(AdamState { config, m, v, step, skipped_steps })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        let c = &self.networks.config;
        for v in [c.hidden_width, c.depth, c.inject_layer, c.pos_frequencies, c.dir_frequencies, c.light_code_dim] {
            w.u32(v as u32);
        }
        w.u8(match c.light_code_source {
            LightCodeSource::DownsampledMap => 0,
            LightCodeSource::DirectSet => 1,
        });
        let b = self.networks.scene_box;
        for v in [b.center.x, b.center.y, b.center.z, b.half_extent] {
            w.f64(v);
        }
        write_mlp(&mut w, &self.networks.material.mlp);
        write_mlp(&mut w, &self.networks.light_field.mlp);
        match &self.train_state {
            None => w.u8(0),
            Some(s) => {
                w.u8(1);
                w.u64(s.iteration);
                write_adam(&mut w, &s.material);
                write_adam(&mut w, &s.light_field);
            }
        }
        w.0
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 4 || &data[..4] != MAGIC {
            return Err(Error::BadCheckpointHeader);
        }
        let mut r = Reader { data, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: FORMAT_VERSION });
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let light_code_source = match r.u8()? {
            0 => LightCodeSource::DownsampledMap,
            1 => LightCodeSource::DirectSet,
            other => return Err(Error::ArchitectureMismatch(format!("unknown light code source {other}"))),
        };
        let config = NetworkConfig {
            hidden_width: dims[0],
            depth: dims[1],
            inject_layer: dims[2],
            pos_frequencies: dims[3],
            dir_frequencies: dims[4],
            light_code_dim: dims[5],
            light_code_source,
        };
        let scene_box = SceneBox { center: Vec3::new(r.f64()?, r.f64()?, r.f64()?), half_extent: r.f64()? };
        let material = read_mlp(&mut r, config.material_mlp(), "material network")?;
        let light_field = read_mlp(&mut r, config.light_field_mlp(), "light field network")?;
        let train_state = match r.u8()? {
            0 => None,
            1 => {
                let iteration = r.u64()?;
                let m = read_adam(&mut r, material.param_count())?;
                let l = read_adam(&mut r, light_field.param_count())?;
                Some(TrainState { iteration, material: m, light_field: l })
            }
            _ => return Err(Error::BadCheckpointHeader),
        };
        if r.pos != data.len() {
            return Err(Error::ArchitectureMismatch(format!("{} trailing bytes", data.len() - r.pos)));
        }
        let networks = Networks {
            material: MaterialNet { mlp: material, pos: config.position_encoding(), dir: config.direction_encoding() },
            light_field: LightFieldNet {
                mlp: light_field,
                pos: config.position_encoding(),
                dir: config.direction_encoding(),
                code_dim: config.light_code_dim,
            },
            config,
            scene_box,
        };
        Ok(Self { networks, train_state })
    }

    /// Errors with "architecture mismatch" when the stored network shape differs from `expected`.
    pub fn check_config(&self, expected: &NetworkConfig) -> Result<()> {
        if &self.networks.config != expected {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint has {:?}, expected {:?}",
                self.networks.config, expected
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, networks: &Networks<f32>, train_state: Option<&TrainState>) -> Result<()> {
    let path = path.as_ref();
    let ck = Checkpoint { networks: networks.clone(), train_state: train_state.cloned() };
    std::fs::write(path, ck.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let config = NetworkConfig { hidden_width: 8, depth: 3, inject_layer: 2, ..Default::default() };
        let networks = Networks::<f32>::new(config, SceneBox { center: Vec3::new(0.5, -1.0, 2.0), half_extent: 1.25 }, 11).unwrap();
        let mut material = AdamState::new(networks.material.mlp.param_count(), AdamConfig::default());
        material.m.iter_mut().enumerate().for_each(|(i, v)| *v = i as f32 * 1e-3);
        material.step = 42;
        material.skipped_steps = 2;
        let light_field = AdamState::new(networks.light_field.mlp.param_count(), AdamConfig { lr: 1e-3, ..Default::default() });
        Checkpoint { networks, train_state: Some(TrainState { iteration: 42, material, light_field }) }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        let bare = Checkpoint { train_state: None, ..ck };
        assert_eq!(Checkpoint::from_bytes(&bare.to_bytes()).unwrap(), bare);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap_err().to_string(), "bad checkpoint header");
    }

    #[test]
    fn truncation_and_version() {
        let bytes = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::TruncatedCheckpoint)));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(Checkpoint::from_bytes(&v2), Err(Error::CheckpointVersion { found: 2, .. })));
    }

    #[test]
    fn different_head_width_is_an_architecture_mismatch() {
        let mut ck = sample();
        let mut cfg = ck.networks.material.mlp.config().clone();
        cfg.head.push(Activation::Identity);
        ck.networks.material.mlp = Mlp::new(cfg, 0).unwrap();
        let err = Checkpoint::from_bytes(&ck.to_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("architecture mismatch"), "{err}");

        let ck = sample();
        let other = NetworkConfig { hidden_width: 16, ..ck.networks.config.clone() };
        assert!(matches!(ck.check_config(&other), Err(Error::ArchitectureMismatch(_))));
    }
}
