//! The material network and the light sampling field network.

use serde::{Deserialize, Serialize};

use super::encoding::EncodingSpec;
use super::mlp::{Activation, Mlp, MlpConfig};
use crate::error::Result;
use crate::lighting::{LightCodeSource, LIGHT_CODE_DIM};
use crate::math::{Aabb, Rgb, Vec3};
use crate::scalar::Scalar;
use crate::shfield::ShCoeffs12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_width: usize,
    pub depth: usize,
    /// 1-based hidden layer receiving the injected features.
    pub inject_layer: usize,
    pub pos_frequencies: usize,
    pub dir_frequencies: usize,
    pub light_code_dim: usize,
    pub light_code_source: LightCodeSource,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_width: 256,
            depth: 8,
            inject_layer: 4,
            pos_frequencies: 10,
            dir_frequencies: 4,
            light_code_dim: LIGHT_CODE_DIM,
            light_code_source: LightCodeSource::DownsampledMap,
        }
    }
}

impl NetworkConfig {
    pub fn position_encoding(&self) -> EncodingSpec {
        EncodingSpec::new(self.pos_frequencies, true)
    }

    pub fn direction_encoding(&self) -> EncodingSpec {
        EncodingSpec::new(self.dir_frequencies, true)
    }

    pub fn material_mlp(&self) -> MlpConfig {
        MlpConfig {
            input_width: self.position_encoding().output_width(3),
            hidden_width: self.hidden_width,
            depth: self.depth,
            inject_layer: self.inject_layer,
            inject_width: self.direction_encoding().output_width(3),
            head: vec![Activation::Softplus, Activation::Sigmoid, Activation::Sigmoid, Activation::Sigmoid],
        }
    }

    pub fn light_field_mlp(&self) -> MlpConfig {
        MlpConfig {
            input_width: self.position_encoding().output_width(3),
            hidden_width: self.hidden_width,
            depth: self.depth,
            inject_layer: self.inject_layer,
            inject_width: self.direction_encoding().output_width(3) + self.light_code_dim,
            head: vec![Activation::Identity; 12],
        }
    }
}

/// Maps world positions into `[−1, 1]³` around the asset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneBox {
    pub center: Vec3<f64>,
    /// Half of the largest box extent; world units per normalized unit.
    pub half_extent: f64,
}

impl SceneBox {
    pub fn unit() -> Self {
        Self { center: Vec3::zero(), half_extent: 1.0 }
    }

    pub fn from_aabb(b: &Aabb) -> Self {
        let half = 0.5 * b.extent().max_element();
        Self { center: b.centroid(), half_extent: if half > 0.0 { half } else { 1.0 } }
    }

    #[inline]
    pub fn normalize(&self, p: Vec3<f64>) -> Vec3<f64> {
        (p - self.center) * (1.0 / self.half_extent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialSample<T> {
    /// Specular strength, softplus-activated.
    pub gamma: T,
    /// Skin scattering, sigmoid-activated per channel.
    pub eta: Rgb<T>,
}

impl<T: Scalar> MaterialSample<T> {
    pub fn from_row(row: &[T]) -> Self {
        Self { gamma: row[0], eta: Rgb::new(row[1], row[2], row[3]) }
    }
}

fn push_vec3<T: Scalar>(out: &mut Vec<T>, spec: &EncodingSpec, v: Vec3<T>) {
    let start = out.len();
    out.resize(start + spec.output_width(3), T::zero());
    spec.encode_into(&v.to_array(), &mut out[start..]);
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialNet<T> {
    pub mlp: Mlp<T>,
    pub pos: EncodingSpec,
    pub dir: EncodingSpec,
}

impl<T: Scalar> MaterialNet<T> {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        Ok(Self { mlp: Mlp::new(config.material_mlp(), seed)?, pos: config.position_encoding(), dir: config.direction_encoding() })
    }

    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        Ok(Self { mlp: Mlp::zeros(config.material_mlp())?, pos: config.position_encoding(), dir: config.direction_encoding() })
    }

    /// Appends one sample's encoded inputs: position into `base`, direction into `injected`.
    #[inline]
    pub fn push_inputs(&self, xn: Vec3<T>, omega_o: Vec3<T>, base: &mut Vec<T>, injected: &mut Vec<T>) {
        push_vec3(base, &self.pos, xn);
        push_vec3(injected, &self.dir, omega_o);
    }

    /// Single query at a normalized position.
    pub fn eval(&self, xn: Vec3<T>, omega_o: Vec3<T>) -> Result<MaterialSample<T>> {
        let (mut b, mut i) = (Vec::new(), Vec::new());
        self.push_inputs(xn, omega_o, &mut b, &mut i);
        Ok(MaterialSample::from_row(&self.mlp.infer(&b, &i, 1)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightFieldNet<T> {
    pub mlp: Mlp<T>,
    pub pos: EncodingSpec,
    pub dir: EncodingSpec,
    pub code_dim: usize,
}

impl<T: Scalar> LightFieldNet<T> {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            mlp: Mlp::new(config.light_field_mlp(), seed)?,
            pos: config.position_encoding(),
            dir: config.direction_encoding(),
            code_dim: config.light_code_dim,
        })
    }

    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        Ok(Self {
            mlp: Mlp::zeros(config.light_field_mlp())?,
            pos: config.position_encoding(),
            dir: config.direction_encoding(),
            code_dim: config.light_code_dim,
        })
    }

    /// Appends one sample's inputs; the injected block is `direction encoding ⧺ light code`.
    #[inline]
    pub fn push_inputs(&self, xn: Vec3<T>, omega: Vec3<T>, code: &[T], base: &mut Vec<T>, injected: &mut Vec<T>) {
        push_vec3(base, &self.pos, xn);
        self.push_injected(omega, code, injected);
    }

    /// Appends only the injected block of one sample.
    #[inline]
    pub fn push_injected(&self, omega: Vec3<T>, code: &[T], injected: &mut Vec<T>) {
        debug_assert_eq!(code.len(), self.code_dim);
        push_vec3(injected, &self.dir, omega);
        injected.extend_from_slice(code);
    }

    pub fn eval(&self, xn: Vec3<T>, omega: Vec3<T>, code: &[T]) -> Result<ShCoeffs12<T>> {
        if code.len() != self.code_dim {
            return Err(crate::Error::ShapeMismatch(format!(
                "light code has {} values, network expects {}",
                code.len(),
                self.code_dim
            )));
        }
        let (mut b, mut i) = (Vec::new(), Vec::new());
        self.push_inputs(xn, omega, code, &mut b, &mut i);
        Ok(ShCoeffs12::from_slice(&self.mlp.infer(&b, &i, 1)?))
    }
}

/// Both trainable networks plus the normalization they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks<T> {
    pub config: NetworkConfig,
    pub scene_box: SceneBox,
    pub material: MaterialNet<T>,
    pub light_field: LightFieldNet<T>,
}

impl<T: Scalar> Networks<T> {
    pub fn new(config: NetworkConfig, scene_box: SceneBox, seed: u64) -> Result<Self> {
        Ok(Self {
            material: MaterialNet::new(&config, seed)?,
            light_field: LightFieldNet::new(&config, seed ^ 0x9e37_79b9_7f4a_7c15)?,
            config,
            scene_box,
        })
    }

    pub fn zeros(config: NetworkConfig, scene_box: SceneBox) -> Result<Self> {
        Ok(Self { material: MaterialNet::zeros(&config)?, light_field: LightFieldNet::zeros(&config)?, config, scene_box })
    }

    #[inline]
    pub fn normalize(&self, x: Vec3<f64>) -> Vec3<T> {
        self.scene_box.normalize(x).cast()
    }

    pub fn material_eval(&self, x: Vec3<f64>, omega_o: Vec3<f64>) -> Result<MaterialSample<T>> {
        self.material.eval(self.normalize(x), omega_o.cast())
    }

    pub fn lightfield_eval(&self, x: Vec3<f64>, omega: Vec3<f64>, code: &[T]) -> Result<ShCoeffs12<T>> {
        self.light_field.eval(self.normalize(x), omega.cast(), code)
    }

    /// Same networks in another precision.
    pub fn cast<U: Scalar>(&self) -> Networks<U> {
        let conv = |m: &Mlp<T>| {
            Mlp::from_params(m.config().clone(), m.params().iter().map(|p| U::of(p.as_f64())).collect())
                .expect("same architecture")
        };
        Networks {
            config: self.config.clone(),
            scene_box: self.scene_box,
            material: MaterialNet { mlp: conv(&self.material.mlp), pos: self.material.pos, dir: self.material.dir },
            light_field: LightFieldNet {
                mlp: conv(&self.light_field.mlp),
                pos: self.light_field.pos,
                dir: self.light_field.dir,
                code_dim: self.light_field.code_dim,
            },
        }
    }
}
