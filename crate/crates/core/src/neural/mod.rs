//! Frequency encodings, the two MLPs with hand-written reverse passes, Adam,
//! and checkpoints.

mod adam;
mod checkpoint;
mod encoding;
mod mlp;
mod nets;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainState, FORMAT_VERSION, MAGIC};
pub use encoding::{freq_encode, EncodingSpec};
pub use mlp::{Activation, GradTape, InputGrads, Mlp, MlpConfig};
pub use nets::{LightFieldNet, MaterialNet, MaterialSample, NetworkConfig, Networks, SceneBox};
