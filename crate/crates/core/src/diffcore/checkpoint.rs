//! Versioned JSON checkpoints of a network and its optimizer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, Mlp};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::rng::RngState;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub network: Mlp,
    pub optimizer: Option<AdamState>,
    pub rng: Option<RngState>,
}

impl NetworkCheckpoint {
    pub fn new(network: Mlp, optimizer: Option<AdamState>, rng: Option<RngState>) -> Self {
        NetworkCheckpoint {
            format_version: NETWORK_FORMAT_VERSION,
            network,
            optimizer,
            rng,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_version(text, NETWORK_FORMAT_VERSION)?;
        let ck: NetworkCheckpoint = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("network checkpoint: {e}")))?;
        if let Some(opt) = &ck.optimizer {
            if opt.len() != ck.network.num_params() {
                return Err(Error::DimensionMismatch {
                    expected: ck.network.num_params(),
                    got: opt.len(),
                });
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Reads `format_version` before full deserialization so a version
/// mismatch is reported as such rather than as a schema error.
pub(crate) fn check_version(text: &str, expected: u32) -> Result<()> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: Option<u32>,
    }
    let probe: Probe = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("checkpoint is not valid JSON: {e}")))?;
    match probe.format_version {
        Some(v) if v == expected => Ok(()),
        Some(v) => Err(Error::CheckpointVersion { found: v, expected }),
        None => Err(Error::InvalidInput(
            "checkpoint is missing `format_version`".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Activation;
    use crate::rng::{stream_rng, SeedStream};

    #[test]
    fn round_trip_is_exact() {
        let mut rng = stream_rng(5, SeedStream::Init, 0);
        let net = Mlp::new(vec![3, 7, 2], Activation::Relu, &mut rng).unwrap();
        let mut adam = AdamState::new(net.num_params(), 3e-4);
        adam.step_count = 12;
        adam.first_moment[3] = 0.1 + 0.2;
        let ck = NetworkCheckpoint::new(net, Some(adam), Some(RngState::capture(&rng)));
        let back = NetworkCheckpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(ck, back);
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let net = Mlp::zeros(vec![1, 1], Activation::Tanh).unwrap();
        let mut ck = NetworkCheckpoint::new(net, None, None);
        ck.format_version = 99;
        let err = NetworkCheckpoint::from_json(&ck.to_json()).unwrap_err();
        assert!(matches!(
            err,
            Error::CheckpointVersion {
                found: 99,
                expected: NETWORK_FORMAT_VERSION
            }
        ));
    }
}
