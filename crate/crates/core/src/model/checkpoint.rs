use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "evokg/params";

/// Self-describing JSON container for [`ModelParams`]. Floats are written
/// in shortest round-trip form, so reading back is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub params: ModelParams,
}

impl ModelCheckpoint {
    pub fn new(params: ModelParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.params.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        ck.validate()?;
        Ok(ck)
    }
}

pub fn write_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &ModelCheckpoint::new(params.clone()))
        .map_err(|e| Error::Format(e.to_string()))?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let ck: ModelCheckpoint = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::Format(e.to_string()))?;
    ck.validate()?;
    Ok(ck.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::random(Dims::new(3, 2, 2).unwrap(), 5, 3, 0.7, &mut rng);
        let back = ModelCheckpoint::from_json(&ModelCheckpoint::new(p.clone()).to_json()).unwrap();
        assert_eq!(back.params, p);
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let p = ModelParams::zeros(Dims::square(2, 1).unwrap(), 3, 1);
        let mut ck = ModelCheckpoint::new(p);
        ck.version = 99;
        assert!(ModelCheckpoint::from_json(&ck.to_json()).is_err());
        ck.version = CHECKPOINT_VERSION;
        ck.params.weights.recurrent.pop();
        assert!(matches!(
            ModelCheckpoint::from_json(&ck.to_json()),
            Err(Error::Format(_))
        ));
    }
}
