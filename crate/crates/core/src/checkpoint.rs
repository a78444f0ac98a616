//! Single-file JSON model checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

pub const FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tagger,
    Evidence,
    Linker,
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format: u32,
    pub kind: ModelKind,
    pub encoder: EncoderConfig,
    /// The training configuration, echoed for provenance.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_set: Option<Vec<String>>,
    pub model: M,
}

impl<M: Serialize> Checkpoint<M> {
    pub fn new<C: Serialize>(kind: ModelKind, encoder: &EncoderConfig, config: &C, model: M) -> Result<Checkpoint<M>> {
        Ok(Checkpoint {
            format: FORMAT,
            kind,
            encoder: encoder.clone(),
            config: serde_json::to_value(config)?,
            tag_set: None,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

impl<M: DeserializeOwned> Checkpoint<M> {
    pub fn load(path: &Path, kind: ModelKind) -> Result<Checkpoint<M>> {
        let file = File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let format = value.get("format").and_then(serde_json::Value::as_u64);
        if format != Some(FORMAT as u64) {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported checkpoint format {format:?}",
                path.display()
            )));
        }
        let ckpt: Checkpoint<M> =
            serde_json::from_value(value).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.kind != kind {
            return Err(Error::Checkpoint(format!(
                "{}: expected a {kind:?} checkpoint, found {:?}",
                path.display(),
                ckpt.kind
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LinearHead};

    #[test]
    fn round_trip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut head = LinearHead::new(Activation::Softmax, 3, 2);
        head.weights = vec![0.1, -0.25, 1.0 / 3.0, 2.0, 0.0, 1e-300, -7.5, 3.25, 0.5];
        let ckpt = Checkpoint::new(ModelKind::Linker, &EncoderConfig::default(), &"cfg", head).unwrap();
        ckpt.save(&path).unwrap();
        let back: Checkpoint<LinearHead> = Checkpoint::load(&path, ModelKind::Linker).unwrap();
        assert_eq!(back, ckpt);
        assert!(Checkpoint::<LinearHead>::load(&path, ModelKind::Tagger).is_err());

        std::fs::write(&path, r#"{"format":2}"#).unwrap();
        assert!(matches!(
            Checkpoint::<LinearHead>::load(&path, ModelKind::Linker),
            Err(Error::Checkpoint(_))
        ));
    }
}
