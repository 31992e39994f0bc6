//! Model checkpoints: a `SEGTAG1` magic line, a JSON header carrying the
//! config, vocabulary and tensor manifest, then every parameter tensor as
//! little-endian f64 in declared order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::model::TaggerModel;
use super::{ModelConfig, Vocabulary};
use crate::error::{Result, SegError};

const MAGIC: &str = "SEGTAG1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
    tensors: Vec<TensorEntry>,
}

impl TaggerModel {
    pub fn save<W: Write>(&self, writer: &mut W) -> Result<()> {
        let header = Header {
            config: self.cfg.clone(),
            vocab: self.vocab.tokens().to_vec(),
            tensors: self
                .params
                .slices()
                .iter()
                .map(|(name, s)| TensorEntry {
                    name: name.clone(),
                    len: s.len(),
                })
                .collect(),
        };
        writeln!(writer, "{MAGIC}")?;
        serde_json::to_writer(&mut *writer, &header)
            .map_err(|e| SegError::data(format!("serialize checkpoint header: {e}")))?;
        writer.write_all(b"\n")?;
        for (_, slice) in self.params.slices() {
            for value in slice {
                writer.write_all(&value.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: &mut R) -> Result<TaggerModel> {
        let mut magic = String::new();
        reader.read_line(&mut magic)?;
        if magic.trim_end() != MAGIC {
            return Err(SegError::data(format!(
                "not a tagger checkpoint (expected magic {MAGIC:?})"
            )));
        }
        let mut header_line = String::new();
        reader.read_line(&mut header_line)?;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| SegError::data(format!("bad checkpoint header: {e}")))?;
        header.config.validate()?;
        let vocab = Vocabulary::from_tokens(header.vocab)?;
        let mut model = TaggerModel::new(header.config, vocab)?;

        let expected: Vec<(String, usize)> = model
            .params
            .slices()
            .iter()
            .map(|(name, s)| (name.clone(), s.len()))
            .collect();
        let declared: Vec<(String, usize)> = header
            .tensors
            .iter()
            .map(|t| (t.name.clone(), t.len))
            .collect();
        if expected != declared {
            return Err(SegError::data(
                "checkpoint tensor manifest does not match the declared config",
            ));
        }

        let total: usize = expected.iter().map(|(_, len)| len).sum();
        let mut bytes = vec![0u8; total * 8];
        reader.read_exact(&mut bytes)?;
        let mut trailing = [0u8; 1];
        if reader.read(&mut trailing)? != 0 {
            return Err(SegError::data("trailing bytes after checkpoint tensors"));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        model.set_parameter_vector(&values)?;
        Ok(model)
    }
}
