//! Checkpoint files.
//!
//! A text header of `key=value` lines, terminated by a line `end`, followed by
//! the six parameter blocks as little-endian `f64` arrays in declaration order
//! (concept table, property table, W1, b1, w2, b2). The header records the
//! SHA-256 digest of the bank the model was built for; loading against a
//! different bank is refused.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ModelConfig, ModelParams};
use crate::corpus::BeliefBank;
use crate::tensor::Tensor;
use crate::{Error, Result};

const MAGIC: &str = "induction-checkpoint v1";

pub fn write_checkpoint(params: &ModelParams, bank: &BeliefBank) -> Result<Vec<u8>> {
    if params.num_concepts() != bank.num_concepts() || params.num_property_rows() != bank.num_properties() {
        return Err(Error::Validation(format!(
            "model has {}x{} rows but bank has {} concepts and {} properties",
            params.num_concepts(),
            params.num_property_rows(),
            bank.num_concepts(),
            bank.num_properties()
        )));
    }
    let cfg = params.config();
    let mut header = String::new();
    let _ = writeln!(header, "{MAGIC}");
    let _ = writeln!(header, "embed_dim={}", cfg.embed_dim);
    let _ = writeln!(header, "hidden_dim={}", cfg.hidden_dim);
    let _ = writeln!(header, "init_scale={}", cfg.init_scale);
    let _ = writeln!(header, "seed={}", cfg.seed);
    let _ = writeln!(header, "concepts={}", params.num_concepts());
    let _ = writeln!(header, "properties={}", params.num_property_rows());
    let _ = writeln!(header, "bank_digest={}", bank.digest());
    let _ = writeln!(header, "end");

    let mut out = header.into_bytes();
    for block in params.blocks() {
        for v in block.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8], bank: &BeliefBank) -> Result<ModelParams> {
    let mut header = BTreeMap::new();
    let mut pos = 0;
    let mut first = true;
    loop {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Validation("checkpoint header is not terminated".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + nl])
            .map_err(|_| Error::Validation("checkpoint header is not UTF-8".into()))?;
        pos += nl + 1;
        if first {
            if line != MAGIC {
                return Err(Error::Validation(format!("not a checkpoint (header {line:?})")));
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("bad checkpoint header line {line:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }

    let field = |k: &str| -> Result<&str> {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Validation(format!("checkpoint header lacks {k}")))
    };
    let num = |k: &str| -> Result<usize> {
        field(k)?
            .parse()
            .map_err(|_| Error::Validation(format!("checkpoint header {k} is not an integer")))
    };

    let expected = bank.digest();
    let found = field("bank_digest")?;
    if found != expected {
        return Err(Error::DigestMismatch {
            expected,
            found: found.to_string(),
        });
    }
    let config = ModelConfig {
        embed_dim: num("embed_dim")?,
        hidden_dim: num("hidden_dim")?,
        init_scale: field("init_scale")?
            .parse()
            .map_err(|_| Error::Validation("checkpoint init_scale is not a number".into()))?,
        seed: field("seed")?
            .parse()
            .map_err(|_| Error::Validation("checkpoint seed is not an integer".into()))?,
    };
    config.validate()?;
    let (n_c, n_p) = (num("concepts")?, num("properties")?);
    if n_c != bank.num_concepts() || n_p != bank.num_properties() {
        return Err(Error::Validation("checkpoint row counts disagree with the bank".into()));
    }

    let (d, h) = (config.embed_dim, config.hidden_dim);
    let shapes = [(n_c, d), (n_p, d), (h, 2 * d), (1, h), (h, 1), (1, 1)];
    let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let body = &bytes[pos..];
    if body.len() != total * 8 {
        return Err(Error::Validation(format!(
            "checkpoint body has {} bytes, expected {}",
            body.len(),
            total * 8
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut blocks = Vec::with_capacity(6);
    for (r, c) in shapes {
        blocks.push(Tensor::new(r, c, values.by_ref().take(r * c).collect())?);
    }
    let blocks: [Tensor; 6] = blocks.try_into().expect("six blocks");
    ModelParams::from_parts(config, blocks)
}
