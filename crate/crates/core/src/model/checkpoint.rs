//! Self-describing binary checkpoints: named parameter arrays with shapes,
//! the model configuration and the training epoch. Save then load restores
//! every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::model::config::GoalNetConfig;
use crate::model::params::{GoalNet, GoalNetParams};
use crate::nn::{NnError, Parameters, Tensor};

const MAGIC: &[u8; 8] = b"GNCKPT01";

#[derive(Debug)]
pub struct Checkpoint {
    pub net: GoalNet,
    pub epoch: usize,
    /// Resolved run configuration echoed by the producing command.
    pub provenance: String,
}

pub fn save(path: &Path, net: &GoalNet, epoch: usize, provenance: &str) -> Result<(), NnError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let config_json =
        serde_json::to_string(&net.config).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    write_bytes(&mut buf, config_json.as_bytes());
    write_bytes(&mut buf, provenance.as_bytes());
    buf.extend_from_slice(&(epoch as u64).to_le_bytes());

    let mut entries: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
    net.visit(&mut |name: &str, t: &Tensor| {
        entries.push((name.to_string(), t.shape.clone(), t.data.clone()));
    });
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, shape, data) in &entries {
        write_bytes(&mut buf, name.as_bytes());
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for d in shape {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    file.write_all(&buf)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, NnError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?
        .read_to_end(&mut bytes)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> Result<&[u8], NnError> {
        if *at + n > bytes.len() {
            return Err(NnError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };
    if take(&mut at, 8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic; not a checkpoint".into()));
    }
    let config_json = read_bytes(&bytes, &mut at)?;
    let config: GoalNetConfig = serde_json::from_slice(&config_json)
        .map_err(|e| NnError::Checkpoint(format!("config: {e}")))?;
    let provenance = String::from_utf8(read_bytes(&bytes, &mut at)?)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let epoch = u64::from_le_bytes(
        take(&mut at, 8)?
            .try_into()
            .map_err(|_| NnError::Checkpoint("epoch field".into()))?,
    ) as usize;
    let count = u32::from_le_bytes(
        take(&mut at, 4)?
            .try_into()
            .map_err(|_| NnError::Checkpoint("count field".into()))?,
    ) as usize;

    let mut params = GoalNetParams::new(&config.dims, config.seed);
    let mut loaded = std::collections::BTreeMap::new();
    for _ in 0..count {
        let name = String::from_utf8(read_bytes(&bytes, &mut at)?)
            .map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let ndims = u32::from_le_bytes(
            take(&mut at, 4)?
                .try_into()
                .map_err(|_| NnError::Checkpoint("ndims".into()))?,
        ) as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            let d = u64::from_le_bytes(
                take(&mut at, 8)?
                    .try_into()
                    .map_err(|_| NnError::Checkpoint("dim".into()))?,
            ) as usize;
            shape.push(d);
        }
        let len: usize = shape.iter().product();
        let raw = take(&mut at, len * 8)?;
        let mut data = Vec::with_capacity(len);
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        loaded.insert(name, (shape, data));
    }
    let mut missing = Vec::new();
    params.visit_mut(&mut |name: &str, t: &mut Tensor| match loaded.get(name) {
        Some((shape, data)) if *shape == t.shape => {
            t.data.copy_from_slice(data);
        }
        Some(_) => missing.push(format!("{name} (shape mismatch)")),
        None => missing.push(name.to_string()),
    });
    if !missing.is_empty() {
        return Err(NnError::Checkpoint(format!(
            "parameters missing or mismatched: {}",
            missing.join(", ")
        )));
    }
    Ok(Checkpoint {
        net: GoalNet { config, params },
        epoch,
        provenance,
    })
}

fn write_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

fn read_bytes(bytes: &[u8], at: &mut usize) -> Result<Vec<u8>, NnError> {
    if *at + 4 > bytes.len() {
        return Err(NnError::Checkpoint("truncated length field".into()));
    }
    let len = u32::from_le_bytes(bytes[*at..*at + 4].try_into().unwrap()) as usize;
    *at += 4;
    if *at + len > bytes.len() {
        return Err(NnError::Checkpoint("truncated payload".into()));
    }
    let out = bytes[*at..*at + len].to_vec();
    *at += len;
    Ok(out)
}
