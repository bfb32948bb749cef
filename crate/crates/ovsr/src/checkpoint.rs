//! Model checkpoints.
//!
//! A plain-text header names the model configuration and lists every
//! parameter tensor in order, then a line `data` is followed by the tensors
//! as `OVSRT1` dumps in the same order:
//!
//! ```text
//! ovsr-checkpoint 1
//! model govsr-4+2-56
//! scale 4
//! leaky_slope 0.2
//! window 3
//! upscale compact
//! refine learned+bicubic
//! tensors 74
//! precursor.fusion.0.weight 56 59 3 3
//! ...
//! data
//! ```

use std::fs;
use std::path::Path;

use ovsr_core::generator::{Framework, Model, ModelConfig, RefineMode, UpscaleWidth};
use ovsr_core::tensor::{decode_tensor, encode_tensor};
use ovsr_core::{Scalar, Tensor};

use crate::error::{Error, Result};

const MAGIC: &str = "ovsr-checkpoint 1";
const DATA: &str = "data\n";

pub fn encode(model: &Model<Tensor>) -> Vec<u8> {
    let cfg = &model.config;
    let params = model.params();
    let mut head = String::new();
    head.push_str(MAGIC);
    head.push('\n');
    head.push_str(&format!("model {}\n", cfg.name()));
    head.push_str(&format!("scale {}\n", cfg.scale));
    head.push_str(&format!("leaky_slope {}\n", cfg.leaky_slope));
    head.push_str(&format!("window {}\n", cfg.window));
    head.push_str(&format!("upscale {}\n", cfg.upscale.as_str()));
    head.push_str(&format!("refine {}\n", cfg.refine.as_str()));
    head.push_str(&format!("tensors {}\n", params.len()));
    for (name, t) in &params {
        let [a, b, c, d] = t.shape();
        head.push_str(&format!("{name} {a} {b} {c} {d}\n"));
    }
    head.push_str(DATA);
    let mut out = head.into_bytes();
    for (_, t) in &params {
        encode_tensor(t, &mut out);
    }
    out
}

/// Reads the configuration and tensors back. `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Model<Tensor>> {
    let bad = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    let split = bytes
        .windows(DATA.len() + 1)
        .position(|w| w[0] == b'\n' && &w[1..] == DATA.as_bytes())
        .ok_or_else(|| bad("missing `data` line".into()))?;
    let head = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut payload = &bytes[split + 1 + DATA.len()..];
    let mut lines = head.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("first line must be {MAGIC:?}")));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(bad(format!("expected `{key}`, found {line:?}"))),
        }
    };
    let mut cfg = ModelConfig::parse_name(&field("model")?)?;
    cfg.scale = field("scale")?.parse().map_err(|_| bad("bad scale".into()))?;
    cfg.leaky_slope = field("leaky_slope")?
        .parse::<Scalar>()
        .map_err(|_| bad("bad leaky_slope".into()))?;
    cfg.window = field("window")?.parse().map_err(|_| bad("bad window".into()))?;
    cfg.upscale = UpscaleWidth::parse(&field("upscale")?)?;
    cfg.refine = RefineMode::parse(&field("refine")?)?;
    cfg.validate()?;
    let count: usize = field("tensors")?.parse().map_err(|_| bad("bad tensor count".into()))?;
    let mut named = Vec::with_capacity(count);
    for line in lines.by_ref().take(count) {
        let mut parts = line.split(' ');
        let name = parts.next().unwrap_or_default().to_string();
        let dims: Vec<usize> = parts.map(|d| d.parse().map_err(|_| bad(format!("bad manifest line {line:?}")))).collect::<Result<_>>()?;
        let (t, used) = decode_tensor(payload)?;
        if dims != t.shape() {
            return Err(bad(format!("{name}: manifest says {dims:?}, data has {:?}", t.shape())));
        }
        payload = &payload[used..];
        named.push((name, t));
    }
    if named.len() != count || lines.next().is_some() || !payload.is_empty() {
        return Err(bad(format!("manifest lists {count} tensors but the file disagrees")));
    }
    Ok(Model::load(&cfg, named)?)
}

pub fn save(path: &Path, model: &Model<Tensor>) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model<Tensor>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Rejects a checkpoint whose framework differs from the requested one.
pub fn expect_framework(model: &Model<Tensor>, framework: Framework, path: &Path) -> Result<()> {
    if model.config.framework != framework {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            msg: format!(
                "holds a {} model but the config asks for {framework}",
                model.config.framework
            ),
        });
    }
    Ok(())
}
