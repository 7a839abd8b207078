//! Binary checkpoint.
//!
//! ```text
//! "VAWE"                magic
//! u32                   format version
//! u32                   number of layer sizes (4)
//! u64 × 4               input, hidden1, hidden2, output
//! f64 × P               w1, b1, w2, b2, w3, b3 (weights row-major)
//! u64                   byte length of the config block
//! utf-8                 `key=value` lines, one per TrainConfig field
//! ```
//!
//! All integers and floats are little-endian; nothing may follow the config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::alignnet::{MlpParams, TrainConfig};
use crate::error::{Result, VaweError};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"VAWE";

fn config_block(cfg: &TrainConfig) -> String {
    let opt = |v: Option<usize>| v.map_or("none".to_string(), |v| v.to_string());
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("k1", cfg.k1.to_string());
    kv("k2", opt(cfg.k2));
    kv("alpha", cfg.alpha.to_string());
    kv("lambda", cfg.lambda.to_string());
    kv("out_dim", cfg.out_dim.to_string());
    kv(
        "hidden",
        cfg.hidden
            .map_or("none".to_string(), |[a, b]| format!("{a},{b}")),
    );
    kv("lr", cfg.lr.to_string());
    kv("momentum", cfg.momentum.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("max_epochs", cfg.max_epochs.to_string());
    kv("patience", cfg.patience.to_string());
    kv("min_delta", cfg.min_delta.to_string());
    kv("norm_eps", cfg.norm_eps.to_string());
    kv("seed", cfg.seed.to_string());
    kv("recompute_ns_per_epoch", cfg.recompute_ns_per_epoch.to_string());
    s
}

fn parse_config_block(text: &str) -> Result<TrainConfig> {
    let bad = |m: String| VaweError::Checkpoint(m);
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("config line `{line}` is not key=value")))?;
        if map.insert(k, v).is_some() {
            return Err(bad(format!("config key `{k}` repeated")));
        }
    }
    let mut take = |k: &str| map.remove(k).ok_or_else(|| bad(format!("config key `{k}` missing")));
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| VaweError::Checkpoint(format!("config value `{k}={v}` is invalid")))
    }
    let opt = |k: &str, v: &str| -> Result<Option<usize>> {
        if v == "none" {
            Ok(None)
        } else {
            num(k, v).map(Some)
        }
    };
    let hidden = match take("hidden")? {
        "none" => None,
        v => {
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| bad(format!("config value `hidden={v}` is invalid")))?;
            Some([num("hidden", a)?, num("hidden", b)?])
        }
    };
    let cfg = TrainConfig {
        k1: num("k1", take("k1")?)?,
        k2: opt("k2", take("k2")?)?,
        alpha: num("alpha", take("alpha")?)?,
        lambda: num("lambda", take("lambda")?)?,
        out_dim: num("out_dim", take("out_dim")?)?,
        hidden,
        lr: num("lr", take("lr")?)?,
        momentum: num("momentum", take("momentum")?)?,
        batch_size: num("batch_size", take("batch_size")?)?,
        max_epochs: num("max_epochs", take("max_epochs")?)?,
        patience: num("patience", take("patience")?)?,
        min_delta: num("min_delta", take("min_delta")?)?,
        norm_eps: num("norm_eps", take("norm_eps")?)?,
        seed: num("seed", take("seed")?)?,
        recompute_ns_per_epoch: num("recompute_ns_per_epoch", take("recompute_ns_per_epoch")?)?,
    };
    if let Some(k) = map.keys().next() {
        return Err(bad(format!("unknown config key `{k}`")));
    }
    Ok(cfg)
}

pub fn write_checkpoint(params: &MlpParams, cfg: &TrainConfig) -> Vec<u8> {
    let flat = params.to_flat();
    let block = config_block(cfg);
    let mut out = Vec::with_capacity(4 + 4 + 4 + 32 + 8 * flat.len() + 8 + block.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let shape = params.shape();
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(block.len() as u64).to_le_bytes());
    out.extend_from_slice(block.as_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(VaweError::Checkpoint(format!(
                "truncated file while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(MlpParams, TrainConfig)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(VaweError::Checkpoint("not a checkpoint (bad magic bytes)".into()));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(VaweError::Checkpoint(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let ndims = cur.u32("layer count")?;
    if ndims != 4 {
        return Err(VaweError::Checkpoint(format!("expected 4 layer sizes, found {ndims}")));
    }
    let mut shape = [0usize; 4];
    for d in shape.iter_mut() {
        *d = usize::try_from(cur.u64("layer size")?)
            .map_err(|_| VaweError::Checkpoint("layer size overflows".into()))?;
    }
    let [d, h1, h2, o] = shape;
    let count = [d * h1, h1, h1 * h2, h2, h2 * o, o]
        .iter()
        .try_fold(0usize, |acc, &x| acc.checked_add(x))
        .ok_or_else(|| VaweError::Checkpoint("layer sizes overflow".into()))?;
    let payload_len = count
        .checked_mul(8)
        .ok_or_else(|| VaweError::Checkpoint("layer sizes overflow".into()))?;
    let payload = cur.take(payload_len, "weights")?;
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let params = MlpParams::from_flat(shape, &flat)?;
    if !params.is_finite() {
        return Err(VaweError::Checkpoint("non-finite weights".into()));
    }
    let block_len = usize::try_from(cur.u64("config length")?)
        .map_err(|_| VaweError::Checkpoint("config length overflows".into()))?;
    let block = cur.take(block_len, "config")?;
    if cur.pos != bytes.len() {
        return Err(VaweError::Checkpoint(format!(
            "{} trailing bytes after config",
            bytes.len() - cur.pos
        )));
    }
    let text = std::str::from_utf8(block)
        .map_err(|_| VaweError::Checkpoint("config block is not utf-8".into()))?;
    let cfg = parse_config_block(text)?;
    if cfg.out_dim != o {
        return Err(VaweError::Checkpoint(format!(
            "config out_dim {} disagrees with weights ({o})",
            cfg.out_dim
        )));
    }
    Ok((params, cfg))
}

pub fn save_checkpoint(params: &MlpParams, cfg: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(params, cfg)).map_err(|e| VaweError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MlpParams, TrainConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| VaweError::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn sample() -> (MlpParams, TrainConfig) {
        let cfg = TrainConfig {
            k2: Some(7),
            hidden: Some([5, 6]),
            out_dim: 3,
            lambda: 0.1 + 0.2,
            ..TrainConfig::default()
        };
        let p = MlpParams::init([4, 5, 6, 3], &mut Rng::new(2));
        (p, cfg)
    }

    #[test]
    fn roundtrip_is_exact() {
        let (p, cfg) = sample();
        let bytes = write_checkpoint(&p, &cfg);
        let (q, back) = read_checkpoint(&bytes).unwrap();
        assert_eq!(back, cfg);
        let bits = |m: &MlpParams| m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p), bits(&q));
        assert_eq!(write_checkpoint(&q, &back), bytes);
    }

    #[test]
    fn truncation_is_detected_everywhere() {
        let (p, cfg) = sample();
        let bytes = write_checkpoint(&p, &cfg);
        for cut in [0, 3, 6, 10, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(read_checkpoint(&bytes[..cut]), Err(VaweError::Checkpoint(_))),
                "cut at {cut}"
            );
        }
        let mut long = bytes.clone();
        long.push(b'\n');
        assert!(read_checkpoint(&long).is_err());
    }

    #[test]
    fn version_mismatch() {
        let (p, cfg) = sample();
        let mut bytes = write_checkpoint(&p, &cfg);
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        let err = read_checkpoint(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 7"), "{err}");
    }

    #[test]
    fn bad_magic() {
        let (p, cfg) = sample();
        let mut bytes = write_checkpoint(&p, &cfg);
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes), Err(VaweError::Checkpoint(_))));
    }
}
