//! Weights container, run manifests and metrics files.
//!
//! Weights file layout: ASCII `key value` lines starting with `hmpw 1` and
//! ending with `data`, followed by `count` little-endian `f64` values in the
//! order of [`Network::flat_params`]. Manifests and metrics are plain
//! `key value` lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HmpError, Result};
use crate::networks::{join, ArchSpec, Network, Variant};

const WEIGHTS_MAGIC: &str = "hmpw 1";

/// Ordered `key value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends or replaces `key`. Keys must not contain whitespace; values
    /// must fit on one line.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parsed value of `key`.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key).ok_or_else(|| HmpError::format(0, format!("missing key {key:?}")))?;
        v.parse().map_err(|_| HmpError::format(0, format!("bad value {v:?} for key {key:?}")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} {v}");
        }
        s
    }

    /// Parses `key value` lines; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                let (k, v) = t.split_once(' ').unwrap_or((t, ""));
                if kv.get(k).is_some() {
                    return Err(HmpError::format(offset, format!("duplicate key {k:?}")));
                }
                kv.set(k, v.trim());
            }
            offset += line.len() as u64;
        }
        Ok(kv)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|t| t.trim().parse().map_err(|_| HmpError::format(0, format!("bad list {s:?}")))).collect()
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(HmpError::format(0, format!("expected a pair, got {s:?}"))),
    }
}

/// Header entries describing an architecture.
pub fn arch_entries(arch: &ArchSpec, kv: &mut KeyValues) {
    kv.set("variant", arch.variant.index())
        .set("image", format!("{},{}", arch.image.0, arch.image.1))
        .set("channels", join(&arch.channels))
        .set("filters", join(&arch.filters))
        .set("depth", arch.depth)
        .set("pool", join(&arch.pool))
        .set("window", format!("{},{}", arch.window.0, arch.window.1));
}

/// Architecture from header entries.
pub fn arch_from_entries(kv: &KeyValues) -> Result<ArchSpec> {
    let j: usize = kv.parse("variant")?;
    let variant = Variant::from_index(j).ok_or_else(|| HmpError::format(0, format!("unknown variant {j}")))?;
    let field = |k: &str| kv.get(k).ok_or_else(|| HmpError::format(0, format!("missing key {k:?}")));
    let arch = ArchSpec {
        variant,
        image: parse_pair(field("image")?)?,
        channels: parse_list(field("channels")?)?,
        filters: parse_list(field("filters")?)?,
        depth: kv.parse("depth")?,
        pool: parse_list(field("pool")?)?,
        window: parse_pair(field("window")?)?,
    };
    arch.validate()?;
    Ok(arch)
}

/// Serializes a network with extra header entries (for example the truncation level).
pub fn weights_to_bytes(net: &Network, extra: &KeyValues) -> Vec<u8> {
    let mut kv = KeyValues::new();
    arch_entries(net.arch(), &mut kv);
    for (k, v) in extra.entries() {
        kv.set(k, v);
    }
    let p = net.flat_params();
    kv.set("count", p.len());
    let mut out = format!("{WEIGHTS_MAGIC}\n{}data\n", kv.to_text()).into_bytes();
    for w in p {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

/// Parses a weights container into the network and its header.
pub fn weights_from_bytes(b: &[u8]) -> Result<(Network, KeyValues)> {
    let head_end =
        b.windows(6).position(|w| w == b"\ndata\n").ok_or_else(|| HmpError::format(0, "missing data marker"))?;
    let head = std::str::from_utf8(&b[..head_end])
        .map_err(|e| HmpError::format(e.valid_up_to() as u64, "header is not UTF-8"))?;
    let rest = head
        .strip_prefix(WEIGHTS_MAGIC)
        .and_then(|r| r.strip_prefix('\n'))
        .ok_or_else(|| HmpError::format(0, "bad magic"))?;
    let kv = KeyValues::from_text(rest)?;
    let arch = arch_from_entries(&kv)?;
    let count: usize = kv.parse("count")?;
    let start = head_end + 6;
    let data = &b[start..];
    if data.len() != 8 * count {
        return Err(HmpError::format(start as u64, format!("expected {} data bytes, found {}", 8 * count, data.len())));
    }
    let p: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut net = Network::zeros(arch)?;
    if let Some(i) = p.iter().position(|w| !w.is_finite()) {
        return Err(HmpError::format((start + 8 * i) as u64, "non-finite weight"));
    }
    net.set_flat_params(&p).map_err(|e| HmpError::format(start as u64, e.to_string()))?;
    Ok((net, kv))
}

pub fn save_weights(net: &Network, extra: &KeyValues, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, weights_to_bytes(net, extra))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(Network, KeyValues)> {
    weights_from_bytes(&fs::read(path)?)
}

/// Median and interquartile range with linearly interpolated quantiles.
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some((q(0.5), q(0.75) - q(0.25)))
}
