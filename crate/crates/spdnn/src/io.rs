//! Checkpoint files and run manifests.
//!
//! Checkpoint layout: a text header of `key = value` lines ending with
//! `params = <count>`, immediately followed by `<count>` little-endian IEEE
//! 754 doubles. Keys:
//!
//! ```text
//! spdnn-checkpoint v1
//! kind = linear|spd|spd-ep|sigma|dsigma
//! dim = 1|3
//! layout = dim1|orthotropic|full-lower
//! eps_ref = <f64>
//! sig_ref = <f64>
//! widths = w0,w1,...          # network kinds only
//! activation = tanh|relu|leaky-relu|selu|elu
//! seed = <u64>
//! sigy_est = <f64>            # spd-ep only
//! d = <f64>                   # spd-ep only
//! eq = abs|von-mises          # spd-ep only
//! lin_chol = l0,l1,...        # spd-ep only (scaled entries)
//! params = <count>
//! ```

use crate::linalg::CholLayout;
use crate::model::{EqStressKind, Model, ModelKind, PlasticCfg, ScalingSpec};
use crate::net::{Activation, NetSpec};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &str = "spdnn-checkpoint v1";

pub fn write_checkpoint(path: &Path, model: &Model, theta: &[f64]) -> Result<()> {
    if theta.len() != model.param_count() {
        return Err(Error::InvalidArgument("theta length does not match model".into()));
    }
    let mut head = String::new();
    head.push_str(MAGIC);
    head.push('\n');
    head.push_str(&format!("kind = {}\n", model.kind.name()));
    head.push_str(&format!("dim = {}\n", model.dim));
    head.push_str(&format!("layout = {}\n", model.layout.name()));
    head.push_str(&format!("eps_ref = {}\n", model.scaling.eps_ref));
    head.push_str(&format!("sig_ref = {}\n", model.scaling.sig_ref));
    if let Some(net) = &model.net {
        let widths: Vec<String> = net.widths.iter().map(|w| w.to_string()).collect();
        head.push_str(&format!("widths = {}\n", widths.join(",")));
        head.push_str(&format!("activation = {}\n", net.activation.name()));
        head.push_str(&format!("seed = {}\n", net.seed));
    }
    if let ModelKind::SpdElastoPlastic(cfg) = &model.kind {
        head.push_str(&format!("sigy_est = {}\n", cfg.sigy_est));
        head.push_str(&format!("d = {}\n", cfg.d));
        head.push_str(&format!("eq = {}\n", cfg.eq_kind.name()));
        let lin: Vec<String> = cfg.lin_chol.iter().map(|v| v.to_string()).collect();
        head.push_str(&format!("lin_chol = {}\n", lin.join(",")));
    }
    head.push_str(&format!("params = {}\n", theta.len()));
    let mut file = std::fs::File::create(path)?;
    file.write_all(head.as_bytes())?;
    let mut bytes = Vec::with_capacity(8 * theta.len());
    for v in theta {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(Model, Vec<f64>)> {
    let mut file = std::fs::File::open(path)?;
    let mut data = Vec::new();
    file.read_to_end(&mut data)?;
    // Split the text header from the binary payload.
    let mut pos = 0;
    let mut lines: Vec<String> = Vec::new();
    let mut count: Option<usize> = None;
    while pos < data.len() {
        let end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|k| pos + k)
            .ok_or_else(|| Error::Data("checkpoint header not terminated".into()))?;
        let line = std::str::from_utf8(&data[pos..end])
            .map_err(|_| Error::Data("checkpoint header is not UTF-8".into()))?
            .to_string();
        pos = end + 1;
        if let Some(rest) = line.strip_prefix("params = ") {
            count = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| Error::Data("bad parameter count".into()))?,
            );
            break;
        }
        lines.push(line);
    }
    let count = count.ok_or_else(|| Error::Data("checkpoint missing params line".into()))?;
    if lines.first().map(String::as_str) != Some(MAGIC) {
        return Err(Error::Data("not a checkpoint file (bad magic line)".into()));
    }
    let mut kv = BTreeMap::new();
    for line in &lines[1..] {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| -> Result<&String> {
        kv.get(k).ok_or_else(|| Error::Data(format!("checkpoint missing key `{k}`")))
    };
    let dim: usize = get("dim")?.parse().map_err(|_| Error::Data("bad dim".into()))?;
    let layout = CholLayout::parse(get("layout")?)?;
    let scaling = ScalingSpec {
        eps_ref: get("eps_ref")?.parse().map_err(|_| Error::Data("bad eps_ref".into()))?,
        sig_ref: get("sig_ref")?.parse().map_err(|_| Error::Data("bad sig_ref".into()))?,
    };
    let net = if kv.contains_key("widths") {
        let widths: Vec<usize> = get("widths")?
            .split(',')
            .map(|w| w.trim().parse().map_err(|_| Error::Data("bad widths".into())))
            .collect::<Result<_>>()?;
        let activation = Activation::parse(get("activation")?)?;
        let seed: u64 = get("seed")?.parse().map_err(|_| Error::Data("bad seed".into()))?;
        Some(NetSpec::new(widths, activation, seed)?)
    } else {
        None
    };
    let kind = match get("kind")?.as_str() {
        "linear" => ModelKind::LinearElastic,
        "spd" => ModelKind::SpdElastic,
        "sigma" => ModelKind::SigmaNn,
        "dsigma" => ModelKind::DeltaSigmaNn,
        "spd-ep" => {
            let lin_chol: Vec<f64> = get("lin_chol")?
                .split(',')
                .map(|v| v.trim().parse().map_err(|_| Error::Data("bad lin_chol".into())))
                .collect::<Result<_>>()?;
            ModelKind::SpdElastoPlastic(PlasticCfg {
                sigy_est: get("sigy_est")?.parse().map_err(|_| Error::Data("bad sigy_est".into()))?,
                d: get("d")?.parse().map_err(|_| Error::Data("bad d".into()))?,
                eq_kind: EqStressKind::parse(get("eq")?)?,
                lin_chol,
            })
        }
        other => return Err(Error::Data(format!("unknown model kind `{other}`"))),
    };
    let model = Model::new(kind, dim, layout, net, scaling)?;
    if model.param_count() != count {
        return Err(Error::Data(format!(
            "checkpoint has {count} parameters, model needs {}",
            model.param_count()
        )));
    }
    let payload = &data[pos..];
    if payload.len() != 8 * count {
        return Err(Error::Data(format!(
            "checkpoint payload is {} bytes, expected {}",
            payload.len(),
            8 * count
        )));
    }
    let theta: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((model, theta))
}

/// Content hash (SHA-256, hex) of a file, for run manifests.
pub fn content_hash(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let data = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Writes `manifest.txt` into `dir`: the resolved configuration echo plus a
/// content hash per input file, making reports reproducible.
pub fn write_manifest(dir: &Path, config_echo: &str, inputs: &[&Path]) -> Result<()> {
    let mut s = String::from("# run manifest\n");
    s.push_str(config_echo);
    if !config_echo.ends_with('\n') {
        s.push('\n');
    }
    for p in inputs {
        let h = content_hash(p)?;
        s.push_str(&format!("input {} sha256 {}\n", p.display(), h));
    }
    std::fs::write(dir.join("manifest.txt"), s)?;
    Ok(())
}
