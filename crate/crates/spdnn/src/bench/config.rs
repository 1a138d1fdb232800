//! Experiment configuration: plain-text `key = value` files with
//! `[sections]`, plus per-experiment defaults.
//!
//! ```text
//! [experiment]
//! kind = truss            # truss | plate-hyperelastic | plate-elasto-plastic | plate-fiber
//! nx = 10                 # plate elements in x (surrogate mesh for fiber)
//! ny = 5
//! dns_nx = 40             # fiber DNS mesh
//! dns_ny = 20
//! dt = 1e-3
//! t_total = 0.2
//! load_scale = 1.0        # 0.1 reproduces the linear-region loads
//! paper_scale = false
//! train_cases = A1,A2,... # defaults per experiment kind
//! test_cases = A6,B6,C1
//!
//! [model]
//! kind = spd-ep           # linear | spd | spd-ep | sigma | dsigma
//! depth = 3
//! width = 20
//! activation = tanh
//! layout = orthotropic    # or full-lower (plates only)
//! sigy_est = 1e8
//! d = 0.1
//! eps_ref = 0.01
//! sig_ref = 2e9
//! lin_from =              # checkpoint supplying the linear branch factor
//!
//! [train]
//! mode = direct           # direct | indirect
//! method = lbfgs          # lbfgs | adam
//! restarts = 10
//! max_evals = 2000
//! pretrain_evals = 3000
//! seed = 0
//! grad_clip = 0           # 0 disables clipping
//! gp_stride = 1           # subsample Gauss points for direct extraction
//!
//! [sweep]
//! models = spd,sigma,dsigma
//! depths = 1,3
//! widths = 20
//! activations = tanh
//! sigy_est =              # sweeping (σ̃_Y, d) instead of architectures
//! d =
//! ```

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Truss,
    PlateHyperelastic,
    PlateElastoPlastic,
    PlateFiber,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "truss" => Ok(ExperimentKind::Truss),
            "plate-hyperelastic" => Ok(ExperimentKind::PlateHyperelastic),
            "plate-elasto-plastic" => Ok(ExperimentKind::PlateElastoPlastic),
            "plate-fiber" => Ok(ExperimentKind::PlateFiber),
            other => Err(Error::Config(format!("unknown experiment kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Truss => "truss",
            ExperimentKind::PlateHyperelastic => "plate-hyperelastic",
            ExperimentKind::PlateElastoPlastic => "plate-elasto-plastic",
            ExperimentKind::PlateFiber => "plate-fiber",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelCfg {
    pub kind: String,
    pub depth: usize,
    pub width: usize,
    pub activation: String,
    pub layout: String,
    pub sigy_est: f64,
    pub d: f64,
    pub eps_ref: f64,
    pub sig_ref: f64,
    pub lin_from: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainCfg {
    pub mode: String,
    pub method: String,
    pub restarts: usize,
    pub max_evals: usize,
    pub pretrain_evals: usize,
    pub seed: u64,
    pub grad_clip: f64,
    pub gp_stride: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SweepCfg {
    pub models: Vec<String>,
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub activations: Vec<String>,
    pub sigy_est: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub nx: usize,
    pub ny: usize,
    pub dns_nx: usize,
    pub dns_ny: usize,
    pub dt: f64,
    pub t_total: f64,
    pub load_scale: f64,
    pub paper_scale: bool,
    pub train_cases: Vec<String>,
    pub test_cases: Vec<String>,
    pub model: ModelCfg,
    pub train: TrainCfg,
    pub sweep: SweepCfg,
}

impl ExperimentConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    /// Plate mesh resolution after the paper-scale flag.
    pub fn plate_res(&self) -> (usize, usize) {
        if self.paper_scale {
            (2 * self.nx, 2 * self.ny)
        } else {
            (self.nx, self.ny)
        }
    }

    pub fn defaults(kind: ExperimentKind) -> Self {
        let (train_cases, test_cases): (Vec<String>, Vec<String>) = match kind {
            ExperimentKind::Truss => (
                vec!["tid1", "tid2", "tid4", "tid5"].into_iter().map(String::from).collect(),
                vec!["tid3".to_string()],
            ),
            ExperimentKind::PlateFiber => (
                vec!["A1".to_string(), "B1".to_string()],
                vec!["A6".to_string()],
            ),
            _ => (
                ["A1", "A2", "A3", "A4", "A5", "B1", "B2", "B3", "B4", "B5"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                vec!["A6".to_string(), "B6".to_string(), "C1".to_string()],
            ),
        };
        let model = match kind {
            ExperimentKind::Truss => ModelCfg {
                kind: "spd-ep".into(),
                depth: 3,
                width: 20,
                activation: "tanh".into(),
                layout: "dim1".into(),
                sigy_est: 1e8,
                d: 0.1,
                eps_ref: 0.01,
                sig_ref: 2e9,
                lin_from: None,
            },
            ExperimentKind::PlateHyperelastic => ModelCfg {
                kind: "spd".into(),
                depth: 4,
                width: 20,
                activation: "tanh".into(),
                layout: "orthotropic".into(),
                sigy_est: 1.0,
                d: 0.1,
                eps_ref: 0.05,
                sig_ref: 6e4,
                lin_from: None,
            },
            ExperimentKind::PlateElastoPlastic | ExperimentKind::PlateFiber => ModelCfg {
                kind: "spd-ep".into(),
                depth: 5,
                width: 20,
                activation: "tanh".into(),
                layout: "orthotropic".into(),
                sigy_est: 3.2e8,
                d: 0.1,
                eps_ref: 0.01,
                sig_ref: 1e9,
                lin_from: None,
            },
        };
        let (dt, t_total) = match kind {
            ExperimentKind::PlateFiber => (2e-3, 0.2),
            _ => (1e-3, 0.2),
        };
        ExperimentConfig {
            kind,
            nx: if kind == ExperimentKind::PlateFiber { 8 } else { 10 },
            ny: if kind == ExperimentKind::PlateFiber { 4 } else { 5 },
            dns_nx: 40,
            dns_ny: 20,
            dt,
            t_total,
            load_scale: 1.0,
            paper_scale: false,
            train_cases,
            test_cases,
            model,
            train: TrainCfg {
                mode: if kind == ExperimentKind::PlateFiber { "indirect" } else { "direct" }
                    .into(),
                method: "lbfgs".into(),
                restarts: 10,
                max_evals: 2000,
                pretrain_evals: 3000,
                seed: 0,
                grad_clip: 0.0,
                gp_stride: 1,
            },
            sweep: SweepCfg::default(),
        }
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let sections = parse_ini(text)?;
        let exp = sections.get("experiment").cloned().unwrap_or_default();
        let kind = ExperimentKind::parse(
            exp.get("kind").map(String::as_str).unwrap_or("truss"),
        )?;
        let mut cfg = ExperimentConfig::defaults(kind);
        apply_experiment(&mut cfg, &exp)?;
        if let Some(model) = sections.get("model") {
            apply_model(&mut cfg.model, model)?;
        }
        if let Some(train) = sections.get("train") {
            apply_train(&mut cfg.train, train)?;
        }
        if let Some(sweep) = sections.get("sweep") {
            apply_sweep(&mut cfg.sweep, sweep)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.t_total <= 0.0 {
            return Err(Error::Config("dt and t_total must be positive".into()));
        }
        if self.n_steps() < 3 {
            return Err(Error::Config("need at least 3 time steps".into()));
        }
        if self.train_cases.iter().any(|c| self.test_cases.contains(c)) {
            return Err(Error::Config("train/test case split must be disjoint".into()));
        }
        if self.train.gp_stride == 0 || self.train.restarts == 0 {
            return Err(Error::Config("gp_stride and restarts must be positive".into()));
        }
        Ok(())
    }

    /// Echo of the resolved configuration for manifests.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("experiment.kind = {}\n", self.kind.name()));
        s.push_str(&format!("experiment.nx = {}\n", self.nx));
        s.push_str(&format!("experiment.ny = {}\n", self.ny));
        if self.kind == ExperimentKind::PlateFiber {
            s.push_str(&format!("experiment.dns_nx = {}\n", self.dns_nx));
            s.push_str(&format!("experiment.dns_ny = {}\n", self.dns_ny));
        }
        s.push_str(&format!("experiment.dt = {}\n", self.dt));
        s.push_str(&format!("experiment.t_total = {}\n", self.t_total));
        s.push_str(&format!("experiment.load_scale = {}\n", self.load_scale));
        s.push_str(&format!("experiment.paper_scale = {}\n", self.paper_scale));
        s.push_str(&format!("experiment.train_cases = {}\n", self.train_cases.join(",")));
        s.push_str(&format!("experiment.test_cases = {}\n", self.test_cases.join(",")));
        s.push_str(&format!("model.kind = {}\n", self.model.kind));
        s.push_str(&format!("model.depth = {}\n", self.model.depth));
        s.push_str(&format!("model.width = {}\n", self.model.width));
        s.push_str(&format!("model.activation = {}\n", self.model.activation));
        s.push_str(&format!("model.layout = {}\n", self.model.layout));
        s.push_str(&format!("model.sigy_est = {}\n", self.model.sigy_est));
        s.push_str(&format!("model.d = {}\n", self.model.d));
        s.push_str(&format!("model.eps_ref = {}\n", self.model.eps_ref));
        s.push_str(&format!("model.sig_ref = {}\n", self.model.sig_ref));
        s.push_str(&format!("train.mode = {}\n", self.train.mode));
        s.push_str(&format!("train.method = {}\n", self.train.method));
        s.push_str(&format!("train.restarts = {}\n", self.train.restarts));
        s.push_str(&format!("train.max_evals = {}\n", self.train.max_evals));
        s.push_str(&format!("train.pretrain_evals = {}\n", self.train.pretrain_evals));
        s.push_str(&format!("train.seed = {}\n", self.train.seed));
        s
    }
}

type Section = BTreeMap<String, String>;

fn parse_ini(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut out: BTreeMap<String, Section> = BTreeMap::new();
    let mut current = String::from("experiment");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("bad section header on line {}", lineno + 1)))?;
            current = name.trim().to_string();
            out.entry(current.clone()).or_default();
        } else if let Some((k, v)) = line.split_once('=') {
            out.entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        } else {
            return Err(Error::Config(format!(
                "expected `key = value` on line {}: `{line}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

fn get_f64(sec: &Section, key: &str, out: &mut f64) -> Result<()> {
    if let Some(v) = sec.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad number for `{key}`: `{v}`")))?;
    }
    Ok(())
}

fn get_usize(sec: &Section, key: &str, out: &mut usize) -> Result<()> {
    if let Some(v) = sec.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad integer for `{key}`: `{v}`")))?;
    }
    Ok(())
}

fn get_u64(sec: &Section, key: &str, out: &mut u64) -> Result<()> {
    if let Some(v) = sec.get(key) {
        *out = v.parse().map_err(|_| Error::Config(format!("bad integer for `{key}`: `{v}`")))?;
    }
    Ok(())
}

fn get_bool(sec: &Section, key: &str, out: &mut bool) -> Result<()> {
    if let Some(v) = sec.get(key) {
        *out = match v.as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(Error::Config(format!("bad boolean for `{key}`: `{other}`"))),
        };
    }
    Ok(())
}

fn get_string(sec: &Section, key: &str, out: &mut String) {
    if let Some(v) = sec.get(key) {
        *out = v.clone();
    }
}

fn get_list(sec: &Section, key: &str) -> Option<Vec<String>> {
    sec.get(key).map(|v| {
        v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    })
}

fn apply_experiment(cfg: &mut ExperimentConfig, sec: &Section) -> Result<()> {
    get_usize(sec, "nx", &mut cfg.nx)?;
    get_usize(sec, "ny", &mut cfg.ny)?;
    get_usize(sec, "dns_nx", &mut cfg.dns_nx)?;
    get_usize(sec, "dns_ny", &mut cfg.dns_ny)?;
    get_f64(sec, "dt", &mut cfg.dt)?;
    get_f64(sec, "t_total", &mut cfg.t_total)?;
    get_f64(sec, "load_scale", &mut cfg.load_scale)?;
    get_bool(sec, "paper_scale", &mut cfg.paper_scale)?;
    if let Some(list) = get_list(sec, "train_cases") {
        cfg.train_cases = list;
    }
    if let Some(list) = get_list(sec, "test_cases") {
        cfg.test_cases = list;
    }
    Ok(())
}

fn apply_model(m: &mut ModelCfg, sec: &Section) -> Result<()> {
    get_string(sec, "kind", &mut m.kind);
    get_usize(sec, "depth", &mut m.depth)?;
    get_usize(sec, "width", &mut m.width)?;
    get_string(sec, "activation", &mut m.activation);
    get_string(sec, "layout", &mut m.layout);
    get_f64(sec, "sigy_est", &mut m.sigy_est)?;
    get_f64(sec, "d", &mut m.d)?;
    get_f64(sec, "eps_ref", &mut m.eps_ref)?;
    get_f64(sec, "sig_ref", &mut m.sig_ref)?;
    if let Some(v) = sec.get("lin_from") {
        if !v.is_empty() {
            m.lin_from = Some(PathBuf::from(v));
        }
    }
    Ok(())
}

fn apply_train(t: &mut TrainCfg, sec: &Section) -> Result<()> {
    get_string(sec, "mode", &mut t.mode);
    get_string(sec, "method", &mut t.method);
    get_usize(sec, "restarts", &mut t.restarts)?;
    get_usize(sec, "max_evals", &mut t.max_evals)?;
    get_usize(sec, "pretrain_evals", &mut t.pretrain_evals)?;
    get_u64(sec, "seed", &mut t.seed)?;
    get_f64(sec, "grad_clip", &mut t.grad_clip)?;
    get_usize(sec, "gp_stride", &mut t.gp_stride)?;
    Ok(())
}

fn apply_sweep(s: &mut SweepCfg, sec: &Section) -> Result<()> {
    if let Some(list) = get_list(sec, "models") {
        s.models = list;
    }
    if let Some(list) = get_list(sec, "depths") {
        s.depths = list
            .iter()
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad depth `{v}`"))))
            .collect::<Result<_>>()?;
    }
    if let Some(list) = get_list(sec, "widths") {
        s.widths = list
            .iter()
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad width `{v}`"))))
            .collect::<Result<_>>()?;
    }
    if let Some(list) = get_list(sec, "activations") {
        s.activations = list;
    }
    if let Some(list) = get_list(sec, "sigy_est") {
        s.sigy_est = list
            .iter()
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad sigy_est `{v}`"))))
            .collect::<Result<_>>()?;
    }
    if let Some(list) = get_list(sec, "d") {
        s.d = list
            .iter()
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad d `{v}`"))))
            .collect::<Result<_>>()?;
    }
    Ok(())
}
