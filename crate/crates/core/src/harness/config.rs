use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dd::{DdConfig, LbfgsOptions};
use crate::error::{Error, Result};
use crate::ns::{Geometry, TransientConfig};
use crate::pod::{Component, ModeCounts, ModeSelection, ParameterSpace, Sampling};
use crate::podnn::{AdamOptions, Architecture, PodNnOptions};

const BFS_PRESET: &str = include_str!("../../../../presets/bfs.cfg");
const CAVITY_PRESET: &str = include_str!("../../../../presets/cavity.cfg");

/// Everything needed to reproduce one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub geometry: Geometry,
    /// Online parameter point.
    pub nu: f64,
    pub ubar: f64,
    pub nu_range: [f64; 2],
    pub ubar_range: [f64; 2],
    pub t_final: f64,
    pub dt: f64,
    /// Elements per cm (step) or cells per side (cavity).
    pub density: f64,
    pub it_max: usize,
    pub tol_opt: f64,
    pub rom_it_max: usize,
    pub rom_tol_opt: f64,
    /// Training parameters of the offline stage.
    pub k: usize,
    pub sampling: Sampling,
    pub n_max: usize,
    pub modes: ModeCounts,
    pub energy_threshold: Option<f64>,
    pub seed: u64,
    pub gamma: f64,
    pub skew: bool,
    pub smooth_inlet: bool,
    pub podnn_k: usize,
    pub podnn_train: usize,
    pub podnn_modes: ModeCounts,
    /// Leading steps dropped by restricted-window training.
    pub podnn_skip: usize,
    pub arch: Architecture,
    pub epochs: usize,
    pub lr: f64,
    pub loss_target: f64,
}

/// Keys accepted by [`BenchmarkConfig::set`], in output order.
pub const CONFIG_KEYS: [&str; 29] = [
    "bench",
    "nu",
    "Ubar",
    "nu_min",
    "nu_max",
    "Ubar_min",
    "Ubar_max",
    "T",
    "dt",
    "density",
    "it_max",
    "tol_opt",
    "rom_it_max",
    "rom_tol_opt",
    "K",
    "sampling",
    "N_max",
    "modes",
    "energy_threshold",
    "seed",
    "gamma",
    "skew",
    "smooth_inlet",
    "podnn_K",
    "podnn_train",
    "podnn_modes",
    "podnn_skip",
    "arch",
    "epochs",
];

/// Keys accepted in addition to [`CONFIG_KEYS`].
const EXTRA_KEYS: [&str; 3] = ["lr", "loss_target", "M"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("bad boolean '{value}' for '{key}'"))),
    }
}

/// `key = value` pairs of a config text. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", ln + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl BenchmarkConfig {
    /// Shipped preset of a benchmark.
    pub fn preset(geometry: Geometry) -> Self {
        let text = match geometry {
            Geometry::Step => BFS_PRESET,
            Geometry::Cavity => CAVITY_PRESET,
        };
        Self::parse_onto(Self::builtin(geometry), &parse_pairs(text).expect("shipped preset parses"))
            .expect("shipped preset is valid")
    }

    /// Parses a config text. A `bench` key selects the preset the remaining
    /// keys override; without it the cavity preset is used.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let geometry = match pairs.iter().find(|(k, _)| k == "bench") {
            Some((_, v)) => v.parse()?,
            None => Geometry::Cavity,
        };
        Self::parse_onto(Self::preset(geometry), &pairs)
    }

    fn parse_onto(mut cfg: Self, pairs: &[(String, String)]) -> Result<Self> {
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Values before any preset text is applied.
    fn builtin(geometry: Geometry) -> Self {
        let t = TransientConfig::for_geometry(geometry);
        let dd = DdConfig::new(t);
        Self {
            geometry,
            nu: t.nu,
            ubar: t.ubar,
            nu_range: [t.nu, t.nu],
            ubar_range: [t.ubar, t.ubar],
            t_final: t.t_final,
            dt: t.dt,
            density: match geometry {
                Geometry::Step => 1.0,
                Geometry::Cavity => 16.0,
            },
            it_max: dd.optim.max_iter,
            tol_opt: dd.optim.grad_tol,
            rom_it_max: dd.optim.max_iter,
            rom_tol_opt: dd.optim.grad_tol,
            k: 10,
            sampling: Sampling::Uniform,
            n_max: 100,
            modes: match geometry {
                Geometry::Step => ModeCounts::STEP,
                Geometry::Cavity => ModeCounts::CAVITY,
            },
            energy_threshold: None,
            seed: 0,
            gamma: 0.0,
            skew: false,
            smooth_inlet: false,
            podnn_k: 101,
            podnn_train: 75,
            podnn_modes: ModeCounts::CAVITY,
            podnn_skip: 0,
            arch: Architecture::Deep,
            epochs: AdamOptions::default().epochs,
            lr: AdamOptions::default().learning_rate,
            loss_target: AdamOptions::default().loss_target,
        }
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "bench" => {
                let g: Geometry = value.parse()?;
                if g != self.geometry {
                    *self = Self::preset(g);
                }
            }
            "nu" => self.nu = parse(key, value)?,
            "Ubar" => self.ubar = parse(key, value)?,
            "nu_min" => self.nu_range[0] = parse(key, value)?,
            "nu_max" => self.nu_range[1] = parse(key, value)?,
            "Ubar_min" => self.ubar_range[0] = parse(key, value)?,
            "Ubar_max" => self.ubar_range[1] = parse(key, value)?,
            "T" => self.t_final = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "density" => self.density = parse(key, value)?,
            "it_max" => self.it_max = parse(key, value)?,
            "tol_opt" => self.tol_opt = parse(key, value)?,
            "rom_it_max" => self.rom_it_max = parse(key, value)?,
            "rom_tol_opt" => self.rom_tol_opt = parse(key, value)?,
            "K" => self.k = parse(key, value)?,
            "sampling" => self.sampling = value.parse()?,
            "N_max" => self.n_max = parse(key, value)?,
            "modes" => self.modes = value.parse()?,
            "energy_threshold" => {
                self.energy_threshold = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "skew" => self.skew = parse_bool(key, value)?,
            "smooth_inlet" => self.smooth_inlet = parse_bool(key, value)?,
            "podnn_K" => self.podnn_k = parse(key, value)?,
            "podnn_train" => self.podnn_train = parse(key, value)?,
            "podnn_modes" => self.podnn_modes = value.parse()?,
            "podnn_skip" => self.podnn_skip = parse(key, value)?,
            "arch" => self.arch = value.parse()?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "loss_target" => self.loss_target = parse(key, value)?,
            "M" => {
                let m: usize = parse(key, value)?;
                self.t_final = m as f64 * self.dt;
            }
            _ => return Err(Error::Invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Current value of a key, formatted so that [`set`](Self::set) reads
    /// it back unchanged.
    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        Some(match key {
            "bench" => self.geometry.to_string(),
            "nu" => self.nu.to_string(),
            "Ubar" => self.ubar.to_string(),
            "nu_min" => self.nu_range[0].to_string(),
            "nu_max" => self.nu_range[1].to_string(),
            "Ubar_min" => self.ubar_range[0].to_string(),
            "Ubar_max" => self.ubar_range[1].to_string(),
            "T" => self.t_final.to_string(),
            "dt" => self.dt.to_string(),
            "density" => self.density.to_string(),
            "it_max" => self.it_max.to_string(),
            "tol_opt" => self.tol_opt.to_string(),
            "rom_it_max" => self.rom_it_max.to_string(),
            "rom_tol_opt" => self.rom_tol_opt.to_string(),
            "K" => self.k.to_string(),
            "sampling" => self.sampling.to_string(),
            "N_max" => self.n_max.to_string(),
            "modes" => self.modes.to_string(),
            "energy_threshold" => opt(self.energy_threshold),
            "seed" => self.seed.to_string(),
            "gamma" => self.gamma.to_string(),
            "skew" => self.skew.to_string(),
            "smooth_inlet" => self.smooth_inlet.to_string(),
            "podnn_K" => self.podnn_k.to_string(),
            "podnn_train" => self.podnn_train.to_string(),
            "podnn_modes" => self.podnn_modes.to_string(),
            "podnn_skip" => self.podnn_skip.to_string(),
            "arch" => self.arch.to_string(),
            "epochs" => self.epochs.to_string(),
            "lr" => self.lr.to_string(),
            "loss_target" => self.loss_target.to_string(),
            "M" => self.n_steps().to_string(),
            _ => return None,
        })
    }

    /// All keys with their values.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        CONFIG_KEYS
            .iter()
            .chain(EXTRA_KEYS.iter().filter(|k| **k != "M"))
            .map(|k| (k.to_string(), self.get(k).unwrap_or_default()))
            .collect()
    }

    /// Config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in CONFIG_KEYS.iter().chain(EXTRA_KEYS.iter().filter(|k| **k != "M")) {
            s.push_str(&format!("{k} = {}\n", self.get(k).unwrap_or_default()));
        }
        s
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let pairs: Vec<(String, String)> = map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let geometry = match map.get("bench") {
            Some(v) => v.parse()?,
            None => Geometry::Cavity,
        };
        Self::parse_onto(Self::preset(geometry), &pairs)
    }

    pub fn validate(&self) -> Result<()> {
        self.transient().validate()?;
        self.parameter_space().validate()?;
        if !(self.density > 0.0) {
            return Err(Error::Invalid(format!("density must be positive, got {}", self.density)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.it_max == 0 || self.rom_it_max == 0 || !(self.tol_opt > 0.0) || !(self.rom_tol_opt > 0.0) {
            return Err(Error::Invalid("optimizer limits must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::Invalid("K must be at least 1".into()));
        }
        if self.modes.max() > self.n_max {
            return Err(Error::Invalid(format!(
                "mode counts {} exceed N_max = {}",
                self.modes, self.n_max
            )));
        }
        if self.podnn_train == 0 || self.podnn_train > self.podnn_k {
            return Err(Error::Invalid(format!(
                "podnn_train must lie in 1..={}, got {}",
                self.podnn_k, self.podnn_train
            )));
        }
        if self.podnn_skip >= self.n_steps() {
            return Err(Error::Invalid(format!(
                "podnn_skip = {} leaves no step out of {}",
                self.podnn_skip,
                self.n_steps()
            )));
        }
        if let Some(e) = self.energy_threshold {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Invalid(format!("energy threshold must lie in (0, 1), got {e}")));
            }
        }
        if !(self.lr > 0.0) || !(self.loss_target >= 0.0) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Transient settings at the online parameter point.
    pub fn transient(&self) -> TransientConfig {
        let mut t = TransientConfig::for_geometry(self.geometry);
        t.dt = self.dt;
        t.t_final = self.t_final;
        t.nu = self.nu;
        t.ubar = self.ubar;
        t.skew = self.skew;
        t.smooth_inlet = self.smooth_inlet;
        t
    }

    pub fn dd_config(&self) -> DdConfig {
        let mut cfg = DdConfig::new(self.transient());
        cfg.gamma = self.gamma;
        cfg.optim = LbfgsOptions {
            max_iter: self.it_max,
            grad_tol: self.tol_opt,
            ..cfg.optim
        };
        cfg
    }

    pub fn rom_dd_config(&self) -> DdConfig {
        let mut cfg = self.dd_config();
        cfg.optim.max_iter = self.rom_it_max;
        cfg.optim.grad_tol = self.rom_tol_opt;
        cfg
    }

    pub fn parameter_space(&self) -> ParameterSpace {
        ParameterSpace {
            nu: self.nu_range,
            ubar: self.ubar_range,
        }
    }

    pub fn mode_selection(&self) -> ModeSelection {
        ModeSelection {
            counts: self.modes,
            energy_threshold: self.energy_threshold,
            n_max: self.n_max,
            clamp_to_rank: false,
        }
    }

    /// Fixed counts for the POD-NN bases. The control and supremiser
    /// counts are irrelevant there and kept at one.
    pub fn podnn_selection(&self) -> ModeSelection {
        let mut counts = self.podnn_modes;
        for c in [Component::S1, Component::S2, Component::G] {
            counts.set(c, counts.get(c).max(1));
        }
        ModeSelection {
            clamp_to_rank: true,
            ..ModeSelection::fixed(counts)
        }
    }

    pub fn podnn_options(&self) -> PodNnOptions {
        PodNnOptions {
            architecture: self.arch,
            adam: AdamOptions {
                epochs: self.epochs,
                learning_rate: self.lr,
                loss_target: self.loss_target,
                ..AdamOptions::default()
            },
            seed: self.seed,
        }
    }
}
