//! Experiment configuration.
//!
//! One `key = value` pair per line. `#` starts a comment that runs to the end
//! of the line; blank lines are ignored. Lists are comma separated. Keys may
//! appear at most once; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::engine::{BlockSchedule, ChiPolicy};
use crate::error::{Error, Result};
use crate::model::{ExponentialFamily, FiniteHmm, Lgssm, ParamBox, StochVol};
use crate::particle::ParticleCount;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lgssm,
    FiniteHmm,
    StochVol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Exact,
    Kalman,
    Particle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Boem,
    BoemAveraged,
    OnlineEm,
    OnlineEmAveraged,
}

impl Algorithm {
    /// Whether summaries use the averaged trajectory.
    pub fn averaged(&self) -> bool {
        matches!(self, Algorithm::BoemAveraged | Algorithm::OnlineEmAveraged)
    }

    pub fn is_online(&self) -> bool {
        matches!(self, Algorithm::OnlineEm | Algorithm::OnlineEmAveraged)
    }
}

macro_rules! keyword_enum {
    ($ty:ident, $what:literal, $($text:literal => $variant:ident),+) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(format!(concat!("unknown ", $what, " '{}'"), other)),
                }
            }
        }

        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($ty::$variant => $text,)+
                }
            }
        }
    };
}

keyword_enum!(ModelKind, "model", "lgssm" => Lgssm, "finite-hmm" => FiniteHmm, "sv" => StochVol);
keyword_enum!(BackendKind, "backend", "exact" => Exact, "kalman" => Kalman, "particle" => Particle);
keyword_enum!(Algorithm, "algorithm", "boem" => Boem, "boem-avg" => BoemAveraged, "online-em" => OnlineEm, "online-em-avg" => OnlineEmAveraged);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub states: usize,
    pub true_params: Vec<f64>,
    pub init_params: Vec<f64>,
    pub schedule: BlockSchedule,
    pub backend: BackendKind,
    pub chi_policy: ChiPolicy,
    pub algorithm: Algorithm,
    pub observations: usize,
    pub replications: usize,
    pub seed: u64,
    pub particles: ParticleCount,
    pub averaging_start: usize,
    pub step_exponent: f64,
    pub burn_in: usize,
    /// Observations before the first BOEM M-step; see [`crate::engine::BoemOptions::burn_in`].
    pub boem_burn_in: usize,
    pub checkpoints: Vec<usize>,
    pub output_dir: PathBuf,
    pub bounds: ParamBox,
    /// Finite HMM only: when false the transition matrix stays at its initial value.
    pub estimate_transition: bool,
}

const KEYS: &[&str] = &[
    "model",
    "states",
    "true_params",
    "init_params",
    "schedule",
    "schedule_c",
    "schedule_a",
    "block_size",
    "backend",
    "chi_policy",
    "algorithm",
    "observations",
    "replications",
    "seed",
    "particles",
    "particle_scaling",
    "averaging_start",
    "step_exponent",
    "burn_in",
    "boem_burn_in",
    "checkpoints",
    "output_dir",
    "phi_max",
    "var_min",
    "var_max",
    "prob_min",
    "mean_bound",
    "truncation_sd",
    "estimate_transition",
];

struct Entries(Vec<(String, String, usize)>);

impl Entries {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.0.iter().find(|(k, _, _)| k == key).map(|(_, v, l)| (v.as_str(), *l))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config { line, msg: format!("{key}: {e}") }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| Error::Config { line: 0, msg: format!("missing required key '{key}'") })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| item.trim().parse::<T>().map_err(|e| Error::Config { line, msg: format!("{key}: '{}': {e}", item.trim()) }))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn line(&self, key: &str) -> usize {
        self.get(key).map_or(0, |(_, l)| l)
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{content}'") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config { line, msg: "empty key or value".into() });
        }
        if !KEYS.contains(&k) {
            return Err(Error::Config { line, msg: format!("unknown key '{k}'") });
        }
        if let Some((_, _, first)) = out.iter().find(|(key, _, _)| key == k) {
            return Err(Error::Config { line, msg: format!("duplicate key '{k}' (first set on line {first})") });
        }
        out.push((k.to_string(), v.to_string(), line));
    }
    Ok(Entries(out))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let e = tokenize(text)?;
        let model: ModelKind = e.required("model")?;
        let true_params: Vec<f64> = e.list("true_params")?.ok_or_else(|| missing("true_params"))?;
        let init_params: Vec<f64> = e.list("init_params")?.ok_or_else(|| missing("init_params"))?;
        let states = match e.parse::<usize>("states")? {
            Some(d) => d,
            None if model == ModelKind::FiniteHmm => infer_states(true_params.len())
                .ok_or_else(|| Error::Config { line: e.line("true_params"), msg: "cannot infer the state count".into() })?,
            None => 0,
        };

        let schedule_kind: String = e.parse("schedule")?.unwrap_or_else(|| "poly".to_string());
        let schedule = match schedule_kind.as_str() {
            "poly" => BlockSchedule::polynomial(e.parse("schedule_c")?.unwrap_or(1.0), e.parse("schedule_a")?.unwrap_or(1.1)),
            "fixed" => BlockSchedule::fixed(e.required("block_size")?),
            other => return Err(Error::Config { line: e.line("schedule"), msg: format!("unknown schedule '{other}'") }),
        }
        .map_err(|err| Error::Config { line: e.line("schedule"), msg: err.to_string() })?;

        let backend = e.parse("backend")?.unwrap_or(match model {
            ModelKind::Lgssm => BackendKind::Kalman,
            ModelKind::FiniteHmm => BackendKind::Exact,
            ModelKind::StochVol => BackendKind::Particle,
        });
        let chi_policy = match e.parse::<String>("chi_policy")?.as_deref() {
            None | Some("handoff") => ChiPolicy::Handoff,
            Some("stationary") => ChiPolicy::Stationary,
            Some(other) => return Err(Error::Config { line: e.line("chi_policy"), msg: format!("unknown chi_policy '{other}'") }),
        };
        let base: usize = e.parse("particles")?.unwrap_or(50);
        let particles = match e.parse::<f64>("particle_scaling")? {
            Some(b) => ParticleCount::Scaled { base, b },
            None => ParticleCount::Fixed(base),
        };
        let observations = e.required("observations")?;
        let checkpoints = match e.list::<usize>("checkpoints")? {
            Some(c) => c,
            None => default_checkpoints(observations),
        };
        let d = ParamBox::default();
        let bounds = ParamBox {
            phi_max: e.parse("phi_max")?.unwrap_or(d.phi_max),
            var_min: e.parse("var_min")?.unwrap_or(d.var_min),
            var_max: e.parse("var_max")?.unwrap_or(d.var_max),
            prob_min: e.parse("prob_min")?.unwrap_or(d.prob_min),
            mean_bound: e.parse("mean_bound")?.unwrap_or(d.mean_bound),
            truncation_sd: match e.get("truncation_sd") {
                Some(("none", _)) => None,
                _ => e.parse("truncation_sd")?.or(d.truncation_sd),
            },
        };
        let cfg = ExperimentConfig {
            model,
            states,
            true_params,
            init_params,
            schedule,
            backend,
            chi_policy,
            algorithm: e.parse("algorithm")?.unwrap_or(Algorithm::Boem),
            observations,
            replications: e.parse("replications")?.unwrap_or(1),
            seed: e.parse("seed")?.unwrap_or(0),
            particles,
            averaging_start: e.parse("averaging_start")?.unwrap_or(0),
            step_exponent: e.parse("step_exponent")?.unwrap_or(0.6),
            burn_in: e.parse("burn_in")?.unwrap_or(20),
            boem_burn_in: e.parse("boem_burn_in")?.unwrap_or(0),
            checkpoints,
            output_dir: e.parse::<String>("output_dir")?.unwrap_or_else(|| "out".into()).into(),
            bounds,
            estimate_transition: e.parse("estimate_transition")?.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.observations < self.schedule.block_size(1) {
            return bad(format!("observation budget {} is smaller than the first block", self.observations));
        }
        if self.checkpoints.is_empty() || self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be a non-empty increasing list".into());
        }
        if self.checkpoints.iter().any(|&c| c == 0 || c > self.observations) {
            return bad(format!("checkpoints must lie in 1..={}", self.observations));
        }
        let n = match self.particles {
            ParticleCount::Fixed(n) => n,
            ParticleCount::Scaled { base, b } => {
                if !(b > 0.0 && b.is_finite()) {
                    return bad(format!("particle_scaling exponent {b} must be positive"));
                }
                base
            }
        };
        if self.backend == BackendKind::Particle && n < 2 {
            return bad(format!("particles = {n}: at least 2 are needed"));
        }
        let compatible = matches!(
            (self.model, self.backend),
            (ModelKind::Lgssm, BackendKind::Kalman | BackendKind::Particle)
                | (ModelKind::FiniteHmm, BackendKind::Exact | BackendKind::Particle)
                | (ModelKind::StochVol, BackendKind::Particle)
        );
        if !compatible {
            return bad(format!("backend '{}' does not support model '{}'", self.backend.as_str(), self.model.as_str()));
        }
        if self.algorithm.is_online() {
            if self.backend == BackendKind::Kalman {
                return bad("online EM runs on the exact or particle backend".into());
            }
            if !(self.step_exponent > 0.5 && self.step_exponent <= 1.0) {
                return bad(format!("step_exponent {} outside (0.5, 1]", self.step_exponent));
            }
        }
        if !self.estimate_transition && self.model != ModelKind::FiniteHmm {
            return bad("estimate_transition applies to finite-hmm only".into());
        }
        if self.model == ModelKind::FiniteHmm && self.states < 2 {
            return bad("finite-hmm needs at least 2 states".into());
        }
        for (name, flat) in [("true_params", &self.true_params), ("init_params", &self.init_params)] {
            self.check_params(flat).map_err(|err| Error::Config { line: 0, msg: format!("{name}: {err}") })?;
        }
        Ok(())
    }

    fn check_params(&self, flat: &[f64]) -> Result<()> {
        match self.model {
            ModelKind::Lgssm => {
                let m = Lgssm::new(self.bounds.clone());
                m.validate(&m.unflatten(flat)?)
            }
            ModelKind::StochVol => {
                let m = StochVol::new(self.bounds.clone());
                m.validate(&m.unflatten(flat)?)
            }
            ModelKind::FiniteHmm => {
                let m = FiniteHmm::new(self.states, self.bounds.clone());
                m.validate(&m.unflatten(flat)?)
            }
        }
    }

    /// Stable textual form of every resolved setting.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.as_str());
        let _ = writeln!(s, "states = {}", self.states);
        let _ = writeln!(s, "true_params = {}", list(&self.true_params));
        let _ = writeln!(s, "init_params = {}", list(&self.init_params));
        match self.schedule {
            BlockSchedule::Polynomial { c, a } => {
                let _ = writeln!(s, "schedule = poly\nschedule_c = {c:?}\nschedule_a = {a:?}");
            }
            BlockSchedule::Fixed(n) => {
                let _ = writeln!(s, "schedule = fixed\nblock_size = {n}");
            }
        }
        let _ = writeln!(s, "backend = {}", self.backend.as_str());
        let chi = match self.chi_policy {
            ChiPolicy::Handoff => "handoff",
            ChiPolicy::Stationary => "stationary",
        };
        let _ = writeln!(s, "chi_policy = {chi}");
        let _ = writeln!(s, "algorithm = {}", self.algorithm.as_str());
        let _ = writeln!(s, "observations = {}", self.observations);
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "seed = {}", self.seed);
        match self.particles {
            ParticleCount::Fixed(n) => {
                let _ = writeln!(s, "particles = {n}");
            }
            ParticleCount::Scaled { base, b } => {
                let _ = writeln!(s, "particles = {base}\nparticle_scaling = {b:?}");
            }
        }
        let _ = writeln!(s, "averaging_start = {}", self.averaging_start);
        let _ = writeln!(s, "step_exponent = {:?}", self.step_exponent);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "boem_burn_in = {}", self.boem_burn_in);
        let cps: Vec<String> = self.checkpoints.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "checkpoints = {}", cps.join(","));
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let b = &self.bounds;
        let _ = writeln!(s, "phi_max = {:?}\nvar_min = {:?}\nvar_max = {:?}", b.phi_max, b.var_min, b.var_max);
        let _ = writeln!(s, "prob_min = {:?}\nmean_bound = {:?}", b.prob_min, b.mean_bound);
        match b.truncation_sd {
            Some(k) => {
                let _ = writeln!(s, "truncation_sd = {k:?}");
            }
            None => {
                let _ = writeln!(s, "truncation_sd = none");
            }
        }
        if !self.estimate_transition {
            let _ = writeln!(s, "estimate_transition = false");
        }
        s
    }

    /// The finite model described by this config, with the transition held at
    /// the initial matrix when it is not estimated.
    pub fn finite_model(&self) -> Result<FiniteHmm> {
        let m = FiniteHmm::new(self.states, self.bounds.clone());
        if self.estimate_transition {
            return Ok(m);
        }
        let init = m.unflatten(&self.init_params)?;
        m.with_fixed_transition(init.transition)
    }

    /// SHA-256 of [`Self::canonical`] without the `output_dir` line, hex
    /// encoded, so the same experiment hashes identically wherever it is written.
    pub fn hash(&self) -> String {
        let text: String = self.canonical().lines().filter(|l| !l.starts_with("output_dir =")).flat_map(|l| [l, "\n"]).collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn missing(key: &str) -> Error {
    Error::Config { line: 0, msg: format!("missing required key '{key}'") }
}

/// `d² + d + 1` flat parameters for a `d`-state model.
fn infer_states(len: usize) -> Option<usize> {
    (2..=64).find(|d| d * d + d + 1 == len)
}

/// Ten evenly spaced observation counts ending at the budget.
pub fn default_checkpoints(observations: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=10).map(|k| observations * k / 10).filter(|&c| c > 0).collect();
    out.dedup();
    out
}
