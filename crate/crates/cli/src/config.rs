//! Experiment configuration files (TOML).
//!
//! Relative paths inside a config file are resolved against the directory that holds it.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use perturb_core::analytics::{PINNED_CORPUS_SEED, PINNED_CORPUS_SIZE};
use perturb_core::perturbation::NoiseFamily;
use perturb_core::spath::EdgeTimes;
use perturb_core::{
    AdaptiveRule, Adversary, AlgoDescriptor, BoundKind, FollowTheLeader, Forecaster, Fpl, Hedge, NoiseSign,
    PerturbationSpec,
};

/// Monte Carlo draws per round when a config asks for sampled distributions without a count.
pub const DEFAULT_GAME_SAMPLES: u64 = 100_000;
/// Draws per history for equivalence verification.
pub const DEFAULT_VERIFY_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExpertGame,
    ShortestPath,
    EquivalenceVerify,
    BoundSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ExpertGame => "expert-game",
            ExperimentKind::ShortestPath => "shortest-path",
            ExperimentKind::EquivalenceVerify => "equivalence-verify",
            ExperimentKind::BoundSweep => "bound-sweep",
        }
    }

    fn needs_rounds(self) -> bool {
        self != ExperimentKind::EquivalenceVerify
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    #[default]
    Exact,
    MonteCarlo,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "algorithm", deny_unknown_fields)]
pub enum ForecasterConfig {
    Ftl,
    Hedge {
        beta: f64,
    },
    Rwm {
        gamma: f64,
    },
    Fpl {
        perturbation: PerturbationSpec,
        #[serde(default)]
        mode: ModeConfig,
        #[serde(default = "yes")]
        fresh_noise: bool,
    },
}

impl ForecasterConfig {
    pub fn build(&self, samples: Option<u64>) -> Result<Box<dyn Forecaster>> {
        Ok(match self {
            ForecasterConfig::Ftl => Box::new(FollowTheLeader),
            ForecasterConfig::Hedge { beta } => Box::new(Hedge::new(*beta)?),
            ForecasterConfig::Rwm { gamma } => Box::new(Hedge::rwm(*gamma)?),
            ForecasterConfig::Fpl {
                perturbation,
                mode,
                fresh_noise,
            } => {
                perturbation.validate()?;
                let mut f = Fpl::new(*perturbation);
                if *mode == ModeConfig::MonteCarlo {
                    f = f.monte_carlo(samples.unwrap_or(DEFAULT_GAME_SAMPLES));
                }
                if !fresh_noise {
                    f = f.noise_once();
                }
                Box::new(f)
            }
        })
    }

    pub fn descriptor(&self) -> AlgoDescriptor {
        match self {
            ForecasterConfig::Ftl => AlgoDescriptor::Ftl,
            ForecasterConfig::Hedge { beta } => AlgoDescriptor::Hedge { beta: *beta },
            ForecasterConfig::Rwm { gamma } => AlgoDescriptor::Rwm { gamma: *gamma },
            ForecasterConfig::Fpl { perturbation, .. } => AlgoDescriptor::Fpl {
                perturbation: *perturbation,
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            ForecasterConfig::Ftl => "ftl".into(),
            ForecasterConfig::Hedge { beta } => format!("hedge(beta={beta})"),
            ForecasterConfig::Rwm { gamma } => format!("rwm(gamma={gamma})"),
            ForecasterConfig::Fpl {
                perturbation: p,
                mode,
                fresh_noise,
            } => {
                let family = match p.family {
                    NoiseFamily::Uniform => "uniform",
                    NoiseFamily::Exponential => "exponential",
                    NoiseFamily::Gumbel => "gumbel",
                    NoiseFamily::PointMassZero => "zero",
                };
                let mut s = format!("fpl({family}, scale={}", p.scale);
                if p.location != 0.0 {
                    s += &format!(", location={}", p.location);
                }
                if p.sign == NoiseSign::Add {
                    s += ", add";
                }
                if *mode == ModeConfig::MonteCarlo {
                    s += ", monte-carlo";
                }
                if !fresh_noise {
                    s += ", noise-once";
                }
                s + ")"
            }
        }
    }

    /// The perturbation used when this forecaster drives the shortest-path game.
    pub fn path_perturbation(&self) -> Result<PerturbationSpec> {
        match self {
            ForecasterConfig::Ftl => Ok(PerturbationSpec::zero()),
            ForecasterConfig::Fpl { perturbation, .. } => {
                perturbation.validate()?;
                if perturbation.family != NoiseFamily::PointMassZero && perturbation.sign != NoiseSign::Add {
                    bail!("shortest-path perturbations must set sign = \"add\"");
                }
                Ok(*perturbation)
            }
            other => bail!(
                "shortest-path experiments need algorithm ftl or fpl, not {}",
                other.label()
            ),
        }
    }

    fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match (&mut out, parameter) {
            (ForecasterConfig::Hedge { beta }, SweepParameter::Beta) => *beta = value,
            (ForecasterConfig::Rwm { gamma }, SweepParameter::Gamma) => *gamma = value,
            (ForecasterConfig::Fpl { perturbation, .. }, SweepParameter::Scale) => perturbation.scale = value,
            (ForecasterConfig::Fpl { perturbation, .. }, SweepParameter::Epsilon) => {
                if value.is_nan() || value <= 0.0 {
                    bail!("sweep value epsilon = {value} must be positive");
                }
                perturbation.scale = match perturbation.family {
                    NoiseFamily::Uniform => 1.0 / value,
                    NoiseFamily::Exponential => value,
                    f => bail!("epsilon sweeps need uniform or exponential noise, not {f:?}"),
                }
            }
            (f, p) => bail!("cannot sweep {p:?} for {}", f.label()),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum AdversaryConfig {
    FtlKiller,
    Bernoulli {
        probs: Vec<f64>,
    },
    Uniform {
        n: usize,
        low: f64,
        high: f64,
    },
    Replay {
        path: PathBuf,
    },
    /// Adaptive: charges 1 to whichever expert the forecaster played last round.
    ChargePrevious {
        n: usize,
    },
}

impl AdversaryConfig {
    pub fn build(&self) -> Result<Adversary> {
        Ok(match self {
            AdversaryConfig::FtlKiller => Adversary::FtlKiller,
            AdversaryConfig::Bernoulli { probs } => Adversary::bernoulli(probs.clone())?,
            AdversaryConfig::Uniform { n, low, high } => Adversary::uniform(*n, *low, *high)?,
            AdversaryConfig::Replay { path } => Adversary::replay_file(path)
                .with_context(|| format!("loading replay table {}", path.display()))?,
            AdversaryConfig::ChargePrevious { n } => {
                if *n == 0 {
                    bail!("charge-previous adversary needs at least one expert");
                }
                Adversary::Adaptive(AdaptiveRule::charge_previous(*n))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Edge-list file: `s <node>`, `t <node>`, then one `from to [initial cost]` per line.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum EdgeTimesConfig {
    FtlKiller,
    Uniform {
        low: f64,
        high: f64,
    },
    /// CSV with one `time_<edge>` or `loss_<edge>` column per edge.
    Replay {
        path: PathBuf,
    },
}

impl EdgeTimesConfig {
    pub fn build(&self) -> Result<EdgeTimes> {
        Ok(match self {
            EdgeTimesConfig::FtlKiller => EdgeTimes::FtlKiller,
            EdgeTimesConfig::Uniform { low, high } => EdgeTimes::UniformIid {
                low: *low,
                high: *high,
            },
            EdgeTimesConfig::Replay { path } => EdgeTimes::Replay(
                crate::output::read_edge_time_rows(path)
                    .with_context(|| format!("loading edge times {}", path.display()))?,
            ),
        })
    }
}

fn default_betas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_corpus_size() -> usize {
    PINNED_CORPUS_SIZE
}

fn default_corpus_seed() -> u64 {
    PINNED_CORPUS_SEED
}

fn default_tolerance() -> f64 {
    0.005
}

fn default_exact_tolerance() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_corpus_size")]
    pub corpus_size: usize,
    #[serde(default = "default_corpus_seed")]
    pub corpus_seed: u64,
    /// Max entrywise gap allowed between sampled FPL and exponential weights.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Max entrywise gap allowed between the closed-form law and exponential weights.
    #[serde(default = "default_exact_tolerance")]
    pub exact_tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            betas: default_betas(),
            corpus_size: default_corpus_size(),
            corpus_seed: default_corpus_seed(),
            tolerance: default_tolerance(),
            exact_tolerance: default_exact_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Beta,
    Gamma,
    /// FPL(eps): uniform noise on `[0, 1/eps]` or exponential noise of rate `eps`.
    Epsilon,
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Number of rounds T.
    pub rounds: Option<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub samples: Option<u64>,
    /// Bounds to certify; the exit status reflects these checks.
    #[serde(default)]
    pub bounds: Vec<BoundKind>,
    pub forecaster: Option<ForecasterConfig>,
    #[serde(default)]
    pub variants: Vec<ForecasterConfig>,
    pub adversary: Option<AdversaryConfig>,
    pub graph: Option<GraphConfig>,
    pub edge_times: Option<EdgeTimesConfig>,
    pub verify: Option<VerifyConfig>,
    pub sweep: Option<SweepConfig>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<PathBuf>,
    pub samples: Option<u64>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Reads, resolves and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Parses TOML text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        if let Some(AdversaryConfig::Replay { path }) = &mut self.adversary {
            resolve(base, path);
        }
        if let Some(g) = &mut self.graph {
            resolve(base, &mut g.path);
        }
        if let Some(EdgeTimesConfig::Replay { path }) = &mut self.edge_times {
            resolve(base, path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(d) = &o.out_dir {
            self.output_dir = d.clone();
        }
        if let Some(n) = o.samples {
            self.samples = Some(n);
        }
        self.validate()
    }

    pub fn rounds(&self) -> Result<usize> {
        self.rounds.ok_or_else(|| {
            anyhow!(
                "missing key `rounds` (required for {} experiments)",
                self.kind.name()
            )
        })
    }

    fn require<'a, T>(&self, v: &'a Option<T>, key: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| {
            anyhow!(
                "missing key `{key}` (required for {} experiments)",
                self.kind.name()
            )
        })
    }

    pub fn adversary(&self) -> Result<&AdversaryConfig> {
        self.require(&self.adversary, "adversary")
    }

    pub fn forecaster(&self) -> Result<&ForecasterConfig> {
        self.require(&self.forecaster, "forecaster")
    }

    pub fn verify_settings(&self) -> VerifyConfig {
        self.verify.clone().unwrap_or_default()
    }

    /// Forecasters of a bound sweep, one per sweep value.
    pub fn sweep_variants(&self) -> Result<Vec<ForecasterConfig>> {
        let sweep = self.require(&self.sweep, "sweep")?;
        let base = self.forecaster()?;
        sweep
            .values
            .iter()
            .map(|&v| base.with_parameter(sweep.parameter, v))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("`seeds` must list at least one seed");
        }
        if self.kind.needs_rounds() && self.rounds()? == 0 {
            bail!("`rounds` must be at least 1");
        }
        if self.samples == Some(0) {
            bail!("`samples` must be at least 1");
        }
        let check_file = |p: &Path, key: &str| -> Result<()> {
            if !p.is_file() {
                bail!("`{key}` refers to {}, which does not exist", p.display());
            }
            Ok(())
        };
        if let Some(AdversaryConfig::Replay { path }) = &self.adversary {
            check_file(path, "adversary.path")?;
        }
        if let Some(g) = &self.graph {
            check_file(&g.path, "graph.path")?;
        }
        if let Some(EdgeTimesConfig::Replay { path }) = &self.edge_times {
            check_file(path, "edge_times.path")?;
        }
        for f in self.forecaster.iter().chain(&self.variants) {
            f.build(self.samples)
                .with_context(|| format!("invalid forecaster {}", f.label()))?;
        }
        match self.kind {
            ExperimentKind::ExpertGame => {
                self.adversary()?.build()?;
                if self.forecaster.is_none() && self.variants.is_empty() {
                    bail!("missing key `forecaster` (or `variants`) for expert-game experiments");
                }
            }
            ExperimentKind::BoundSweep => {
                self.adversary()?.build()?;
                let variants = self.sweep_variants()?;
                for v in &variants {
                    v.build(self.samples)
                        .with_context(|| format!("invalid sweep point {}", v.label()))?;
                }
                if self.bounds.is_empty() {
                    bail!("bound-sweep experiments need a non-empty `bounds` list");
                }
            }
            ExperimentKind::ShortestPath => {
                self.require(&self.graph, "graph")?;
                self.require(&self.edge_times, "edge_times")?;
                self.forecaster()?.path_perturbation()?;
                if !self.bounds.is_empty() {
                    bail!("`bounds` are only certified for expert games");
                }
            }
            ExperimentKind::EquivalenceVerify => {
                let v = self.verify_settings();
                if v.betas.is_empty() || v.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                    bail!("`verify.betas` must be a non-empty list of positive numbers");
                }
                if v.corpus_size == 0 {
                    bail!("`verify.corpus_size` must be at least 1");
                }
            }
        }
        Ok(())
    }
}
