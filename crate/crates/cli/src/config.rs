//! Pipeline configuration: command-line flags layered over a `key = value` file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use catbreed::breeding::BreedingConfig;
use catbreed::quasiprob::GridSpec;
use catbreed::tomography::ReconstructionConfig;
use clap::Args;

use crate::error::{CliError, CliResult};

/// Every setting as an optional value, so that a config file and the command
/// line can be merged field by field. Config-file keys are the flag names
/// without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Overrides {
    /// Input state: `odd-cat` or `squeezed` (squeezed vacuum).
    #[arg(long)]
    pub state: Option<String>,
    /// Cat amplitude for `--state odd-cat`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Squeeze parameter r for `--state squeezed`.
    #[arg(long)]
    pub squeeze: Option<f64>,
    /// Subtract one photon from the squeezed vacuum.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub subtract: Option<bool>,
    /// Transmissivity of the loss channel applied to the input state.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Number of QHD samples drawn for generation 0.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Heralding threshold on |α−|².
    #[arg(long)]
    pub nbar: Option<f64>,
    /// Number of growing steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Minimum reconstruction dimension (default: chosen per generation from the data).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub dilution: Option<f64>,
    /// Square phase-space grid `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Output directory (or file, for `simulate`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// `key = value` file supplying defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("bad value '{value}' for '{key}': {e}")))
}

impl Overrides {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_config_text(text: &str) -> CliResult<Self> {
        let mut o = Overrides::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!("config line {}: expected key = value", no + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            let key = key.replace('_', "-");
            match key.as_str() {
                "state" => o.state = Some(value.to_string()),
                "alpha" => o.alpha = Some(parse_value(&key, value)?),
                "squeeze" => o.squeeze = Some(parse_value(&key, value)?),
                "subtract" => o.subtract = Some(parse_value(&key, value)?),
                "eta" => o.eta = Some(parse_value(&key, value)?),
                "samples" => o.samples = Some(parse_value(&key, value)?),
                "seed" => o.seed = Some(parse_value(&key, value)?),
                "nbar" => o.nbar = Some(parse_value(&key, value)?),
                "steps" => o.steps = Some(parse_value(&key, value)?),
                "dim" => o.dim = Some(parse_value(&key, value)?),
                "max-iters" => o.max_iters = Some(parse_value(&key, value)?),
                "rel-tol" => o.rel_tol = Some(parse_value(&key, value)?),
                "dilution" => o.dilution = Some(parse_value(&key, value)?),
                "grid" => o.grid = Some(value.to_string()),
                "out" => o.out = Some(PathBuf::from(value)),
                "threads" => o.threads = Some(parse_value(&key, value)?),
                "config" => return Err(CliError::usage("config files cannot include other config files")),
                other => return Err(CliError::usage(format!("config line {}: unknown key '{other}'", no + 1))),
            }
        }
        Ok(o)
    }

    pub fn from_config_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}: {e}", path.display())))?;
        Overrides::from_config_text(&text).map_err(|e| e.context(path.display()))
    }

    /// Fields set here win; unset fields fall back to `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            state: self.state.or(base.state),
            alpha: self.alpha.or(base.alpha),
            squeeze: self.squeeze.or(base.squeeze),
            subtract: self.subtract.or(base.subtract),
            eta: self.eta.or(base.eta),
            samples: self.samples.or(base.samples),
            seed: self.seed.or(base.seed),
            nbar: self.nbar.or(base.nbar),
            steps: self.steps.or(base.steps),
            dim: self.dim.or(base.dim),
            max_iters: self.max_iters.or(base.max_iters),
            rel_tol: self.rel_tol.or(base.rel_tol),
            dilution: self.dilution.or(base.dilution),
            grid: self.grid.or(base.grid),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
            config: self.config.or(base.config),
        }
    }

    /// Command line over the file named by `--config`, if any.
    pub fn resolve(self) -> CliResult<Overrides> {
        match &self.config {
            Some(path) => {
                let file = Overrides::from_config_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }
}

/// State prepared before sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    OddCat { alpha: f64 },
    SqueezedVacuum { r: f64, subtract: bool },
}

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const MIN_PIPELINE_SAMPLES: usize = 10_000;

/// Fully resolved settings of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub state: StateSpec,
    pub eta: f64,
    pub samples: usize,
    pub seed: u64,
    pub breeding: BreedingConfig,
    pub reconstruction: ReconstructionConfig,
    /// Lower bound on the per-generation reconstruction dimension; `None`
    /// lets the data decide.
    pub min_dim: Option<usize>,
    pub grid: GridSpec,
    pub out: PathBuf,
    pub threads: usize,
}

pub fn parse_grid(s: &str) -> CliResult<GridSpec> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(CliError::usage(format!("grid '{s}' is not of the form lo:hi:n")));
    };
    let lo: f64 = parse_value("grid", lo)?;
    let hi: f64 = parse_value("grid", hi)?;
    let n: usize = parse_value("grid", n)?;
    GridSpec::square(lo, hi, n).map_err(CliError::from)
}

fn format_grid(g: &GridSpec) -> String {
    format!("{}:{}:{}", g.x_min, g.x_max, g.nx)
}

impl PipelineConfig {
    pub fn from_overrides(o: &Overrides) -> CliResult<Self> {
        let state = match o.state.as_deref().unwrap_or("odd-cat") {
            "odd-cat" | "cat" => {
                if o.squeeze.is_some() || o.subtract.is_some() {
                    return Err(CliError::usage("--squeeze/--subtract apply to --state squeezed"));
                }
                StateSpec::OddCat {
                    alpha: o.alpha.unwrap_or(1.1),
                }
            }
            "squeezed" | "squeezed-vacuum" => {
                if o.alpha.is_some() {
                    return Err(CliError::usage("--alpha applies to --state odd-cat"));
                }
                StateSpec::SqueezedVacuum {
                    r: o.squeeze.unwrap_or(0.6),
                    subtract: o.subtract.unwrap_or(false),
                }
            }
            other => return Err(CliError::usage(format!("unknown state '{other}' (odd-cat | squeezed)"))),
        };
        let breeding = BreedingConfig::new(o.nbar.unwrap_or(1.3), o.steps.unwrap_or(2))?;
        let defaults = ReconstructionConfig::default();
        let reconstruction = ReconstructionConfig {
            dim: o.dim.unwrap_or(defaults.dim),
            max_iters: o.max_iters.unwrap_or(defaults.max_iters),
            rel_tol: o.rel_tol.unwrap_or(defaults.rel_tol),
            dilution: o.dilution.unwrap_or(defaults.dilution),
        };
        let cfg = PipelineConfig {
            state,
            eta: o.eta.unwrap_or(1.0),
            samples: o.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: o.seed.unwrap_or(1),
            breeding,
            reconstruction,
            min_dim: o.dim,
            grid: match &o.grid {
                Some(g) => parse_grid(g)?,
                None => GridSpec::figure_default(),
            },
            out: o.out.clone().unwrap_or_else(|| PathBuf::from("catbreed-out")),
            threads: o.threads.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        match self.state {
            StateSpec::OddCat { alpha } if !(alpha > 0.0 && alpha <= 4.0) => {
                return Err(CliError::usage(format!("alpha must lie in (0, 4], got {alpha}")));
            }
            StateSpec::SqueezedVacuum { r, subtract } if !(r >= 0.0 && r <= 1.5) || (subtract && r == 0.0) => {
                return Err(CliError::usage(format!(
                    "squeeze must lie in [0, 1.5] (and be > 0 with --subtract), got {r}"
                )));
            }
            _ => {}
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(CliError::usage(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.samples == 0 {
            return Err(CliError::usage("samples must be >= 1"));
        }
        self.breeding.validate()?;
        let mut rc = self.reconstruction;
        rc.dim = rc.dim.max(2);
        rc.validate()?;
        if let Some(d) = self.min_dim {
            if !(2..=64).contains(&d) {
                return Err(CliError::usage(format!("dim must lie in [2, 64], got {d}")));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` form; parsing it back yields the same config.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self.state {
            StateSpec::OddCat { alpha } => {
                m.insert("state".into(), "odd-cat".into());
                m.insert("alpha".into(), alpha.to_string());
            }
            StateSpec::SqueezedVacuum { r, subtract } => {
                m.insert("state".into(), "squeezed".into());
                m.insert("squeeze".into(), r.to_string());
                m.insert("subtract".into(), subtract.to_string());
            }
        }
        m.insert("eta".into(), self.eta.to_string());
        m.insert("samples".into(), self.samples.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("nbar".into(), self.breeding.nbar.to_string());
        m.insert("steps".into(), self.breeding.steps.to_string());
        if let Some(d) = self.min_dim {
            m.insert("dim".into(), d.to_string());
        }
        m.insert("max-iters".into(), self.reconstruction.max_iters.to_string());
        m.insert("rel-tol".into(), self.reconstruction.rel_tol.to_string());
        m.insert("dilution".into(), self.reconstruction.dilution.to_string());
        m.insert("grid".into(), format_grid(&self.grid));
        m.insert("out".into(), self.out.display().to_string());
        m.insert("threads".into(), self.threads.to_string());
        m
    }

    pub fn to_config_text(&self) -> String {
        self.to_key_values()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_overrides(&Overrides::default()).unwrap();
        assert_eq!(c.state, StateSpec::OddCat { alpha: 1.1 });
        assert_eq!(c.breeding.nbar, 1.3);
        assert_eq!(c.breeding.steps, 2);
        assert_eq!(c.reconstruction.rel_tol, 1e-8);
        assert_eq!(c.min_dim, None);
        assert_eq!(c.grid, GridSpec::figure_default());
    }

    #[test]
    fn file_parsing_and_precedence() {
        let file = Overrides::from_config_text("# run\nalpha = 1.5\nnbar=2 # comment\nmax_iters = 7\n").unwrap();
        assert_eq!(file.alpha, Some(1.5));
        assert_eq!(file.nbar, Some(2.0));
        assert_eq!(file.max_iters, Some(7));
        let cli = Overrides {
            alpha: Some(0.9),
            ..Default::default()
        };
        let merged = cli.over(file);
        assert_eq!(merged.alpha, Some(0.9));
        assert_eq!(merged.nbar, Some(2.0));
    }

    #[test]
    fn bad_config_lines() {
        assert!(Overrides::from_config_text("alpha 1.0").is_err());
        assert!(Overrides::from_config_text("colour = red").is_err());
        assert!(Overrides::from_config_text("alpha = one").is_err());
    }

    #[test]
    fn validation() {
        let bad = |o: Overrides| PipelineConfig::from_overrides(&o).is_err();
        assert!(bad(Overrides { eta: Some(0.0), ..Default::default() }));
        assert!(bad(Overrides { eta: Some(1.2), ..Default::default() }));
        assert!(bad(Overrides { state: Some("fock".into()), ..Default::default() }));
        assert!(bad(Overrides { squeeze: Some(0.5), ..Default::default() }));
        assert!(bad(Overrides { dilution: Some(0.0), ..Default::default() }));
        assert!(bad(Overrides { grid: Some("1:2".into()), ..Default::default() }));
        assert!(bad(Overrides { nbar: Some(-1.0), ..Default::default() }));
    }

    #[test]
    fn key_values_round_trip() {
        let o = Overrides {
            state: Some("squeezed".into()),
            squeeze: Some(0.6),
            subtract: Some(true),
            eta: Some(0.85),
            dim: Some(12),
            grid: Some("-4:4:81".into()),
            rel_tol: Some(1e-7),
            ..Default::default()
        };
        let c = PipelineConfig::from_overrides(&o).unwrap();
        let back = PipelineConfig::from_overrides(&Overrides::from_config_text(&c.to_config_text()).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
