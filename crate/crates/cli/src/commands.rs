//! The subcommands, usable as library calls.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use catbreed::breeding::{breed_iterate, breed_oracle, BreedingStats};
use catbreed::fock::{
    apply_loss, density_from_pure, mean_photon_number, odd_cat, squeezed_vacuum, subtract_photon, DensityMatrix,
};
use catbreed::io::{load_density, load_samples, read_loglik_trace, save_density, save_grid, save_samples, write_loglik_trace, SampleFormat};
use catbreed::qhd::{empirical_moments, QSampler, SampleSet};
use catbreed::quasiprob::{fit_cat_amplitude, histogram_q, negativity_volume, q_grid, wigner_at_origin, wigner_grid, GridSpec, PhaseSpaceGrid};
use catbreed::stats::binomial_se;
use catbreed::tomography::{maxlik_reconstruct, ReconstructionConfig, ReconstructionResult};
use serde::{Deserialize, Serialize};

use crate::config::{Overrides, PipelineConfig, StateSpec, MIN_PIPELINE_SAMPLES};
use crate::error::{CliError, CliResult};
use crate::report::{GenerationRecord, OracleRecord, PipelineReport, ReconstructionRecord};

/// Truncation used to build the input state before trimming its empty tail.
const BUILD_DIM: usize = 64;
const TAIL_TOL: f64 = 1e-12;

pub const SAMPLES_FILE: &str = "samples.bin";
pub const DENSITY_FILE: &str = "density.txt";
pub const LOGLIK_FILE: &str = "loglik.csv";
pub const STATS_FILE: &str = "stats.json";
pub const RECON_FILE: &str = "reconstruction.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

pub fn generation_dir(out: &Path, generation: u32) -> PathBuf {
    out.join(format!("gen{generation}"))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("creating {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(format!("parsing {}: {e}", path.display())))
}

fn with_path<T>(r: catbreed::Result<T>, path: &Path) -> CliResult<T> {
    r.map_err(|e| CliError::from(e).context(path.display()))
}

/// Input state of the run: the configured state, photon-subtracted if
/// requested, then sent through the loss channel.
pub fn build_state(state: &StateSpec, eta: f64) -> CliResult<DensityMatrix> {
    let pure = match *state {
        StateSpec::OddCat { alpha } => odd_cat(alpha, BUILD_DIM)?,
        StateSpec::SqueezedVacuum { r, subtract } => {
            let sq = squeezed_vacuum(r, BUILD_DIM)?;
            if subtract {
                subtract_photon(&sq)?
            } else {
                sq
            }
        }
    };
    let rho = apply_loss(&density_from_pure(&pure), eta)?;
    Ok(rho.compacted(TAIL_TOL, 2)?)
}

/// Sampler bookkeeping for generation 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub count: usize,
    pub seed: u64,
    pub workers: usize,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub state_dim: usize,
}

/// Builds the input state, samples it and writes the set to `path`
/// (CSV for a `.csv` extension, binary otherwise).
pub fn cmd_simulate(cfg: &PipelineConfig, path: &Path) -> CliResult<(SampleSet, SimulationStats)> {
    let rho = build_state(&cfg.state, cfg.eta)?;
    let workers = rayon::current_num_threads();
    let (mut set, st) = QSampler::new(&rho)?.sample(cfg.samples, cfg.seed, workers)?;
    set.meta.generation = 0;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    with_path(save_samples(path, &set, SampleFormat::from_path(path)), path)?;
    let stats = SimulationStats {
        count: set.count(),
        seed: cfg.seed,
        workers,
        proposals: st.proposals,
        accepted: st.accepted,
        acceptance_rate: st.acceptance_rate(),
        state_dim: rho.dim(),
    };
    Ok((set, stats))
}

/// Bookkeeping of one growing step as written to `gen<k>/stats.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub nbar: f64,
    pub input_count: usize,
    pub pair_count: usize,
    pub accepted_count: usize,
    pub acceptance_fraction: f64,
}

impl StepStats {
    fn new(nbar: f64, s: &BreedingStats) -> Self {
        StepStats {
            nbar,
            input_count: s.input_count,
            pair_count: s.pair_count,
            accepted_count: s.accepted_count,
            acceptance_fraction: s.acceptance_fraction,
        }
    }
}

/// Runs the configured growing steps on `input`, writing `gen<k>/samples.bin`
/// and `gen<k>/stats.json` under `out` for k = 1, 2, ….
pub fn cmd_breed(input: &SampleSet, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<(SampleSet, StepStats)>> {
    let gens = breed_iterate(input, &cfg.breeding)?;
    let mut written = Vec::with_capacity(gens.len());
    for (k, (set, stats)) in gens.into_iter().enumerate() {
        let dir = generation_dir(out, set.meta.generation);
        create_dir(&dir)?;
        let path = dir.join(SAMPLES_FILE);
        with_path(save_samples(&path, &set, SampleFormat::Binary), &path)?;
        let step = StepStats::new(cfg.breeding.threshold(k), &stats);
        write_json(&dir.join(STATS_FILE), &step)?;
        written.push((set, step));
    }
    Ok(written)
}

/// Reconstruction dimension for a sample set: enough levels to hold the mean
/// photon number plus six standard deviations of a Poissonian spread, and at
/// least `min_dim`.
pub fn reconstruction_dim(set: &SampleSet, min_dim: Option<usize>) -> CliResult<usize> {
    let m = empirical_moments(set)?;
    let second = m.covariance[(0, 0)] + m.covariance[(1, 1)] + m.mean.norm_sqr();
    let n = (second - 1.0).max(0.0);
    let auto = (n + 6.0 * (n + 1.0).sqrt() + 4.0).ceil() as usize;
    Ok(auto.max(min_dim.unwrap_or(2)).clamp(2, 64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionInfo {
    pub dim: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// MaxLik reconstruction of `set`, writing the density matrix, the
/// log-likelihood trace and a small summary into `dir`.
pub fn cmd_reconstruct(
    set: &SampleSet,
    config: &ReconstructionConfig,
    min_dim: Option<usize>,
    dir: &Path,
) -> CliResult<ReconstructionResult> {
    let cfg = ReconstructionConfig {
        dim: reconstruction_dim(set, min_dim)?,
        ..*config
    };
    let res = maxlik_reconstruct(set, &cfg)?;
    create_dir(dir)?;
    let path = dir.join(DENSITY_FILE);
    with_path(save_density(&path, &res.rho), &path)?;
    let path = dir.join(LOGLIK_FILE);
    let file = fs::File::create(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    with_path(write_loglik_trace(std::io::BufWriter::new(file), &res.loglik_trace), &path)?;
    let info = ReconstructionInfo {
        dim: cfg.dim,
        iterations: res.iterations,
        converged: res.converged,
    };
    write_json(&dir.join(RECON_FILE), &info)?;
    Ok(res)
}

/// Grids written for one state.
pub struct QuasiprobGrids {
    pub wigner: PhaseSpaceGrid,
    pub q: PhaseSpaceGrid,
    pub q_empirical: Option<PhaseSpaceGrid>,
}

/// Wigner and Q grids of `rho`, plus the sample histogram when samples are
/// given, written as `wigner.csv`, `q_reconstructed.csv`, `q_empirical.csv`.
pub fn cmd_quasiprob(rho: &DensityMatrix, samples: Option<&SampleSet>, grid: &GridSpec, dir: &Path) -> CliResult<QuasiprobGrids> {
    create_dir(dir)?;
    let wigner = wigner_grid(rho, grid)?;
    let q = q_grid(rho, grid)?;
    let q_empirical = samples.map(|s| histogram_q(s, grid)).transpose()?;
    for (name, g) in [("wigner.csv", Some(&wigner)), ("q_reconstructed.csv", Some(&q)), ("q_empirical.csv", q_empirical.as_ref())] {
        if let Some(g) = g {
            let path = dir.join(name);
            with_path(save_grid(&path, g), &path)?;
        }
    }
    Ok(QuasiprobGrids { wigner, q, q_empirical })
}

/// Exact heralded states along the configured growing chain, with the
/// success probability of each step.
pub fn oracle_chain(input: &DensityMatrix, cfg: &PipelineConfig, generations: usize) -> CliResult<Vec<(DensityMatrix, f64)>> {
    let mut chain = vec![(input.clone(), 1.0)];
    for k in 1..generations {
        let (prev, _) = &chain[k - 1];
        let (out, success) = breed_oracle(prev, cfg.breeding.threshold(k - 1))?;
        chain.push((out.compacted(TAIL_TOL, 2)?, success));
    }
    Ok(chain)
}

fn oracle_record(rho: &DensityMatrix, success: f64) -> OracleRecord {
    let fit = fit_cat_amplitude(rho);
    OracleRecord {
        dim: rho.dim(),
        success,
        fitted_alpha: fit.alpha,
        fitted_parity: fit.parity.as_str().to_string(),
        fitted_fidelity: fit.fidelity,
        mean_photon_number: mean_photon_number(rho),
        wigner_at_origin: wigner_at_origin(rho),
    }
}

fn load_config(out: &Path) -> CliResult<PipelineConfig> {
    let path = out.join(CONFIG_FILE);
    if !path.exists() {
        return Err(CliError::io(format!("{} not found; run the pipeline first", path.display())));
    }
    PipelineConfig::from_overrides(&Overrides::from_config_file(&path)?)
}

/// Computes the per-generation metrics from the artifacts under `out`,
/// writes the phase-space grids of every generation and `report.json`.
pub fn cmd_report(out: &Path) -> CliResult<PipelineReport> {
    let cfg = load_config(out)?;
    let input = build_state(&cfg.state, cfg.eta)?;
    let mut sets = Vec::new();
    for g in 0..=cfg.breeding.steps as u32 {
        let dir = generation_dir(out, g);
        if !dir.exists() {
            let exhausted = sets.last().is_some_and(|s: &SampleSet| s.count() < 2);
            if exhausted {
                break;
            }
            return Err(CliError::io(format!("generation {g}: directory {} is missing", dir.display())));
        }
        let path = dir.join(SAMPLES_FILE);
        if !path.exists() {
            return Err(CliError::io(format!("generation {g}: {} is missing", path.display())));
        }
        sets.push(with_path(load_samples(&path), &path)?);
    }
    let chain = oracle_chain(&input, &cfg, sets.len())?;
    let mut generations = Vec::with_capacity(sets.len());
    for (g, set) in sets.iter().enumerate() {
        let dir = generation_dir(out, g as u32);
        let (rho_or, success) = &chain[g];
        let acceptance = if g == 0 {
            1.0
        } else {
            let stats: StepStats = read_json(&dir.join(STATS_FILE)).map_err(|e| e.context(format!("generation {g}")))?;
            stats.acceptance_fraction
        };
        let pairs = if g == 0 { set.count() } else { sets[g - 1].count() / 2 };
        let reconstruction = if set.count() >= 100 {
            let dpath = dir.join(DENSITY_FILE);
            if !dpath.exists() {
                return Err(CliError::io(format!("generation {g}: {} is missing", dpath.display())));
            }
            let rho = with_path(load_density(&dpath), &dpath)?;
            let info: ReconstructionInfo = read_json(&dir.join(RECON_FILE)).map_err(|e| e.context(format!("generation {g}")))?;
            let tpath = dir.join(LOGLIK_FILE);
            let file = fs::File::open(&tpath).map_err(|e| CliError::io(format!("generation {g}: {}: {e}", tpath.display())))?;
            let trace = with_path(read_loglik_trace(std::io::BufReader::new(file)), &tpath)?;
            let grids = cmd_quasiprob(&rho, Some(set), &cfg.grid, &dir)?;
            let fit = fit_cat_amplitude(&rho);
            Some(ReconstructionRecord {
                dim: info.dim,
                iterations: info.iterations,
                converged: info.converged,
                final_loglik: trace.last().copied().unwrap_or(f64::NAN),
                fitted_alpha: fit.alpha,
                fitted_parity: fit.parity.as_str().to_string(),
                fitted_fidelity: fit.fidelity,
                mean_photon_number: mean_photon_number(&rho),
                wigner_at_origin: wigner_at_origin(&rho),
                negativity_volume: negativity_volume(&grids.wigner),
            })
        } else {
            log::warn!("generation {g} has {} samples; skipping reconstruction", set.count());
            None
        };
        let m = if set.is_empty() { None } else { Some(empirical_moments(set)?) };
        generations.push(GenerationRecord {
            generation: g as u32,
            sample_count: set.count(),
            acceptance_fraction: acceptance,
            acceptance_se: if g == 0 { 0.0 } else { binomial_se(*success, pairs.max(1)) },
            empirical_mean_photon_number: m
                .map(|m| m.covariance[(0, 0)] + m.covariance[(1, 1)] + m.mean.norm_sqr() - 1.0)
                .unwrap_or(0.0),
            reconstruction,
            oracle: oracle_record(rho_or, *success),
        });
    }
    let report = PipelineReport {
        config: cfg.to_key_values(),
        versions: [("catbreed".to_string(), env!("CARGO_PKG_VERSION").to_string())].into_iter().collect(),
        threads: rayon::current_num_threads(),
        generations,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Wall-clock seconds per stage; kept out of the report so that the report
/// itself is reproducible.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub simulate: f64,
    pub breed: f64,
    pub reconstruct: Vec<f64>,
    pub report: f64,
    pub total: f64,
}

/// simulate → breed → reconstruct every generation → report.
pub fn pipeline(cfg: &PipelineConfig) -> CliResult<PipelineReport> {
    if cfg.samples < MIN_PIPELINE_SAMPLES {
        return Err(CliError::usage(format!(
            "pipeline mode needs at least {MIN_PIPELINE_SAMPLES} samples, got {}",
            cfg.samples
        )));
    }
    let start = Instant::now();
    let mut timings = Timings::default();
    let out = &cfg.out;
    create_dir(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_config_text())?;

    let t = Instant::now();
    let gen0_dir = generation_dir(out, 0);
    let (gen0, sim) = cmd_simulate(cfg, &gen0_dir.join(SAMPLES_FILE))?;
    write_json(&gen0_dir.join(STATS_FILE), &sim)?;
    timings.simulate = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let bred = cmd_breed(&gen0, cfg, out)?;
    timings.breed = t.elapsed().as_secs_f64();

    let sets: Vec<&SampleSet> = std::iter::once(&gen0).chain(bred.iter().map(|(s, _)| s)).collect();
    for (g, set) in sets.iter().enumerate() {
        let t = Instant::now();
        if set.count() >= 100 {
            log::info!("reconstructing generation {g} ({} samples)", set.count());
            cmd_reconstruct(set, &cfg.reconstruction, cfg.min_dim, &generation_dir(out, g as u32))
                .map_err(|e| e.context(format!("generation {g}")))?;
        }
        timings.reconstruct.push(t.elapsed().as_secs_f64());
    }

    let t = Instant::now();
    let report = cmd_report(out)?;
    timings.report = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();
    write_json(&out.join(TIMINGS_FILE), &timings)?;
    Ok(report)
}

/// Runs `f` on a pool of `threads` workers (0 = the global pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(f))
}
