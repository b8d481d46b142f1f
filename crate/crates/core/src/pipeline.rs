//! File-level pipeline: synthesize a dataset, fit a model, generate batches
//! and evaluate them. Every step reads and writes the formats in [`crate::io`].

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::dictionary::{AngleGrid, DelayDopplerGrid, Dictionary, Grid, SystemConfig};
use crate::error::{Error, Result};
use crate::generation::{limit_batch, render_channels, sample_parameters, GeneratedBatch, Provenance};
use crate::io::{read_json, read_model, write_atomic, write_json, write_model, ArrayContainer};
use crate::linalg::CVector;
use crate::metrics::{angular_spreads, histogram_w1, power_angular_profile, profile_support_leakage, Bins};
use crate::random::{stream_rng, streams};
use crate::sbgm::{csgmm_fit, EmTrace, FitOptions, SbgmModel, VarianceForm, DEFAULT_FLOOR, KRONECKER_SWEEPS};
use crate::scenario::{
    draw_ofdm_channel, draw_simo_channel, ground_truth_angular_parameters, laplacian_local_covariance,
    make_observations, normalize_dataset, random_selection_matrix, sample_angle, AngleProfile, Measurement,
    ObservationSet, OfdmScenario, SnrConvention,
};

const DATASET_FORMAT: &str = "chansbgm-dataset/1";
const BATCH_FORMAT: &str = "chansbgm-batch/1";

/// Relative slack allowed when checking EM traces for monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimoSynthConfig {
    pub samples: usize,
    pub antennas: usize,
    pub grid_size: usize,
    /// Observed entries per sample; all antennas when absent.
    pub observed: Option<usize>,
    pub snr_db: (f64, f64),
    pub snr_convention: SnrConvention,
    pub angle_profile: AngleProfile,
    /// Standard deviation of the Laplacian subpath density, degrees.
    pub laplacian_std_deg: f64,
    pub quadrature_points: usize,
}

impl Default for SimoSynthConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            antennas: 16,
            grid_size: 256,
            observed: None,
            snr_db: (0.0, 20.0),
            snr_convention: SnrConvention::Channel,
            angle_profile: AngleProfile::default(),
            laplacian_std_deg: 2.0,
            quadrature_points: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSynthConfig {
    pub samples: usize,
    pub scenario: OfdmScenario,
    pub doppler_grid: usize,
    pub delay_grid: usize,
    /// ϑ̄ in Hz.
    pub max_doppler: f64,
    /// τ̄ in seconds.
    pub max_delay: f64,
    pub observed: usize,
    pub snr_db: (f64, f64),
    pub snr_convention: SnrConvention,
    pub normalize: bool,
}

impl Default for OfdmSynthConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            scenario: OfdmScenario::default(),
            doppler_grid: 40,
            delay_grid: 40,
            max_doppler: 250.0,
            max_delay: 6e-6,
            observed: 30,
            snr_db: (5.0, 20.0),
            snr_convention: SnrConvention::Observed,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthConfig {
    Simo(SimoSynthConfig),
    Ofdm(OfdmSynthConfig),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::Simo(SimoSynthConfig::default())
    }
}

impl SynthConfig {
    pub fn grid(&self) -> Result<Grid> {
        Ok(match self {
            SynthConfig::Simo(c) => Grid::Angle(AngleGrid::new(c.grid_size)?),
            SynthConfig::Ofdm(c) => Grid::DelayDoppler(DelayDopplerGrid::new(
                c.doppler_grid,
                c.delay_grid,
                c.max_doppler,
                c.max_delay,
            )?),
        })
    }

    pub fn system(&self) -> SystemConfig {
        match self {
            SynthConfig::Simo(c) => SystemConfig::simo(c.antennas),
            SynthConfig::Ofdm(c) => c.scenario.config,
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            SynthConfig::Simo(c) => c.samples,
            SynthConfig::Ofdm(c) => c.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub seed: u64,
    pub samples: usize,
    pub grid: Grid,
    pub system: SystemConfig,
    /// Amplitude factor applied to the channels before observing them.
    pub normalization_scale: f64,
    pub config: SynthConfig,
    /// SHA-256 of the observation payload.
    pub observations_id: String,
}

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub channels: Vec<CVector>,
    pub observations: ObservationSet,
    /// Per-sample main angles (SIMO only), radians.
    pub angles: Option<Vec<f64>>,
    /// Per-sample ground-truth coefficient vectors (SIMO only).
    pub ground_truth: Option<Vec<CVector>>,
}

impl Dataset {
    pub fn dictionary(&self) -> Result<Dictionary> {
        build_dictionary(self.manifest.grid, self.manifest.system)
    }
}

/// Rebuilds a dictionary, re-validating the grid.
pub fn build_dictionary(grid: Grid, system: SystemConfig) -> Result<Dictionary> {
    let grid = match grid {
        Grid::Angle(g) => Grid::Angle(AngleGrid::new(g.size())?),
        Grid::DelayDoppler(g) => Grid::DelayDoppler(DelayDopplerGrid::new(
            g.doppler_size(),
            g.delay_size(),
            g.max_doppler(),
            g.max_delay(),
        )?),
    };
    Dictionary::build(grid, system)
}

fn sha256_hex(bytes: impl IntoIterator<Item = u8>) -> String {
    let mut h = Sha256::new();
    h.update(bytes.into_iter().collect::<Vec<u8>>());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn observations_id(samples: &[CVector]) -> String {
    sha256_hex(samples.iter().flat_map(|y| y.iter()).flat_map(|z| {
        let mut b = z.re.to_le_bytes().to_vec();
        b.extend_from_slice(&z.im.to_le_bytes());
        b
    }))
}

struct SimoDraws {
    channels: Vec<CVector>,
    angles: Vec<f64>,
    ground_truth: Vec<CVector>,
}

fn draw_simo(cfg: &SimoSynthConfig, seed: u64) -> Result<SimoDraws> {
    cfg.angle_profile.validate()?;
    let grid = AngleGrid::new(cfg.grid_size)?;
    let std = cfg.laplacian_std_deg.to_radians();
    let draws: Vec<(f64, CVector, CVector)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, streams::CHANNELS + i as u64);
            let angle = sample_angle(&cfg.angle_profile, &mut rng);
            let cov = laplacian_local_covariance(angle, std, cfg.antennas, cfg.quadrature_points)?;
            let h = draw_simo_channel(&cov, &mut rng)?;
            let mut gt_rng = stream_rng(seed, streams::GROUND_TRUTH + i as u64);
            let s = ground_truth_angular_parameters(angle, std, &grid, &mut gt_rng);
            Ok((angle, h, s))
        })
        .collect::<Result<_>>()?;
    let mut out = SimoDraws {
        channels: Vec::with_capacity(draws.len()),
        angles: Vec::with_capacity(draws.len()),
        ground_truth: Vec::with_capacity(draws.len()),
    };
    for (a, h, s) in draws {
        out.angles.push(a);
        out.channels.push(h);
        out.ground_truth.push(s);
    }
    Ok(out)
}

/// Synthesizes channels and observations and writes the dataset to `out`.
pub fn synth(config: &SynthConfig, seed: u64, out: &Path) -> Result<DatasetManifest> {
    let grid = config.grid()?;
    let system = config.system();
    system.validate()?;
    if config.samples() == 0 {
        return Err(Error::invalid("samples must be ≥ 1"));
    }
    let n = system.channel_dim();
    let mut selection_rng = stream_rng(seed, streams::SELECTION);
    let mut noise_rng = stream_rng(seed, streams::NOISE);

    let (channels, scale, measurement, snr, convention, extra) = match config {
        SynthConfig::Simo(cfg) => {
            let draws = draw_simo(cfg, seed)?;
            let measurement = match cfg.observed {
                None => Measurement::identity(n),
                Some(m) if m == n => Measurement::identity(n),
                Some(m) => random_selection_matrix(m, n, &mut selection_rng)?,
            };
            (draws.channels, 1.0, measurement, cfg.snr_db, cfg.snr_convention, Some((draws.angles, draws.ground_truth)))
        }
        SynthConfig::Ofdm(cfg) => {
            cfg.scenario.validate()?;
            let raw: Vec<CVector> = (0..cfg.samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, streams::CHANNELS + i as u64);
                    draw_ofdm_channel(&cfg.scenario, &mut rng).map(|h| crate::dictionary::vectorize_ofdm(&h))
                })
                .collect::<Result<_>>()?;
            let (channels, scale) = if cfg.normalize { normalize_dataset(&raw)? } else { (raw, 1.0) };
            let measurement = if cfg.observed == n {
                Measurement::identity(n)
            } else {
                random_selection_matrix(cfg.observed, n, &mut selection_rng)?
            };
            (channels, scale, measurement, cfg.snr_db, cfg.snr_convention, None)
        }
    };
    let obs = make_observations(&channels, &measurement, snr, convention, None, &mut noise_rng)?;

    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        seed,
        samples: channels.len(),
        grid,
        system,
        normalization_scale: scale,
        config: config.clone(),
        observations_id: observations_id(&obs.samples),
    };
    let prov = json!({ "seed": seed });
    ArrayContainer::from_rows(&channels, n, "ground_truth_channels")?
        .with_provenance(prov.clone())
        .write(out, "channels")?;
    ArrayContainer::from_rows(&obs.samples, measurement.rows(), "observations")?
        .with_provenance(prov.clone())
        .write(out, "observations")?;
    ArrayContainer::real(vec![obs.len()], obs.noise_vars.clone(), "noise_variances")?
        .with_provenance(prov.clone())
        .write(out, "noise_vars")?;
    ArrayContainer::real(vec![obs.len()], obs.snr_db.clone(), "snr")?
        .with_units("dB")
        .with_provenance(prov.clone())
        .write(out, "snr_db")?;
    let dense = measurement.to_dense();
    let row_major: Vec<f64> = (0..dense.nrows()).flat_map(|r| (0..dense.ncols()).map(move |c| (r, c))).map(|(r, c)| dense[(r, c)]).collect();
    ArrayContainer::real(vec![dense.nrows(), dense.ncols()], row_major, "measurement_matrix")?
        .with_provenance(prov.clone())
        .write(out, "measurement")?;
    if let Some((angles, gt)) = extra {
        ArrayContainer::real(vec![angles.len()], angles, "main_angles")?
            .with_units("rad")
            .with_provenance(prov.clone())
            .write(out, "angles")?;
        ArrayContainer::from_rows(&gt, grid.size(), "ground_truth_parameters")?
            .with_provenance(prov)
            .write(out, "ground_truth_params")?;
    }
    write_json(&out.join("dataset.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = read_json(&dir.join("dataset.json"))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::Format(format!("unsupported dataset format {}", manifest.format)));
    }
    let channels = ArrayContainer::read(dir, "channels")?.to_rows()?;
    let samples = ArrayContainer::read(dir, "observations")?.to_rows()?;
    let noise_vars = ArrayContainer::read(dir, "noise_vars")?.as_real()?.to_vec();
    let snr_db = ArrayContainer::read(dir, "snr_db")?.as_real()?.to_vec();
    let a = ArrayContainer::read(dir, "measurement")?;
    let [m, n] = a.shape[..] else {
        return Err(Error::Format("measurement must be 2-D".into()));
    };
    let flat = a.as_real()?;
    let dense = nalgebra::DMatrix::from_fn(m, n, |r, c| flat[r * n + c]);
    let measurement = Measurement::from_dense(&dense)?;
    let observations = ObservationSet {
        samples,
        noise_vars,
        snr_db,
        measurement,
    };
    observations.validate()?;
    let (angles, ground_truth) = if dir.join("ground_truth_params.json").exists() {
        (
            Some(ArrayContainer::read(dir, "angles")?.as_real()?.to_vec()),
            Some(ArrayContainer::read(dir, "ground_truth_params")?.to_rows()?),
        )
    } else {
        (None, None)
    };
    Ok(Dataset {
        manifest,
        channels,
        observations,
        angles,
        ground_truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Csgmm,
    Msbl,
}

/// Options of `fit`; anything unset falls back to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub model: ModelKind,
    pub components: usize,
    pub variance_form: VarianceForm,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub kronecker_sweeps: usize,
    pub floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Csgmm,
            components: 16,
            variance_form: VarianceForm::Full,
            max_iters: 500,
            rel_tol: 1e-6,
            kronecker_sweeps: KRONECKER_SWEEPS,
            floor: DEFAULT_FLOOR,
        }
    }
}

impl FitConfig {
    pub fn effective_components(&self) -> usize {
        match self.model {
            ModelKind::Msbl => 1,
            ModelKind::Csgmm => self.components,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub model: ModelKind,
    pub components: usize,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
    pub first_violation: Option<usize>,
    pub final_log_likelihood: f64,
    pub resets: Vec<usize>,
}

/// Provenance stored with a fitted model, sufficient to rebuild its
/// dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub seed: u64,
    pub grid: Grid,
    pub system: SystemConfig,
    pub observations_id: String,
}

pub fn write_trace_csv(path: &Path, trace: &EmTrace) -> Result<()> {
    let mut s = String::from("iteration,log_likelihood,reset\n");
    for (u, ll) in trace.log_likelihoods.iter().enumerate() {
        s.push_str(&format!("{u},{ll:e},{}\n", u8::from(trace.resets.contains(&u))));
    }
    write_atomic(path, s.as_bytes())
}

/// Fits a model to `dataset` and writes `model.{json,bin}`, `em_trace.csv`
/// and `fit.json` to `out`.
pub fn fit(dataset: &Path, config: &FitConfig, seed: u64, out: &Path) -> Result<(SbgmModel, EmTrace, FitSummary)> {
    let data = load_dataset(dataset)?;
    let dict = data.dictionary()?;
    let k = config.effective_components();
    let opts = FitOptions {
        max_iters: config.max_iters,
        rel_tol: config.rel_tol,
        seed,
        variance_form: config.variance_form,
        kronecker_sweeps: config.kronecker_sweeps,
        floor: config.floor,
    };
    let (model, trace) = csgmm_fit(&data.observations, &dict, k, &opts)?;
    let provenance = ModelProvenance {
        seed,
        grid: data.manifest.grid,
        system: data.manifest.system,
        observations_id: data.manifest.observations_id.clone(),
    };
    write_model(out, "model", &model, serde_json::to_value(&provenance)?)?;
    write_trace_csv(&out.join("em_trace.csv"), &trace)?;
    let violation = trace.first_violation(MONOTONE_SLACK);
    let summary = FitSummary {
        model: config.model,
        components: k,
        iterations: trace.iterations,
        converged: trace.converged,
        monotone: violation.is_none(),
        first_violation: violation,
        final_log_likelihood: *trace.log_likelihoods.last().unwrap_or(&f64::NAN),
        resets: trace.resets.clone(),
    };
    write_json(&out.join("fit.json"), &summary)?;
    Ok((model, trace, summary))
}

pub fn load_model(dir: &Path) -> Result<(SbgmModel, ModelProvenance)> {
    let (model, header) = read_model(dir, "model")?;
    let prov: ModelProvenance = serde_json::from_value(header.provenance)
        .map_err(|e| Error::Format(format!("model provenance: {e}")))?;
    Ok((model, prov))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub format: String,
    pub samples: usize,
    pub grid: Grid,
    /// System configuration the channels were rendered with.
    pub system: Option<SystemConfig>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub n: usize,
    pub p_max: Option<usize>,
    pub render: bool,
    /// Render under this configuration instead of the training one.
    pub swap_config: Option<SystemConfig>,
}

/// Generates a batch from the model in `model_dir` and writes it to `out`.
pub fn generate(model_dir: &Path, opts: &GenerateOptions, seed: u64, out: &Path) -> Result<GeneratedBatch> {
    let (model, prov) = load_model(model_dir)?;
    if model.sparse_dim() != prov.grid.size() {
        return Err(Error::DomainMismatch("model does not match its recorded grid".into()));
    }
    let mut batch = sample_parameters(&model, opts.n, seed);
    if let Some(p) = opts.p_max {
        batch = limit_batch(batch, p)?;
    }
    let mut system = None;
    if opts.render || opts.swap_config.is_some() {
        let trained = build_dictionary(prov.grid, prov.system)?;
        let dict = match opts.swap_config {
            Some(cfg) => trained.swap_system_config(cfg)?,
            None => trained,
        };
        batch = render_channels(batch, &dict)?;
        system = Some(*dict.config());
    }
    write_batch(out, &batch, prov.grid, system)?;
    Ok(batch)
}

pub fn write_batch(out: &Path, batch: &GeneratedBatch, grid: Grid, system: Option<SystemConfig>) -> Result<()> {
    let prov = serde_json::to_value(&batch.provenance)?;
    ArrayContainer::from_rows(&batch.params, grid.size(), "generated_parameters")?
        .with_provenance(prov.clone())
        .write(out, "params")?;
    let labels = batch.labels.iter().map(|&k| k as f64).collect();
    ArrayContainer::real(vec![batch.len()], labels, "component_labels")?
        .with_provenance(prov.clone())
        .write(out, "labels")?;
    if let (Some(h), Some(sys)) = (&batch.channels, system) {
        ArrayContainer::from_rows(h, sys.channel_dim(), "generated_channels")?
            .with_provenance(prov)
            .write(out, "channels")?;
    }
    let manifest = BatchManifest {
        format: BATCH_FORMAT.into(),
        samples: batch.len(),
        grid,
        system,
        provenance: batch.provenance.clone(),
    };
    write_json(&out.join("batch.json"), &manifest)
}

pub fn load_batch(dir: &Path) -> Result<(GeneratedBatch, BatchManifest)> {
    let manifest: BatchManifest = read_json(&dir.join("batch.json"))?;
    if manifest.format != BATCH_FORMAT {
        return Err(Error::Format(format!("unsupported batch format {}", manifest.format)));
    }
    let params = ArrayContainer::read(dir, "params")?.to_rows()?;
    let labels = ArrayContainer::read(dir, "labels")?
        .as_real()?
        .iter()
        .map(|&k| k as usize)
        .collect();
    let channels = if manifest.system.is_some() {
        Some(ArrayContainer::read(dir, "channels")?.to_rows()?)
    } else {
        None
    };
    let batch = GeneratedBatch {
        params,
        labels,
        channels,
        provenance: manifest.provenance.clone(),
    };
    Ok((batch, manifest))
}

/// Parameters (and channels) a batch is compared against.
pub struct Reference {
    pub params: Vec<CVector>,
    pub channels: Option<Vec<CVector>>,
    pub grid: Grid,
    /// Known angular support, if the reference is a synthesized dataset.
    pub support: Option<Vec<bool>>,
}

/// Loads a dataset (ground-truth parameters) or a generated batch.
pub fn load_reference(dir: &Path) -> Result<Reference> {
    if dir.join("dataset.json").exists() {
        let data = load_dataset(dir)?;
        let params = data
            .ground_truth
            .ok_or_else(|| Error::invalid("reference dataset has no ground-truth parameters"))?;
        let support = match (&data.manifest.config, data.manifest.grid) {
            (SynthConfig::Simo(cfg), Grid::Angle(g)) => Some(cfg.angle_profile.support_mask(&g, 3.0)),
            _ => None,
        };
        return Ok(Reference {
            params,
            channels: Some(data.channels),
            grid: data.manifest.grid,
            support,
        });
    }
    let (batch, manifest) = load_batch(dir)?;
    Ok(Reference {
        params: batch.params,
        channels: batch.channels,
        grid: manifest.grid,
        support: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub skipped: usize,
    pub mean_spread_rad: Option<f64>,
    pub reference_mean_spread_rad: Option<f64>,
    pub spread_ratio: Option<f64>,
    pub spread_w1_rad: Option<f64>,
    pub leakage: Option<f64>,
    pub nmse: Option<f64>,
    pub cosine_similarity: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Evaluates the batch in `batch_dir`, optionally against a reference, and
/// writes `metrics.json`, `profile.csv` and `spread_histogram.csv` to `out`.
pub fn metrics(batch_dir: &Path, reference: Option<&Path>, channel_metrics: bool, out: &Path) -> Result<MetricsReport> {
    let (batch, manifest) = load_batch(batch_dir)?;
    let reference = reference.map(load_reference).transpose()?;
    if channel_metrics && reference.is_none() {
        return Err(Error::invalid("channel metrics need a reference"));
    }
    if let Some(r) = &reference {
        if r.grid != manifest.grid {
            return Err(Error::DomainMismatch("batch and reference grids differ".into()));
        }
    }

    let mut report = MetricsReport {
        samples: batch.len(),
        skipped: 0,
        mean_spread_rad: None,
        reference_mean_spread_rad: None,
        spread_ratio: None,
        spread_w1_rad: None,
        leakage: None,
        nmse: None,
        cosine_similarity: None,
    };
    let mut profile_csv = String::from("index,grid_point,power\n");
    if !batch.is_empty() {
        let profile = power_angular_profile(&batch.params)?;
        report.skipped = profile.skipped;
        for (q, p) in profile.profile.iter().enumerate() {
            let point = match manifest.grid {
                Grid::Angle(g) => g.point(q),
                Grid::DelayDoppler(_) => q as f64,
            };
            profile_csv.push_str(&format!("{q},{point:e},{p:e}\n"));
        }
        let support = match &reference {
            Some(Reference { support: Some(mask), .. }) => Some(mask.clone()),
            Some(r) => Some(power_angular_profile(&r.params)?.profile.iter().map(|&p| p > 0.0).collect()),
            None => None,
        };
        if let Some(mask) = support {
            report.leakage = Some(profile_support_leakage(&profile.profile, &mask)?);
        }
    }
    write_atomic(&out.join("profile.csv"), profile_csv.as_bytes())?;

    let bins = Bins::spread_default();
    let mut hist_csv = String::from("bin_lo,bin_hi,batch");
    if let Grid::Angle(grid) = manifest.grid {
        let (spreads, _) = angular_spreads(&batch.params, &grid)?;
        report.mean_spread_rad = mean(&spreads);
        let ref_spreads = match &reference {
            Some(r) => Some(angular_spreads(&r.params, &grid)?.0),
            None => None,
        };
        let h = bins.histogram(&spreads);
        let hr = ref_spreads.as_ref().map(|s| bins.histogram(s));
        if hr.is_some() {
            hist_csv.push_str(",reference");
        }
        hist_csv.push('\n');
        for i in 0..bins.count {
            let lo = bins.lo + i as f64 * bins.width();
            hist_csv.push_str(&format!("{lo:e},{:e},{:e}", lo + bins.width(), h[i]));
            if let Some(hr) = &hr {
                hist_csv.push_str(&format!(",{:e}", hr[i]));
            }
            hist_csv.push('\n');
        }
        if let Some(rs) = &ref_spreads {
            report.reference_mean_spread_rad = mean(rs);
            if let (Some(a), Some(b)) = (report.mean_spread_rad, report.reference_mean_spread_rad) {
                report.spread_ratio = Some(a / b);
                report.spread_w1_rad = Some(histogram_w1(&spreads, rs, bins)?);
            }
        }
    } else {
        hist_csv.push('\n');
    }
    write_atomic(&out.join("spread_histogram.csv"), hist_csv.as_bytes())?;

    if channel_metrics {
        let r = reference.as_ref().expect("checked above");
        let (Some(est), Some(truth)) = (&batch.channels, &r.channels) else {
            return Err(Error::invalid("channel metrics need rendered channels on both sides"));
        };
        report.nmse = Some(crate::metrics::nmse(est, truth)?);
        report.cosine_similarity = Some(crate::metrics::cosine_similarity(est, truth)?);
    }
    write_json(&out.join("metrics.json"), &report)?;
    Ok(report)
}
