//! Timing and synthetic-matching harnesses.
//!
//! `bench_sot` times reference-template encryption over an
//! (n, m) grid — key generation excluded, batches regenerated from the seed
//! so two runs time identical work. `synthetic_match_experiment` builds
//! per-subject ground-truth templates, calibrates the matching threshold on
//! a held-out split and reports the fraction of correct accept/reject
//! decisions under additive Gaussian noise.

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use amsobe_core::random;
use amsobe_core::sot::{self, SotKey};
use amsobe_core::template::{biological_distance, FeatureTemplate, TemplateRole};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("bench requires at least 5 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("bench grid must be non-empty")]
    EmptyGrid,
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("matching experiment needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("noise level must be finite and non-negative")]
    BadNoise,
    #[error(transparent)]
    Sot(#[from] amsobe_core::sot::SotError),
    #[error(transparent)]
    Template(#[from] amsobe_core::template::TemplateError),
}

/// Grid configuration for the encryption-time benchmark.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub param_counts: Vec<usize>,
    pub batch: usize,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            lengths: vec![480, 600, 960],
            param_counts: vec![1, 2, 3, 4, 5],
            batch: 100,
            repetitions: 5,
        }
    }
}

/// One grid cell's timing statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub batch: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,batch,mean_ms,stddev_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                row.n, row.m, row.batch, row.mean_ms, row.stddev_ms
            ));
        }
        out
    }

    /// Mean time of a cell, for shape assertions.
    pub fn mean_of(&self, n: usize, m: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.m == m)
            .map(|r| r.mean_ms)
    }
}

/// Deterministic batch of random templates for one cell.
fn template_batch(rng: &mut ChaCha12Rng, n: usize, batch: usize) -> Vec<FeatureTemplate> {
    (0..batch)
        .map(|_| {
            let values = (0..n)
                .map(|_| random::uniform_in(rng, -1.0, 1.0))
                .collect();
            FeatureTemplate::new(values, TemplateRole::Reference).expect("finite values")
        })
        .collect()
}

/// Times `encrypt_reference` over the grid. Wall times vary run to run; the
/// encrypted work per cell is reproducible from the seed.
pub fn bench_sot(config: &BenchConfig, seed: u64) -> Result<BenchReport, BenchError> {
    if config.repetitions < 5 {
        return Err(BenchError::TooFewRepetitions(config.repetitions));
    }
    if config.lengths.is_empty() || config.param_counts.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    if config.batch == 0 {
        return Err(BenchError::EmptyBatch);
    }
    let mut report = BenchReport::default();
    for (cell_index, (&n, &m)) in config
        .lengths
        .iter()
        .flat_map(|n| config.param_counts.iter().map(move |m| (n, m)))
        .enumerate()
    {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (cell_index as u64) << 32);
        let key = sot::keygen(n, m, &mut rng)?;
        let templates = template_batch(&mut rng, n, config.batch);
        let mut times_ms = Vec::with_capacity(config.repetitions);
        for _ in 0..config.repetitions {
            let alphas: Vec<f64> = (0..templates.len())
                .map(|_| random::uniform_in(&mut rng, 0.5, 2.0))
                .collect();
            let start = Instant::now();
            for (t, &alpha) in templates.iter().zip(&alphas) {
                let enc = sot::encrypt_reference_with_alpha(&key, t, alpha)?;
                std::hint::black_box(&enc);
            }
            times_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mean = times_ms.iter().sum::<f64>() / times_ms.len() as f64;
        let var = times_ms
            .iter()
            .map(|t| (t - mean) * (t - mean))
            .sum::<f64>()
            / (times_ms.len() - 1) as f64;
        report.rows.push(BenchRow {
            n,
            m,
            batch: config.batch,
            mean_ms: mean,
            stddev_ms: var.sqrt(),
        });
    }
    Ok(report)
}

/// Configuration for the synthetic matching experiment.
#[derive(Debug, Clone)]
pub struct MatchExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub subjects: usize,
    /// Standard deviation of the additive Gaussian probe noise.
    pub noise: f64,
    /// Genuine and impostor evaluation probes per subject.
    pub trials_per_subject: usize,
}

impl Default for MatchExperimentConfig {
    fn default() -> Self {
        MatchExperimentConfig {
            n: 600,
            m: 3,
            subjects: 8,
            noise: 0.05,
            trials_per_subject: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchExperimentReport {
    /// Percentage of correct accept/reject decisions.
    pub success_rate: f64,
    pub trials: usize,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

/// Generates per-subject templates, calibrates the threshold on a held-out
/// split (3 genuine probes per subject plus cross-subject distances) and
/// scores encrypted-domain decisions on balanced genuine/impostor trials.
pub fn synthetic_match_experiment(
    config: &MatchExperimentConfig,
    seed: u64,
) -> Result<MatchExperimentReport, BenchError> {
    if config.subjects < 2 {
        return Err(BenchError::TooFewSubjects(config.subjects));
    }
    if !config.noise.is_finite() || config.noise < 0.0 {
        return Err(BenchError::BadNoise);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();

    let truths: Vec<Vec<f64>> = (0..config.subjects)
        .map(|_| {
            (0..config.n)
                .map(|_| random::uniform_in(&mut rng, -1.0, 1.0))
                .collect()
        })
        .collect();

    let noisy = |rng: &mut ChaCha12Rng, truth: &[f64]| -> Vec<f64> {
        truth
            .iter()
            .map(|v| v + config.noise * random::standard_normal(rng))
            .collect()
    };

    // Calibration split: genuine distances from noisy self-probes, impostor
    // distances from other subjects' truths.
    let mut genuine_max = 0.0f64;
    for truth in &truths {
        for _ in 0..3 {
            let probe = noisy(&mut rng, truth);
            genuine_max = genuine_max.max(biological_distance(truth, &probe)?);
        }
    }
    let mut impostor_min = f64::INFINITY;
    for i in 0..truths.len() {
        for j in 0..truths.len() {
            if i != j {
                impostor_min = impostor_min.min(biological_distance(&truths[i], &truths[j])?);
            }
        }
    }
    if genuine_max >= impostor_min {
        warnings.push(format!(
            "noise level {} reaches inter-subject spacing (genuine max {genuine_max:.3} ≥ impostor min {impostor_min:.3})",
            config.noise
        ));
    }
    let mut threshold = 0.5 * (genuine_max + impostor_min);
    if !threshold.is_finite() || threshold <= 0.0 {
        threshold = 1e-6;
    }

    // Per-subject calibrated keys; decisions run entirely in the encrypted
    // domain.
    let keys: Vec<SotKey> = (0..config.subjects)
        .map(|_| sot::keygen_calibrated(config.n, config.m, threshold, &mut rng))
        .collect::<Result<_, _>>()?;

    let mut correct = 0usize;
    let mut trials = 0usize;
    for (subject, truth) in truths.iter().enumerate() {
        let key = &keys[subject];
        let reference = FeatureTemplate::new(truth.clone(), TemplateRole::Reference)?;
        let enc_ref = sot::encrypt_reference(key, &reference, &mut rng)?;
        for _ in 0..config.trials_per_subject {
            // Genuine probe: expect a match.
            let probe_values = noisy(&mut rng, truth);
            let probe = FeatureTemplate::new(probe_values, TemplateRole::Identification)?;
            let enc = sot::encrypt_identification(key, &probe, &mut rng)?;
            let decision = sot::decide(sot::match_score(&enc_ref, &enc)?)?;
            trials += 1;
            if decision.is_match() {
                correct += 1;
            }

            // Impostor probe from a different subject: expect a reject.
            let other = (subject + 1 + random::usize_below(&mut rng, config.subjects - 1))
                % config.subjects;
            let probe_values = noisy(&mut rng, &truths[other]);
            let probe = FeatureTemplate::new(probe_values, TemplateRole::Identification)?;
            let enc = sot::encrypt_identification(key, &probe, &mut rng)?;
            let decision = sot::decide(sot::match_score(&enc_ref, &enc)?)?;
            trials += 1;
            if !decision.is_match() {
                correct += 1;
            }
        }
    }

    Ok(MatchExperimentReport {
        success_rate: 100.0 * correct as f64 / trials as f64,
        trials,
        threshold,
        warnings,
    })
}
