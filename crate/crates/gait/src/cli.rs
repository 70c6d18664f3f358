//! The `gait` command-line surface.
//!
//! Subcommands: `dca`, `extract`, `sot-keygen`, `enroll`, `identify`,
//! `bbe-setup`, `bbe-keygen`, `bbe-encrypt`, `bbe-decrypt`, `demo`,
//! `bench`. Exit codes are a stable contract: 0 success/match, 1
//! no-match/refused, 2 usage error, 3 data error. Every command is
//! deterministic given `--seed` (wall-clock timings aside).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use amsobe_core::ablstm::{Network, NetworkDims};
use amsobe_core::bbe::{self, PreprocessOutcome, PreprocessParams};
use amsobe_core::pairing::{is_probable_prime, TransparentGroup};
use amsobe_core::signal::{self, GaitSignal, ThresholdMode, CHANNELS};
use amsobe_core::sot;
use amsobe_core::template::{FeatureTemplate, TemplateRole};

use crate::bench::{bench_sot, synthetic_match_experiment, BenchConfig, MatchExperimentConfig};
use crate::formats::{
    self, BbeCiphertextFile, BbeMasterFile, BbeParamsFile, BbePrivateKeyFile, EncTemplateFile,
    ModelFile, SealedFile, SotKeyFile, TemplateFile,
};
use crate::protocol::{
    run_identification, run_message_exchange, run_registration, DeviceConfig, ExchangeOptions,
    FlowTranscript, TemplateSource,
};
use crate::vault::{match_in_vault, FileVault, MemoryVault, RecordKind, ScoreVisibility, Vault};

pub const VAULT_ENV: &str = "GAIT_VAULT_PATH";
const DEFAULT_VAULT: &str = "gait-vault.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),+ $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })+
    };
}

data_error_from!(
    formats::FormatError,
    crate::vault::VaultError,
    crate::bench::BenchError,
    amsobe_core::signal::SignalError,
    amsobe_core::sot::SotError,
    amsobe_core::template::TemplateError,
    amsobe_core::ablstm::AblstmError,
    amsobe_core::bbe::BbeError,
    amsobe_core::pairing::PairingError,
    std::io::Error,
    serde_json::Error,
);

/// Whether the process should exit 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Refused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Reference,
    Identification,
}

impl From<RoleArg> for TemplateRole {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Reference => TemplateRole::Reference,
            RoleArg::Identification => TemplateRole::Identification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Register,
    Identify,
    Exchange,
}

#[derive(Debug, Parser)]
#[command(
    name = "gait",
    version,
    about = "Gait-template protection: signal tools, encrypted matching, and template-bound message encryption"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// RNG seed; fixes all generated randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write the primary output to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format for structured results.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the dominant gait cycle of a signal channel.
    Dca {
        /// 6-column signal CSV (ax,ay,az,gx,gy,gz).
        #[arg(long)]
        input: PathBuf,
        /// Channel to analyze, 1-6.
        #[arg(long, default_value_t = 1)]
        channel: usize,
    },
    /// Run a signal through the feature extractor and emit a template.
    Extract {
        /// Model checkpoint JSON.
        #[arg(long)]
        model: PathBuf,
        /// 6-column signal CSV.
        #[arg(long)]
        input: PathBuf,
        /// Role recorded in the emitted template.
        #[arg(long, value_enum, default_value = "reference")]
        role: RoleArg,
    },
    /// Generate a stochastic orthogonal transformation key.
    SotKeygen {
        /// Template length.
        #[arg(short, default_value_t = 600)]
        n: usize,
        /// Number of inserted constants (1-5).
        #[arg(short, default_value_t = 3)]
        m: usize,
        /// Calibrate the key to accept plaintext distances up to this
        /// threshold (sets a_i = 1, b_i = -threshold/m).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Encrypt a reference template and store it in the vault.
    Enroll {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        subject: String,
        /// Vault file (defaults to $GAIT_VAULT_PATH, then gait-vault.jsonl).
        #[arg(long)]
        vault: Option<PathBuf>,
        /// Fixed scaling factor instead of a fresh random one.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Encrypt an identification template and match it in the vault.
    Identify {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        vault: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Print only the decision, not the raw score.
        #[arg(long)]
        decision_only: bool,
    },
    /// Derive public parameters and a master key from a reference template.
    BbeSetup {
        /// Reference template JSON.
        #[arg(long)]
        template: PathBuf,
        /// Positive constant appended to the extended template.
        #[arg(long, default_value_t = 1.0)]
        constant: f64,
        /// Power-of-two quantization scale.
        #[arg(long, default_value_t = 65536)]
        scale: u64,
        /// Group order (decimal); default is the 64-bit test prime.
        #[arg(long)]
        prime: Option<String>,
        #[arg(long)]
        params_out: PathBuf,
        #[arg(long)]
        master_out: PathBuf,
    },
    /// Gate a probe against the reference and issue a private key.
    BbeKeygen {
        /// Master key JSON from bbe-setup.
        #[arg(long)]
        master: PathBuf,
        /// The same reference template given to bbe-setup.
        #[arg(long)]
        reference: PathBuf,
        /// Identification template JSON.
        #[arg(long)]
        probe: PathBuf,
        /// Accept plaintext distances up to this threshold.
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Seal a message file under public parameters.
    BbeEncrypt {
        #[arg(long)]
        params: PathBuf,
        /// Plaintext file (at most 1 MiB).
        #[arg(long)]
        msg: PathBuf,
    },
    /// Open a sealed message with a private key.
    BbeDecrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        ct: PathBuf,
    },
    /// Run a self-contained protocol scenario and print its transcript.
    Demo {
        #[arg(long, value_enum)]
        scenario: Scenario,
        /// Probe with a non-matching template.
        #[arg(long)]
        impostor: bool,
        /// Payload for the exchange scenario.
        #[arg(long, default_value = "hello from the peer device")]
        payload: String,
        /// Write the demo's synthetic model checkpoint here.
        #[arg(long)]
        emit_model: Option<PathBuf>,
        /// Write the demo's synthetic signal CSV here.
        #[arg(long)]
        emit_signal: Option<PathBuf>,
    },
    /// Timing and synthetic matching experiments.
    Bench {
        #[command(subcommand)]
        kind: BenchCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Time reference-template encryption over an (n, m) grid; emits CSV.
    Sot {
        /// Template lengths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![480, 600, 960])]
        lengths: Vec<usize>,
        /// Inserted-constant counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 5])]
        m_values: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Synthetic matching success rate under Gaussian probe noise.
    Match {
        #[arg(short, default_value_t = 600)]
        n: usize,
        #[arg(short, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
            ^ std::process::id() as u64
    })
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn write_binary(out: &Option<PathBuf>, content: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => std::io::stdout().lock().write_all(content)?,
    }
    Ok(())
}

fn required_out(out: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    out.clone()
        .ok_or_else(|| CliError::Usage(format!("--out is required for {what}")))
}

fn vault_path(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(VAULT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_VAULT))
}

fn parse_prime(spec: &Option<String>) -> Result<TransparentGroup, CliError> {
    match spec {
        None => Ok(TransparentGroup::default_64bit()),
        Some(text) => {
            let p: BigUint = text
                .parse()
                .map_err(|_| CliError::Usage(format!("--prime {text:?} is not a decimal integer")))?;
            if !is_probable_prime(&p) {
                return Err(CliError::Data(format!("--prime {text} is not prime")));
            }
            TransparentGroup::new(p).map_err(CliError::from)
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    let seed = seed_or_entropy(cli.seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match cli.command {
        Command::Dca { input, channel } => {
            if !(1..=CHANNELS).contains(&channel) {
                return Err(CliError::Usage(format!(
                    "--channel must be 1-{CHANNELS}, got {channel}"
                )));
            }
            let signal = formats::read_signal_csv(&input)?;
            let cycle = signal::dominant_cycle(signal.channel(channel - 1))?;
            let content = match cli.format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => {
                    serde_json::to_string_pretty(&serde_json::json!({
                        "channel": channel,
                        "cycle": cycle,
                    }))? + "\n"
                }
                OutputFormat::Csv => format!("channel,cycle\n{channel},{cycle}\n"),
            };
            write_output(&cli.out, &content)?;
            Ok(ExitStatus::Success)
        }

        Command::Extract { model, input, role } => {
            let out = required_out(&cli.out, "extract")?;
            let network = formats::load_json::<ModelFile>(&model)?.into_network()?;
            let signal = formats::read_signal_csv(&input)?;
            let template = extract_template(&network, &signal, role.into())?;
            formats::save_json(&out, &TemplateFile::from_template(&template))?;
            Ok(ExitStatus::Success)
        }

        Command::SotKeygen { n, m, threshold } => {
            let out = required_out(&cli.out, "sot-keygen")?;
            let key = match threshold {
                Some(t) => sot::keygen_calibrated(n, m, t, &mut rng)?,
                None => sot::keygen(n, m, &mut rng)?,
            };
            formats::save_json(&out, &SotKeyFile::from_key(&key))?;
            Ok(ExitStatus::Success)
        }

        Command::Enroll {
            key,
            template,
            subject,
            vault,
            alpha,
        } => {
            let key = formats::load_json::<SotKeyFile>(&key)?.into_key()?;
            let template = formats::load_json::<TemplateFile>(&template)?.into_template()?;
            let enc = match alpha {
                Some(a) => sot::encrypt_reference_with_alpha(&key, &template, a)?,
                None => sot::encrypt_reference(&key, &template, &mut rng)?,
            };
            let mut vault = FileVault::open(&vault_path(&vault))?;
            let payload = serde_json::to_vec(&EncTemplateFile::from_encrypted(&enc))?;
            let version = vault.put(&subject, RecordKind::EncReferenceTemplate, payload)?;
            write_output(
                &cli.out,
                &(serde_json::to_string_pretty(&serde_json::json!({
                    "subject": subject,
                    "version": version,
                }))? + "\n"),
            )?;
            Ok(ExitStatus::Success)
        }

        Command::Identify {
            key,
            template,
            subject,
            vault,
            alpha,
            decision_only,
        } => {
            let key = formats::load_json::<SotKeyFile>(&key)?.into_key()?;
            let template = formats::load_json::<TemplateFile>(&template)?.into_template()?;
            let enc = match alpha {
                Some(a) => sot::encrypt_identification_with_alpha(&key, &template, a)?,
                None => sot::encrypt_identification(&key, &template, &mut rng)?,
            };
            let vault = FileVault::open(&vault_path(&vault))?;
            let visibility = if decision_only {
                ScoreVisibility::DecisionOnly
            } else {
                ScoreVisibility::Reveal
            };
            let outcome = match_in_vault(&vault, &subject, &enc, visibility)?;
            let content = match cli.format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => {
                    let mut body = serde_json::json!({
                        "subject": subject,
                        "decision": outcome.decision.as_str(),
                    });
                    if let Some(score) = outcome.score {
                        body["score"] = serde_json::json!(score);
                    }
                    serde_json::to_string_pretty(&body)? + "\n"
                }
                OutputFormat::Csv => match outcome.score {
                    Some(score) => format!(
                        "subject,score,decision\n{subject},{score},{}\n",
                        outcome.decision.as_str()
                    ),
                    None => format!(
                        "subject,decision\n{subject},{}\n",
                        outcome.decision.as_str()
                    ),
                },
            };
            write_output(&cli.out, &content)?;
            Ok(if outcome.decision.is_match() {
                ExitStatus::Success
            } else {
                ExitStatus::Refused
            })
        }

        Command::BbeSetup {
            template,
            constant,
            scale,
            prime,
            params_out,
            master_out,
        } => {
            let template = formats::load_json::<TemplateFile>(&template)?.into_template()?;
            if template.role() != TemplateRole::Reference {
                return Err(CliError::Data(
                    "bbe-setup needs a reference-role template".to_string(),
                ));
            }
            let group = parse_prime(&prime)?;
            let w_q = quantize_reference(&template, constant, scale, &group)?;
            let (pp, msk) = bbe::setup(&group, &w_q, &mut rng)?;
            formats::save_json(&params_out, &BbeParamsFile::from_params(&group, &pp))?;
            formats::save_json(
                &master_out,
                &BbeMasterFile::from_master(&group, &msk, template.len(), constant, scale),
            )?;
            Ok(ExitStatus::Success)
        }

        Command::BbeKeygen {
            master,
            reference,
            probe,
            threshold,
        } => {
            let out = required_out(&cli.out, "bbe-keygen")?;
            let master_file = formats::load_json::<BbeMasterFile>(&master)?;
            let (group, msk) = master_file.into_master()?;
            let reference = formats::load_json::<TemplateFile>(&reference)?.into_template()?;
            let probe = formats::load_json::<TemplateFile>(&probe)?.into_template()?;
            if reference.len() != master_file.n {
                return Err(CliError::Data(format!(
                    "reference length {} does not match the master key's template length {}",
                    reference.len(),
                    master_file.n
                )));
            }
            if !threshold.is_finite() || threshold <= 0.0 {
                return Err(CliError::Usage("--threshold must be positive".to_string()));
            }
            let params = PreprocessParams {
                a: master_file.constant,
                b: -threshold / master_file.constant,
                scale: master_file.scale,
            };
            match bbe::preprocess(&reference, &probe, &params, group.order())? {
                PreprocessOutcome::Rejected => {
                    write_output(
                        &cli.out,
                        &(serde_json::to_string_pretty(&serde_json::json!({
                            "accepted": false,
                            "reason": "similarity test failed",
                        }))? + "\n"),
                    )?;
                    Ok(ExitStatus::Refused)
                }
                PreprocessOutcome::Accepted { identification, .. } => {
                    let sk = bbe::keygen(&group, &msk, &identification, &mut rng)?;
                    formats::save_json(
                        &out,
                        &BbePrivateKeyFile::from_key(&group, &sk, &identification),
                    )?;
                    Ok(ExitStatus::Success)
                }
            }
        }

        Command::BbeEncrypt { params, msg } => {
            let out = required_out(&cli.out, "bbe-encrypt")?;
            let (group, pp) = formats::load_json::<BbeParamsFile>(&params)?.into_params()?;
            let plaintext = fs::read(&msg)?;
            let sealed = bbe::seal_bytes(&group, &pp, &plaintext, &mut rng)?;
            formats::save_json(&out, &SealedFile::from_sealed(&group, &sealed))?;
            Ok(ExitStatus::Success)
        }

        Command::BbeDecrypt { key, ct } => {
            let (group, sk, z) = formats::load_json::<BbePrivateKeyFile>(&key)?.into_key()?;
            let (ct_group, sealed) = formats::load_json::<SealedFile>(&ct)?.into_sealed()?;
            if ct_group.order() != group.order() {
                return Err(CliError::Data(
                    "ciphertext and key use different groups".to_string(),
                ));
            }
            match bbe::open_bytes(&group, &sk, &sealed, &z) {
                Ok(plaintext) => {
                    write_binary(&cli.out, &plaintext)?;
                    Ok(ExitStatus::Success)
                }
                Err(bbe::BbeError::TagMismatch) => {
                    eprintln!("refused: authentication tag mismatch");
                    Ok(ExitStatus::Refused)
                }
                Err(e) => Err(e.into()),
            }
        }

        Command::Demo {
            scenario,
            impostor,
            payload,
            emit_model,
            emit_signal,
        } => run_demo(
            scenario,
            impostor,
            payload.as_bytes(),
            emit_model,
            emit_signal,
            seed,
            cli.format,
            &cli.out,
        ),

        Command::Bench { kind } => match kind {
            BenchCommand::Sot {
                lengths,
                m_values,
                batch,
                reps,
            } => {
                let config = BenchConfig {
                    lengths,
                    param_counts: m_values,
                    batch,
                    repetitions: reps,
                };
                let report = bench_sot(&config, seed)?;
                write_output(&cli.out, &report.to_csv())?;
                Ok(ExitStatus::Success)
            }
            BenchCommand::Match {
                n,
                m,
                subjects,
                noise,
                trials,
            } => {
                let config = MatchExperimentConfig {
                    n,
                    m,
                    subjects,
                    noise,
                    trials_per_subject: trials,
                };
                let report = synthetic_match_experiment(&config, seed)?;
                for warning in &report.warnings {
                    eprintln!("warning: {warning}");
                }
                let content = match cli.format.unwrap_or(OutputFormat::Json) {
                    OutputFormat::Json => {
                        serde_json::to_string_pretty(&serde_json::json!({
                            "success_rate_percent": report.success_rate,
                            "trials": report.trials,
                            "threshold": report.threshold,
                        }))? + "\n"
                    }
                    OutputFormat::Csv => format!(
                        "success_rate_percent,trials,threshold\n{},{},{}\n",
                        report.success_rate, report.trials, report.threshold
                    ),
                };
                write_output(&cli.out, &content)?;
                Ok(ExitStatus::Success)
            }
        },
    }
}

/// Denoise, segment at the model's window length, trim to its window count
/// and run the extractor.
fn extract_template(
    network: &Network,
    signal: &GaitSignal,
    role: TemplateRole,
) -> Result<FeatureTemplate, CliError> {
    let denoised = signal::denoise(signal, ThresholdMode::Universal)?;
    let segmented = signal::segment(&denoised, network.dims.window_len)?;
    if segmented.window_count() < network.dims.windows {
        return Err(CliError::Data(format!(
            "signal yields {} windows but the model needs {}",
            segmented.window_count(),
            network.dims.windows
        )));
    }
    let trimmed = segmented.truncated(network.dims.windows)?;
    let features = network.extract(&trimmed)?;
    Ok(FeatureTemplate::new(features.attended, role)?)
}

fn quantize_reference(
    template: &FeatureTemplate,
    constant: f64,
    scale: u64,
    group: &TransparentGroup,
) -> Result<amsobe_core::template::QuantizedTemplate, CliError> {
    if !constant.is_finite() || constant <= 0.0 {
        return Err(CliError::Usage("--constant must be positive".to_string()));
    }
    let mut extended = amsobe_core::template::extend_reference(template.values());
    extended.push(constant);
    let residues = amsobe_core::template::quantize_slice(&extended, scale, group.order())?;
    Ok(amsobe_core::template::QuantizedTemplate::from_residues(
        residues,
        scale,
        group.order().clone(),
    )?)
}

// ------------------------------------------------------------------- demo

/// Synthetic walking signal: a dominant 100-sample cycle, a 50-sample
/// harmonic and deterministic per-channel jitter.
fn demo_signal(rng: &mut ChaCha12Rng, len: usize) -> GaitSignal {
    let channels: Vec<Vec<f64>> = (0..CHANNELS)
        .map(|c| {
            let phase = c as f64 * 0.7;
            (0..len)
                .map(|t| {
                    let t = t as f64;
                    1.2 * (2.0 * std::f64::consts::PI * t / 100.0 + phase).sin()
                        + 0.4 * (2.0 * std::f64::consts::PI * t / 50.0).sin()
                        + 0.05 * amsobe_core::random::standard_normal(rng)
                })
                .collect()
        })
        .collect();
    GaitSignal::from_channels(channels).expect("demo signal is well formed")
}

fn transcript_table(transcript: &FlowTranscript) -> String {
    let headers = ["actor", "message", "digest", "status"];
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for e in &transcript.entries {
        widths[0] = widths[0].max(e.actor.chars().count());
        widths[1] = widths[1].max(e.message.chars().count());
        widths[2] = widths[2].max(e.digest.chars().count());
        widths[3] = widths[3].max(e.status.chars().count());
    }
    let pad = |s: &str, w: usize| {
        let mut out = s.to_string();
        while out.chars().count() < w {
            out.push(' ');
        }
        out
    };
    let mut out = String::new();
    out.push_str(&format!(
        "{}  {}  {}  {}\n",
        pad(headers[0], widths[0]),
        pad(headers[1], widths[1]),
        pad(headers[2], widths[2]),
        pad(headers[3], widths[3]),
    ));
    for e in &transcript.entries {
        out.push_str(&format!(
            "{}  {}  {}  {}\n",
            pad(&e.actor, widths[0]),
            pad(&e.message, widths[1]),
            pad(&e.digest, widths[2]),
            pad(&e.status, widths[3]),
        ));
    }
    out.push_str(&format!("outcome: {:?}\n", transcript.outcome));
    out
}

#[allow(clippy::too_many_arguments)]
fn run_demo(
    scenario: Scenario,
    impostor: bool,
    payload: &[u8],
    emit_model: Option<PathBuf>,
    emit_signal: Option<PathBuf>,
    seed: u64,
    format: Option<OutputFormat>,
    out: &Option<PathBuf>,
) -> Result<ExitStatus, CliError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dims = NetworkDims {
        hidden: 2,
        windows: 3,
        window_len: 100,
        classes: 4,
    };
    let network = Network::random(dims, &mut rng);
    let enroll_signal = demo_signal(&mut rng, 600);
    let probe_signal = demo_signal(&mut rng, 600);

    if let Some(path) = &emit_model {
        formats::save_json(path, &ModelFile::from_network(&network))?;
    }
    if let Some(path) = &emit_signal {
        formats::write_signal_csv(path, &enroll_signal)?;
    }

    // Calibrate the key so genuine same-walker probes pass comfortably.
    let reference = extract_template(&network, &enroll_signal, TemplateRole::Reference)?;
    let genuine_probe = extract_template(&network, &probe_signal, TemplateRole::Identification)?;
    let genuine_d = amsobe_core::template::biological_distance(
        reference.values(),
        genuine_probe.values(),
    )?;
    let threshold = (4.0 * genuine_d).max(1e-6);
    let n = reference.len();
    let sot_key = sot::keygen_calibrated(n, 3, threshold, &mut rng)?;

    let probe = if impostor {
        // Far outside the calibrated acceptance ball by construction.
        let offset = 1.0 + threshold.sqrt();
        let values: Vec<f64> = reference.values().iter().map(|v| v + offset).collect();
        FeatureTemplate::new(values, TemplateRole::Identification)?
    } else {
        genuine_probe
    };

    let owner = DeviceConfig {
        subject: "owner".to_string(),
        sot_key: sot_key.clone(),
        source: TemplateSource::Template(reference.clone()),
    };
    let mut vault = MemoryVault::new();

    let transcript = match scenario {
        Scenario::Register => run_registration(&owner, &mut vault, &mut rng, false),
        Scenario::Identify => {
            let enrolled = run_registration(&owner, &mut vault, &mut rng, false);
            if !enrolled.succeeded() {
                return Err(CliError::Data("demo enrollment failed".to_string()));
            }
            let prober = DeviceConfig {
                subject: "owner".to_string(),
                sot_key: sot_key.clone(),
                source: TemplateSource::Template(probe),
            };
            run_identification(&prober, &vault, "owner", &mut rng, false)
        }
        Scenario::Exchange => {
            let enrolled = run_registration(&owner, &mut vault, &mut rng, false);
            if !enrolled.succeeded() {
                return Err(CliError::Data("demo enrollment failed".to_string()));
            }
            let options = ExchangeOptions {
                probe_override: Some(probe),
                tamper_in_transit: false,
            };
            run_message_exchange(&owner, &mut vault, payload, &options, &mut rng, false)
        }
    };

    let content = match format {
        Some(OutputFormat::Json) => serde_json::to_string_pretty(&transcript)? + "\n",
        Some(OutputFormat::Csv) | None => transcript_table(&transcript),
    };
    write_output(out, &content)?;
    Ok(if transcript.succeeded() {
        ExitStatus::Success
    } else {
        ExitStatus::Refused
    })
}
