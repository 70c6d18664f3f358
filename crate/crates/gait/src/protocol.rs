//! Simulated device ↔ cloud ↔ peer flows.
//!
//! Three flows: registration (enroll an encrypted reference template),
//! identification (encrypted probe matched in the vault), and message
//! exchange (encryption-scheme session gated behind a passed
//! identification). Actors exchange the same serialized envelopes the CLI
//! and vault use; plaintext templates and transformation keys never leave
//! the device actor. Every hop lands in an ordered transcript with a
//! payload digest, and flows are deterministic given the injected RNG.

use rand_core::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

use amsobe_core::bbe::{self, PreprocessOutcome, PreprocessParams};
use amsobe_core::pairing::TransparentGroup;
use amsobe_core::signal::{self, GaitSignal, ThresholdMode};
use amsobe_core::sot::{self, SotKey};
use amsobe_core::template::{FeatureTemplate, TemplateRole};
use amsobe_core::ablstm::Network;

use crate::formats::{BbeParamsFile, EncTemplateFile, SealedFile};
use crate::vault::{match_in_vault, RecordKind, ScoreVisibility, Vault};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Signal(#[from] amsobe_core::signal::SignalError),
    #[error(transparent)]
    Ablstm(#[from] amsobe_core::ablstm::AblstmError),
    #[error(transparent)]
    Template(#[from] amsobe_core::template::TemplateError),
    #[error(transparent)]
    Sot(#[from] amsobe_core::sot::SotError),
    #[error(transparent)]
    Bbe(#[from] amsobe_core::bbe::BbeError),
    #[error(transparent)]
    Vault(#[from] crate::vault::VaultError),
    #[error(transparent)]
    Format(#[from] crate::formats::FormatError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Terminal state of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowOutcome {
    Enrolled,
    Identified,
    Rejected,
    MessageDelivered,
    MessageRefused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    /// `device`, `cloud`, `peer`, or `a→b` for a message hop.
    pub actor: String,
    pub message: String,
    /// Short SHA-256 digest of the payload, `-` for control steps.
    pub digest: String,
    pub status: String,
}

/// Ordered record of a flow run. `captured` holds the raw bytes of every
/// cross-actor message when capture is enabled, for privacy audits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTranscript {
    pub entries: Vec<TranscriptEntry>,
    pub outcome: FlowOutcome,
    #[serde(skip)]
    pub captured: Vec<Vec<u8>>,
}

impl FlowTranscript {
    fn new() -> Self {
        FlowTranscript {
            entries: Vec::new(),
            outcome: FlowOutcome::Rejected,
            captured: Vec::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        matches!(
            self.outcome,
            FlowOutcome::Enrolled | FlowOutcome::Identified | FlowOutcome::MessageDelivered
        )
    }
}

fn short_digest(payload: &[u8]) -> String {
    hex::encode(&Sha256::digest(payload)[..8])
}

struct Recorder {
    transcript: FlowTranscript,
    capture: bool,
}

impl Recorder {
    fn new(capture: bool) -> Self {
        Recorder {
            transcript: FlowTranscript::new(),
            capture,
        }
    }

    fn step(&mut self, actor: &str, message: &str, status: &str) {
        self.transcript.entries.push(TranscriptEntry {
            actor: actor.to_string(),
            message: message.to_string(),
            digest: "-".to_string(),
            status: status.to_string(),
        });
    }

    fn payload(&mut self, actor: &str, message: &str, payload: &[u8], status: &str) {
        self.transcript.entries.push(TranscriptEntry {
            actor: actor.to_string(),
            message: message.to_string(),
            digest: short_digest(payload),
            status: status.to_string(),
        });
        if self.capture && actor.contains('→') {
            self.transcript.captured.push(payload.to_vec());
        }
    }

    fn finish(mut self, outcome: FlowOutcome) -> FlowTranscript {
        self.transcript.outcome = outcome;
        self.transcript
    }
}

/// Where a device gets its template from.
pub enum TemplateSource {
    /// A ready-made feature template.
    Template(FeatureTemplate),
    /// A raw signal pushed through denoising, segmentation and the feature
    /// extractor.
    Signal {
        signal: GaitSignal,
        network: Box<Network>,
    },
}

impl TemplateSource {
    fn resolve(&self, role: TemplateRole) -> Result<FeatureTemplate, ProtocolError> {
        match self {
            TemplateSource::Template(t) => Ok(t.with_role(role)),
            TemplateSource::Signal { signal, network } => {
                let denoised = signal::denoise(signal, ThresholdMode::Universal)?;
                let segmented = signal::segment(&denoised, network.dims.window_len)?;
                let trimmed = segmented.truncated(network.dims.windows)?;
                let features = network.extract(&trimmed)?;
                Ok(FeatureTemplate::new(features.attended, role)?)
            }
        }
    }
}

/// A wearable device actor: its identity, transformation key and template
/// source.
pub struct DeviceConfig {
    pub subject: String,
    pub sot_key: SotKey,
    pub source: TemplateSource,
}

/// Registration: extract, encrypt, transmit, store.
pub fn run_registration<R: RngCore + ?Sized>(
    device: &DeviceConfig,
    vault: &mut dyn Vault,
    rng: &mut R,
    capture: bool,
) -> FlowTranscript {
    let mut rec = Recorder::new(capture);
    let envelope = match device
        .source
        .resolve(TemplateRole::Reference)
        .and_then(|t| Ok(sot::encrypt_reference(&device.sot_key, &t, rng)?))
        .and_then(|enc| Ok(serde_json::to_vec(&EncTemplateFile::from_encrypted(&enc))?))
    {
        Ok(bytes) => {
            rec.payload("device", "encrypt-reference-template", &bytes, "ok");
            bytes
        }
        Err(e) => {
            rec.step("device", "encrypt-reference-template", &format!("error: {e}"));
            return rec.finish(FlowOutcome::Rejected);
        }
    };
    rec.payload(
        "device→cloud",
        "transmit enc-reference-template",
        &envelope,
        "ok",
    );
    match vault.put(&device.subject, RecordKind::EncReferenceTemplate, envelope.clone()) {
        Ok(version) => {
            rec.payload(
                "cloud",
                "store enc-reference-template",
                &envelope,
                &format!("ok (version {version})"),
            );
            rec.finish(FlowOutcome::Enrolled)
        }
        Err(e) => {
            rec.step("cloud", "store enc-reference-template", &format!("error: {e}"));
            rec.finish(FlowOutcome::Rejected)
        }
    }
}

fn identification_gate<R: RngCore + ?Sized>(
    rec: &mut Recorder,
    key: &SotKey,
    probe: &FeatureTemplate,
    vault: &dyn Vault,
    subject: &str,
    rng: &mut R,
) -> Result<bool, ()> {
    let envelope = match sot::encrypt_identification(key, probe, rng)
        .map_err(ProtocolError::from)
        .and_then(|enc| Ok(serde_json::to_vec(&EncTemplateFile::from_encrypted(&enc))?))
    {
        Ok(bytes) => {
            rec.payload("device", "encrypt-identification-template", &bytes, "ok");
            bytes
        }
        Err(e) => {
            rec.step(
                "device",
                "encrypt-identification-template",
                &format!("error: {e}"),
            );
            return Err(());
        }
    };
    rec.payload(
        "device→cloud",
        "transmit enc-identification-template",
        &envelope,
        "ok",
    );
    let enc = match serde_json::from_slice::<EncTemplateFile>(&envelope)
        .map_err(ProtocolError::from)
        .and_then(|f| Ok(f.into_encrypted()?))
    {
        Ok(enc) => enc,
        Err(e) => {
            rec.step("cloud", "match", &format!("error: {e}"));
            return Err(());
        }
    };
    // The cloud reveals only the decision sign to the device.
    match match_in_vault(vault, subject, &enc, ScoreVisibility::DecisionOnly) {
        Ok(outcome) => {
            let verdict = outcome.decision.as_str();
            rec.step("cloud", "match", &format!("decision: {verdict}"));
            let result_msg = serde_json::to_vec(&serde_json::json!({ "decision": verdict }))
                .expect("static json");
            rec.payload("cloud→device", "match-result", &result_msg, verdict);
            Ok(outcome.decision.is_match())
        }
        Err(e) => {
            rec.step("cloud", "match", &format!("error: {e}"));
            Err(())
        }
    }
}

/// Identification: encrypted probe matched against the enrolled reference.
pub fn run_identification<R: RngCore + ?Sized>(
    device: &DeviceConfig,
    vault: &dyn Vault,
    subject: &str,
    rng: &mut R,
    capture: bool,
) -> FlowTranscript {
    let mut rec = Recorder::new(capture);
    let probe = match device.source.resolve(TemplateRole::Identification) {
        Ok(t) => t,
        Err(e) => {
            rec.step("device", "extract-probe", &format!("error: {e}"));
            return rec.finish(FlowOutcome::Rejected);
        }
    };
    match identification_gate(&mut rec, &device.sot_key, &probe, vault, subject, rng) {
        Ok(true) => rec.finish(FlowOutcome::Identified),
        Ok(false) | Err(()) => rec.finish(FlowOutcome::Rejected),
    }
}

/// Knobs for [`run_message_exchange`].
#[derive(Default)]
pub struct ExchangeOptions {
    /// Replace the receiver's probe (e.g. an impostor's template).
    pub probe_override: Option<FeatureTemplate>,
    /// Flip one byte of the sealed body in transit.
    pub tamper_in_transit: bool,
}

/// Message exchange: a peer seals a payload for the receiver, gated behind
/// the receiver passing gait identification. Setup and private-key issuance
/// both happen at the receiver; the cloud only relays public material and
/// ciphertexts.
pub fn run_message_exchange<R: RngCore + ?Sized>(
    receiver: &DeviceConfig,
    vault: &mut dyn Vault,
    payload: &[u8],
    options: &ExchangeOptions,
    rng: &mut R,
    capture: bool,
) -> FlowTranscript {
    let mut rec = Recorder::new(capture);

    let probe = match options.probe_override {
        Some(ref t) => t.with_role(TemplateRole::Identification),
        None => match receiver.source.resolve(TemplateRole::Identification) {
            Ok(t) => t,
            Err(e) => {
                rec.step("device", "extract-probe", &format!("error: {e}"));
                return rec.finish(FlowOutcome::MessageRefused);
            }
        },
    };

    // Gait identification must pass before any encryption-scheme step runs.
    match identification_gate(
        &mut rec,
        &receiver.sot_key,
        &probe,
        vault,
        &receiver.subject,
        rng,
    ) {
        Ok(true) => {}
        Ok(false) | Err(()) => {
            rec.step("device", "abort message-exchange", "identification gate failed");
            return rec.finish(FlowOutcome::MessageRefused);
        }
    }

    match exchange_after_gate(&mut rec, receiver, &probe, vault, payload, options, rng) {
        Ok(outcome) => rec.finish(outcome),
        Err((step, e)) => {
            rec.step("device", step, &format!("error: {e}"));
            rec.finish(FlowOutcome::MessageRefused)
        }
    }
}

fn exchange_after_gate<R: RngCore + ?Sized>(
    rec: &mut Recorder,
    receiver: &DeviceConfig,
    probe: &FeatureTemplate,
    vault: &mut dyn Vault,
    payload: &[u8],
    options: &ExchangeOptions,
    rng: &mut R,
) -> Result<FlowOutcome, (&'static str, ProtocolError)> {
    let fail = |step: &'static str| move |e: ProtocolError| (step, e);

    let reference = receiver
        .source
        .resolve(TemplateRole::Reference)
        .map_err(fail("preprocess-templates"))?;
    // The appended constants carry the same threshold the transformation
    // key uses, so the gate and the preprocessing agree.
    let params = PreprocessParams {
        a: 1.0,
        b: receiver.sot_key.threshold_sum(),
        scale: 1 << 16,
    };
    let group = TransparentGroup::default_64bit();
    let (w_q, z_q) = match bbe::preprocess(&reference, probe, &params, group.order())
        .map_err(ProtocolError::from)
        .map_err(fail("preprocess-templates"))?
    {
        PreprocessOutcome::Accepted {
            reference,
            identification,
        } => {
            rec.step("device", "preprocess-templates", "similarity accepted");
            (reference, identification)
        }
        PreprocessOutcome::Rejected => {
            rec.step("device", "preprocess-templates", "similarity rejected");
            return Ok(FlowOutcome::MessageRefused);
        }
    };

    let (pp, msk) = bbe::setup(&group, &w_q, rng)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-setup"))?;
    rec.step("device", "bbe-setup", "ok");
    let params_envelope = serde_json::to_vec(&BbeParamsFile::from_params(&group, &pp))
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-publish-params"))?;
    rec.payload(
        "device→cloud",
        "bbe-publish-params",
        &params_envelope,
        "ok",
    );
    vault
        .put(
            &receiver.subject,
            RecordKind::BbePublicParams,
            params_envelope,
        )
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-publish-params"))?;

    let sk = bbe::keygen(&group, &msk, &z_q, rng)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-keygen"))?;
    rec.step("device", "bbe-keygen", "ok");

    // Peer side: fetch public material through the cloud and seal.
    let fetched = vault
        .get_latest(&receiver.subject, RecordKind::BbePublicParams)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-fetch-params"))?;
    rec.payload("cloud→peer", "bbe-fetch-params", &fetched.payload, "ok");
    let (peer_group, peer_pp) = serde_json::from_slice::<BbeParamsFile>(&fetched.payload)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-fetch-params"))?
        .into_params()
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-fetch-params"))?;
    let sealed = bbe::seal_bytes(&peer_group, &peer_pp, payload, rng)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-seal"))?;
    let sealed_envelope = serde_json::to_vec(&SealedFile::from_sealed(&peer_group, &sealed))
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-seal"))?;
    rec.payload("peer", "bbe-seal", &sealed_envelope, "ok");
    rec.payload(
        "peer→cloud",
        "bbe-store-ciphertext",
        &sealed_envelope,
        "ok",
    );
    vault
        .put(
            &receiver.subject,
            RecordKind::BbeCiphertext,
            sealed_envelope,
        )
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-store-ciphertext"))?;

    let delivered = vault
        .get_latest(&receiver.subject, RecordKind::BbeCiphertext)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-deliver-ciphertext"))?;
    rec.payload(
        "cloud→device",
        "bbe-deliver-ciphertext",
        &delivered.payload,
        "ok",
    );
    let (_, mut received) = serde_json::from_slice::<SealedFile>(&delivered.payload)
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-open"))?
        .into_sealed()
        .map_err(ProtocolError::from)
        .map_err(fail("bbe-open"))?;
    if options.tamper_in_transit {
        if received.body.is_empty() {
            received.tag[0] ^= 0x01;
        } else {
            received.body[0] ^= 0x01;
        }
        rec.step("cloud→device", "tamper-in-transit", "one byte flipped");
    }

    match bbe::open_bytes(&group, &sk, &received, &z_q) {
        Ok(opened) if opened == payload => {
            rec.step("device", "bbe-open", "ok");
            Ok(FlowOutcome::MessageDelivered)
        }
        Ok(_) => {
            rec.step("device", "bbe-open", "error: payload mismatch");
            Ok(FlowOutcome::MessageRefused)
        }
        Err(e) => {
            rec.step("device", "bbe-open", &format!("error: {e}"));
            Ok(FlowOutcome::MessageRefused)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vault::{MemoryVault, VaultError};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn device(seed: u64, n: usize) -> (DeviceConfig, ChaCha12Rng) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let key = sot::keygen_calibrated(n, 3, 0.5, &mut rng).unwrap();
        let values: Vec<f64> = (0..n)
            .map(|_| amsobe_core::random::uniform_in(&mut rng, -1.0, 1.0))
            .collect();
        let template = FeatureTemplate::new(values, TemplateRole::Reference).unwrap();
        (
            DeviceConfig {
                subject: "owner".to_string(),
                sot_key: key,
                source: TemplateSource::Template(template),
            },
            rng,
        )
    }

    #[test]
    fn registration_happy_path_has_three_entries() {
        let (device, mut rng) = device(1, 16);
        let mut vault = MemoryVault::new();
        let transcript = run_registration(&device, &mut vault, &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::Enrolled);
        assert_eq!(transcript.entries.len(), 3);
        assert!(vault
            .get_latest("owner", RecordKind::EncReferenceTemplate)
            .is_ok());
    }

    /// Vault that refuses every write.
    struct FailingVault;

    impl Vault for FailingVault {
        fn put(&mut self, _: &str, _: RecordKind, _: Vec<u8>) -> Result<u32, VaultError> {
            Err(VaultError::WriteFailed)
        }
        fn get_latest(&self, s: &str, kind: RecordKind) -> Result<crate::vault::VaultRecord, VaultError> {
            Err(VaultError::NotFound {
                subject: s.to_string(),
                kind: kind.as_str(),
            })
        }
        fn list(&self, _: &str) -> Result<Vec<crate::vault::VaultRecord>, VaultError> {
            Ok(Vec::new())
        }
        fn delete(&mut self, _: &str, _: RecordKind) -> Result<u32, VaultError> {
            Err(VaultError::WriteFailed)
        }
    }

    #[test]
    fn registration_reports_injected_vault_failure() {
        let (device, mut rng) = device(2, 8);
        let mut vault = FailingVault;
        let transcript = run_registration(&device, &mut vault, &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::Rejected);
        assert!(transcript
            .entries
            .last()
            .unwrap()
            .status
            .starts_with("error"));
    }

    #[test]
    fn registration_surfaces_segmentation_errors() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let dims = amsobe_core::ablstm::NetworkDims {
            hidden: 1,
            windows: 2,
            window_len: 50,
            classes: 2,
        };
        let network = Network::random(dims, &mut rng);
        // 30 samples cannot fill even one 50-sample window.
        let channels: Vec<Vec<f64>> = (0..6)
            .map(|c| (0..30).map(|i| ((c + i) as f64).sin()).collect())
            .collect();
        let signal = GaitSignal::from_channels(channels).unwrap();
        let key = sot::keygen(dims.feature_len(), 1, &mut rng).unwrap();
        let device = DeviceConfig {
            subject: "owner".into(),
            sot_key: key,
            source: TemplateSource::Signal {
                signal,
                network: Box::new(network),
            },
        };
        let mut vault = MemoryVault::new();
        let transcript = run_registration(&device, &mut vault, &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::Rejected);
        assert!(transcript.entries[0].status.contains("error"));
    }

    #[test]
    fn identification_accepts_genuine_and_rejects_impostor() {
        let (device, mut rng) = device(4, 16);
        let mut vault = MemoryVault::new();
        assert!(run_registration(&device, &mut vault, &mut rng, false).succeeded());

        let genuine = run_identification(&device, &vault, "owner", &mut rng, false);
        assert_eq!(genuine.outcome, FlowOutcome::Identified);

        // A far-away probe: distance exceeds the 0.5 threshold. The
        // plaintext distance is the oracle for the expected decision.
        let reference = match &device.source {
            TemplateSource::Template(t) => t.clone(),
            _ => unreachable!(),
        };
        let far: Vec<f64> = reference.values().iter().map(|v| v + 1.0).collect();
        let d = amsobe_core::template::biological_distance(reference.values(), &far).unwrap();
        assert!(d > 0.5);
        let impostor = DeviceConfig {
            subject: "owner".into(),
            sot_key: device.sot_key.clone(),
            source: TemplateSource::Template(
                FeatureTemplate::new(far, TemplateRole::Identification).unwrap(),
            ),
        };
        let rejected = run_identification(&impostor, &vault, "owner", &mut rng, false);
        assert_eq!(rejected.outcome, FlowOutcome::Rejected);
    }

    #[test]
    fn identification_of_unenrolled_subject_fails() {
        let (device, mut rng) = device(5, 8);
        let vault = MemoryVault::new();
        let transcript = run_identification(&device, &vault, "owner", &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::Rejected);
    }

    #[test]
    fn wrong_length_probe_is_an_error_outcome() {
        let (device, mut rng) = device(6, 16);
        let mut vault = MemoryVault::new();
        run_registration(&device, &mut vault, &mut rng, false);
        let mut short_rng = ChaCha12Rng::seed_from_u64(7);
        let short_key = sot::keygen(4, 1, &mut short_rng).unwrap();
        let probe = DeviceConfig {
            subject: "owner".into(),
            sot_key: short_key,
            source: TemplateSource::Template(
                FeatureTemplate::new(vec![0.1; 4], TemplateRole::Identification).unwrap(),
            ),
        };
        let transcript = run_identification(&probe, &vault, "owner", &mut short_rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::Rejected);
        assert!(transcript.entries.iter().any(|e| e.status.contains("error")));
    }

    #[test]
    fn exchange_delivers_payload_end_to_end() {
        let (device, mut rng) = device(8, 16);
        let mut vault = MemoryVault::new();
        run_registration(&device, &mut vault, &mut rng, false);
        let transcript = run_message_exchange(
            &device,
            &mut vault,
            b"hello",
            &ExchangeOptions::default(),
            &mut rng,
            false,
        );
        assert_eq!(transcript.outcome, FlowOutcome::MessageDelivered);
    }

    #[test]
    fn exchange_refuses_impostor_before_any_bbe_step() {
        let (device, mut rng) = device(9, 16);
        let mut vault = MemoryVault::new();
        run_registration(&device, &mut vault, &mut rng, false);
        let reference = match &device.source {
            TemplateSource::Template(t) => t.clone(),
            _ => unreachable!(),
        };
        let far: Vec<f64> = reference.values().iter().map(|v| v + 1.0).collect();
        let options = ExchangeOptions {
            probe_override: Some(
                FeatureTemplate::new(far, TemplateRole::Identification).unwrap(),
            ),
            tamper_in_transit: false,
        };
        let transcript =
            run_message_exchange(&device, &mut vault, b"secret", &options, &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::MessageRefused);
        assert!(
            !transcript
                .entries
                .iter()
                .any(|e| e.message.starts_with("bbe-")),
            "no encryption-scheme step may run after a failed gate"
        );
    }

    #[test]
    fn exchange_detects_tampered_ciphertext() {
        let (device, mut rng) = device(10, 16);
        let mut vault = MemoryVault::new();
        run_registration(&device, &mut vault, &mut rng, false);
        let options = ExchangeOptions {
            probe_override: None,
            tamper_in_transit: true,
        };
        let transcript =
            run_message_exchange(&device, &mut vault, b"payload", &options, &mut rng, false);
        assert_eq!(transcript.outcome, FlowOutcome::MessageRefused);
        let last = transcript.entries.last().unwrap();
        assert!(last.status.contains("tag mismatch"), "{}", last.status);
    }

    #[test]
    fn transcripts_are_deterministic_for_a_seed() {
        let run = || {
            let (device, mut rng) = device(11, 12);
            let mut vault = MemoryVault::new();
            let mut all = Vec::new();
            all.push(run_registration(&device, &mut vault, &mut rng, false));
            all.push(run_identification(&device, &vault, "owner", &mut rng, false));
            all.push(run_message_exchange(
                &device,
                &mut vault,
                b"abc",
                &ExchangeOptions::default(),
                &mut rng,
                false,
            ));
            serde_json::to_vec(&all).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn gating_invariant_holds_in_successful_exchanges() {
        let (device, mut rng) = device(12, 16);
        let mut vault = MemoryVault::new();
        run_registration(&device, &mut vault, &mut rng, false);
        let transcript = run_message_exchange(
            &device,
            &mut vault,
            b"gated",
            &ExchangeOptions::default(),
            &mut rng,
            false,
        );
        let first_bbe = transcript
            .entries
            .iter()
            .position(|e| e.message.starts_with("bbe-"))
            .expect("exchange ran the scheme");
        let gate = transcript
            .entries
            .iter()
            .position(|e| e.message == "match-result" && e.status == "match")
            .expect("identification result precedes");
        assert!(gate < first_bbe);
    }
}
