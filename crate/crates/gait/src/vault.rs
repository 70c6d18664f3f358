//! Append-only storage for encrypted material — the cloud side.
//!
//! Records are (subject, kind, payload) triples with per-(subject, kind)
//! versions; deletion only appends a tombstone. The interface deals
//! exclusively in serialized envelopes of already-encrypted material: no
//! plaintext biometric vectors and no transformation keys pass through
//! here. Two backends: in-memory for tests and simulations, and a
//! single-file JSON-lines log with an in-memory index.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use amsobe_core::sot::{self, Decision, EncryptedTemplate};

use crate::formats::{BbeCiphertextFile, BbeParamsFile, EncTemplateFile, SealedFile};

#[derive(Debug, thiserror::Error)]
pub enum VaultError {
    #[error("no {kind} record for subject {subject:?}")]
    NotFound { subject: String, kind: &'static str },
    #[error("subject id must be non-empty")]
    EmptySubject,
    #[error("payload does not parse as {kind}: {reason}")]
    BadPayload { kind: &'static str, reason: String },
    #[error("unknown record kind {0:?}")]
    UnknownKind(String),
    #[error("stored record is incompatible with the probe: {0}")]
    Incompatible(String),
    #[error("vault log line {line} is corrupt")]
    Corrupt { line: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("injected write failure")]
    WriteFailed,
}

/// What a record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordKind {
    EncReferenceTemplate,
    BbePublicParams,
    BbeCiphertext,
}

impl RecordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::EncReferenceTemplate => "enc-reference-template",
            RecordKind::BbePublicParams => "bbe-public-params",
            RecordKind::BbeCiphertext => "bbe-ciphertext",
        }
    }

    pub fn parse(s: &str) -> Result<Self, VaultError> {
        match s {
            "enc-reference-template" => Ok(RecordKind::EncReferenceTemplate),
            "bbe-public-params" => Ok(RecordKind::BbePublicParams),
            "bbe-ciphertext" => Ok(RecordKind::BbeCiphertext),
            other => Err(VaultError::UnknownKind(other.to_string())),
        }
    }
}

/// One stored record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaultRecord {
    pub subject: String,
    pub kind: RecordKind,
    pub payload: Vec<u8>,
    pub created_at: u64,
    pub version: u32,
    pub tombstone: bool,
}

/// The payload must parse under its kind's envelope before it is accepted.
fn validate_payload(kind: RecordKind, payload: &[u8]) -> Result<(), VaultError> {
    let reason = |e: &dyn std::fmt::Display| VaultError::BadPayload {
        kind: kind.as_str(),
        reason: e.to_string(),
    };
    match kind {
        RecordKind::EncReferenceTemplate => serde_json::from_slice::<EncTemplateFile>(payload)
            .map_err(|e| reason(&e))?
            .into_encrypted()
            .map_err(|e| reason(&e))
            .map(|_| ()),
        RecordKind::BbePublicParams => serde_json::from_slice::<BbeParamsFile>(payload)
            .map_err(|e| reason(&e))?
            .into_params()
            .map_err(|e| reason(&e))
            .map(|_| ()),
        RecordKind::BbeCiphertext => {
            // Plain and hybrid ciphertext envelopes both store under this
            // kind.
            if let Ok(file) = serde_json::from_slice::<SealedFile>(payload) {
                if file.kind == SealedFile::KIND {
                    return file.into_sealed().map_err(|e| reason(&e)).map(|_| ());
                }
            }
            serde_json::from_slice::<BbeCiphertextFile>(payload)
                .map_err(|e| reason(&e))?
                .into_ciphertext()
                .map_err(|e| reason(&e))
                .map(|_| ())
        }
    }
}

/// Append-only record store keyed by subject.
pub trait Vault {
    /// Appends a record, returning its version (1-based per subject+kind).
    fn put(&mut self, subject: &str, kind: RecordKind, payload: Vec<u8>)
        -> Result<u32, VaultError>;

    /// Latest live record for the subject and kind.
    fn get_latest(&self, subject: &str, kind: RecordKind) -> Result<VaultRecord, VaultError>;

    /// All records for a subject, oldest first, tombstones included.
    fn list(&self, subject: &str) -> Result<Vec<VaultRecord>, VaultError>;

    /// Logical deletion: appends a tombstone version.
    fn delete(&mut self, subject: &str, kind: RecordKind) -> Result<u32, VaultError>;
}

fn next_version(records: &[VaultRecord], kind: RecordKind) -> u32 {
    records
        .iter()
        .filter(|r| r.kind == kind)
        .map(|r| r.version)
        .max()
        .unwrap_or(0)
        + 1
}

fn latest_live(records: &[VaultRecord], subject: &str, kind: RecordKind) -> Result<VaultRecord, VaultError> {
    let newest = records
        .iter()
        .filter(|r| r.kind == kind)
        .max_by_key(|r| r.version);
    match newest {
        Some(r) if !r.tombstone => Ok(r.clone()),
        _ => Err(VaultError::NotFound {
            subject: subject.to_string(),
            kind: kind.as_str(),
        }),
    }
}

/// In-memory backend with a logical clock; deterministic under a fixed
/// sequence of operations.
#[derive(Debug, Default)]
pub struct MemoryVault {
    records: BTreeMap<String, Vec<VaultRecord>>,
    clock: u64,
}

impl MemoryVault {
    pub fn new() -> Self {
        Self::default()
    }

    fn append(
        &mut self,
        subject: &str,
        kind: RecordKind,
        payload: Vec<u8>,
        tombstone: bool,
    ) -> Result<u32, VaultError> {
        if subject.is_empty() {
            return Err(VaultError::EmptySubject);
        }
        if !tombstone {
            validate_payload(kind, &payload)?;
        }
        self.clock += 1;
        let records = self.records.entry(subject.to_string()).or_default();
        let version = next_version(records, kind);
        records.push(VaultRecord {
            subject: subject.to_string(),
            kind,
            payload,
            created_at: self.clock,
            version,
            tombstone,
        });
        Ok(version)
    }
}

impl Vault for MemoryVault {
    fn put(
        &mut self,
        subject: &str,
        kind: RecordKind,
        payload: Vec<u8>,
    ) -> Result<u32, VaultError> {
        self.append(subject, kind, payload, false)
    }

    fn get_latest(&self, subject: &str, kind: RecordKind) -> Result<VaultRecord, VaultError> {
        let records = self.records.get(subject).ok_or(VaultError::NotFound {
            subject: subject.to_string(),
            kind: kind.as_str(),
        })?;
        latest_live(records, subject, kind)
    }

    fn list(&self, subject: &str) -> Result<Vec<VaultRecord>, VaultError> {
        Ok(self.records.get(subject).cloned().unwrap_or_default())
    }

    fn delete(&mut self, subject: &str, kind: RecordKind) -> Result<u32, VaultError> {
        self.append(subject, kind, Vec::new(), true)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    subject: String,
    kind: String,
    version: u32,
    created_at: u64,
    tombstone: bool,
    payload: String,
}

/// Single-file JSON-lines backend. The whole log is replayed into memory on
/// open; writes take an exclusive OS file lock, so one writer at a time per
/// vault file.
#[derive(Debug)]
pub struct FileVault {
    path: PathBuf,
    records: BTreeMap<String, Vec<VaultRecord>>,
}

impl FileVault {
    pub fn open(path: &Path) -> Result<Self, VaultError> {
        let mut records: BTreeMap<String, Vec<VaultRecord>> = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: LogLine =
                    serde_json::from_str(&line).map_err(|_| VaultError::Corrupt { line: idx + 1 })?;
                let record = VaultRecord {
                    kind: RecordKind::parse(&parsed.kind)?,
                    payload: BASE64
                        .decode(parsed.payload.as_bytes())
                        .map_err(|_| VaultError::Corrupt { line: idx + 1 })?,
                    subject: parsed.subject,
                    created_at: parsed.created_at,
                    version: parsed.version,
                    tombstone: parsed.tombstone,
                };
                records.entry(record.subject.clone()).or_default().push(record);
            }
        }
        Ok(FileVault {
            path: path.to_path_buf(),
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn append(
        &mut self,
        subject: &str,
        kind: RecordKind,
        payload: Vec<u8>,
        tombstone: bool,
    ) -> Result<u32, VaultError> {
        if subject.is_empty() {
            return Err(VaultError::EmptySubject);
        }
        if !tombstone {
            validate_payload(kind, &payload)?;
        }
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let records = self.records.entry(subject.to_string()).or_default();
        let version = next_version(records, kind);
        let line = LogLine {
            subject: subject.to_string(),
            kind: kind.as_str().to_string(),
            version,
            created_at,
            tombstone,
            payload: BASE64.encode(&payload),
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.lock()?;
        let result = (|| {
            serde_json::to_writer(&mut file, &line)
                .map_err(|e| VaultError::Io(std::io::Error::other(e)))?;
            file.write_all(b"\n")?;
            file.flush()?;
            Ok(version)
        })();
        file.unlock()?;
        result?;
        records.push(VaultRecord {
            subject: subject.to_string(),
            kind,
            payload,
            created_at,
            version,
            tombstone,
        });
        Ok(version)
    }
}

impl Vault for FileVault {
    fn put(
        &mut self,
        subject: &str,
        kind: RecordKind,
        payload: Vec<u8>,
    ) -> Result<u32, VaultError> {
        self.append(subject, kind, payload, false)
    }

    fn get_latest(&self, subject: &str, kind: RecordKind) -> Result<VaultRecord, VaultError> {
        let records = self.records.get(subject).ok_or(VaultError::NotFound {
            subject: subject.to_string(),
            kind: kind.as_str(),
        })?;
        latest_live(records, subject, kind)
    }

    fn list(&self, subject: &str) -> Result<Vec<VaultRecord>, VaultError> {
        Ok(self.records.get(subject).cloned().unwrap_or_default())
    }

    fn delete(&mut self, subject: &str, kind: RecordKind) -> Result<u32, VaultError> {
        self.append(subject, kind, Vec::new(), true)
    }
}

/// How much the matcher reveals to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreVisibility {
    /// Report the raw inner-product score along with the decision.
    Reveal,
    /// Report only the decision sign.
    DecisionOnly,
}

/// Matcher verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOutcome {
    pub decision: Decision,
    pub score: Option<f64>,
}

/// Runs the matching algorithm against the subject's stored encrypted
/// reference. Only ciphertexts are touched: the probe arrives encrypted and
/// the stored record is encrypted.
pub fn match_in_vault(
    vault: &dyn Vault,
    subject: &str,
    probe: &EncryptedTemplate,
    visibility: ScoreVisibility,
) -> Result<MatchOutcome, VaultError> {
    let record = vault.get_latest(subject, RecordKind::EncReferenceTemplate)?;
    let stored: EncTemplateFile = serde_json::from_slice(&record.payload).map_err(|e| {
        VaultError::BadPayload {
            kind: RecordKind::EncReferenceTemplate.as_str(),
            reason: e.to_string(),
        }
    })?;
    let stored = stored
        .into_encrypted()
        .map_err(|e| VaultError::Incompatible(e.to_string()))?;
    let score = sot::match_score(&stored, probe)
        .map_err(|e| VaultError::Incompatible(e.to_string()))?;
    let decision = sot::decide(score).map_err(|e| VaultError::Incompatible(e.to_string()))?;
    Ok(MatchOutcome {
        decision,
        score: match visibility {
            ScoreVisibility::Reveal => Some(score),
            ScoreVisibility::DecisionOnly => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use amsobe_core::template::{FeatureTemplate, TemplateRole};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn enc_payload(values: &[f64], role: TemplateRole) -> Vec<u8> {
        let enc = EncryptedTemplate::from_parts(values.to_vec(), role).unwrap();
        serde_json::to_vec(&EncTemplateFile::from_encrypted(&enc)).unwrap()
    }

    #[test]
    fn put_get_round_trips_byte_identical() {
        let mut vault = MemoryVault::new();
        let payload = enc_payload(&[1.0, 2.0, 3.0], TemplateRole::Reference);
        vault
            .put("alice", RecordKind::EncReferenceTemplate, payload.clone())
            .unwrap();
        let record = vault
            .get_latest("alice", RecordKind::EncReferenceTemplate)
            .unwrap();
        assert_eq!(record.payload, payload);
        assert_eq!(record.version, 1);
    }

    #[test]
    fn second_put_wins_get_latest() {
        let mut vault = MemoryVault::new();
        let first = enc_payload(&[1.0], TemplateRole::Reference);
        let second = enc_payload(&[2.0], TemplateRole::Reference);
        vault
            .put("bob", RecordKind::EncReferenceTemplate, first)
            .unwrap();
        let v2 = vault
            .put("bob", RecordKind::EncReferenceTemplate, second.clone())
            .unwrap();
        assert_eq!(v2, 2);
        let latest = vault
            .get_latest("bob", RecordKind::EncReferenceTemplate)
            .unwrap();
        assert_eq!(latest.payload, second);
    }

    #[test]
    fn unknown_subject_is_not_found() {
        let vault = MemoryVault::new();
        assert!(matches!(
            vault.get_latest("nobody", RecordKind::EncReferenceTemplate),
            Err(VaultError::NotFound { .. })
        ));
    }

    #[test]
    fn tombstone_hides_the_record() {
        let mut vault = MemoryVault::new();
        vault
            .put(
                "carol",
                RecordKind::EncReferenceTemplate,
                enc_payload(&[1.0], TemplateRole::Reference),
            )
            .unwrap();
        vault
            .delete("carol", RecordKind::EncReferenceTemplate)
            .unwrap();
        assert!(matches!(
            vault.get_latest("carol", RecordKind::EncReferenceTemplate),
            Err(VaultError::NotFound { .. })
        ));
        // History is retained.
        assert_eq!(vault.list("carol").unwrap().len(), 2);
    }

    #[test]
    fn garbage_payloads_are_rejected() {
        let mut vault = MemoryVault::new();
        assert!(matches!(
            vault.put(
                "dave",
                RecordKind::EncReferenceTemplate,
                b"not json".to_vec()
            ),
            Err(VaultError::BadPayload { .. })
        ));
        assert!(matches!(
            vault.put("", RecordKind::EncReferenceTemplate, Vec::new()),
            Err(VaultError::EmptySubject)
        ));
    }

    #[test]
    fn file_vault_persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vault.jsonl");
        let payload = enc_payload(&[0.5, -0.5], TemplateRole::Reference);
        {
            let mut vault = FileVault::open(&path).unwrap();
            vault
                .put("erin", RecordKind::EncReferenceTemplate, payload.clone())
                .unwrap();
            vault
                .put(
                    "erin",
                    RecordKind::EncReferenceTemplate,
                    enc_payload(&[9.0, 9.0], TemplateRole::Reference),
                )
                .unwrap();
        }
        let vault = FileVault::open(&path).unwrap();
        let latest = vault
            .get_latest("erin", RecordKind::EncReferenceTemplate)
            .unwrap();
        assert_eq!(latest.version, 2);
        assert_eq!(vault.list("erin").unwrap()[0].payload, payload);
    }

    #[test]
    fn corrupt_log_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vault.jsonl");
        std::fs::write(&path, "{\"bad\": true\n").unwrap();
        assert!(matches!(
            FileVault::open(&path),
            Err(VaultError::Corrupt { line: 1 })
        ));
    }

    #[test]
    fn match_in_vault_delegates_to_the_matcher() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let key = amsobe_core::sot::keygen_calibrated(6, 2, 0.5, &mut rng).unwrap();
        let genuine: Vec<f64> = (0..6)
            .map(|_| amsobe_core::random::uniform_in(&mut rng, -1.0, 1.0))
            .collect();
        let reference =
            FeatureTemplate::new(genuine.clone(), TemplateRole::Reference).unwrap();
        let enc_ref = amsobe_core::sot::encrypt_reference(&key, &reference, &mut rng).unwrap();

        let mut vault = MemoryVault::new();
        vault
            .put(
                "frank",
                RecordKind::EncReferenceTemplate,
                serde_json::to_vec(&EncTemplateFile::from_encrypted(&enc_ref)).unwrap(),
            )
            .unwrap();

        // Genuine probe matches (D = 0); a distant probe is rejected — the
        // plaintext distances verify both sides of the calibration.
        let genuine_probe = FeatureTemplate::new(genuine.clone(), TemplateRole::Identification)
            .unwrap();
        let enc_probe =
            amsobe_core::sot::encrypt_identification(&key, &genuine_probe, &mut rng).unwrap();
        let outcome =
            match_in_vault(&vault, "frank", &enc_probe, ScoreVisibility::Reveal).unwrap();
        assert!(outcome.decision.is_match());
        let expected = amsobe_core::sot::match_score(&enc_ref, &enc_probe).unwrap();
        assert_eq!(outcome.score, Some(expected));

        let far: Vec<f64> = genuine.iter().map(|v| v + 2.0).collect();
        let far_d =
            amsobe_core::template::biological_distance(&genuine, &far).unwrap();
        assert!(far_d > 0.5, "impostor distance {far_d} must exceed threshold");
        let far_probe = FeatureTemplate::new(far, TemplateRole::Identification).unwrap();
        let enc_far =
            amsobe_core::sot::encrypt_identification(&key, &far_probe, &mut rng).unwrap();
        let outcome =
            match_in_vault(&vault, "frank", &enc_far, ScoreVisibility::DecisionOnly).unwrap();
        assert!(!outcome.decision.is_match());
        assert_eq!(outcome.score, None);

        // Wrong-length probe is incompatible.
        let short = FeatureTemplate::new(vec![0.1; 3], TemplateRole::Identification).unwrap();
        let short_key = amsobe_core::sot::keygen(3, 1, &mut rng).unwrap();
        let enc_short =
            amsobe_core::sot::encrypt_identification(&short_key, &short, &mut rng).unwrap();
        assert!(matches!(
            match_in_vault(&vault, "frank", &enc_short, ScoreVisibility::Reveal),
            Err(VaultError::Incompatible(_))
        ));
    }

    #[test]
    fn interface_surface_never_names_plaintext_template_or_key_types() {
        // Type-level privacy: the vault API must not accept or return the
        // plaintext template or transformation-key types.
        let source = include_str!("vault.rs");
        let plain_template = ["Feature", "Template"].concat();
        let key_type = ["Sot", "Key"].concat();
        let body_end = source.find("#[cfg(test)]").unwrap();
        let interface = &source[..body_end];
        assert!(!interface.contains(&plain_template));
        assert!(!interface.contains(&key_type));
    }
}
