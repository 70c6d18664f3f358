//! JSON envelopes and CSV ingestion.
//!
//! Every artifact that crosses a file or actor boundary has a versioned
//! JSON envelope here: templates, encrypted templates, transformation keys,
//! model checkpoints, and the encryption-scheme material (group elements as
//! fixed-width lowercase hex). Signals travel as 6-column CSV
//! (`ax,ay,az,gx,gy,gz`), header row optional.

use std::fs;
use std::path::Path;

use amsobe_core::ablstm::{
    AttentionParams, ChannelLstm, ClassifierParams, LstmParams, Network, NetworkDims,
};
use amsobe_core::bbe::{BbeCiphertext, BbeMasterKey, BbePrivateKey, BbePublicParams, SealedMessage};
use amsobe_core::matrix::Matrix;
use amsobe_core::pairing::{BilinearGroup, GElem, GtElem, TransparentGroup};
use amsobe_core::signal::{GaitSignal, CHANNELS};
use amsobe_core::sot::{EncryptedTemplate, SotKey};
use amsobe_core::template::{FeatureTemplate, QuantizedTemplate, TemplateRole};
use num_bigint::BigUint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported envelope version {0}")]
    Version(u32),
    #[error("expected kind {want:?}, found {got:?}")]
    Kind { want: &'static str, got: String },
    #[error("unknown template role {0:?}")]
    Role(String),
    #[error("inconsistent shape: {0}")]
    Shape(&'static str),
    #[error("hex: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error("unsupported group instantiation {0:?}")]
    Instantiation(String),
    #[error("group order is not prime")]
    BadGroup,
    #[error("scalar is not reduced mod p")]
    ScalarRange,
    #[error("csv row {row}: expected {CHANNELS} numeric columns")]
    CsvRow { row: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Template(#[from] amsobe_core::template::TemplateError),
    #[error(transparent)]
    Sot(#[from] amsobe_core::sot::SotError),
    #[error(transparent)]
    Pairing(#[from] amsobe_core::pairing::PairingError),
    #[error(transparent)]
    Signal(#[from] amsobe_core::signal::SignalError),
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    Ok(fs::write(path, body)?)
}

fn check_version(version: u32) -> Result<(), FormatError> {
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    Ok(())
}

fn check_kind(want: &'static str, got: &str) -> Result<(), FormatError> {
    if got != want {
        return Err(FormatError::Kind {
            want,
            got: got.to_string(),
        });
    }
    Ok(())
}

fn role_str(role: TemplateRole) -> &'static str {
    role.as_str()
}

fn parse_role(role: &str) -> Result<TemplateRole, FormatError> {
    match role {
        "reference" => Ok(TemplateRole::Reference),
        "identification" => Ok(TemplateRole::Identification),
        other => Err(FormatError::Role(other.to_string())),
    }
}

// ---------------------------------------------------------------- templates

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateFile {
    pub version: u32,
    pub kind: String,
    pub role: String,
    pub n: usize,
    pub values: Vec<f64>,
}

impl TemplateFile {
    pub const KIND: &'static str = "template";

    pub fn from_template(t: &FeatureTemplate) -> Self {
        TemplateFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            role: role_str(t.role()).to_string(),
            n: t.len(),
            values: t.values().to_vec(),
        }
    }

    pub fn into_template(self) -> Result<FeatureTemplate, FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        if self.n != self.values.len() {
            return Err(FormatError::Shape("n does not match values length"));
        }
        Ok(FeatureTemplate::new(self.values, parse_role(&self.role)?)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncTemplateFile {
    pub version: u32,
    pub kind: String,
    pub role: String,
    pub values: Vec<f64>,
}

impl EncTemplateFile {
    pub const KIND: &'static str = "enc-template";

    pub fn from_encrypted(t: &EncryptedTemplate) -> Self {
        EncTemplateFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            role: role_str(t.role()).to_string(),
            values: t.values().to_vec(),
        }
    }

    pub fn into_encrypted(self) -> Result<EncryptedTemplate, FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        Ok(EncryptedTemplate::from_parts(
            self.values,
            parse_role(&self.role)?,
        )?)
    }
}

// ----------------------------------------------------------------- SOT keys

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SotKeyFile {
    pub version: u32,
    pub n: usize,
    pub m: usize,
    /// 0-based insertion slots in the final vector, ascending.
    pub positions: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "M")]
    pub rotation: Vec<Vec<f64>>,
}

impl SotKeyFile {
    pub fn from_key(key: &SotKey) -> Self {
        SotKeyFile {
            version: FORMAT_VERSION,
            n: key.template_len(),
            m: key.param_count(),
            positions: key.positions().to_vec(),
            a: key.a().to_vec(),
            b: key.b().to_vec(),
            rotation: key.rotation().to_rows(),
        }
    }

    pub fn into_key(self) -> Result<SotKey, FormatError> {
        check_version(self.version)?;
        if self.m != self.positions.len() {
            return Err(FormatError::Shape("m does not match positions length"));
        }
        let rotation =
            Matrix::from_rows(&self.rotation).ok_or(FormatError::Shape("ragged rotation"))?;
        Ok(SotKey::from_parts(
            rotation,
            self.positions,
            self.a,
            self.b,
            self.n,
        )?)
    }
}

// ----------------------------------------------------------------- networks

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDimsDto {
    pub h: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub window_len: usize,
    pub n_c: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmDto {
    pub w_cell: Vec<Vec<f64>>,
    pub w_forget: Vec<Vec<f64>>,
    pub w_input: Vec<Vec<f64>>,
    pub w_output: Vec<Vec<f64>>,
    pub u_cell: Vec<Vec<f64>>,
    pub u_forget: Vec<Vec<f64>>,
    pub u_input: Vec<Vec<f64>>,
    pub u_output: Vec<Vec<f64>>,
    pub b_cell: Vec<f64>,
    pub b_forget: Vec<f64>,
    pub b_input: Vec<f64>,
    pub b_output: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelDto {
    pub fwd: LstmDto,
    pub bwd: LstmDto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttentionDto {
    pub w_query: Vec<Vec<f64>>,
    pub w_key: Vec<Vec<f64>>,
    pub w_value: Vec<Vec<f64>>,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierDto {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub dropout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dims: ModelDimsDto,
    pub channels: Vec<ChannelDto>,
    pub attention: AttentionDto,
    pub classifier: ClassifierDto,
}

fn matrix_dto(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn dto_matrix(rows: &[Vec<f64>]) -> Result<Matrix, FormatError> {
    Matrix::from_rows(rows).ok_or(FormatError::Shape("ragged matrix"))
}

fn lstm_dto(p: &LstmParams) -> LstmDto {
    LstmDto {
        w_cell: matrix_dto(&p.w_cell),
        w_forget: matrix_dto(&p.w_forget),
        w_input: matrix_dto(&p.w_input),
        w_output: matrix_dto(&p.w_output),
        u_cell: matrix_dto(&p.u_cell),
        u_forget: matrix_dto(&p.u_forget),
        u_input: matrix_dto(&p.u_input),
        u_output: matrix_dto(&p.u_output),
        b_cell: p.b_cell.clone(),
        b_forget: p.b_forget.clone(),
        b_input: p.b_input.clone(),
        b_output: p.b_output.clone(),
    }
}

fn dto_lstm(d: &LstmDto) -> Result<LstmParams, FormatError> {
    Ok(LstmParams {
        w_cell: dto_matrix(&d.w_cell)?,
        w_forget: dto_matrix(&d.w_forget)?,
        w_input: dto_matrix(&d.w_input)?,
        w_output: dto_matrix(&d.w_output)?,
        u_cell: dto_matrix(&d.u_cell)?,
        u_forget: dto_matrix(&d.u_forget)?,
        u_input: dto_matrix(&d.u_input)?,
        u_output: dto_matrix(&d.u_output)?,
        b_cell: d.b_cell.clone(),
        b_forget: d.b_forget.clone(),
        b_input: d.b_input.clone(),
        b_output: d.b_output.clone(),
    })
}

impl ModelFile {
    pub fn from_network(net: &Network) -> Self {
        ModelFile {
            version: FORMAT_VERSION,
            dims: ModelDimsDto {
                h: net.dims.hidden,
                n: net.dims.windows,
                window_len: net.dims.window_len,
                n_c: net.dims.classes,
            },
            channels: net
                .channels
                .iter()
                .map(|c| ChannelDto {
                    fwd: lstm_dto(&c.fwd),
                    bwd: lstm_dto(&c.bwd),
                })
                .collect(),
            attention: AttentionDto {
                w_query: matrix_dto(&net.attention.w_query),
                w_key: matrix_dto(&net.attention.w_key),
                w_value: matrix_dto(&net.attention.w_value),
                scale: net.attention.scale,
            },
            classifier: ClassifierDto {
                weight: matrix_dto(&net.classifier.weight),
                bias: net.classifier.bias.clone(),
                dropout: net.classifier.dropout,
            },
        }
    }

    pub fn into_network(self) -> Result<Network, FormatError> {
        check_version(self.version)?;
        if self.channels.len() != CHANNELS {
            return Err(FormatError::Shape("model must carry 6 channels"));
        }
        let dims = NetworkDims {
            hidden: self.dims.h,
            windows: self.dims.n,
            window_len: self.dims.window_len,
            classes: self.dims.n_c,
        };
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Ok(ChannelLstm {
                    fwd: dto_lstm(&c.fwd)?,
                    bwd: dto_lstm(&c.bwd)?,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Ok(Network {
            channels,
            attention: AttentionParams {
                w_query: dto_matrix(&self.attention.w_query)?,
                w_key: dto_matrix(&self.attention.w_key)?,
                w_value: dto_matrix(&self.attention.w_value)?,
                scale: self.attention.scale,
            },
            classifier: ClassifierParams {
                weight: dto_matrix(&self.classifier.weight)?,
                bias: self.classifier.bias,
                dropout: self.classifier.dropout,
            },
            dims,
        })
    }
}

// -------------------------------------------------------- encryption scheme

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDto {
    pub instantiation: String,
    /// Group order, lowercase hex.
    pub p: String,
}

impl GroupDto {
    pub fn from_group(group: &TransparentGroup) -> Self {
        GroupDto {
            instantiation: group.name().to_string(),
            p: hex::encode(group.order().to_bytes_be()),
        }
    }

    pub fn into_group(&self) -> Result<TransparentGroup, FormatError> {
        if self.instantiation != "transparent" {
            return Err(FormatError::Instantiation(self.instantiation.clone()));
        }
        let p = BigUint::from_bytes_be(&hex::decode(&self.p)?);
        TransparentGroup::new(p).map_err(|_| FormatError::BadGroup)
    }
}

fn g_hex(group: &TransparentGroup, e: &GElem) -> String {
    hex::encode(group.g_to_bytes(e))
}

fn gt_hex(group: &TransparentGroup, e: &GtElem) -> String {
    hex::encode(group.gt_to_bytes(e))
}

fn hex_g(group: &TransparentGroup, s: &str) -> Result<GElem, FormatError> {
    Ok(group.g_from_bytes(&hex::decode(s)?)?)
}

fn hex_gt(group: &TransparentGroup, s: &str) -> Result<GtElem, FormatError> {
    Ok(group.gt_from_bytes(&hex::decode(s)?)?)
}

fn scalar_hex(group: &TransparentGroup, x: &BigUint) -> String {
    let mut out = vec![0u8; group.byte_len()];
    let bytes = x.to_bytes_be();
    out[group.byte_len() - bytes.len()..].copy_from_slice(&bytes);
    hex::encode(out)
}

fn hex_scalar(group: &TransparentGroup, s: &str) -> Result<BigUint, FormatError> {
    let x = BigUint::from_bytes_be(&hex::decode(s)?);
    if &x >= group.order() {
        return Err(FormatError::ScalarRange);
    }
    Ok(x)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbeParamsFile {
    pub version: u32,
    pub kind: String,
    pub group: GroupDto,
    pub n: usize,
    pub template_points: Vec<String>,
    pub alpha_points: Vec<String>,
    pub mask: String,
}

impl BbeParamsFile {
    pub const KIND: &'static str = "bbe-public-params";

    pub fn from_params(group: &TransparentGroup, pp: &BbePublicParams<TransparentGroup>) -> Self {
        BbeParamsFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            group: GroupDto::from_group(group),
            n: pp.template_len(),
            template_points: pp.template_points.iter().map(|e| g_hex(group, e)).collect(),
            alpha_points: pp.alpha_points.iter().map(|e| g_hex(group, e)).collect(),
            mask: gt_hex(group, &pp.mask),
        }
    }

    pub fn into_params(
        &self,
    ) -> Result<(TransparentGroup, BbePublicParams<TransparentGroup>), FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        let group = self.group.into_group()?;
        if self.template_points.len() != self.n || self.alpha_points.len() != self.n {
            return Err(FormatError::Shape("point count does not match n"));
        }
        let pp = BbePublicParams {
            template_points: self
                .template_points
                .iter()
                .map(|s| hex_g(&group, s))
                .collect::<Result<_, _>>()?,
            alpha_points: self
                .alpha_points
                .iter()
                .map(|s| hex_g(&group, s))
                .collect::<Result<_, _>>()?,
            mask: hex_gt(&group, &self.mask)?,
        };
        Ok((group, pp))
    }
}

/// Master secret plus the preprocessing policy pinned at setup time. The
/// reference template itself is NOT stored; key generation takes it again
/// and must receive the same one used at setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbeMasterFile {
    pub version: u32,
    pub kind: String,
    pub group: GroupDto,
    pub n: usize,
    pub alpha: Vec<String>,
    pub beta: String,
    /// Positive constant appended to the reference extension at setup.
    pub constant: f64,
    pub scale: u64,
}

impl BbeMasterFile {
    pub const KIND: &'static str = "bbe-master-key";

    pub fn from_master(
        group: &TransparentGroup,
        msk: &BbeMasterKey,
        template_len: usize,
        constant: f64,
        scale: u64,
    ) -> Self {
        BbeMasterFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            group: GroupDto::from_group(group),
            n: template_len,
            alpha: msk.alpha.iter().map(|x| scalar_hex(group, x)).collect(),
            beta: scalar_hex(group, &msk.beta),
            constant,
            scale,
        }
    }

    pub fn into_master(&self) -> Result<(TransparentGroup, BbeMasterKey), FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        let group = self.group.into_group()?;
        Ok((
            group.clone(),
            BbeMasterKey {
                alpha: self
                    .alpha
                    .iter()
                    .map(|s| hex_scalar(&group, s))
                    .collect::<Result<_, _>>()?,
                beta: hex_scalar(&group, &self.beta)?,
            },
        ))
    }
}

/// Private key bundled with the quantized identification vector it is bound
/// to, so decryption needs only this file and a ciphertext.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbePrivateKeyFile {
    pub version: u32,
    pub kind: String,
    pub group: GroupDto,
    pub sk1: String,
    pub sk2: String,
    pub z: Vec<String>,
    pub scale: u64,
}

impl BbePrivateKeyFile {
    pub const KIND: &'static str = "bbe-private-key";

    pub fn from_key(
        group: &TransparentGroup,
        sk: &BbePrivateKey<TransparentGroup>,
        z: &QuantizedTemplate,
    ) -> Self {
        BbePrivateKeyFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            group: GroupDto::from_group(group),
            sk1: g_hex(group, &sk.sk1),
            sk2: g_hex(group, &sk.sk2),
            z: z.values().iter().map(|x| scalar_hex(group, x)).collect(),
            scale: z.scale(),
        }
    }

    pub fn into_key(
        &self,
    ) -> Result<
        (
            TransparentGroup,
            BbePrivateKey<TransparentGroup>,
            QuantizedTemplate,
        ),
        FormatError,
    > {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        let group = self.group.into_group()?;
        let sk = BbePrivateKey {
            sk1: hex_g(&group, &self.sk1)?,
            sk2: hex_g(&group, &self.sk2)?,
        };
        let residues = self
            .z
            .iter()
            .map(|s| hex_scalar(&group, s))
            .collect::<Result<Vec<_>, _>>()?;
        let z = QuantizedTemplate::from_residues(residues, self.scale, group.order().clone())?;
        Ok((group, sk, z))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbeCiphertextFile {
    pub version: u32,
    pub kind: String,
    pub group: GroupDto,
    pub masked: String,
    pub r_point: String,
    pub mix: Vec<String>,
}

impl BbeCiphertextFile {
    pub const KIND: &'static str = "bbe-ciphertext";

    pub fn from_ciphertext(
        group: &TransparentGroup,
        ct: &BbeCiphertext<TransparentGroup>,
    ) -> Self {
        BbeCiphertextFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            group: GroupDto::from_group(group),
            masked: gt_hex(group, &ct.masked),
            r_point: g_hex(group, &ct.r_point),
            mix: ct.mix.iter().map(|e| g_hex(group, e)).collect(),
        }
    }

    pub fn into_ciphertext(
        &self,
    ) -> Result<(TransparentGroup, BbeCiphertext<TransparentGroup>), FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        let group = self.group.into_group()?;
        Ok((
            group.clone(),
            BbeCiphertext {
                masked: hex_gt(&group, &self.masked)?,
                r_point: hex_g(&group, &self.r_point)?,
                mix: self
                    .mix
                    .iter()
                    .map(|s| hex_g(&group, s))
                    .collect::<Result<_, _>>()?,
            },
        ))
    }
}

/// Hybrid ciphertext: the sealed session element plus the encrypted body
/// and its tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SealedFile {
    pub version: u32,
    pub kind: String,
    pub group: GroupDto,
    pub masked: String,
    pub r_point: String,
    pub mix: Vec<String>,
    pub body: String,
    pub tag: String,
}

impl SealedFile {
    pub const KIND: &'static str = "bbe-sealed";

    pub fn from_sealed(group: &TransparentGroup, sealed: &SealedMessage<TransparentGroup>) -> Self {
        SealedFile {
            version: FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            group: GroupDto::from_group(group),
            masked: gt_hex(group, &sealed.key_ct.masked),
            r_point: g_hex(group, &sealed.key_ct.r_point),
            mix: sealed.key_ct.mix.iter().map(|e| g_hex(group, e)).collect(),
            body: hex::encode(&sealed.body),
            tag: hex::encode(sealed.tag),
        }
    }

    pub fn into_sealed(
        &self,
    ) -> Result<(TransparentGroup, SealedMessage<TransparentGroup>), FormatError> {
        check_version(self.version)?;
        check_kind(Self::KIND, &self.kind)?;
        let group = self.group.into_group()?;
        let tag_bytes = hex::decode(&self.tag)?;
        let tag: [u8; 32] = tag_bytes
            .try_into()
            .map_err(|_| FormatError::Shape("tag must be 32 bytes"))?;
        Ok((
            group.clone(),
            SealedMessage {
                key_ct: BbeCiphertext {
                    masked: hex_gt(&group, &self.masked)?,
                    r_point: hex_g(&group, &self.r_point)?,
                    mix: self
                        .mix
                        .iter()
                        .map(|s| hex_g(&group, s))
                        .collect::<Result<_, _>>()?,
                },
                body: hex::decode(&self.body)?,
                tag,
            },
        ))
    }
}

// --------------------------------------------------------------------- CSV

/// Reads a 6-column signal CSV (`ax,ay,az,gx,gy,gz`); a non-numeric first
/// row is treated as a header.
pub fn read_signal_csv(path: &Path) -> Result<GaitSignal, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); CHANNELS];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Option<Vec<f64>> = if record.len() == CHANNELS {
            record
                .iter()
                .map(|field| field.parse::<f64>().ok())
                .collect()
        } else {
            None
        };
        match parsed {
            Some(values) => {
                for (channel, value) in channels.iter_mut().zip(values) {
                    channel.push(value);
                }
            }
            None if row == 0 => continue, // header row
            None => return Err(FormatError::CsvRow { row: row + 1 }),
        }
    }
    Ok(GaitSignal::from_channels(channels)?)
}

pub fn write_signal_csv(path: &Path, signal: &GaitSignal) -> Result<(), FormatError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["ax", "ay", "az", "gx", "gy", "gz"])?;
    for i in 0..signal.len() {
        let row: Vec<String> = (0..CHANNELS)
            .map(|c| signal.channel(c)[i].to_string())
            .collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use amsobe_core::ablstm::Network;
    use amsobe_core::sot;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn sot_key_file_round_trips_and_revalidates() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let key = sot::keygen(4, 2, &mut rng).unwrap();
        let file = SotKeyFile::from_key(&key);
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"M\""));
        let back: SotKeyFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_key().unwrap(), key);
    }

    #[test]
    fn corrupted_rotation_is_rejected_on_load() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let key = sot::keygen(3, 1, &mut rng).unwrap();
        let mut file = SotKeyFile::from_key(&key);
        file.rotation[0][0] += 0.5;
        assert!(matches!(
            file.into_key(),
            Err(FormatError::Sot(amsobe_core::sot::SotError::NotOrthogonal))
        ));
    }

    #[test]
    fn model_file_round_trips() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let dims = amsobe_core::ablstm::NetworkDims {
            hidden: 2,
            windows: 2,
            window_len: 3,
            classes: 4,
        };
        let net = Network::random(dims, &mut rng);
        let file = ModelFile::from_network(&net);
        let json = serde_json::to_vec(&file).unwrap();
        let back: ModelFile = serde_json::from_slice(&json).unwrap();
        assert_eq!(back.into_network().unwrap(), net);
    }

    #[test]
    fn csv_reads_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let with_header = dir.path().join("a.csv");
        std::fs::write(&with_header, "ax,ay,az,gx,gy,gz\n1,2,3,4,5,6\n7,8,9,10,11,12\n")
            .unwrap();
        let signal = read_signal_csv(&with_header).unwrap();
        assert_eq!(signal.len(), 2);
        assert_eq!(signal.channel(5), &[6.0, 12.0]);

        let without = dir.path().join("b.csv");
        std::fs::write(&without, "1,2,3,4,5,6\n").unwrap();
        assert_eq!(read_signal_csv(&without).unwrap().len(), 1);

        let bad = dir.path().join("c.csv");
        std::fs::write(&bad, "1,2,3,4,5,6\n1,2,3\n").unwrap();
        assert!(matches!(
            read_signal_csv(&bad),
            Err(FormatError::CsvRow { row: 2 })
        ));
    }

    #[test]
    fn signal_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let channels: Vec<Vec<f64>> = (0..6)
            .map(|c| (0..10).map(|i| (c * 10 + i) as f64 * 0.25).collect())
            .collect();
        let signal = GaitSignal::from_channels(channels).unwrap();
        write_signal_csv(&path, &signal).unwrap();
        assert_eq!(read_signal_csv(&path).unwrap(), signal);
    }

    proptest! {
        #[test]
        fn template_file_round_trips(values in prop::collection::vec(-1.0f64..1.0, 1..40)) {
            let t = FeatureTemplate::new(values, TemplateRole::Identification).unwrap();
            let file = TemplateFile::from_template(&t);
            let json = serde_json::to_vec(&file).unwrap();
            let back: TemplateFile = serde_json::from_slice(&json).unwrap();
            prop_assert_eq!(back.into_template().unwrap(), t);
        }

        #[test]
        fn bbe_material_round_trips(seed in any::<u64>()) {
            let group = TransparentGroup::default_64bit();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let w = QuantizedTemplate::from_residues(
                (1u8..=5).map(|v| BigUint::from(v)).collect(),
                1,
                group.order().clone(),
            )
            .unwrap();
            let (pp, msk) = amsobe_core::bbe::setup(&group, &w, &mut rng).unwrap();
            let sk = amsobe_core::bbe::keygen(&group, &msk, &w, &mut rng).unwrap();
            let msg = group.gt_exp(&BigUint::from(42u8));
            let ct = amsobe_core::bbe::encrypt(&group, &pp, &msg, &mut rng);

            let pf = BbeParamsFile::from_params(&group, &pp);
            let (g2, pp2) = serde_json::from_slice::<BbeParamsFile>(
                &serde_json::to_vec(&pf).unwrap(),
            )
            .unwrap()
            .into_params()
            .unwrap();
            prop_assert_eq!(g2.order(), group.order());
            prop_assert_eq!(pp2, pp);

            let mf = BbeMasterFile::from_master(&group, &msk, 5, 1.0, 1);
            let (_, msk2) = mf.into_master().unwrap();
            prop_assert_eq!(msk2, msk);

            let kf = BbePrivateKeyFile::from_key(&group, &sk, &w);
            let (_, sk2, z2) = kf.into_key().unwrap();
            prop_assert_eq!(sk2, sk);
            prop_assert_eq!(z2, w);

            let cf = BbeCiphertextFile::from_ciphertext(&group, &ct);
            let (_, ct2) = cf.into_ciphertext().unwrap();
            prop_assert_eq!(ct2, ct);
        }
    }
}
