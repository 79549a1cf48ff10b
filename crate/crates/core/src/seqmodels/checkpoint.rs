//! Self-describing checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "RFVCCKPT"
//! version u32
//! kind    u32 length + utf-8 ("ppr" | "ppts" | "uppt" | "discriminator")
//! config  u32 length + utf-8 TOML architecture config
//! step    u64      training step the parameters belong to
//! seed    u64      master seed of the producing run
//! params  embedded matrix container (see crate::io), one entry per
//!         named parameter, little-endian f32 payloads
//! ```
//!
//! Parameters are truncated to f32 when a checkpoint is constructed, so the
//! in-memory payload equals the on-disk payload and save -> load -> forward
//! is bit-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;

use super::params::ParamSet;
use super::{
    DiscriminatorConfig, DiscriminatorModel, ModelError, PprConfig, PprModel, PptsConfig,
    PptsModel, UpptConfig, UpptModel,
};
use crate::io::{read_matrices_from, write_matrices_to, MatrixIoError};

const MAGIC: &[u8; 8] = b"RFVCCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ppr,
    Ppts,
    Uppt,
    Discriminator,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ppr => "ppr",
            ModelKind::Ppts => "ppts",
            ModelKind::Uppt => "uppt",
            ModelKind::Discriminator => "discriminator",
        }
    }

    fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "ppr" => Ok(ModelKind::Ppr),
            "ppts" => Ok(ModelKind::Ppts),
            "uppt" => Ok(ModelKind::Uppt),
            "discriminator" => Ok(ModelKind::Discriminator),
            other => Err(ModelError::Config(format!("unknown model kind \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config_toml: String,
    pub step: u64,
    pub seed: u64,
    /// Canonical (f32-quantized) parameters.
    pub params: ParamSet,
}

impl Checkpoint {
    /// Captures a parameter snapshot, quantizing to the canonical f32 form.
    pub fn capture<C: serde::Serialize>(
        kind: ModelKind,
        config: &C,
        step: u64,
        seed: u64,
        params: &ParamSet,
    ) -> Result<Self, ModelError> {
        let config_toml =
            toml::to_string(config).map_err(|e| ModelError::Config(e.to_string()))?;
        Ok(Self { kind, config_toml, step, seed, params: params.quantized_f32() })
    }

    /// Atomic save: writes to a temporary sibling then renames.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let tmp = path.with_extension("ckpt.tmp");
        let io_err = |source: std::io::Error, p: &Path| {
            ModelError::Io(MatrixIoError::Io { path: p.display().to_string(), source })
        };
        {
            let file = File::create(&tmp).map_err(|e| io_err(e, &tmp))?;
            let mut w = BufWriter::new(file);
            write_header(&mut w, self).map_err(|e| io_err(e, &tmp))?;
            let entries: Vec<(String, ndarray::Array2<f64>)> = self
                .params
                .iter()
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect();
            write_matrices_to(&mut w, &entries).map_err(|e| io_err(e, &tmp))?;
            w.into_inner()
                .map_err(|e| io_err(e.into_error(), &tmp))?
                .sync_all()
                .map_err(|e| io_err(e, &tmp))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| io_err(e, path))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let io_err = |source: std::io::Error| {
            ModelError::Io(MatrixIoError::Io { path: path.display().to_string(), source })
        };
        let file = File::open(path).map_err(io_err)?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(ModelError::Config(format!(
                "{} is not a checkpoint (bad magic)",
                path.display()
            )));
        }
        let version = read_u32(&mut r).map_err(io_err)?;
        if version != VERSION {
            return Err(ModelError::Config(format!("unsupported checkpoint version {version}")));
        }
        let kind = ModelKind::parse(&read_string(&mut r).map_err(io_err)?)?;
        let config_toml = read_string(&mut r).map_err(io_err)?;
        let step = read_u64(&mut r).map_err(io_err)?;
        let seed = read_u64(&mut r).map_err(io_err)?;
        let entries = read_matrices_from(&mut r, path)?;
        let params = ParamSet::from_entries(entries);
        if !params.all_finite() {
            return Err(ModelError::NonFinite("checkpoint parameters".into()));
        }
        Ok(Self { kind, config_toml, step, seed, params })
    }

    fn config<C: DeserializeOwned>(&self) -> Result<C, ModelError> {
        toml::from_str(&self.config_toml).map_err(|e| ModelError::Config(e.to_string()))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<(), ModelError> {
        if self.kind != kind {
            return Err(ModelError::WrongKind {
                expected: kind.as_str().into(),
                got: self.kind.as_str().into(),
            });
        }
        Ok(())
    }

    pub fn to_ppr(&self) -> Result<PprModel, ModelError> {
        self.expect_kind(ModelKind::Ppr)?;
        let config: PprConfig = self.config()?;
        Ok(PprModel { config, params: self.params.clone() })
    }

    pub fn to_ppts(&self) -> Result<PptsModel, ModelError> {
        self.expect_kind(ModelKind::Ppts)?;
        let config: PptsConfig = self.config()?;
        Ok(PptsModel { config, params: self.params.clone() })
    }

    pub fn to_uppt(&self) -> Result<UpptModel, ModelError> {
        self.expect_kind(ModelKind::Uppt)?;
        let config: UpptConfig = self.config()?;
        Ok(UpptModel { config, params: self.params.clone() })
    }

    pub fn to_discriminator(&self) -> Result<DiscriminatorModel, ModelError> {
        self.expect_kind(ModelKind::Discriminator)?;
        let config: DiscriminatorConfig = self.config()?;
        Ok(DiscriminatorModel { config, params: self.params.clone() })
    }
}

fn write_header<W: Write>(w: &mut W, c: &Checkpoint) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let kind = c.kind.as_str();
    w.write_all(&(kind.len() as u32).to_le_bytes())?;
    w.write_all(kind.as_bytes())?;
    w.write_all(&(c.config_toml.len() as u32).to_le_bytes())?;
    w.write_all(c.config_toml.as_bytes())?;
    w.write_all(&c.step.to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_string<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MelSpectrogram;
    use crate::seqmodels::{ppr_forward, PprConfig, PprModel};
    use ndarray::Array2;

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = PprConfig { mel_bands: 6, conv_widths: vec![1, 3], conv_filters: 3, hidden: 4, ..PprConfig::default() };
        let model = PprModel::init(cfg.clone(), 9).unwrap();
        let ckpt = Checkpoint::capture(ModelKind::Ppr, &cfg, 123, 9, &model.params).unwrap();
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();

        assert_eq!(back.kind, ModelKind::Ppr);
        assert_eq!(back.step, 123);
        assert_eq!(back.seed, 9);
        for ((na, va), (nb, vb)) in ckpt.params.iter().zip(back.params.iter()) {
            assert_eq!(na, nb);
            assert_eq!(va, vb); // exact: f32 payloads widen losslessly
        }

        // Forward on the quantized capture equals forward after reload.
        let m = MelSpectrogram {
            frames: Array2::from_shape_fn((7, 6), |(i, j)| ((i * 6 + j) as f64 * 0.1).sin().abs()),
            sample_rate: 16000,
            hop_size: 200,
        };
        let a = ppr_forward(&m, &ckpt.to_ppr().unwrap()).unwrap();
        let b = ppr_forward(&m, &back.to_ppr().unwrap()).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = PprConfig { mel_bands: 4, conv_widths: vec![1], conv_filters: 2, hidden: 3, ..PprConfig::default() };
        let model = PprModel::init(cfg.clone(), 1).unwrap();
        Checkpoint::capture(ModelKind::Ppr, &cfg, 0, 1, &model.params)
            .unwrap()
            .save(&path)
            .unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert!(back.to_uppt().is_err());
    }

    #[test]
    fn atomic_save_leaves_no_tmp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = PprConfig { mel_bands: 4, conv_widths: vec![1], conv_filters: 2, hidden: 3, ..PprConfig::default() };
        let model = PprModel::init(cfg.clone(), 2).unwrap();
        Checkpoint::capture(ModelKind::Ppr, &cfg, 0, 2, &model.params)
            .unwrap()
            .save(&path)
            .unwrap();
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().map_or(false, |x| x == "tmp"))
            .collect();
        assert!(leftovers.is_empty());
        assert!(path.is_file());
    }
}
