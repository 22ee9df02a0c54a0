//! Binary checkpoint files.
//!
//! Layout, all integers little-endian and every `f64` stored as its raw IEEE
//! bits:
//!
//! ```text
//! magic          8 bytes  "RNMDCKPT"
//! format_version u32
//! config_len     u64      followed by config_len bytes of config block
//! state_len      u64      followed by state_len bytes of state block
//! checksum       32 bytes SHA-256 of every preceding byte
//! ```
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! failed save never leaves a partial checkpoint behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ColumnScaling, MediationStream, OutcomeModel, OutcomeState, Standardization, StreamConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linear::{LinearOutcomeState, MediatorState};
use crate::logistic::{LogisticOutcomeState, NewtonSettings};
use crate::mediation::TestConfig;
use crate::model::ModelDims;

pub const MAGIC: &[u8; 8] = b"RNMDCKPT";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;
/// Upper bound on any stored dimension, to reject absurd allocations from damaged files.
const MAX_DIM: u64 = 1 << 20;

/// Serializes a stream to bytes.
pub fn encode(stream: &MediationStream) -> Vec<u8> {
    let mut config = Writer::default();
    write_config(&mut config, stream.config());
    let mut state = Writer::default();
    write_state(&mut state, stream);

    let mut out = Vec::with_capacity(8 + 4 + 16 + config.0.len() + state.0.len() + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&config.0);
    out.extend_from_slice(&(state.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&state.0);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Restores a stream from bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<MediationStream> {
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(Error::Integrity(format!("file is truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Integrity("not a checkpoint file (bad magic bytes)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Integrity("checksum mismatch; the file is corrupt or truncated".into()));
    }

    let mut r = Reader::new(&body[12..]);
    let config_block = r.block()?;
    let state_block = r.block()?;
    r.finish()?;

    let mut cr = Reader::new(config_block);
    let config = read_config(&mut cr)?;
    cr.finish()?;
    let mut sr = Reader::new(state_block);
    let stream = read_state(&mut sr, config)?;
    sr.finish()?;
    Ok(stream)
}

/// Writes the stream atomically.
pub fn save_checkpoint(stream: &MediationStream, path: &Path) -> Result<()> {
    let bytes = encode(stream);
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MediationStream> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    fn matrix(&mut self, m: &Matrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for x in m.as_slice() {
            self.f64(*x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Integrity("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Integrity(format!("invalid boolean byte {b}"))),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.u64()?;
        if v > MAX_DIM {
            return Err(Error::Integrity(format!("implausible dimension {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.dim()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.dim()?;
        let cols = self.dim()?;
        let data = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Matrix::from_row_major(rows, cols, data).map_err(|e| Error::Integrity(e.to_string()))
    }

    fn block(&mut self) -> Result<&'a [u8]> {
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| Error::Integrity("block length overflows".into()))?;
        self.take(len)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Integrity(format!(
                "{} unexpected trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_config(w: &mut Writer, c: &StreamConfig) {
    w.u8(match c.model {
        OutcomeModel::Linear => 0,
        OutcomeModel::Logistic => 1,
    });
    w.u64(c.dims.p as u64);
    w.u64(c.dims.q as u64);
    w.bool(c.dims.intercept_outcome);
    w.bool(c.dims.intercept_mediator);
    w.f64(c.tests.delta);
    w.f64(c.tests.contrast.0);
    w.f64(c.tests.contrast.1);
    w.f64(c.newton.tol);
    w.u64(c.newton.max_iter as u64);
    w.bool(c.newton.step_halving);
    match &c.standardization {
        Standardization::None => w.u8(0),
        Standardization::Fixed(cols) => {
            w.u8(1);
            w.u64(cols.len() as u64);
            for col in cols {
                w.f64(col.mean);
                w.f64(col.scale);
            }
        }
        Standardization::FromFirstBatch => w.u8(2),
    }
}

fn read_config(r: &mut Reader) -> Result<StreamConfig> {
    let model = match r.u8()? {
        0 => OutcomeModel::Linear,
        1 => OutcomeModel::Logistic,
        b => return Err(Error::Integrity(format!("unknown model tag {b}"))),
    };
    let p = r.dim()?;
    let q = r.dim()?;
    let dims = ModelDims::new(p, q).with_intercepts(r.bool()?, r.bool()?);
    let tests = TestConfig {
        delta: r.f64()?,
        contrast: (r.f64()?, r.f64()?),
    };
    let newton = NewtonSettings {
        tol: r.f64()?,
        max_iter: r.dim()?,
        step_halving: r.bool()?,
    };
    let standardization = match r.u8()? {
        0 => Standardization::None,
        1 => {
            let n = r.dim()?;
            let cols = (0..n)
                .map(|_| {
                    Ok(ColumnScaling {
                        mean: r.f64()?,
                        scale: r.f64()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Standardization::Fixed(cols)
        }
        2 => Standardization::FromFirstBatch,
        b => return Err(Error::Integrity(format!("unknown standardization tag {b}"))),
    };
    let config = StreamConfig {
        model,
        dims,
        standardization,
        tests,
        newton,
    };
    config
        .validate()
        .map_err(|e| Error::Integrity(format!("stored configuration is invalid: {e}")))?;
    Ok(config)
}

fn write_state(w: &mut Writer, stream: &MediationStream) {
    match stream.outcome_state() {
        OutcomeState::Linear(s) => {
            w.f64s(s.gamma_tilde());
            w.matrix(s.j_tilde());
            w.f64(s.residual_sum_of_squares());
            w.f64(s.yty());
            w.u64(s.n_total());
            w.u64(s.batch_count());
        }
        OutcomeState::Logistic(s) => {
            w.f64s(s.gamma_tilde());
            w.matrix(s.j_tilde());
            w.u64(s.n_total());
            w.u64(s.batch_count());
            w.u64(s.last_iterations() as u64);
        }
    }
    let m = stream.mediator();
    w.matrix(m.h_tilde());
    w.u64(m.lambda_tilde().len() as u64);
    for l in m.lambda_tilde() {
        w.f64s(l);
    }
    w.f64s(m.residual_sums_of_squares());
    w.f64s(m.omega_sq());
    w.u64(m.n_total());
    w.u64(m.batch_count());
    match stream.last_digest() {
        Some(d) => {
            w.u8(1);
            w.0.extend_from_slice(d);
        }
        None => w.u8(0),
    }
}

fn read_state(r: &mut Reader, config: StreamConfig) -> Result<MediationStream> {
    let dims = config.dims;
    let outcome = match config.model {
        OutcomeModel::Linear => {
            let gamma = r.f64s()?;
            let info = r.matrix()?;
            let rss = r.f64()?;
            let yty = r.f64()?;
            let n_total = r.u64()?;
            let batch_count = r.u64()?;
            OutcomeState::Linear(LinearOutcomeState::from_parts(dims, gamma, info, rss, yty, n_total, batch_count)?)
        }
        OutcomeModel::Logistic => {
            let gamma = r.f64s()?;
            let info = r.matrix()?;
            let n_total = r.u64()?;
            let batch_count = r.u64()?;
            let iterations = r.dim()?;
            OutcomeState::Logistic(LogisticOutcomeState::from_parts(
                dims,
                gamma,
                info,
                n_total,
                batch_count,
                config.newton,
                iterations,
            )?)
        }
    };
    let info = r.matrix()?;
    let p = r.dim()?;
    let lambda = (0..p).map(|_| r.f64s()).collect::<Result<Vec<_>>>()?;
    let rss = r.f64s()?;
    let omega_sq = r.f64s()?;
    let n_total = r.u64()?;
    let batch_count = r.u64()?;
    let mediator = MediatorState::from_parts(dims, info, lambda, rss, omega_sq, n_total, batch_count)?;
    let digest = match r.u8()? {
        0 => None,
        1 => Some(r.take(32)?.try_into().expect("32 bytes")),
        b => return Err(Error::Integrity(format!("invalid digest flag {b}"))),
    };
    MediationStream::from_parts(config, outcome, mediator, digest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RawBatch;

    fn stream_with_batches(model: OutcomeModel, k: usize) -> MediationStream {
        let mut s = MediationStream::new(StreamConfig::new(model, ModelDims::new(2, 1))).unwrap();
        for b in 0..k {
            let values: Vec<f64> = (0..40)
                .flat_map(|i| {
                    let t = (b * 40 + i) as f64;
                    let x = (t * 0.37).sin();
                    let m1 = 0.4 * x + (t * 1.3).cos();
                    let m2 = -0.2 * x + (t * 2.1).sin();
                    let z = (t * 0.11).cos();
                    let eta = 0.3 * x + 0.5 * m1 - 0.4 * m2 + 0.2 * z + (t * 3.7).sin();
                    let y = match model {
                        OutcomeModel::Linear => eta,
                        OutcomeModel::Logistic => (eta > 0.0) as u8 as f64,
                    };
                    [y, x, m1, m2, z]
                })
                .collect();
            s.update_raw(&RawBatch { n: 40, values }).unwrap();
        }
        s
    }

    #[test]
    fn round_trip_is_exact() {
        for model in [OutcomeModel::Linear, OutcomeModel::Logistic] {
            let s = stream_with_batches(model, 3);
            let bytes = encode(&s);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, s);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn empty_stream_round_trips() {
        let s = stream_with_batches(OutcomeModel::Linear, 0);
        assert_eq!(decode(&encode(&s)).unwrap(), s);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode(&stream_with_batches(OutcomeModel::Linear, 2));
        for len in 0..bytes.len() {
            let err = decode(&bytes[..len]).unwrap_err();
            assert_eq!(err.exit_code(), 5, "length {len}: {err}");
        }
    }

    #[test]
    fn flipped_bits_are_rejected() {
        let bytes = encode(&stream_with_batches(OutcomeModel::Logistic, 2));
        for pos in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert_eq!(decode(&bad).unwrap_err().exit_code(), 5, "byte {pos}");
        }
    }

    #[test]
    fn other_versions_are_refused() {
        let mut bytes = encode(&stream_with_batches(OutcomeModel::Linear, 1));
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(Error::Version {
                found: 2,
                expected: FORMAT_VERSION
            })
        ));
    }

    #[test]
    fn save_is_atomic_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let s = stream_with_batches(OutcomeModel::Linear, 2);
        save_checkpoint(&s, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), s);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
