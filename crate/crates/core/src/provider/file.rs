//! Hidden-state interchange files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! u32 header_len | header_len bytes of UTF-8 JSON header
//! payload: for sample, for variate, for layer:
//!     u32 seq_len | seq_len * D_l f32 values, row-major
//! u32 CRC32 of the payload bytes
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, FileSpec, HiddenStates, Matrix, SeriesRef, SeriesView};
use crate::dataset::{LabeledDataset, Split};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeHeader {
    pub format_version: u32,
    pub model_id: String,
    pub dataset: String,
    pub split: Split,
    #[serde(rename = "N")]
    pub n_samples: usize,
    #[serde(rename = "V")]
    pub n_variates: usize,
    #[serde(rename = "L")]
    pub n_layers: usize,
    pub dims: Vec<usize>,
    pub dtype: String,
    pub endianness: String,
}

impl InterchangeHeader {
    pub fn new(
        model_id: &str,
        dataset: &str,
        split: Split,
        n_samples: usize,
        n_variates: usize,
        dims: Vec<usize>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            model_id: model_id.to_string(),
            dataset: dataset.to_string(),
            split,
            n_samples,
            n_variates,
            n_layers: dims.len(),
            dims,
            dtype: "f32".into(),
            endianness: "little".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.dtype != "f32" || self.endianness != "little" {
            return Err(Error::invalid(format!(
                "unsupported encoding {}/{}",
                self.dtype, self.endianness
            )));
        }
        if self.n_layers == 0 || self.dims.len() != self.n_layers || self.dims.contains(&0) {
            return Err(Error::shape(format!(
                "header declares L={} with dims {:?}",
                self.n_layers, self.dims
            )));
        }
        if self.n_variates == 0 {
            return Err(Error::shape("header declares V=0"));
        }
        Ok(())
    }
}

/// Decoded file: `samples[i][v]` holds the states of variate `v` of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateFile {
    pub header: InterchangeHeader,
    pub samples: Vec<Vec<HiddenStates>>,
}

impl HiddenStateFile {
    pub fn get(&self, sample: usize, variate: usize) -> Result<&HiddenStates> {
        let per_sample = self.samples.get(sample).ok_or(Error::SampleOutOfRange {
            requested: sample,
            available: self.samples.len(),
        })?;
        per_sample.get(variate).ok_or(Error::VariateOutOfRange {
            requested: variate,
            available: per_sample.len(),
        })
    }
}

pub fn interchange_path(dir: &Path, dataset: &str, split: Split, view: SeriesView) -> PathBuf {
    match view {
        SeriesView::Raw => dir.join(format!("{dataset}_{split}.tshs")),
        SeriesView::Differenced => dir.join(format!("{dataset}_{split}.diff.tshs")),
    }
}

fn encode(header: &InterchangeHeader, samples: &[Vec<HiddenStates>]) -> Result<Vec<u8>> {
    header.validate()?;
    if samples.len() != header.n_samples {
        return Err(Error::shape(format!(
            "header says N={} but {} samples given",
            header.n_samples,
            samples.len()
        )));
    }
    let mut payload = Vec::new();
    for (i, variates) in samples.iter().enumerate() {
        if variates.len() != header.n_variates {
            return Err(Error::shape(format!(
                "sample {i} has {} variates, header says {}",
                variates.len(),
                header.n_variates
            )));
        }
        for states in variates {
            if states.widths() != header.dims {
                return Err(Error::shape(format!(
                    "sample {i} has widths {:?}, header says {:?}",
                    states.widths(),
                    header.dims
                )));
            }
            for layer in states.layers() {
                let seq = u32::try_from(layer.rows())
                    .map_err(|_| Error::shape("sequence length exceeds u32"))?;
                payload.extend_from_slice(&seq.to_le_bytes());
                for &v in layer.as_slice() {
                    payload.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }

    let json = serde_json::to_vec(header)?;
    let header_len =
        u32::try_from(json.len()).map_err(|_| Error::shape("header exceeds u32 length"))?;
    let mut out = Vec::with_capacity(8 + json.len() + payload.len());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

/// Writes an interchange file atomically (temp file + rename).
pub fn write_hidden_states(
    path: impl AsRef<Path>,
    header: &InterchangeHeader,
    samples: &[Vec<HiddenStates>],
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(header, samples)?;
    let tmp = path.with_extension("tshs.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::shape("payload shorter than its header implies"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_hidden_states(bytes: &[u8]) -> Result<HiddenStateFile> {
    if bytes.len() < 8 {
        return Err(Error::shape("file too short for header and checksum"));
    }
    let header_len = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let payload_start = 4usize
        .checked_add(header_len)
        .filter(|&s| s + 4 <= bytes.len())
        .ok_or_else(|| Error::shape("header length exceeds file size"))?;
    let header: InterchangeHeader = serde_json::from_slice(&bytes[4..payload_start])?;
    header.validate()?;

    let payload_end = bytes.len() - 4;
    let payload = &bytes[payload_start..payload_end];
    let stored = u32::from_le_bytes(bytes[payload_end..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut cur = Cursor {
        bytes: payload,
        pos: 0,
    };
    let mut samples = Vec::with_capacity(header.n_samples);
    for _ in 0..header.n_samples {
        let mut variates = Vec::with_capacity(header.n_variates);
        for _ in 0..header.n_variates {
            let mut layers = Vec::with_capacity(header.n_layers);
            for &d in &header.dims {
                let seq = cur.u32()? as usize;
                let raw = cur.take(seq.checked_mul(d).and_then(|n| n.checked_mul(4)).ok_or_else(
                    || Error::shape("layer size overflows"),
                )?)?;
                let data = raw
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                    .collect();
                layers.push(Matrix::new(seq, d, data)?);
            }
            variates.push(HiddenStates::new(layers)?);
        }
        samples.push(variates);
    }
    if cur.pos != payload.len() {
        return Err(Error::shape(format!(
            "{} trailing payload bytes",
            payload.len() - cur.pos
        )));
    }
    Ok(HiddenStateFile { header, samples })
}

pub fn read_hidden_states(path: impl AsRef<Path>) -> Result<HiddenStateFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_hidden_states(&bytes)
}

/// One-shot lookup that reads the file on every call. Use [`FileProvider`]
/// for repeated access.
pub fn file_extract(
    dataset: &str,
    split: Split,
    sample: usize,
    variate: usize,
    spec: &FileSpec,
) -> Result<HiddenStates> {
    let file = read_hidden_states(interchange_path(&spec.dir, dataset, split, SeriesView::Raw))?;
    file.get(sample, variate).cloned()
}

/// Serves hidden states from interchange files in one directory. Decoded files
/// are cached after first use.
pub struct FileProvider {
    spec: FileSpec,
    cache: Mutex<HashMap<PathBuf, Arc<HiddenStateFile>>>,
}

impl FileProvider {
    pub fn new(spec: FileSpec) -> Self {
        Self {
            spec,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn load(&self, path: PathBuf) -> Result<Arc<HiddenStateFile>> {
        if let Some(f) = self.cache.lock().expect("cache poisoned").get(&path) {
            return Ok(Arc::clone(f));
        }
        // decode outside the lock; a racing thread may decode the same file twice
        let file = Arc::new(read_hidden_states(&path)?);
        let mut cache = self.cache.lock().expect("cache poisoned");
        Ok(Arc::clone(cache.entry(path).or_insert(file)))
    }
}

impl EmbeddingProvider for FileProvider {
    fn model_id(&self) -> &str {
        &self.spec.model_id
    }

    fn hidden_states(&self, at: &SeriesRef<'_>, variate: usize, _values: &[f64]) -> Result<HiddenStates> {
        let file = self.load(interchange_path(&self.spec.dir, at.dataset, at.split, at.view))?;
        file.get(at.sample, variate).cloned()
    }
}

/// Runs `provider` over every variate of every sample of `dataset` and writes
/// the interchange file for `view` into `dir`.
pub fn export_hidden_states(
    dataset: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    view: SeriesView,
    dir: &Path,
) -> Result<PathBuf> {
    let mut samples = Vec::with_capacity(dataset.len());
    for (i, series) in dataset.samples().iter().enumerate() {
        let source = match view {
            SeriesView::Raw => series.clone(),
            SeriesView::Differenced => crate::augment::difference(series)?,
        };
        let at = SeriesRef::raw(&dataset.name, dataset.split, i).with_view(view);
        let states = source
            .variates()
            .enumerate()
            .map(|(v, values)| provider.hidden_states(&at, v, values))
            .collect::<Result<Vec<_>>>()?;
        samples.push(states);
    }
    let dims = samples[0][0].widths();
    let header = InterchangeHeader::new(
        provider.model_id(),
        &dataset.name,
        dataset.split,
        dataset.len(),
        dataset.n_variates(),
        dims,
    );
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = interchange_path(dir, &dataset.name, dataset.split, view);
    write_hidden_states(&path, &header, &samples)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(seq: &[usize], dims: &[usize], offset: f64) -> HiddenStates {
        HiddenStates::new(
            seq.iter()
                .zip(dims)
                .map(|(&s, &d)| {
                    Matrix::new(s, d, (0..s * d).map(|k| offset + k as f64 * 0.1).collect())
                        .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn sample_file() -> (InterchangeHeader, Vec<Vec<HiddenStates>>) {
        let dims = vec![3, 2];
        let samples = vec![
            vec![states(&[2, 1], &dims, 0.0), states(&[2, 1], &dims, 1.0)],
            vec![states(&[5, 3], &dims, -2.0), states(&[1, 1], &dims, 0.5)],
        ];
        (InterchangeHeader::new("m", "ds", Split::Test, 2, 2, dims), samples)
    }

    fn to_f32(h: &HiddenStates) -> Vec<f64> {
        h.layers()
            .iter()
            .flat_map(|m| m.as_slice().iter().map(|&v| f64::from(v as f32)))
            .collect()
    }

    fn flat(h: &HiddenStates) -> Vec<f64> {
        h.layers().iter().flat_map(|m| m.as_slice().to_vec()).collect()
    }

    #[test]
    fn round_trip_at_f32_precision() {
        let (header, samples) = sample_file();
        let back = decode_hidden_states(&encode(&header, &samples).unwrap()).unwrap();
        assert_eq!(back.header, header);
        for (a, b) in samples.iter().flatten().zip(back.samples.iter().flatten()) {
            assert_eq!(a.widths(), b.widths());
            assert_eq!(to_f32(a), flat(b));
        }
    }

    #[test]
    fn truncated_payload_fails_checksum() {
        let (header, samples) = sample_file();
        let bytes = encode(&header, &samples).unwrap();
        let err = decode_hidden_states(&bytes[..bytes.len() - 7]).unwrap_err();
        assert!(matches!(err, Error::Checksum { .. }), "{err}");
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let (header, samples) = sample_file();
        let mut bytes = encode(&header, &samples).unwrap();
        let n = bytes.len();
        bytes[n - 10] ^= 0x40;
        assert!(matches!(
            decode_hidden_states(&bytes),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn header_shape_mismatch_detected() {
        let (mut header, samples) = sample_file();
        header.dims = vec![3, 3];
        assert!(matches!(encode(&header, &samples), Err(Error::Shape(_))));

        // valid checksum but payload shorter than the header claims
        let (header, samples) = sample_file();
        let good = encode(&header, &samples).unwrap();
        let mut lying = header.clone();
        lying.n_samples = 3;
        let json = serde_json::to_vec(&lying).unwrap();
        let old_len = u32::from_le_bytes(good[..4].try_into().unwrap()) as usize;
        let mut bytes = (json.len() as u32).to_le_bytes().to_vec();
        bytes.extend_from_slice(&json);
        bytes.extend_from_slice(&good[4 + old_len..]);
        assert!(matches!(decode_hidden_states(&bytes), Err(Error::Shape(_))));
    }

    #[test]
    fn file_extract_and_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let (header, samples) = sample_file();
        let path = interchange_path(dir.path(), "ds", Split::Test, SeriesView::Raw);
        write_hidden_states(&path, &header, &samples).unwrap();
        let spec = FileSpec {
            model_id: "m".into(),
            dir: dir.path().to_path_buf(),
        };
        let h = file_extract("ds", Split::Test, 1, 0, &spec).unwrap();
        assert_eq!(flat(&h), to_f32(&samples[1][0]));
        assert!(matches!(
            file_extract("ds", Split::Test, 0, 2, &spec),
            Err(Error::VariateOutOfRange { requested: 2, available: 2 })
        ));
        assert!(matches!(
            file_extract("ds", Split::Test, 5, 0, &spec),
            Err(Error::SampleOutOfRange { .. })
        ));
        assert!(matches!(
            file_extract("missing", Split::Test, 0, 0, &spec),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn header_json_uses_exact_keys() {
        let (header, _) = sample_file();
        let v: serde_json::Value = serde_json::to_value(&header).unwrap();
        for key in [
            "format_version",
            "model_id",
            "dataset",
            "split",
            "N",
            "V",
            "L",
            "dims",
            "dtype",
            "endianness",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["dtype"], "f32");
        assert_eq!(v["endianness"], "little");
    }
}
