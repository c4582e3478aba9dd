//! Text dataset format: one sample per line,
//! `<label>:<v1,1>,...,<v1,T>[;<v2,1>,...]`. Blank lines and lines starting
//! with `#` are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BenchmarkEntry, BenchmarkSuite, LabeledDataset, Split, TimeSeries};
use crate::{Error, Result};

/// File extension used inside suite directories.
pub const SUITE_EXTENSION: &str = "tsd";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Text,
}

struct RawDataset {
    samples: Vec<TimeSeries>,
    label_names: Vec<String>,
}

fn parse_raw(text: &str) -> Result<RawDataset> {
    let mut samples = Vec::new();
    let mut label_names = Vec::new();
    let mut n_variates: Option<usize> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, body) = line.split_once(':').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "missing ':' between label and values".into(),
        })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty label".into(),
            });
        }

        let mut rows = Vec::new();
        for variate in body.split(';') {
            let mut row = Vec::new();
            for tok in variate.split(',') {
                let tok = tok.trim();
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid number {tok:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { line: line_no });
                }
                row.push(v);
            }
            rows.push(row);
        }

        match n_variates {
            None => n_variates = Some(rows.len()),
            Some(expected) if expected != rows.len() => {
                return Err(Error::InconsistentVariates {
                    line: line_no,
                    expected,
                    found: rows.len(),
                })
            }
            _ => {}
        }
        let series = TimeSeries::new(rows).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        samples.push(series);
        label_names.push(label.to_string());
    }

    if samples.is_empty() {
        return Err(Error::Empty("no samples in input".into()));
    }
    Ok(RawDataset {
        samples,
        label_names,
    })
}

/// Assigns class ids in first-occurrence order, continuing an existing map.
fn remap(names: &[String], classes: &mut Vec<String>) -> Vec<usize> {
    let mut index: HashMap<String, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    names
        .iter()
        .map(|n| {
            *index.entry(n.clone()).or_insert_with(|| {
                classes.push(n.clone());
                classes.len() - 1
            })
        })
        .collect()
}

/// Parses dataset text; labels become contiguous ids in first-occurrence order.
pub fn parse_dataset(text: &str, name: &str, split: Split) -> Result<LabeledDataset> {
    let raw = parse_raw(text)?;
    let mut classes = Vec::new();
    let labels = remap(&raw.label_names, &mut classes);
    LabeledDataset::new(name, split, raw.samples, labels, classes)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Dataset name and split from a file stem such as `GunPoint_TRAIN`.
fn name_and_split(path: &Path) -> (String, Split) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let upper = stem.to_ascii_uppercase();
    if upper.ends_with("_TEST") {
        (stem[..stem.len() - 5].to_string(), Split::Test)
    } else if upper.ends_with("_TRAIN") {
        (stem[..stem.len() - 6].to_string(), Split::Train)
    } else {
        (stem, Split::Train)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<LabeledDataset> {
    let path = path.as_ref();
    match format {
        DatasetFormat::Text => {
            let (name, split) = name_and_split(path);
            parse_dataset(&read(path)?, &name, split)
        }
    }
}

/// Loads a train/test pair with one class map: train labels first, then any
/// label seen only in test.
pub fn load_split_pair(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
    name: &str,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = parse_raw(&read(train_path.as_ref())?)?;
    let test = parse_raw(&read(test_path.as_ref())?)?;
    let mut classes = Vec::new();
    let train_labels = remap(&train.label_names, &mut classes);
    let test_labels = remap(&test.label_names, &mut classes);
    Ok((
        LabeledDataset::new(name, Split::Train, train.samples, train_labels, classes.clone())?,
        LabeledDataset::new(name, Split::Test, test.samples, test_labels, classes)?,
    ))
}

/// Loads every `<Name>/<Name>_TRAIN.tsd` + `<Name>/<Name>_TEST.tsd` pair
/// under `dir`, sorted by name. Subdirectories without both files are
/// skipped.
pub fn load_suite(dir: impl AsRef<Path>) -> Result<BenchmarkSuite> {
    let dir = dir.as_ref();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut entries = Vec::new();
    for name in names {
        let train = dir.join(&name).join(format!("{name}_TRAIN.{SUITE_EXTENSION}"));
        let test = dir.join(&name).join(format!("{name}_TEST.{SUITE_EXTENSION}"));
        if !(train.is_file() && test.is_file()) {
            log::debug!("skipping {name}: missing train or test file");
            continue;
        }
        let (tr, te) = load_split_pair(&train, &test, &name)?;
        entries.push(BenchmarkEntry::new(tr, te)?);
    }
    Ok(BenchmarkSuite::new(entries))
}

/// Writes `dataset` to `<dir>/<name>/<name>_<SPLIT>.tsd` and returns the path.
pub fn write_suite_member(dir: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<std::path::PathBuf> {
    let sub = dir.as_ref().join(&dataset.name);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let split = match dataset.split {
        Split::Train => "TRAIN",
        Split::Test => "TEST",
    };
    let path = sub.join(format!("{}_{split}.{SUITE_EXTENSION}", dataset.name));
    fs::write(&path, write_dataset(dataset)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Serializes to the text format. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_dataset(dataset: &LabeledDataset) -> String {
    let mut out = String::new();
    for (series, label) in dataset.iter() {
        out.push_str(&dataset.classes()[label]);
        out.push(':');
        for (v, row) in series.variates().enumerate() {
            if v > 0 {
                out.push(';');
            }
            for (t, x) in row.iter().enumerate() {
                if t > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{x}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let ds = parse_dataset("0:1,2,3\n1:4,5,6\n", "m", Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.n_variates(), 1);
        assert_eq!(ds.samples()[0].len(), 3);
    }

    #[test]
    fn mixed_variates_rejected() {
        let err = parse_dataset("0:1,2\n1:1,2;3,4\n", "m", Split::Train).unwrap_err();
        assert!(matches!(err, Error::InconsistentVariates { line: 2, .. }));
        assert!(err.to_string().contains("inconsistent variate count"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_dataset("# header\n\n0:1,2\n1:1,x\n", "m", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse_dataset("0:1,2\n1 1,2\n", "m", Split::Train).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_dataset("0:1,inf\n1:1,2\n", "m", Split::Train).unwrap_err();
        assert!(matches!(err, Error::NonFinite { line: 1 }));
        let err = parse_dataset("0:1,NaN\n", "m", Split::Train).unwrap_err();
        assert!(matches!(err, Error::NonFinite { line: 1 }));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            parse_dataset("# nothing\n\n", "m", Split::Train),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn labels_remapped_in_first_occurrence_order() {
        let ds = parse_dataset(
            "cat:1\ndog:2\ncat:3\nbird:1e-3\n",
            "m",
            Split::Train,
        )
        .unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0, 2]);
        assert_eq!(ds.classes(), &["cat", "dog", "bird"]);
        assert_eq!(ds.samples()[3].variate(0), &[1e-3]);
    }

    #[test]
    fn split_from_file_stem() {
        assert_eq!(
            name_and_split(Path::new("/x/GunPoint_TEST.tsd")),
            ("GunPoint".to_string(), Split::Test)
        );
        assert_eq!(
            name_and_split(Path::new("GunPoint_TRAIN.tsd")),
            ("GunPoint".to_string(), Split::Train)
        );
    }

    #[test]
    fn split_pair_shares_classes() {
        let dir = tempfile::tempdir().unwrap();
        let tr = dir.path().join("a_TRAIN.tsd");
        let te = dir.path().join("a_TEST.tsd");
        std::fs::write(&tr, "x:1\ny:2\n").unwrap();
        std::fs::write(&te, "y:1\nz:2\n").unwrap();
        let (train, test) = load_split_pair(&tr, &te, "a").unwrap();
        assert_eq!(train.classes(), test.classes());
        assert_eq!(train.n_classes(), 3);
        assert_eq!(test.labels(), &[1, 2]);
    }

    fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
        (1usize..4, 2usize..12, 2usize..5).prop_flat_map(|(v, n, k)| {
            let sample = prop::collection::vec(
                prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..9),
                v..=v,
            )
            .prop_map(|rows| {
                let t = rows.iter().map(Vec::len).min().unwrap();
                rows.into_iter().map(|r| r[..t].to_vec()).collect::<Vec<_>>()
            });
            (
                prop::collection::vec(sample, n..=n),
                prop::collection::vec(0..k, n..=n),
                Just(k),
            )
        })
        .prop_map(|(rows, mut labels, k)| {
            labels[0] = 0;
            labels[1] = 1;
            let samples = rows.into_iter().map(|r| TimeSeries::new(r).unwrap()).collect();
            LabeledDataset::with_class_count("p", Split::Train, samples, labels, k).unwrap()
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(ds in arb_dataset()) {
            let back = parse_dataset(&write_dataset(&ds), "p", Split::Train).unwrap();
            prop_assert_eq!(back.samples(), ds.samples());
            for (i, &l) in ds.labels().iter().enumerate() {
                prop_assert_eq!(&back.classes()[back.labels()[i]], &ds.classes()[l]);
            }
        }
    }
}
