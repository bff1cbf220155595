//! On-disk IO: IDX files (optionally gzipped), atomic writes, CSV output.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sotnn_core::data::{parse_idx_images, parse_idx_labels, Dataset, IdxImages, IdxLabels, Split};
use sotnn_core::train::EpochMetrics;

use crate::CliError;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Reads a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, CliError> {
    let raw = fs::read(path).map_err(|e| CliError::data(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| CliError::data(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// `dir/name`, or `dir/name.gz` when only the compressed file exists.
pub fn resolve(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(CliError::data(plain, "no such file (also tried .gz)"))
}

pub fn load_images(path: &Path) -> Result<IdxImages, CliError> {
    parse_idx_images(&read_maybe_gz(path)?).map_err(|e| CliError::data(path, e))
}

pub fn load_labels(path: &Path) -> Result<IdxLabels, CliError> {
    parse_idx_labels(&read_maybe_gz(path)?).map_err(|e| CliError::data(path, e))
}

fn load_split(dir: &Path, images: &str, labels: &str) -> Result<Split, CliError> {
    let ipath = resolve(dir, images)?;
    let lpath = resolve(dir, labels)?;
    let img = load_images(&ipath)?;
    let lab = load_labels(&lpath)?;
    if img.count != lab.count() {
        return Err(CliError::data(
            lpath,
            format!("{} labels for {} images", lab.count(), img.count),
        ));
    }
    Split::from_idx(&img, &lab).map_err(|e| CliError::data(dir, e))
}

/// Loads the four standard MNIST files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset {
        train: load_split(dir, TRAIN_IMAGES, TRAIN_LABELS)?,
        test: load_split(dir, TEST_IMAGES, TEST_LABELS)?,
    })
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("persist {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub const METRICS_HEADER: [&str; 4] = ["epoch", "train_acc", "test_acc", "mean_loss"];

pub fn metrics_csv(rows: &[EpochMetrics]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(METRICS_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.train_acc.to_string(),
            r.test_acc.to_string(),
            r.mean_loss.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

/// Serializes `(header, rows)` to CSV bytes.
pub fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: &[Vec<S>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;

    #[test]
    fn gzip_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let img = IdxImages {
            count: 2,
            rows: 2,
            cols: 3,
            pixels: (0..12).collect(),
        };
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&img.to_bytes()).unwrap();
        let gz = dir.path().join(format!("{TRAIN_IMAGES}.gz"));
        fs::write(&gz, enc.finish().unwrap()).unwrap();
        let found = resolve(dir.path(), TRAIN_IMAGES).unwrap();
        assert_eq!(found, gz);
        assert_eq!(load_images(&found).unwrap(), img);
    }

    #[test]
    fn missing_and_corrupt_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(resolve(dir.path(), TEST_LABELS), Err(CliError::Data { .. })));
        let p = dir.path().join(TEST_LABELS);
        fs::write(&p, [0, 0, 8, 1, 0, 0, 0, 5, 1]).unwrap();
        assert!(matches!(load_labels(&p), Err(CliError::Data { .. })));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.csv");
        write_atomic(&p, b"a,b\n1,2\n").unwrap();
        write_atomic(&p, b"a,b\n3,4\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"a,b\n3,4\n");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn metrics_csv_layout() {
        let rows = [EpochMetrics {
            epoch: 1,
            train_acc: 0.5,
            test_acc: 0.25,
            mean_loss: 3.0,
        }];
        let text = String::from_utf8(metrics_csv(&rows).unwrap()).unwrap();
        assert_eq!(text, "epoch,train_acc,test_acc,mean_loss\n1,0.5,0.25,3\n");
        let empty = String::from_utf8(metrics_csv(&[]).unwrap()).unwrap();
        assert_eq!(empty, "epoch,train_acc,test_acc,mean_loss\n");
    }
}
