//! IDX image ingestion, binary-task extraction, average-pool downsampling
//! to qubit-sized feature vectors, label corruption, and a plain-text
//! dataset file format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::EncodedInput;
use crate::error::IngestError;
use crate::rng::{stream, STREAM_LABELS, STREAM_SPLIT};
use crate::train::{Dataset, Example};
use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Grayscale images with integer class labels, as stored in IDX files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImageSet {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, one `rows × cols` vector per image.
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl RawImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> std::result::Result<u32, IngestError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], IngestError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(IngestError::Truncated {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn check_magic(r: &mut Reader, expected: u32) -> std::result::Result<(), IngestError> {
    let found = r.u32()?;
    if found != expected {
        return Err(IngestError::BadMagic { found, expected });
    }
    Ok(())
}

/// Parses an IDX3 unsigned-byte image file: `(rows, cols, images)`.
pub fn parse_idx_images(
    bytes: &[u8],
) -> std::result::Result<(usize, usize, Vec<Vec<u8>>), IngestError> {
    let mut r = Reader { bytes, pos: 0 };
    check_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let size = rows * cols;
    let pixels = r.take(count * size)?;
    let images = if size == 0 {
        vec![Vec::new(); count]
    } else {
        pixels.chunks(size).map(<[u8]>::to_vec).collect()
    };
    Ok((rows, cols, images))
}

/// Parses an IDX1 unsigned-byte label file.
pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, IngestError> {
    let mut r = Reader { bytes, pos: 0 };
    check_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32()? as usize;
    Ok(r.take(count)?.to_vec())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<RawImageSet> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let (rows, cols, images) =
        parse_idx_images(&read_file(ip)?).map_err(|reason| Error::Ingest {
            path: ip.to_path_buf(),
            reason,
        })?;
    let labels = parse_idx_labels(&read_file(lp)?).map_err(|reason| Error::Ingest {
        path: lp.to_path_buf(),
        reason,
    })?;
    if images.len() != labels.len() {
        return Err(Error::Ingest {
            path: lp.to_path_buf(),
            reason: IngestError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            },
        });
    }
    Ok(RawImageSet {
        rows,
        cols,
        images,
        labels,
    })
}

/// Pooling grid `(grid_rows, grid_cols)` with `grid_rows·grid_cols = d`,
/// each side dividing the image side, as close to square as possible.
pub fn pooling_grid(d: usize, rows: usize, cols: usize) -> Result<(usize, usize)> {
    (1..=d)
        .rev()
        .filter(|gr| d.is_multiple_of(*gr))
        .map(|gr| (gr, d / gr))
        .find(|&(gr, gc)| gr <= gc && rows.is_multiple_of(gr) && cols.is_multiple_of(gc))
        .or_else(|| {
            (1..=d)
                .filter(|gr| d.is_multiple_of(*gr))
                .map(|gr| (gr, d / gr))
                .find(|&(gr, gc)| rows.is_multiple_of(gr) && cols.is_multiple_of(gc))
        })
        .ok_or_else(|| {
            Error::config(format!(
                "no {d}-cell pooling grid divides a {rows}×{cols} image"
            ))
        })
}

/// Block means over a `grid_rows × grid_cols` grid, scaled from `[0, 255]`
/// to `[0, π]`.
pub fn pool_features(pixels: &[u8], rows: usize, cols: usize, grid: (usize, usize)) -> Vec<f64> {
    let (gr, gc) = grid;
    let (bh, bw) = (rows / gr, cols / gc);
    let mut out = Vec::with_capacity(gr * gc);
    for i in 0..gr {
        for j in 0..gc {
            let mut sum = 0u64;
            for r in i * bh..(i + 1) * bh {
                for c in j * bw..(j + 1) * bw {
                    sum += u64::from(pixels[r * cols + c]);
                }
            }
            let mean = sum as f64 / (bh * bw) as f64;
            out.push((mean / 255.0 * std::f64::consts::PI).min(std::f64::consts::PI));
        }
    }
    out
}

/// Train and test sets for `class_a` (label `+1`) against `class_b`
/// (label `−1`), `d` pooled features each. The two sets are disjoint and each
/// holds `⌈m/2⌉` examples of `class_a` and `⌊m/2⌋` of `class_b`.
pub fn prepare_binary(
    raw: &RawImageSet,
    class_a: u8,
    class_b: u8,
    d: usize,
    m_train: usize,
    m_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if class_a == class_b {
        return Err(Error::config("the two classes must differ"));
    }
    if d == 0 || m_train == 0 || m_test == 0 {
        return Err(Error::config("d, m_train and m_test must be positive"));
    }
    let grid = pooling_grid(d, raw.rows, raw.cols)?;
    let mut rng = stream(seed, STREAM_SPLIT);
    let mut pick = |class: u8| -> Result<Vec<usize>> {
        let mut idx: Vec<usize> = (0..raw.len()).filter(|&i| raw.labels[i] == class).collect();
        let need = m_train.div_ceil(2) + m_test.div_ceil(2);
        if idx.len() < need {
            return Err(Error::Ingest {
                path: Default::default(),
                reason: IngestError::Insufficient(format!(
                    "class {class} has {} examples, need {need}",
                    idx.len()
                )),
            });
        }
        idx.shuffle(&mut rng);
        Ok(idx)
    };
    let a = pick(class_a)?;
    let b = pick(class_b)?;
    let example = |i: usize, y: f64| -> Result<Example> {
        let x = EncodedInput::new(pool_features(&raw.images[i], raw.rows, raw.cols, grid))?;
        Ok(Example { x, y })
    };
    let mut build = |offset_a: usize, offset_b: usize, m: usize| -> Result<Dataset> {
        let mut ex = Vec::with_capacity(m);
        for &i in &a[offset_a..offset_a + m.div_ceil(2)] {
            ex.push(example(i, 1.0)?);
        }
        for &i in &b[offset_b..offset_b + m / 2] {
            ex.push(example(i, -1.0)?);
        }
        ex.shuffle(&mut rng);
        Dataset::new(ex)
    };
    let train = build(0, 0, m_train)?;
    let test = build(m_train.div_ceil(2), m_train / 2, m_test)?;
    Ok((train, test))
}

/// Each label is, with probability `r`, replaced by a fresh uniform draw from
/// `{−1, +1}` (which may equal the original). Both random draws are taken for
/// every example, so for one seed the corrupted set at a larger `r` contains
/// that at a smaller `r`.
pub fn corrupt_labels(data: &Dataset, r: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::config(format!(
            "corruption probability {r} outside [0, 1]"
        )));
    }
    let mut rng = stream(seed, STREAM_LABELS);
    let ex = data
        .examples()
        .iter()
        .map(|e| {
            let u: f64 = rng.random();
            let coin: bool = rng.random();
            let y = if u < r {
                if coin {
                    1.0
                } else {
                    -1.0
                }
            } else {
                e.y
            };
            Example { x: e.x.clone(), y }
        })
        .collect();
    Dataset::new(ex)
}

/// Two noisy clusters in angle space: label `+1` around `π/4`, `−1` around
/// `3π/4` on every feature, with uniform jitter of half-width `spread`.
pub fn synthetic_clusters(d: usize, m: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if d == 0 || m == 0 {
        return Err(Error::config("d and m must be positive"));
    }
    let pi = std::f64::consts::PI;
    let mut rng = stream(seed, STREAM_SPLIT);
    let ex = (0..m)
        .map(|i| {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let centre = if y > 0.0 { pi / 4.0 } else { 3.0 * pi / 4.0 };
            let x = (0..d)
                .map(|_| (centre + spread * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, pi))
                .collect();
            Ok(Example {
                x: EncodedInput::new(x)?,
                y,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(ex)
}

/// CSV text: header `label,x0,…,x{d−1}`, one example per line, floats in
/// shortest round-trip form.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut s = String::from("label");
    for j in 0..data.dim() {
        let _ = write!(s, ",x{j}");
    }
    s.push('\n');
    for e in data.examples() {
        let _ = write!(s, "{}", e.y as i8);
        for v in e.x.features() {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn dataset_from_csv(text: &str) -> std::result::Result<Dataset, IngestError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| IngestError::Malformed("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"label") || cols.len() < 2 {
        return Err(IngestError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    let d = cols.len() - 1;
    let mut ex = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = |what: &str| IngestError::Malformed(format!("line {}: {what}", n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(bad("wrong field count"));
        }
        let y = match fields[0].trim() {
            "1" | "+1" => 1.0,
            "-1" => -1.0,
            _ => return Err(bad("label must be ±1")),
        };
        let x = fields[1..]
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| bad("feature is not a number"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let x = EncodedInput::new(x).map_err(|_| bad("feature outside [0, π]"))?;
        ex.push(Example { x, y });
    }
    Dataset::new(ex).map_err(|e| IngestError::Insufficient(e.to_string()))
}

pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_csv(data)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    dataset_from_csv(&text).map_err(|reason| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(count: u32, rows: u32, cols: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend((0..(count * rows * cols) as usize).map(fill));
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn parses_headers_exactly() {
        let (r, c, imgs) = parse_idx_images(&idx_images(3, 2, 5, |i| i as u8)).unwrap();
        assert_eq!((r, c, imgs.len()), (2, 5, 3));
        assert_eq!(imgs[1], (10..20).collect::<Vec<u8>>());
        assert_eq!(parse_idx_labels(&idx_labels(&[7, 1])).unwrap(), vec![7, 1]);
    }

    #[test]
    fn rejects_bad_files() {
        assert_eq!(
            parse_idx_images(&idx_labels(&[1])),
            Err(IngestError::BadMagic {
                found: LABEL_MAGIC,
                expected: IMAGE_MAGIC
            })
        );
        assert!(matches!(
            parse_idx_labels(&[]),
            Err(IngestError::Truncated { .. })
        ));
        let mut short = idx_images(2, 2, 2, |_| 0);
        short.pop();
        assert!(matches!(
            parse_idx_images(&short),
            Err(IngestError::Truncated { .. })
        ));
    }

    #[test]
    fn load_names_offending_file() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        fs::write(&img, idx_images(2, 2, 2, |_| 0)).unwrap();
        fs::write(&lab, idx_images(2, 2, 2, |_| 0)).unwrap();
        match load_idx(&img, &lab) {
            Err(Error::Ingest {
                path,
                reason: IngestError::BadMagic { .. },
            }) => {
                assert_eq!(path, lab)
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&lab, idx_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(
            load_idx(&img, &lab),
            Err(Error::Ingest {
                reason: IngestError::CountMismatch {
                    images: 2,
                    labels: 3
                },
                ..
            })
        ));
    }

    #[test]
    fn pooling_arithmetic() {
        assert_eq!(pooling_grid(4, 28, 28).unwrap(), (2, 2));
        assert_eq!(pooling_grid(1, 28, 28).unwrap(), (1, 1));
        assert_eq!(pooling_grid(2, 28, 28).unwrap(), (1, 2));
        assert!(pooling_grid(3, 28, 28).is_err());
        // 28×28 image: top-left quadrant 255, rest 0
        let px: Vec<u8> = (0..784)
            .map(|i| if i / 28 < 14 && i % 28 < 14 { 255 } else { 0 })
            .collect();
        let f = pool_features(&px, 28, 28, (2, 2));
        assert_eq!(f, vec![std::f64::consts::PI, 0.0, 0.0, 0.0]);
        assert_eq!(pool_features(&[0; 784], 28, 28, (2, 2)), vec![0.0; 4]);
    }

    fn raw(n_per_class: usize) -> RawImageSet {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            images.push(vec![(i % 256) as u8; 16]);
            labels.push((i % 2) as u8);
        }
        RawImageSet {
            rows: 4,
            cols: 4,
            images,
            labels,
        }
    }

    #[test]
    fn binary_splits_are_balanced_disjoint_and_seeded() {
        let raw = raw(20);
        let (tr, te) = prepare_binary(&raw, 0, 1, 4, 9, 10, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (9, 10));
        assert_eq!(tr.examples().iter().filter(|e| e.y > 0.0).count(), 5);
        assert_eq!(te.examples().iter().filter(|e| e.y > 0.0).count(), 5);
        // every raw image has a distinct pixel value, so features identify it
        let key = |e: &Example| (e.x[0] * 1e9) as i64;
        let train_keys: Vec<i64> = tr.examples().iter().map(key).collect();
        assert!(te.examples().iter().all(|e| !train_keys.contains(&key(e))));
        assert_eq!(prepare_binary(&raw, 0, 1, 4, 9, 10, 3).unwrap(), (tr, te));
        assert!(matches!(
            prepare_binary(&raw, 0, 1, 4, 30, 30, 3),
            Err(Error::Ingest {
                reason: IngestError::Insufficient(_),
                ..
            })
        ));
    }

    #[test]
    fn corruption() {
        let data = synthetic_clusters(2, 4000, 0.3, 1).unwrap();
        assert_eq!(corrupt_labels(&data, 0.0, 5).unwrap(), data);
        assert!(corrupt_labels(&data, 1.5, 5).is_err());
        let r = 0.4;
        let c = corrupt_labels(&data, r, 5).unwrap();
        let flips = data
            .examples()
            .iter()
            .zip(c.examples())
            .filter(|(a, b)| a.y != b.y)
            .count();
        let m = data.len() as f64;
        let sd = (m * r / 2.0 * (1.0 - r / 2.0)).sqrt();
        assert!(
            (flips as f64 - m * r / 2.0).abs() < 3.0 * sd,
            "flips {flips}"
        );
    }

    #[test]
    fn csv_round_trip() {
        let data = synthetic_clusters(3, 7, 0.5, 2).unwrap();
        let text = dataset_to_csv(&data);
        assert!(text.starts_with("label,x0,x1,x2\n"));
        assert_eq!(dataset_from_csv(&text).unwrap(), data);
        assert!(dataset_from_csv("label,x0\n2,0.1\n").is_err());
        assert!(dataset_from_csv("").is_err());
    }
}
