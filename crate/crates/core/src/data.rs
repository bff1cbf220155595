//! IDX container parsing, `/255` normalization and seeded batching.
//!
//! Both container types use a big-endian header: a 32-bit magic number
//! followed by one 32-bit size per dimension, then unsigned bytes.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major per image, images back to back.
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

impl IdxLabels {
    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

struct Header<'a> {
    dims: [usize; 3],
    payload: &'a [u8],
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::IdxLength {
            expected: at + 4,
            actual: bytes.len(),
        })
}

fn parse_header(bytes: &[u8], magic: u32, ndims: usize) -> Result<Header<'_>> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::IdxMagic { expected: magic, found });
    }
    let mut dims = [1usize; 3];
    let mut total = 1usize;
    for (i, d) in dims.iter_mut().take(ndims).enumerate() {
        *d = read_u32(bytes, 4 + 4 * i)? as usize;
        total = total.checked_mul(*d).ok_or(Error::IdxOverflow)?;
    }
    let header_len = 4 + 4 * ndims;
    let payload = &bytes[header_len..];
    if payload.len() != total {
        return Err(Error::IdxLength {
            expected: total,
            actual: payload.len(),
        });
    }
    Ok(Header { dims, payload })
}

/// Parses an `idx3-ubyte` image file. The payload length must match the
/// header exactly.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let h = parse_header(bytes, IMAGES_MAGIC, 3)?;
    Ok(IdxImages {
        count: h.dims[0],
        rows: h.dims[1],
        cols: h.dims[2],
        pixels: h.payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<IdxLabels> {
    let h = parse_header(bytes, LABELS_MAGIC, 1)?;
    if let Some((index, &label)) = h.payload.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
        return Err(Error::IdxLabel { index, label });
    }
    Ok(IdxLabels {
        labels: h.payload.to_vec(),
    })
}

impl IdxImages {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGES_MAGIC, self.count as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl IdxLabels {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// `count × (rows·cols)` matrix with every pixel scaled by `1/255`.
pub fn normalize(images: &IdxImages) -> Matrix {
    let data = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Matrix::from_vec(images.count, images.image_len(), data).expect("pixel count matches header")
}

/// Normalized inputs with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    inputs: Matrix,
    labels: Vec<u8>,
}

impl Split {
    pub fn new(inputs: Matrix, labels: Vec<u8>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Dimension {
                expected: inputs.rows(),
                actual: labels.len(),
                context: "label count vs image count",
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_idx(images: &IdxImages, labels: &IdxLabels) -> Result<Self> {
        Self::new(normalize(images), labels.labels.clone())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    /// First `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
}

pub fn one_hot(label: u8, classes: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; classes];
    v[label as usize] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub inputs: Matrix,
    /// One-hot, `len × NUM_CLASSES`.
    pub targets: Matrix,
}

/// Sample order for one epoch: a permutation drawn from `(seed, epoch)`.
pub fn epoch_order(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch.wrapping_add(crate::train::SHUFFLE_STREAM_BASE));
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Seeded mini-batches for one epoch; the final short batch is kept.
pub fn batches(split: &Split, batch_size: usize, seed: u64, epoch: u64) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1"));
    }
    Ok(Batches {
        split,
        order: epoch_order(split.len(), seed, epoch),
        batch_size,
        pos: 0,
    })
}

pub struct Batches<'a> {
    split: &'a Split,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        let inputs = self.split.inputs.select_rows(&indices);
        let targets = Matrix::from_fn(indices.len(), NUM_CLASSES, |r, c| {
            if self.split.labels[indices[r]] as usize == c {
                1.0
            } else {
                0.0
            }
        });
        Some(Batch {
            indices,
            inputs,
            targets,
        })
    }
}
