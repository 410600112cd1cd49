//! Dense row-major tensor container with SPTN binary I/O.
//!
//! SPTN layout (little-endian): magic `SPTN`, u16 version = 1, u8 dtype
//! code (0=f32, 1=f64, 2=u8), u8 rank, rank x u64 dims, row-major payload.
//! No padding, no checksum.

use std::io::{Read, Write};

use thiserror::Error;

const MAGIC: [u8; 4] = *b"SPTN";
const VERSION: u16 = 1;

/// Hard cap on element count when reading untrusted headers.
const MAX_ELEMENTS: u128 = 1 << 33;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {got} does not match shape product {want}")]
    ShapeMismatch { want: usize, got: usize },
    #[error("shape must have rank >= 1 with every dimension >= 1")]
    EmptyShape,
    #[error("bad magic bytes, not an SPTN stream")]
    BadMagic,
    #[error("unsupported SPTN version {0}")]
    UnknownVersion(u16),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("payload truncated: expected {want} bytes, got {got}")]
    TruncatedPayload { want: usize, got: usize },
    #[error("dimension product overflows platform limit")]
    DimOverflow,
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    U8,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
            Dtype::U8 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, TensorError> {
        match code {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            2 => Ok(Dtype::U8),
            other => Err(TensorError::UnknownDtype(other)),
        }
    }

    pub fn byte_width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Buffer {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl Buffer {
    fn len(&self) -> usize {
        match self {
            Buffer::F32(v) => v.len(),
            Buffer::F64(v) => v.len(),
            Buffer::U8(v) => v.len(),
        }
    }
}

/// Immutable dense tensor. All arithmetic downstream reads values as f64
/// regardless of storage dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Buffer,
}

fn checked_product(shape: &[usize]) -> Result<usize, TensorError> {
    let mut acc: u128 = 1;
    for &d in shape {
        acc = acc.checked_mul(d as u128).ok_or(TensorError::DimOverflow)?;
        if acc > MAX_ELEMENTS {
            return Err(TensorError::DimOverflow);
        }
    }
    Ok(acc as usize)
}

fn validate_shape(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(TensorError::EmptyShape);
    }
    checked_product(shape)
}

impl Tensor {
    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let want = validate_shape(&shape)?;
        if data.len() != want {
            return Err(TensorError::ShapeMismatch { want, got: data.len() });
        }
        Ok(Tensor { shape, data: Buffer::F32(data) })
    }

    pub fn from_f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let want = validate_shape(&shape)?;
        if data.len() != want {
            return Err(TensorError::ShapeMismatch { want, got: data.len() });
        }
        Ok(Tensor { shape, data: Buffer::F64(data) })
    }

    pub fn from_u8(shape: Vec<usize>, data: Vec<u8>) -> Result<Self, TensorError> {
        let want = validate_shape(&shape)?;
        if data.len() != want {
            return Err(TensorError::ShapeMismatch { want, got: data.len() });
        }
        Ok(Tensor { shape, data: Buffer::U8(data) })
    }

    pub fn zeros_f64(shape: Vec<usize>) -> Result<Self, TensorError> {
        let n = validate_shape(&shape)?;
        Ok(Tensor { shape, data: Buffer::F64(vec![0.0; n]) })
    }

    pub fn zeros_u8(shape: Vec<usize>) -> Result<Self, TensorError> {
        let n = validate_shape(&shape)?;
        Ok(Tensor { shape, data: Buffer::U8(vec![0; n]) })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            Buffer::F32(_) => Dtype::F32,
            Buffer::F64(_) => Dtype::F64,
            Buffer::U8(_) => Dtype::U8,
        }
    }

    /// Flat-index read, widened to f64.
    pub fn at(&self, idx: usize) -> f64 {
        match &self.data {
            Buffer::F32(v) => v[idx] as f64,
            Buffer::F64(v) => v[idx],
            Buffer::U8(v) => v[idx] as f64,
        }
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, &d) in index.iter().zip(&self.shape) {
            debug_assert!(*i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.at(self.offset(index))
    }

    /// Whole buffer widened to f64, in flat order.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            Buffer::F32(v) => v.iter().map(|&x| x as f64).collect(),
            Buffer::F64(v) => v.clone(),
            Buffer::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn as_f64_slice(&self) -> Option<&[f64]> {
        match &self.data {
            Buffer::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u8_slice(&self) -> Option<&[u8]> {
        match &self.data {
            Buffer::U8(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f32_slice(&self) -> Option<&[f32]> {
        match &self.data {
            Buffer::F32(v) => Some(v),
            _ => None,
        }
    }

    /// Sum over the flat buffer in a single fixed left-to-right order.
    pub fn sum(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.at(i);
        }
        acc
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Tensor, TensorError> {
        let want = validate_shape(&shape)?;
        if want != self.len() {
            return Err(TensorError::ShapeMismatch { want, got: self.len() });
        }
        Ok(Tensor { shape, data: self.data.clone() })
    }

    /// Serialize as SPTN. Returns the number of bytes written:
    /// 8 header + 8 * rank + payload.
    pub fn write<W: Write>(&self, sink: &mut W) -> Result<usize, TensorError> {
        sink.write_all(&MAGIC)?;
        sink.write_all(&VERSION.to_le_bytes())?;
        sink.write_all(&[self.dtype().code(), self.rank() as u8])?;
        for &d in &self.shape {
            sink.write_all(&(d as u64).to_le_bytes())?;
        }
        let payload = match &self.data {
            Buffer::F32(v) => {
                for x in v {
                    sink.write_all(&x.to_le_bytes())?;
                }
                v.len() * 4
            }
            Buffer::F64(v) => {
                for x in v {
                    sink.write_all(&x.to_le_bytes())?;
                }
                v.len() * 8
            }
            Buffer::U8(v) => {
                sink.write_all(v)?;
                v.len()
            }
        };
        Ok(8 + 8 * self.rank() + payload)
    }

    pub fn write_to_file(&self, path: &std::path::Path) -> Result<usize, TensorError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.write(&mut f)?;
        f.flush()?;
        Ok(n)
    }

    /// Deserialize an SPTN stream written by [`Tensor::write`].
    pub fn read<R: Read>(source: &mut R) -> Result<Tensor, TensorError> {
        let mut header = [0u8; 8];
        read_exact_or_truncated(source, &mut header, 8)?;
        if header[0..4] != MAGIC {
            return Err(TensorError::BadMagic);
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(TensorError::UnknownVersion(version));
        }
        let dtype = Dtype::from_code(header[6])?;
        let rank = header[7] as usize;
        if rank == 0 {
            return Err(TensorError::EmptyShape);
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut dim = [0u8; 8];
            read_exact_or_truncated(source, &mut dim, 8)?;
            let d = u64::from_le_bytes(dim);
            if d > MAX_ELEMENTS as u64 {
                return Err(TensorError::DimOverflow);
            }
            shape.push(d as usize);
        }
        let count = validate_shape(&shape)?;
        let want = count * dtype.byte_width();
        let mut payload = vec![0u8; want];
        read_exact_or_truncated(source, &mut payload, want)?;
        let data = match dtype {
            Dtype::F32 => Buffer::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            Dtype::F64 => Buffer::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::U8 => Buffer::U8(payload),
        };
        Ok(Tensor { shape, data })
    }

    pub fn read_from_file(path: &std::path::Path) -> Result<Tensor, TensorError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Tensor::read(&mut f)
    }
}

fn read_exact_or_truncated<R: Read>(
    source: &mut R,
    buf: &mut [u8],
    want: usize,
) -> Result<(), TensorError> {
    let mut got = 0;
    while got < want {
        let n = source.read(&mut buf[got..])?;
        if n == 0 {
            return Err(TensorError::TruncatedPayload { want, got });
        }
        got += n;
    }
    Ok(())
}
