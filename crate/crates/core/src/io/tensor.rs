//! Minimal binary tensor container.
//!
//! Layout: `b"MAPT"`, version `u8` (1), dtype `u8` (1 = f32, 2 = u8), ndim
//! `u8`, `ndim` little-endian `u32` dims, then the row-major little-endian
//! payload.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"MAPT";
pub const VERSION: u8 = 1;
const DTYPE_F32: u8 = 1;
const DTYPE_U8: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> u8 {
        match self {
            TensorData::F32(_) => DTYPE_F32,
            TensorData::U8(_) => DTYPE_U8,
        }
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::U8(_) => "u8",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "{} dims exceed the container limit",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|d| **d > u32::MAX as usize) {
            return Err(Error::InvalidArgument(format!("dim {d} exceeds u32")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} hold {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.data.dtype());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    /// Parses a container; the error string names the first violation.
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 7 {
            return Err(format!("truncated header ({} bytes)", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err("bad magic".into());
        }
        if bytes[4] != VERSION {
            return Err(format!("unsupported version {}", bytes[4]));
        }
        let (dtype, ndim) = (bytes[5], bytes[6] as usize);
        let header = 7 + 4 * ndim;
        if bytes.len() < header {
            return Err("truncated dims".into());
        }
        let dims: Vec<usize> = bytes[7..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let n = dims
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or("dims overflow")?;
        let payload = &bytes[header..];
        let data = match dtype {
            DTYPE_F32 => {
                if Some(payload.len()) != n.checked_mul(4) {
                    return Err(format!(
                        "payload {} bytes, expected {} f32 values",
                        payload.len(),
                        n
                    ));
                }
                TensorData::F32(
                    payload
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                )
            }
            DTYPE_U8 => {
                if payload.len() != n {
                    return Err(format!(
                        "payload {} bytes, expected {n} u8 values",
                        payload.len()
                    ));
                }
                TensorData::U8(payload.to_vec())
            }
            other => return Err(format!("unknown dtype {other}")),
        };
        Ok(Self { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_f64_grid(g: &Grid<f64>) -> Self {
        let data = g.iter().map(|v| *v as f32).collect();
        Self {
            dims: vec![g.height(), g.width()],
            data: TensorData::F32(data),
        }
    }

    pub fn from_vec3_grid(g: &Grid<Vec3>) -> Self {
        let data = g
            .iter()
            .flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])
            .collect();
        Self {
            dims: vec![g.height(), g.width(), 3],
            data: TensorData::F32(data),
        }
    }

    pub fn from_bool_grid(g: &Grid<bool>) -> Self {
        Self {
            dims: vec![g.height(), g.width()],
            data: TensorData::U8(g.iter().map(|b| u8::from(*b)).collect()),
        }
    }

    pub fn from_rgb_grid(g: &Grid<[u8; 3]>) -> Self {
        Self {
            dims: vec![g.height(), g.width(), 3],
            data: TensorData::U8(g.iter().flatten().copied().collect()),
        }
    }

    fn expect_dims(&self, want: &[usize]) -> std::result::Result<(), String> {
        if self.dims == want {
            Ok(())
        } else {
            Err(format!("dims {:?}, expected {want:?}", self.dims))
        }
    }

    fn expect_f32(&self) -> std::result::Result<&[f32], String> {
        match &self.data {
            TensorData::F32(v) => Ok(v),
            d => Err(format!("dtype {}, expected f32", d.dtype_name())),
        }
    }

    fn expect_u8(&self) -> std::result::Result<&[u8], String> {
        match &self.data {
            TensorData::U8(v) => Ok(v),
            d => Err(format!("dtype {}, expected u8", d.dtype_name())),
        }
    }

    pub fn to_f64_grid(&self, w: usize, h: usize) -> std::result::Result<Grid<f64>, String> {
        self.expect_dims(&[h, w])?;
        let v = self.expect_f32()?.iter().map(|x| f64::from(*x)).collect();
        Grid::from_vec(w, h, v).map_err(|e| e.to_string())
    }

    pub fn to_vec3_grid(&self, w: usize, h: usize) -> std::result::Result<Grid<Vec3>, String> {
        self.expect_dims(&[h, w, 3])?;
        let v = self
            .expect_f32()?
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0].into(), c[1].into(), c[2].into()))
            .collect();
        Grid::from_vec(w, h, v).map_err(|e| e.to_string())
    }

    /// Accepts only 0/1 values.
    pub fn to_bool_grid(&self, w: usize, h: usize) -> std::result::Result<Grid<bool>, String> {
        self.expect_dims(&[h, w])?;
        let v = self
            .expect_u8()?
            .iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                x => Err(format!("boolean tensor holds {x}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Grid::from_vec(w, h, v).map_err(|e| e.to_string())
    }

    pub fn to_rgb_grid(&self, w: usize, h: usize) -> std::result::Result<Grid<[u8; 3]>, String> {
        self.expect_dims(&[h, w, 3])?;
        let v = self
            .expect_u8()?
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Grid::from_vec(w, h, v).map_err(|e| e.to_string())
    }
}
