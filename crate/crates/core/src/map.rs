//! Dense H x W real-valued maps and their on-disk container.
//!
//! Container layout: the 8-byte magic `F32MAP\n\0`, an ASCII `"H W\n"`
//! header, then `H * W` little-endian `f32` values in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{shape_mismatch, Error, Result};

pub const MAGIC: &[u8; 8] = b"F32MAP\n\0";

#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FloatMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(shape_mismatch(&[height * width], &[data.len()]));
        }
        Ok(Self { height, width, data })
    }

    /// Like [`FloatMap::from_vec`] but also requires every value in `[0, 1]`.
    pub fn probabilities(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("probability value {v} outside [0, 1]")));
        }
        Self::from_vec(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FloatMap {
        FloatMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &FloatMap, f: impl Fn(f64, f64) -> f64) -> Result<FloatMap> {
        self.check_same_shape(other)?;
        Ok(FloatMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn check_same_shape(&self, other: &FloatMap) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_mismatch(&[self.height, self.width], &[other.height, other.width]));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        write!(w, "{} {}\n", self.height, self.width)?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut header = String::new();
        r.read_line(&mut header)?;
        let dims: Vec<usize> = header
            .trim_end_matches('\n')
            .split(' ')
            .map(|t| t.parse::<usize>().map_err(|_| Error::Format(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [height, width] = dims[..] else {
            return Err(Error::Format(format!("bad header {header:?}")));
        };
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != height * width * 4 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                height * width * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self { height, width, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }

    /// 8-bit binary PGM preview; values scaled by 255 and clamped.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        out
    }
}
