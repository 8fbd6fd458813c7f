//! Scalar abstraction over the two supported element types.
//!
//! All kernels run in `real32` (f32) for normal inference and `real64` (f64)
//! for verification. Accumulations always happen in f64 regardless of the
//! element type, so the two modes differ only in storage rounding.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    Real32,
    Real64,
}

impl Dtype {
    pub fn tag(self) -> u8 {
        match self {
            Dtype::Real32 => 0,
            Dtype::Real64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Dtype::Real32),
            1 => Some(Dtype::Real64),
            _ => None,
        }
    }

    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::Real32 => 4,
            Dtype::Real64 => 8,
        }
    }
}

pub trait Real:
    num_traits::Float + rustfft::FftNum + std::fmt::Debug + Send + Sync + 'static
{
    const DTYPE: Dtype;

    fn from_f(x: f64) -> Self;
    fn to_f(self) -> f64;

    fn to_le_bytes_vec(self) -> Vec<u8>;
    fn from_le_slice(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const DTYPE: Dtype = Dtype::Real32;

    fn from_f(x: f64) -> Self {
        x as f32
    }
    fn to_f(self) -> f64 {
        self as f64
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Real for f64 {
    const DTYPE: Dtype = Dtype::Real64;

    fn from_f(x: f64) -> Self {
        x
    }
    fn to_f(self) -> f64 {
        self
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
    fn from_le_slice(bytes: &[u8]) -> Self {
        f64::from_le_bytes([
            bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7],
        ])
    }
}
