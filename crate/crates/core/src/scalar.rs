//! Scalar abstraction: every numeric component of the crate is generic over
//! the floating-point type, so the same code runs in `f32` for training and
//! in `f64` for finite-difference gradient verification.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + ScalarOperand
    + LinalgScalar
    + Send
    + Sync
    + Debug
    + Display
    + 'static
{
    /// Type tag used by the checkpoint format.
    const DTYPE: &'static str;

    /// Append the little-endian byte representation of `xs` to `out`.
    fn write_le(xs: &[Self], out: &mut Vec<u8>);

    /// Parse little-endian bytes written by [`Scalar::write_le`].
    fn read_le(bytes: &[u8]) -> Option<Vec<Self>>;
}

/// Convert an `f64` literal or value into the generic scalar.
#[inline]
pub fn fl<F: Scalar>(v: f64) -> F {
    <F as FromPrimitive>::from_f64(v).expect("f64 conversion")
}

/// Widen a generic scalar to `f64` (for reporting and CSV output).
#[inline]
pub fn dbl<F: Scalar>(v: F) -> f64 {
    <F as ToPrimitive>::to_f64(&v).expect("f64 conversion")
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn write_le(xs: &[Self], out: &mut Vec<u8>) {
        out.reserve(xs.len() * 4);
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn read_le(bytes: &[u8]) -> Option<Vec<Self>> {
        if bytes.len() % 4 != 0 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn write_le(xs: &[Self], out: &mut Vec<u8>) {
        out.reserve(xs.len() * 8);
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn read_le(bytes: &[u8]) -> Option<Vec<Self>> {
        if bytes.len() % 8 != 0 {
            return None;
        }
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| {
                    f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
                })
                .collect(),
        )
    }
}
