use serde::Serialize;

use super::scalar::{FixedScalar, Precision};
use super::FixedError;

/// A vector of grid elements sharing one precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FixedVector {
    precision: Precision,
    raw: Vec<i64>,
}

impl FixedVector {
    pub fn zeros(precision: Precision, len: usize) -> Self {
        Self { precision, raw: vec![0; len] }
    }

    pub fn from_raw(precision: Precision, raw: Vec<i64>) -> Result<Self, FixedError> {
        for &k in &raw {
            precision.scalar(k)?;
        }
        Ok(Self { precision, raw })
    }

    pub fn from_scalars(precision: Precision, xs: &[FixedScalar]) -> Self {
        let raw = xs
            .iter()
            .map(|x| {
                assert_eq!(x.precision(), precision);
                x.raw()
            })
            .collect();
        Self { precision, raw }
    }

    pub fn from_ints(precision: Precision, xs: &[i64]) -> Self {
        Self {
            precision,
            raw: xs.iter().map(|&v| precision.from_int(v).raw()).collect(),
        }
    }

    #[inline]
    pub fn precision(&self) -> Precision {
        self.precision
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> FixedScalar {
        // entries are validated on construction
        self.precision.saturate(self.raw[i] as i128)
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: FixedScalar) {
        assert_eq!(v.precision(), self.precision);
        self.raw[i] = v.raw();
    }

    pub fn raw(&self) -> &[i64] {
        &self.raw
    }

    pub fn iter(&self) -> impl Iterator<Item = FixedScalar> + '_ {
        (0..self.raw.len()).map(move |i| self.get(i))
    }

    pub fn is_zero(&self) -> bool {
        self.raw.iter().all(|&k| k == 0)
    }

    /// Coordinate-wise `[a_r + b_r]_s`.
    pub fn add_s(&self, other: &Self) -> Result<Self, FixedError> {
        self.zip_with(other, FixedScalar::add_s)
    }

    /// Coordinate-wise `[a_r · b_r]_s`.
    pub fn hadamard_s(&self, other: &Self) -> Result<Self, FixedError> {
        self.zip_with(other, FixedScalar::mul_s)
    }

    pub fn relu(&self) -> Self {
        Self {
            precision: self.precision,
            raw: self.raw.iter().map(|&k| k.max(0)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(FixedScalar, FixedScalar) -> FixedScalar,
    ) -> Result<Self, FixedError> {
        if self.len() != other.len() {
            return Err(FixedError::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let raw = self
            .iter()
            .zip(other.iter())
            .map(|(a, b)| f(a, b).raw())
            .collect();
        Ok(Self { precision: self.precision, raw })
    }

    pub fn concat(precision: Precision, parts: &[FixedVector]) -> Self {
        let mut raw = Vec::with_capacity(parts.iter().map(FixedVector::len).sum());
        for part in parts {
            assert_eq!(part.precision, precision);
            raw.extend_from_slice(&part.raw);
        }
        Self { precision, raw }
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            precision: self.precision,
            raw: self.raw[start..start + len].to_vec(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.iter().map(FixedScalar::to_f64).collect()
    }
}

impl Serialize for FixedVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

/// Row-major matrix of grid elements sharing one precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FixedMatrix {
    precision: Precision,
    rows: usize,
    cols: usize,
    raw: Vec<i64>,
}

impl FixedMatrix {
    pub fn zeros(precision: Precision, rows: usize, cols: usize) -> Self {
        Self {
            precision,
            rows,
            cols,
            raw: vec![0; rows * cols],
        }
    }

    pub fn from_raw(
        precision: Precision,
        rows: usize,
        cols: usize,
        raw: Vec<i64>,
    ) -> Result<Self, FixedError> {
        if raw.len() != rows * cols {
            return Err(FixedError::DimensionMismatch {
                left: raw.len(),
                right: rows * cols,
            });
        }
        for &k in &raw {
            precision.scalar(k)?;
        }
        Ok(Self { precision, rows, cols, raw })
    }

    #[inline]
    pub fn precision(&self) -> Precision {
        self.precision
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FixedScalar {
        self.precision.saturate(self.raw[r * self.cols + c] as i128)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FixedScalar) {
        assert_eq!(v.precision(), self.precision);
        self.raw[r * self.cols + c] = v.raw();
    }

    pub fn row(&self, r: usize) -> FixedVector {
        FixedVector {
            precision: self.precision,
            raw: self.raw[r * self.cols..(r + 1) * self.cols].to_vec(),
        }
    }

    pub fn raw(&self) -> &[i64] {
        &self.raw
    }
}
