//! Serde adapters for dense matrices and complex vectors.
//!
//! Real matrices are `{rows, cols, data}` with row-major data; complex ones
//! carry separate `re`/`im` arrays, as do complex vectors.

use faer::{c64, Mat};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ComplexMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ComplexVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

pub mod real {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat<f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        RealMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<f64>, D::Error> {
        let raw = RealMatrix::deserialize(d)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom(format!(
                "matrix declares {}x{} but holds {} values",
                raw.rows,
                raw.cols,
                raw.data.len()
            )));
        }
        Ok(Mat::from_fn(raw.rows, raw.cols, |i, j| raw.data[i * raw.cols + j]))
    }
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat<c64>, s: S) -> Result<S::Ok, S::Error> {
        let mut re = Vec::with_capacity(m.nrows() * m.ncols());
        let mut im = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        ComplexMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            re,
            im,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<c64>, D::Error> {
        let raw = ComplexMatrix::deserialize(d)?;
        let len = raw.rows * raw.cols;
        if raw.re.len() != len || raw.im.len() != len {
            return Err(serde::de::Error::custom(format!(
                "complex matrix declares {}x{} but holds {}/{} values",
                raw.rows,
                raw.cols,
                raw.re.len(),
                raw.im.len()
            )));
        }
        Ok(Mat::from_fn(raw.rows, raw.cols, |i, j| {
            let at = i * raw.cols + j;
            c64::new(raw.re[at], raw.im[at])
        }))
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        ComplexVector {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        let raw = ComplexVector::deserialize(d)?;
        if raw.re.len() != raw.im.len() {
            return Err(serde::de::Error::custom("re/im arrays differ in length"));
        }
        Ok(raw.re.into_iter().zip(raw.im).map(|(re, im)| c64::new(re, im)).collect())
    }
}
