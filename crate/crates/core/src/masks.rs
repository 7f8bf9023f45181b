//! Refinement masks, their transfer matrices and a small catalog.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskJson", into = "MaskJson")]
pub struct Mask {
    coefficients: Vec<f64>,
    name: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct MaskJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    coefficients: Vec<f64>,
}

impl TryFrom<MaskJson> for Mask {
    type Error = Error;

    fn try_from(raw: MaskJson) -> Result<Self> {
        let mut m = Mask::new(raw.coefficients)?;
        m.name = raw.name;
        Ok(m)
    }
}

impl From<Mask> for MaskJson {
    fn from(m: Mask) -> Self {
        MaskJson {
            name: m.name,
            coefficients: m.coefficients,
        }
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["haar", "hat", "bspline3", "d4"];

impl Mask {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidMask(format!(
                "need at least two coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMask("non-finite coefficient".into()));
        }
        if coefficients[0] == 0.0 || coefficients[coefficients.len() - 1] == 0.0 {
            return Err(Error::InvalidMask(
                "first and last coefficients must be nonzero".into(),
            ));
        }
        Ok(Mask {
            coefficients,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let s3 = 3f64.sqrt();
        let c = match name {
            "haar" => vec![1.0, 1.0],
            "hat" => vec![0.5, 1.0, 0.5],
            "bspline3" => vec![0.25, 0.75, 0.75, 0.25],
            "d4" => vec![
                (1.0 + s3) / 4.0,
                (3.0 + s3) / 4.0,
                (3.0 - s3) / 4.0,
                (1.0 - s3) / 4.0,
            ],
            other => return Err(Error::UnknownMask(other.to_string())),
        };
        Ok(Mask::new(c)?.with_name(name))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Support length `N`: the mask is `c_0..c_N`.
    pub fn support_len(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `c_j`, zero outside `0..=N`.
    pub fn c(&self, j: i64) -> f64 {
        if j < 0 {
            return 0.0;
        }
        self.coefficients.get(j as usize).copied().unwrap_or(0.0)
    }

    pub fn sum_rules(&self) -> SumRules {
        let even = self.coefficients.iter().step_by(2).sum();
        let odd = self.coefficients.iter().skip(1).step_by(2).sum();
        SumRules {
            total: self.coefficients.iter().sum(),
            even,
            odd,
        }
    }

    pub fn transfer_matrices(&self) -> TransferPair {
        let n = self.support_len();
        let mut t0 = Matrix::zeros(n);
        let mut t1 = Matrix::zeros(n);
        for i in 1..=n {
            for j in 1..=n {
                let (i1, j1) = (i as i64, j as i64);
                t0.set(i - 1, j - 1, self.c(2 * i1 - j1 - 1));
                t1.set(i - 1, j - 1, self.c(2 * i1 - j1));
            }
        }
        TransferPair { t0, t1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumRules {
    pub total: f64,
    pub even: f64,
    pub odd: f64,
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 0-based access.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `Aᵀ v`.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j) * v[i]).sum())
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Operator ∞-norm of the transpose, i.e. the max absolute column sum.
    pub fn transpose_inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferPair {
    pub t0: Matrix,
    pub t1: Matrix,
}

impl TransferPair {
    pub fn get(&self, bit: u8) -> &Matrix {
        if bit == 0 {
            &self.t0
        } else {
            &self.t1
        }
    }

    /// `max(‖T0ᵀ‖∞, ‖T1ᵀ‖∞)`; bounds `|Tᵀ F|∞ ≤ B |F|∞`.
    pub fn growth_bound(&self) -> f64 {
        self.t0
            .transpose_inf_norm()
            .max(self.t1.transpose_inf_norm())
    }
}
