//! Multivariate monomial ansatz family.
//!
//! A basis of state dimension `n` and maximal total degree `d` holds every
//! multi-index `l` with `|l| <= d`, i.e. `C(n+d, d)` monomials, or one less
//! when the constant term is excluded.
//!
//! Listing order and the combination encoding reproduce the runtime-protocol
//! tables printed by the reference implementation. Neither is documented
//! there; both were reverse-engineered from the published listings:
//!
//! * terms are ordered lexicographically by exponent vector, which coincides
//!   with lexicographic order of the combination codes;
//! * the combination code of `l` is the stars-and-bars position vector
//!   `c_1 = l_1`, `c_i = c_{i-1} + l_i + 1`, e.g. `[1, 1] -> [1, 3]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `(l_1, ..., l_n)` of one monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of powers `y_1^{l_1} ... y_n^{l_n}`, with `0^0 = 1`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: y.len(),
            });
        }
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(y)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Stars-and-bars code: strictly increasing, `c_1 = l_1`, `c_i = c_{i-1} + l_i + 1`.
    pub fn combination_encoding(&self) -> Vec<u32> {
        let mut code = Vec::with_capacity(self.0.len());
        let mut acc = 0u32;
        for (i, &e) in self.0.iter().enumerate() {
            acc = if i == 0 { e } else { acc + e + 1 };
            code.push(acc);
        }
        code
    }

    /// Inverse of [`MultiIndex::combination_encoding`].
    pub fn from_combination(code: &[u32]) -> Result<MultiIndex> {
        let mut exps = Vec::with_capacity(code.len());
        for (i, &c) in code.iter().enumerate() {
            if i == 0 {
                exps.push(c);
            } else {
                let prev = code[i - 1];
                if c <= prev {
                    return Err(Error::InvalidArgument(format!(
                        "combination code {code:?} is not strictly increasing"
                    )));
                }
                exps.push(c - prev - 1);
            }
        }
        Ok(MultiIndex(exps))
    }

    /// Human-readable monomial such as `y0^1 y1^2`; empty for the constant.
    pub fn term_label(&self) -> String {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, e)| format!("y{i}^{e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl std::ops::Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Total-degree monomial basis description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    pub dim: usize,
    pub max_degree: u32,
    pub include_constant: bool,
}

impl MonomialBasis {
    pub fn new(dim: usize, max_degree: u32, include_constant: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "state dimension must be positive".into(),
            ));
        }
        if max_degree == 0 && !include_constant {
            return Err(Error::InvalidArgument(
                "degree-0 basis without the constant term is empty".into(),
            ));
        }
        Ok(MonomialBasis {
            dim,
            max_degree,
            include_constant,
        })
    }

    /// Number of members, `C(n+d, d)` minus one without the constant.
    pub fn size(&self) -> usize {
        binomial(self.dim + self.max_degree as usize, self.max_degree as usize)
            - usize::from(!self.include_constant)
    }

    /// Tensor-product count `(d+1)^n` shown in the protocol header.
    pub fn tensor_count(&self) -> usize {
        (self.max_degree as usize + 1).pow(self.dim as u32)
    }

    /// All member multi-indices in protocol order.
    pub fn enumerate(&self) -> Vec<MultiIndex> {
        let mut out = Vec::with_capacity(self.size() + 1);
        let mut current = vec![0u32; self.dim];
        push_lex(&mut out, &mut current, 0, self.max_degree);
        if !self.include_constant {
            out.retain(|m| !m.is_constant());
        }
        out
    }

    /// Evaluates every member at `y`, in enumeration order.
    pub fn eval_all(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        Ok(self.enumerate().iter().map(|m| m.eval_unchecked(y)).collect())
    }
}

fn push_lex(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, pos: usize, budget: u32) {
    if pos == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for e in 0..=budget {
        current[pos] = e;
        push_lex(out, current, pos + 1, budget - e);
    }
    current[pos] = 0;
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Free-function form of [`MonomialBasis::enumerate`].
pub fn enumerate(basis: &MonomialBasis) -> Vec<MultiIndex> {
    basis.enumerate()
}

/// Free-function form of [`MultiIndex::eval`].
pub fn eval_monomial(idx: &MultiIndex, y: &[f64]) -> Result<f64> {
    idx.eval(y)
}

/// Free-function form of [`MultiIndex::combination_encoding`].
pub fn combination_encoding(idx: &MultiIndex) -> Vec<u32> {
    idx.combination_encoding()
}
