//! Gram system assembly and column-pivoted QR least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::chebapprox::{chebyshev_nodes, ChebSeries};
use crate::error::{Error, Result};

/// Relative threshold on `|R_ii| / |R_11|` below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Where the rows of the Gram system are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveGrid {
    /// Equidistant, both endpoints included.
    #[default]
    Equidistant,
    /// Chebyshev nodes of the domain.
    Chebyshev,
}

/// Design matrix `A` and one right-hand side per state component.
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub a: DMatrix<f64>,
    /// `m x n`; column `k` holds the derivative samples of component `k`.
    pub b: DMatrix<f64>,
    pub sample_times: Vec<f64>,
    /// State samples `y*(t_j)`, `m x n`.
    pub states: DMatrix<f64>,
}

impl GramSystem {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn rhs(&self, k: usize) -> DVector<f64> {
        self.b.column(k).into_owned()
    }
}

/// Least-squares coefficients `c^(k)` and RMS residuals per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqSolution {
    pub coeffs: Vec<Vec<f64>>,
    pub scaled_residuals: Vec<f64>,
}

/// Samples the approximated trajectory at `m` equidistant points.
pub fn assemble(series: &[ChebSeries], basis: &MonomialBasis, m: usize) -> Result<GramSystem> {
    assemble_on_grid(series, basis, m, SolveGrid::Equidistant)
}

pub fn assemble_on_grid(
    series: &[ChebSeries],
    basis: &MonomialBasis,
    m: usize,
    grid: SolveGrid,
) -> Result<GramSystem> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("no component series given".into()));
    }
    if series.len() != basis.dim {
        return Err(Error::DimensionMismatch {
            expected: basis.dim,
            got: series.len(),
        });
    }
    if m < 2 {
        return Err(Error::InvalidArgument(
            "solve grid needs at least two points".into(),
        ));
    }
    let (t_min, t_max) = series[0].domain();
    if series.iter().any(|s| s.domain() != (t_min, t_max)) {
        return Err(Error::DomainMismatch);
    }
    let times: Vec<f64> = match grid {
        SolveGrid::Equidistant => (0..m)
            .map(|j| {
                if j == m - 1 {
                    t_max
                } else {
                    t_min + (t_max - t_min) * j as f64 / (m - 1) as f64
                }
            })
            .collect(),
        SolveGrid::Chebyshev => {
            let mut nodes = chebyshev_nodes(m, t_min, t_max)?;
            nodes.reverse();
            nodes
        }
    };
    let derivs: Vec<ChebSeries> = series.iter().map(ChebSeries::derivative).collect();
    let n = series.len();
    let terms = basis.enumerate();
    let mut a = DMatrix::zeros(m, terms.len());
    let mut b = DMatrix::zeros(m, n);
    let mut states = DMatrix::zeros(m, n);
    let mut y = vec![0.0; n];
    for (j, &t) in times.iter().enumerate() {
        for k in 0..n {
            y[k] = series[k].evaluate(t)?;
            states[(j, k)] = y[k];
            b[(j, k)] = derivs[k].evaluate(t)?;
        }
        for (l, term) in terms.iter().enumerate() {
            a[(j, l)] = term.eval_unchecked(&y);
        }
    }
    Ok(GramSystem {
        a,
        b,
        sample_times: times,
        states,
    })
}

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Upper triangle holds `R`; the Householder vectors live in `reflectors`.
    r: DMatrix<f64>,
    reflectors: Vec<(DVector<f64>, f64)>,
    /// `perm[i]` is the original column placed at position `i`.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> PivotedQr {
        let (m, n) = a.shape();
        let mut r = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);
        for k in 0..steps {
            // pivot: remaining column of largest norm
            let (pivot, _) = (k..n)
                .map(|c| (c, r.view((k, c), (m - k, 1)).norm_squared()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot != k {
                r.swap_columns(k, pivot);
                perm.swap(k, pivot);
            }
            let x = r.view((k, k), (m - k, 1)).into_owned();
            let norm = x.norm();
            if norm == 0.0 {
                reflectors.push((DVector::zeros(m - k), 0.0));
                continue;
            }
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = DVector::from_iterator(m - k, x.iter().copied());
            v[0] -= alpha;
            let beta = 2.0 / v.norm_squared();
            for c in k..n {
                let mut col = r.view_mut((k, c), (m - k, 1));
                let s = beta * v.dot(&col);
                for (x, vi) in col.iter_mut().zip(v.iter()) {
                    *x -= s * vi;
                }
            }
            for i in k + 1..m {
                r[(i, k)] = 0.0;
            }
            r[(k, k)] = alpha;
            reflectors.push((v, beta));
        }
        let r11 = if steps > 0 { r[(0, 0)].abs() } else { 0.0 };
        let rank = (0..steps)
            .take_while(|&i| r11 > 0.0 && r[(i, i)].abs() >= RANK_TOLERANCE * r11)
            .count();
        PivotedQr {
            r,
            reflectors,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn r_diagonal(&self) -> Vec<f64> {
        let steps = self.r.nrows().min(self.r.ncols());
        (0..steps).map(|i| self.r[(i, i)]).collect()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.ncols() && self.r.nrows() >= self.ncols()
    }

    fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                rank: self.rank,
                cols: self.ncols(),
            })
        }
    }

    /// `x = P R^{-1} Q^T b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_full_rank()?;
        let m = self.r.nrows();
        let n = self.ncols();
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.len(),
            });
        }
        let mut qtb = b.clone();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            let mut tail = qtb.rows_mut(k, m - k);
            let s = beta * v.dot(&tail);
            tail.axpy(-s, v, 1.0);
        }
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = qtb[i];
            for j in i + 1..n {
                acc -= self.r[(i, j)] * z[j];
            }
            z[i] = acc / self.r[(i, i)];
        }
        let mut x = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        Ok(x)
    }

    /// `(A^T A)^{-1}` assembled from `R`, in original column order.
    pub fn normal_inverse(&self) -> Result<DMatrix<f64>> {
        self.require_full_rank()?;
        let n = self.ncols();
        // R^{-1} by back substitution on the identity
        let mut rinv = DMatrix::zeros(n, n);
        for c in 0..n {
            for i in (0..=c).rev() {
                let mut acc = if i == c { 1.0 } else { 0.0 };
                for j in i + 1..=c {
                    acc -= self.r[(i, j)] * rinv[(j, c)];
                }
                rinv[(i, c)] = acc / self.r[(i, i)];
            }
        }
        let inner = &rinv * rinv.transpose();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(self.perm[i], self.perm[j])] = inner[(i, j)];
            }
        }
        Ok(out)
    }
}

/// Solves every component against one factorization of `A`.
pub fn solve(system: &GramSystem) -> Result<LsqSolution> {
    let (m, cols) = system.a.shape();
    if m < cols {
        return Err(Error::InvalidArgument(format!(
            "underdetermined system: {m} rows for {cols} basis terms"
        )));
    }
    let qr = PivotedQr::new(&system.a);
    let mut coeffs = Vec::with_capacity(system.b.ncols());
    let mut scaled_residuals = Vec::with_capacity(system.b.ncols());
    for k in 0..system.b.ncols() {
        let rhs = system.rhs(k);
        let c = qr.solve(&rhs)?;
        let res = &system.a * &c - &rhs;
        scaled_residuals.push(res.norm() / (m as f64).sqrt());
        coeffs.push(c.iter().copied().collect());
    }
    Ok(LsqSolution {
        coeffs,
        scaled_residuals,
    })
}
