//! Thresholded polynomial right-hand side and its runtime-protocol rendering.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{MonomialBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::lsq::{GramSystem, LsqSolution, PivotedQr};

/// Recovered ODE right-hand side `y' = sum_l c_l phi_l(y)` over the active terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredModel {
    pub basis: MonomialBasis,
    /// `coeffs[k][l]`: coefficient of basis term `l` in component `k`.
    pub coeffs: Vec<Vec<f64>>,
    pub threshold_pct: f64,
    pub active: Vec<Vec<bool>>,
    pub domain: Option<(f64, f64)>,
    pub component_names: Vec<String>,
}

impl RecoveredModel {
    /// Builds a model from raw coefficients, activating terms at or above
    /// `pct` percent of the component's largest magnitude.
    pub fn new(basis: MonomialBasis, coeffs: Vec<Vec<f64>>, pct: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&pct) {
            return Err(Error::InvalidArgument(format!(
                "threshold {pct} outside [0, 100]"
            )));
        }
        if coeffs.len() != basis.dim {
            return Err(Error::DimensionMismatch {
                expected: basis.dim,
                got: coeffs.len(),
            });
        }
        let size = basis.size();
        if let Some(bad) = coeffs.iter().find(|c| c.len() != size) {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: bad.len(),
            });
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "model coefficients must be finite".into(),
            ));
        }
        let active = coeffs
            .iter()
            .map(|c| {
                let zero = c.iter().all(|&v| v == 0.0);
                percentages(c)
                    .into_iter()
                    .map(|p| !zero && p >= pct)
                    .collect()
            })
            .collect();
        Ok(RecoveredModel {
            basis,
            component_names: (0..coeffs.len()).map(|k| format!("y{k}")).collect(),
            coeffs,
            threshold_pct: pct,
            active,
            domain: None,
        })
    }

    pub fn with_domain(mut self, t_min: f64, t_max: f64) -> Self {
        self.domain = Some((t_min, t_max));
        self
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: names.len(),
            });
        }
        self.component_names = names;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    /// Percentages of `|c_l| / max |c|` for one component.
    pub fn percentages(&self, component: usize) -> Vec<f64> {
        percentages(&self.coeffs[component])
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().flatten().filter(|&&a| a).count()
    }

    /// Active coefficients flattened component-major in enumeration order.
    pub fn active_params(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(&self.active)
            .flat_map(|(c, a)| c.iter().zip(a).filter(|(_, &on)| on).map(|(v, _)| *v))
            .collect()
    }

    /// Copy with the active coefficients replaced by `params` (order of
    /// [`RecoveredModel::active_params`]); the active set is kept as is.
    pub fn with_active_params(&self, params: &[f64]) -> Result<RecoveredModel> {
        if params.len() != self.active_count() {
            return Err(Error::DimensionMismatch {
                expected: self.active_count(),
                got: params.len(),
            });
        }
        let mut out = self.clone();
        let mut it = params.iter();
        for (c, a) in out.coeffs.iter_mut().zip(&self.active) {
            for (v, &on) in c.iter_mut().zip(a) {
                if on {
                    *v = *it.next().expect("length checked");
                }
            }
        }
        Ok(out)
    }

    /// Sparse evaluable form of the right-hand side.
    pub fn compile(&self) -> CompiledRhs {
        let terms = self.basis.enumerate();
        let components = self
            .coeffs
            .iter()
            .zip(&self.active)
            .map(|(c, a)| {
                terms
                    .iter()
                    .zip(c.iter().zip(a))
                    .filter(|(_, (_, &on))| on)
                    .map(|(t, (&v, _))| (t.clone(), v))
                    .collect()
            })
            .collect();
        CompiledRhs {
            dim: self.dim(),
            components,
        }
    }

    /// Checked evaluation of the right-hand side at `y`.
    pub fn rhs_eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite state".into()));
        }
        let mut out = vec![0.0; self.dim()];
        self.compile().eval_into(y, &mut out);
        Ok(out)
    }

    /// Re-solves the least-squares problem restricted to the active columns.
    pub fn refit(&self, system: &GramSystem) -> Result<RecoveredModel> {
        let mut out = self.clone();
        for k in 0..self.dim() {
            let cols: Vec<usize> = (0..self.basis.size()).filter(|&l| self.active[k][l]).collect();
            if cols.is_empty() {
                continue;
            }
            let a = DMatrix::from_fn(system.rows(), cols.len(), |i, j| system.a[(i, cols[j])]);
            let b: DVector<f64> = system.rhs(k);
            let c = PivotedQr::new(&a).solve(&b)?;
            for (j, &l) in cols.iter().enumerate() {
                out.coeffs[k][l] = c[j];
            }
        }
        Ok(out)
    }
}

/// Active terms of a model, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledRhs {
    dim: usize,
    components: Vec<Vec<(MultiIndex, f64)>>,
}

impl CompiledRhs {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, y: &[f64], dy: &mut [f64]) {
        for (out, terms) in dy.iter_mut().zip(&self.components) {
            *out = terms.iter().map(|(t, c)| c * t.eval_unchecked(y)).sum();
        }
    }
}

fn percentages(c: &[f64]) -> Vec<f64> {
    let max = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![0.0; c.len()];
    }
    c.iter().map(|v| 100.0 * v.abs() / max).collect()
}

/// Applies the percentage threshold to a least-squares solution.
pub fn threshold(solution: &LsqSolution, basis: &MonomialBasis, pct: f64) -> Result<RecoveredModel> {
    RecoveredModel::new(*basis, solution.coeffs.clone(), pct)
}

/// Free-function form of [`RecoveredModel::rhs_eval`].
pub fn rhs_eval(model: &RecoveredModel, y: &[f64]) -> Result<Vec<f64>> {
    model.rhs_eval(y)
}

/// `( 9.0e-01)`-style coefficient: leading space or minus, two significant
/// digits, signed two-digit exponent.
pub fn format_coefficient(v: f64) -> String {
    let s = format!("{:.1e}", v.abs());
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if v.is_sign_negative() && v != 0.0 { '-' } else { ' ' };
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}{mantissa}e{esign}{:02}", exp.abs())
}

const TERMS_PER_LINE: usize = 3;

/// Renders the equation line(s) of one component.
pub fn format_equation(model: &RecoveredModel, component: usize) -> String {
    let vars: Vec<String> = (0..model.dim()).map(|i| format!("y{i}")).collect();
    let prefix = format!("f({}) = ", vars.join(","));
    let terms = model.basis.enumerate();
    let active: Vec<String> = terms
        .iter()
        .zip(model.coeffs[component].iter().zip(&model.active[component]))
        .filter(|(_, (_, &on))| on)
        .map(|(t, (&c, _))| {
            let label = t.term_label();
            if label.is_empty() {
                format!("+ ({}) ", format_coefficient(c))
            } else {
                format!("+ ({}) {} ", format_coefficient(c), label)
            }
        })
        .collect();
    if active.is_empty() {
        return format!("{prefix}0\n");
    }
    let indent = " ".repeat(prefix.len());
    let mut out = String::new();
    for (i, chunk) in active.chunks(TERMS_PER_LINE).enumerate() {
        out.push_str(if i == 0 { &prefix } else { &indent });
        out.push_str(&chunk.concat());
        out.push('\n');
    }
    out
}

/// Runtime protocol for one component: multi-index listing with
/// percentages, term count and threshold, equation, scaled residual.
pub fn format_protocol(solution: &LsqSolution, model: &RecoveredModel, component: usize) -> Result<String> {
    if component >= model.dim() {
        return Err(Error::InvalidArgument(format!(
            "component {component} out of range for a {}-dimensional model",
            model.dim()
        )));
    }
    let mut out = String::new();
    let basis = &model.basis;
    writeln!(
        out,
        "#total = {}   (max. deg. {})",
        basis.tensor_count(),
        basis.max_degree
    )
    .unwrap();
    let pct = model.percentages(component);
    for (term, p) in basis.enumerate().iter().zip(&pct) {
        let code: Vec<String> = term
            .combination_encoding()
            .iter()
            .map(u32::to_string)
            .collect();
        writeln!(out, " [ {} ] --> {} {:>8.2} ", code.join(" "), term, p).unwrap();
    }
    writeln!(
        out,
        "m = {:>2} monomial(s) {:>9.2} ",
        basis.size(),
        model.threshold_pct
    )
    .unwrap();
    out.push_str(&format_equation(model, component));
    if let Some(r) = solution.scaled_residuals.get(component) {
        writeln!(out, "LSQ: ||residual/sqrt(n)||_2 = {r:?}").unwrap();
    }
    Ok(out)
}
