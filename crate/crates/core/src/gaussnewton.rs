//! Error-oriented damped Gauss-Newton refinement of model coefficients.
//!
//! The free parameters are the active coefficients of a [`RecoveredModel`];
//! the residual is the integrated model minus the raw data at every sample,
//! with the initial state pinned to the first data row. Each iteration solves
//! `J dx = -r` by pivoted QR on a forward-difference Jacobian and takes a
//! damped step `p + lambda dx`.
//!
//! Damping follows the error-oriented predictor: the first step uses
//! `fc_start`, later ones `min(1, mu)` with
//!
//! ```text
//! mu = |dx_prev| |dxbar| / (|dxbar - dx| |dx|) * lambda_prev
//! ```
//!
//! where `dxbar = -J_prev^+ r(p)` is the simplified correction of the last
//! accepted trial. A trial is accepted when the residual norm strictly
//! decreases; otherwise (or when the trial model cannot be integrated) the
//! factor is cut to `min(lambda / 2, mu')` with the a-posteriori estimate
//! `mu' = |dx| lambda^2 / (2 |dxbar - (1 - lambda) dx|)`, never below `fc_min`.
//!
//! Convergence: once the scaled correction norm drops below `ptol` the full
//! correction is applied and the iteration stops. The incompatibility factor
//! `kappa` is the ratio of the last two ordinary correction norms.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chebapprox::SampledSignal;
use crate::error::{Error, Result};
use crate::integrate::{IvpOptions, IvpProblem};
use crate::lsq::PivotedQr;
use crate::model::RecoveredModel;

/// Lower bound on parameter weights in scaled norms.
const WEIGHT_FLOOR: f64 = 1e-6;
/// Absolute floor of the finite-difference step.
const FD_FLOOR: f64 = 1e-8;

/// Anything with a vector residual in a parameter vector.
pub trait Residual {
    fn n_params(&self) -> usize;
    fn n_rows(&self) -> usize;
    fn residual(&self, params: &[f64]) -> Result<DVector<f64>>;
}

/// Fit of a recovered model's active coefficients to raw data.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub model: RecoveredModel,
    pub data: Vec<SampledSignal>,
    pub options: IvpOptions,
    times: Vec<f64>,
    t0: f64,
    y0: Vec<f64>,
}

impl FitProblem {
    pub fn new(model: RecoveredModel, data: Vec<SampledSignal>, options: IvpOptions) -> Result<Self> {
        if data.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: data.len(),
            });
        }
        if model.active_count() == 0 {
            return Err(Error::InvalidArgument(
                "model has no active coefficients to refine".into(),
            ));
        }
        let t0 = data[0].t_first();
        if data.iter().any(|s| s.t_first() != t0) {
            return Err(Error::InvalidArgument(
                "all components must start at the same time; the first row is the fixed initial state"
                    .into(),
            ));
        }
        let mut times: Vec<f64> = data.iter().flat_map(|s| s.times().iter().copied()).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        times.dedup();
        let y0 = data.iter().map(|s| s.values()[0]).collect();
        Ok(FitProblem {
            model,
            data,
            options,
            times,
            t0,
            y0,
        })
    }

    pub fn initial_params(&self) -> Vec<f64> {
        self.model.active_params()
    }

    /// More free parameters than observations.
    pub fn is_underdetermined(&self) -> bool {
        self.n_rows() < self.n_params()
    }

    /// Model states at every data time for the given parameters.
    pub fn simulate(&self, params: &[f64]) -> Result<Vec<Vec<f64>>> {
        let model = self.model.with_active_params(params)?;
        let rhs = model.compile();
        let t_end = *self.times.last().expect("non-empty");
        let problem = IvpProblem::new(
            |y: &[f64], dy: &mut [f64]| rhs.eval_into(y, dy),
            self.y0.clone(),
            self.t0,
            t_end,
        )
        .with_options(self.options);
        Ok(problem.solve(&self.times)?.states)
    }
}

impl Residual for FitProblem {
    fn n_params(&self) -> usize {
        self.model.active_count()
    }

    fn n_rows(&self) -> usize {
        self.data.iter().map(SampledSignal::len).sum()
    }

    fn residual(&self, params: &[f64]) -> Result<DVector<f64>> {
        let states = self.simulate(params)?;
        let mut r = Vec::with_capacity(self.n_rows());
        for (k, s) in self.data.iter().enumerate() {
            let mut cursor = 0;
            for (t, v) in s.times().iter().zip(s.values()) {
                while self.times[cursor] < *t {
                    cursor += 1;
                }
                r.push(states[cursor][k] - v);
            }
        }
        Ok(DVector::from_vec(r))
    }
}

/// Free-function form of [`Residual::residual`] for a [`FitProblem`].
pub fn residual(problem: &FitProblem, params: &[f64]) -> Result<DVector<f64>> {
    problem.residual(params)
}

/// `|r|_2 / sqrt(rows)`.
pub fn scaled_norm(r: &DVector<f64>) -> f64 {
    if r.is_empty() {
        0.0
    } else {
        r.norm() / (r.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnConfig {
    pub ptol: f64,
    pub max_iter: usize,
    pub fc_start: f64,
    pub fc_min: f64,
    pub fd_step: f64,
}

impl Default for GnConfig {
    fn default() -> Self {
        GnConfig {
            ptol: 1e-3,
            max_iter: 40,
            fc_start: 0.01,
            fc_min: 0.01,
            fd_step: 1e-6,
        }
    }
}

impl GnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fc_min > 0.0 && self.fc_min <= self.fc_start && self.fc_start <= 1.0) {
            return Err(Error::InvalidArgument(
                "damping factors must satisfy 0 < fc_min <= fc_start <= 1".into(),
            ));
        }
        if !(self.ptol > 0.0 && self.fd_step > 0.0) {
            return Err(Error::InvalidArgument(
                "ptol and fd_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the iteration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LogEntry {
    /// Ordinary correction computed at the current iterate.
    Correction { iter: usize, normf: f64, normx: f64 },
    /// Trial step with its simplified correction norm and damping factor.
    Trial {
        iter: usize,
        normf: Option<f64>,
        normx_bar: Option<f64>,
        damping: f64,
        accepted: bool,
    },
    /// Final full step after the convergence test passed.
    Final { iter: usize, normf: f64, normx_bar: f64 },
}

/// Standard deviations and independent confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub sigma: Vec<f64>,
    /// `sigma` as a percentage of `|estimate|`.
    pub sigma_pct: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub dof: usize,
    pub t_quantile: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnResult {
    pub coeffs: Vec<f64>,
    pub log: Vec<LogEntry>,
    /// Number of Gauss-Newton steps taken, the final full step included.
    pub iterations: usize,
    pub kappa: Option<f64>,
    pub statistics: Option<Statistics>,
    pub converged: bool,
    pub failure_reason: Option<String>,
    pub n_rows: usize,
    pub normf_initial: f64,
    pub normf_final: f64,
}

impl GnResult {
    pub fn sigma(&self) -> Option<&[f64]> {
        self.statistics.as_ref().map(|s| s.sigma.as_slice())
    }

    pub fn conf_intervals(&self) -> Option<&[(f64, f64)]> {
        self.statistics.as_ref().map(|s| s.intervals.as_slice())
    }

    /// True when kappa signals an incompatible model (`kappa >= 1`).
    pub fn incompatible(&self) -> bool {
        self.kappa.is_some_and(|k| k >= 1.0)
    }
}

fn weights(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| v.abs().max(WEIGHT_FLOOR)).collect()
}

fn wnorm(v: &DVector<f64>, w: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v.iter().zip(w).map(|(x, w)| (x / w).powi(2)).sum();
    (s / v.len() as f64).sqrt()
}

/// Forward-difference Jacobian, one column per parameter.
pub fn jacobian<R: Residual + ?Sized>(
    problem: &R,
    params: &[f64],
    r0: &DVector<f64>,
    fd_step: f64,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(r0.len(), params.len());
    let mut p = params.to_vec();
    for c in 0..params.len() {
        let h = (fd_step * params[c].abs()).max(FD_FLOOR);
        p[c] = params[c] + h;
        let r = problem.residual(&p)?;
        p[c] = params[c];
        j.set_column(c, &((r - r0) / h));
    }
    Ok(j)
}

/// Covariance-based statistics at a solution: `s^2 (J^T J)^{-1}` with
/// `s^2 = |r|^2 / (rows - params)` and Student-t intervals at `level`.
pub fn statistics(j: &DMatrix<f64>, r: &DVector<f64>, params: &[f64], level: f64) -> Result<Statistics> {
    let (rows, q) = j.shape();
    if rows <= q {
        return Err(Error::InvalidArgument(format!(
            "statistics need more rows ({rows}) than parameters ({q})"
        )));
    }
    let qr = PivotedQr::new(j);
    let inv = qr.normal_inverse()?;
    let dof = rows - q;
    let s2 = r.norm_squared() / dof as f64;
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * level);
    let sigma: Vec<f64> = (0..q).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt()).collect();
    let sigma_pct = sigma
        .iter()
        .zip(params)
        .map(|(s, p)| if *p == 0.0 { f64::INFINITY } else { 100.0 * s / p.abs() })
        .collect();
    let intervals = sigma
        .iter()
        .zip(params)
        .map(|(s, p)| (p - t * s, p + t * s))
        .collect();
    Ok(Statistics {
        sigma,
        sigma_pct,
        intervals,
        dof,
        t_quantile: t,
        level,
    })
}

/// Refines the active coefficients of `problem.model` against its data.
pub fn refine(problem: &FitProblem, config: &GnConfig) -> Result<GnResult> {
    refine_residual(problem, &problem.initial_params(), config)
}

/// Damped Gauss-Newton on a generic residual.
///
/// Hard errors are reserved for invalid input and an initial point whose
/// residual cannot be evaluated. Breakdown during the iteration yields a
/// result with `converged = false`, a `failure_reason` and the last accepted
/// iterate.
pub fn refine_residual<R: Residual + ?Sized>(problem: &R, p0: &[f64], config: &GnConfig) -> Result<GnResult> {
    config.validate()?;
    if p0.is_empty() || p0.len() != problem.n_params() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_params(),
            got: p0.len(),
        });
    }
    let mut p = DVector::from_column_slice(p0);
    let mut r = problem.residual(p.as_slice()).map_err(|e| e.in_stage("initial residual"))?;
    let normf_initial = scaled_norm(&r);
    let mut result = GnResult {
        coeffs: p0.to_vec(),
        log: Vec::new(),
        iterations: 0,
        kappa: None,
        statistics: None,
        converged: false,
        failure_reason: None,
        n_rows: r.len(),
        normf_initial,
        normf_final: normf_initial,
    };

    let mut lambda = config.fc_start;
    // (|dx|, dxbar, lambda) of the last accepted step
    let mut previous: Option<(f64, DVector<f64>, f64)> = None;
    let mut last_normx: Option<f64> = None;

    let fail = |mut res: GnResult, p: &DVector<f64>, r: &DVector<f64>, why: String| {
        res.coeffs = p.iter().copied().collect();
        res.normf_final = scaled_norm(r);
        res.failure_reason = Some(why);
        Ok(res)
    };

    for it in 0..config.max_iter {
        let j = match jacobian(problem, p.as_slice(), &r, config.fd_step) {
            Ok(j) => j,
            Err(e) => return fail(result, &p, &r, format!("Jacobian evaluation failed: {e}")),
        };
        let qr = PivotedQr::new(&j);
        let dx = match qr.solve(&(-&r)) {
            Ok(dx) => dx,
            Err(e) => return fail(result, &p, &r, format!("Newton correction: {e}")),
        };
        let w = weights(p.as_slice());
        let normx = wnorm(&dx, &w);
        let normf = scaled_norm(&r);
        result.log.push(LogEntry::Correction { iter: it, normf, normx });
        if let Some(prev) = last_normx {
            result.kappa = Some(if prev > 0.0 { normx / prev } else { 0.0 });
        }
        last_normx = Some(normx);

        if normx <= config.ptol {
            let p_final = &p + &dx;
            match problem.residual(p_final.as_slice()) {
                Ok(r_final) => {
                    let normx_bar = qr.solve(&(-&r_final)).map(|d| wnorm(&d, &w)).unwrap_or(f64::NAN);
                    if result.kappa.is_none() {
                        result.kappa = Some(if normx > 0.0 { normx_bar / normx } else { 0.0 });
                    }
                    result.log.push(LogEntry::Final {
                        iter: it + 1,
                        normf: scaled_norm(&r_final),
                        normx_bar,
                    });
                    p = p_final;
                    r = r_final;
                }
                Err(_) => {
                    // keep the current iterate; the correction is below tolerance anyway
                    if result.kappa.is_none() {
                        result.kappa = Some(0.0);
                    }
                }
            }
            result.iterations = it + 1;
            result.converged = true;
            break;
        }

        if let Some((prev_normx, dxbar, prev_lambda)) = &previous {
            let denom = wnorm(&(dxbar - &dx), &w) * normx;
            let mu = if denom > 0.0 {
                prev_normx * wnorm(dxbar, &w) / denom * prev_lambda
            } else {
                f64::INFINITY
            };
            lambda = mu.min(1.0).max(config.fc_min);
        }

        loop {
            let pt = &p + lambda * &dx;
            let (accepted, next_lambda) = match problem.residual(pt.as_slice()) {
                Ok(rt) => {
                    let dxbar = qr.solve(&(-&rt)).expect("factorization checked full rank");
                    let normx_bar = wnorm(&dxbar, &w);
                    let normf_t = scaled_norm(&rt);
                    let spread = wnorm(&(&dxbar - (1.0 - lambda) * &dx), &w);
                    let mu_post = if spread > 0.0 {
                        0.5 * normx * lambda * lambda / spread
                    } else {
                        f64::INFINITY
                    };
                    let ok = normf_t < normf;
                    result.log.push(LogEntry::Trial {
                        iter: it + 1,
                        normf: Some(normf_t),
                        normx_bar: Some(normx_bar),
                        damping: lambda,
                        accepted: ok,
                    });
                    if ok {
                        previous = Some((normx, dxbar, lambda));
                        p = pt;
                        r = rt;
                        (true, lambda)
                    } else {
                        (false, mu_post.min(0.5 * lambda))
                    }
                }
                Err(e) if e.is_not_integrable() => {
                    result.log.push(LogEntry::Trial {
                        iter: it + 1,
                        normf: None,
                        normx_bar: None,
                        damping: lambda,
                        accepted: false,
                    });
                    (false, 0.5 * lambda)
                }
                Err(e) => return Err(e),
            };
            if accepted {
                break;
            }
            if next_lambda < config.fc_min {
                if lambda > config.fc_min {
                    lambda = config.fc_min;
                    continue;
                }
                result.iterations = it;
                return fail(
                    result,
                    &p,
                    &r,
                    "damping factor fell below FCMIN; the Newton path leaves the integrable or descent region"
                        .into(),
                );
            }
            lambda = next_lambda;
        }
        result.iterations = it + 1;
    }

    result.coeffs = p.iter().copied().collect();
    result.normf_final = scaled_norm(&r);
    if !result.converged {
        result.failure_reason = Some(format!("no convergence within {} iterations", config.max_iter));
        return Ok(result);
    }
    match jacobian(problem, p.as_slice(), &r, config.fd_step)
        .and_then(|j| statistics(&j, &r, p.as_slice(), 0.95))
    {
        Ok(s) => result.statistics = Some(s),
        Err(e) => {
            result.failure_reason = Some(format!("statistics unavailable: {e}"));
        }
    }
    Ok(result)
}

/// Fortran `D` exponent notation with `digits` mantissa digits, e.g. `0.8345461D+01`.
pub fn fortran_d(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return format!(" 0.{}D+00", "0".repeat(digits));
    }
    let sign = if v < 0.0 { "-" } else { " " };
    let a = v.abs();
    let mut exp = a.log10().floor() as i32 + 1;
    let mut mant = (a / 10f64.powi(exp) * 10f64.powi(digits as i32)).round() as u64;
    if mant >= 10u64.pow(digits as u32) {
        mant /= 10;
        exp += 1;
    } else if mant < 10u64.pow(digits as u32 - 1) {
        mant = (a / 10f64.powi(exp - 1) * 10f64.powi(digits as i32)).round() as u64;
        exp -= 1;
    }
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}0.{mant:0width$}D{esign}{:02}", exp.abs(), width = digits)
}

/// Iteration table plus statistics block.
pub fn format_report(result: &GnResult, config: &GnConfig) -> String {
    let mut out = String::new();
    let q = result.coeffs.len();
    writeln!(out, " Damped Gauss-Newton refinement").unwrap();
    writeln!(out).unwrap();
    writeln!(out, " Number of parameters to be estimated (N) : {q:4}").unwrap();
    writeln!(out, " Number of data to fitted (MFIT) : {:4}", result.n_rows).unwrap();
    writeln!(out, " Prescribed relative precision (PTOL) : {}", fortran_d(config.ptol, 2)).unwrap();
    writeln!(out, " Starting value for damping factor FCSTART = {}", fortran_d(config.fc_start, 2)).unwrap();
    writeln!(out, " Minimum allowed damping factor FCMIN = {}", fortran_d(config.fc_min, 2)).unwrap();
    writeln!(out, " Maximum permitted number of iteration steps : {:5}", config.max_iter).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "    It       Normf               Normx       Damp.Fct.").unwrap();
    for e in &result.log {
        match e {
            LogEntry::Correction { iter, normf, normx } => {
                writeln!(out, "  {iter:4}     {}      {}", fortran_d(*normf, 7), fortran_d(*normx, 3)).unwrap()
            }
            LogEntry::Trial {
                iter,
                normf,
                normx_bar,
                damping,
                accepted,
            } => {
                let nf = normf.map_or("   not integrable".to_string(), |v| format!("{}", fortran_d(v, 7)));
                let nx = normx_bar.map_or("          ".to_string(), |v| fortran_d(v, 3));
                let tag = if *accepted { "" } else { "  rejected" };
                writeln!(out, "  {iter:4}     {nf}   *  {nx}     {damping:6.3}{tag}").unwrap()
            }
            LogEntry::Final { iter, normf, normx_bar } => writeln!(
                out,
                "  {iter:4}     {}   *  {}      1.000",
                fortran_d(*normf, 7),
                fortran_d(*normx_bar, 3)
            )
            .unwrap(),
        }
    }
    writeln!(out).unwrap();
    if result.converged {
        writeln!(out, " Solution of nonlinear least squares problem obtained").unwrap();
        writeln!(out, " within {:3} iteration steps", result.iterations).unwrap();
        writeln!(out).unwrap();
        if let Some(k) = result.kappa {
            writeln!(out, " Incompatibility factor kappa {}", fortran_d(k, 3)).unwrap();
            if k >= 1.0 {
                writeln!(out, " Warning: kappa >= 1, model appears incompatible with the data").unwrap();
            }
        }
    } else {
        writeln!(
            out,
            " Iteration failed: {}",
            result.failure_reason.as_deref().unwrap_or("unknown reason")
        )
        .unwrap();
    }
    writeln!(out, " Final scaled residual Normf {}", fortran_d(result.normf_final, 7)).unwrap();
    writeln!(out).unwrap();
    if let Some(s) = &result.statistics {
        writeln!(out, "   Standard deviation of parameters").unwrap();
        writeln!(out, "   --------------------------------").unwrap();
        writeln!(out, "     No.  Estimate           sigma(X)").unwrap();
        for (i, ((p, sg), pct)) in result.coeffs.iter().zip(&s.sigma).zip(&s.sigma_pct).enumerate() {
            writeln!(
                out,
                "    {:3}  {}   +/-  {}     = {:7.2} %",
                i + 1,
                fortran_d(*p, 3),
                fortran_d(*sg, 3),
                pct
            )
            .unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "   Independent confidence intervals").unwrap();
        writeln!(out, "   --------------------------------").unwrap();
        writeln!(
            out,
            "   (on {:.0}%-probability level, Student t({}) = {:.4})",
            100.0 * s.level,
            s.dof,
            s.t_quantile
        )
        .unwrap();
        for (i, (lo, hi)) in s.intervals.iter().enumerate() {
            writeln!(out, "    {:3}  ( {} , {} )", i + 1, fortran_d(*lo, 3), fortran_d(*hi, 3)).unwrap();
        }
    } else if result.converged {
        writeln!(out, "   Statistics unavailable").unwrap();
    }
    out
}
