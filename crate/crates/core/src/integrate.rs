//! Adaptive Dormand-Prince 5(4) integration, synthetic pendulum data and
//! verification of recovered models against their data.

use serde::{Deserialize, Serialize};

use crate::chebapprox::SampledSignal;
use crate::error::{Error, Result};
use crate::model::RecoveredModel;

// Dormand-Prince tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output (Hairer & Wanner, continuous extension of order 4).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
/// Steps below this fraction of the interval length count as underflow.
const UNDERFLOW_FRACTION: f64 = 1e-12;

/// Integrator tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvpOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` means one hundredth of the interval.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions {
            rtol: 1e-9,
            atol: 1e-9,
            h0: None,
            max_steps: 200_000,
        }
    }
}

impl IvpOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IvpOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

/// `y' = rhs(y)`, `y(t0) = y0` on `[t0, t_end]`.
pub struct IvpProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub options: IvpOptions,
}

/// States at the requested output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    /// Values of one component along the trajectory.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }
}

impl<F: Fn(&[f64], &mut [f64])> IvpProblem<F> {
    pub fn new(rhs: F, y0: Vec<f64>, t0: f64, t_end: f64) -> Self {
        IvpProblem {
            rhs,
            y0,
            t0,
            t_end,
            options: IvpOptions::default(),
        }
    }

    pub fn with_options(mut self, options: IvpOptions) -> Self {
        self.options = options;
        self
    }

    pub fn solve(&self, output_times: &[f64]) -> Result<Trajectory> {
        solve_ivp(self, output_times)
    }
}

fn validate<F>(p: &IvpProblem<F>, output_times: &[f64]) -> Result<()> {
    if !(p.t0.is_finite() && p.t_end.is_finite() && p.t0 < p.t_end) {
        return Err(Error::InvalidArgument(format!(
            "integration interval [{}, {}] is empty",
            p.t0, p.t_end
        )));
    }
    let o = &p.options;
    if !(o.rtol > 0.0 && o.atol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    if p.y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "output times must be non-decreasing".into(),
        ));
    }
    if let Some(&t) = output_times
        .iter()
        .find(|&&t| !(t >= p.t0 && t <= p.t_end))
    {
        return Err(Error::OutOfRange {
            t,
            min: p.t0,
            max: p.t_end,
        });
    }
    Ok(())
}

/// Integrates with the embedded Dormand-Prince pair and reports the state at
/// every output time using the order-4 dense output of each accepted step.
///
/// Steps are accepted when the RMS of `err_i / (atol + rtol max(|y_i|, |y_new_i|))`
/// is at most one; the next step is scaled by `0.9 err^(-1/5)` clamped to
/// `[0.2, 5]`. A step shrinking below `1e-12 (t_end - t0)` or a non-finite
/// state that cannot be avoided raises [`Error::NotIntegrable`].
pub fn solve_ivp<F: Fn(&[f64], &mut [f64])>(
    problem: &IvpProblem<F>,
    output_times: &[f64],
) -> Result<Trajectory> {
    validate(problem, output_times)?;
    let f = &problem.rhs;
    let opts = problem.options;
    let n = problem.y0.len();
    let (t0, t_end) = (problem.t0, problem.t_end);
    let span = t_end - t0;
    let h_min = UNDERFLOW_FRACTION * span;

    let mut out = Trajectory {
        times: output_times.to_vec(),
        states: Vec::with_capacity(output_times.len()),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] == t0 {
        out.states.push(problem.y0.clone());
        next_out += 1;
    }

    let mut t = t0;
    let mut y = problem.y0.clone();
    let mut k1 = vec![0.0; n];
    f(&y, &mut k1);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotIntegrable(format!(
            "right-hand side not finite at t = {t0}"
        )));
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut h = opts.h0.unwrap_or(span / 100.0).min(span);

    while t < t_end {
        if out.steps_accepted + out.steps_rejected >= opts.max_steps {
            return Err(Error::NotIntegrable(format!(
                "step limit {} reached at t = {t}",
                opts.max_steps
            )));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        f(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(&stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(&stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(&stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(&y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n.max(1) as f64).sqrt();
        let finite = err.is_finite()
            && y_new.iter().chain(k7.iter()).all(|v| v.is_finite());

        if finite && err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            // dense output for every requested time inside (t, t_new]
            while next_out < output_times.len() && output_times[next_out] <= t_new {
                let to = output_times[next_out];
                if to == t_new {
                    out.states.push(y_new.clone());
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    let s: Vec<f64> = (0..n)
                        .map(|i| {
                            let ydiff = y_new[i] - y[i];
                            let bspl = h * k1[i] - ydiff;
                            let r4 = ydiff - h * k7[i] - bspl;
                            let r5 = h
                                * (D1 * k1[i]
                                    + D3 * k3[i]
                                    + D4 * k4[i]
                                    + D5 * k5[i]
                                    + D6 * k6[i]
                                    + D7 * k7[i]);
                            y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
                        })
                        .collect();
                    out.states.push(s);
                }
                next_out += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            out.steps_accepted += 1;
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            h *= fac;
        } else {
            out.steps_rejected += 1;
            let fac = if finite {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h *= fac;
            if h < h_min {
                return Err(Error::NotIntegrable(format!(
                    "step size underflow (h = {h:.3e}) at t = {t}"
                )));
            }
        }
    }
    Ok(out)
}

/// Damped pendulum `theta1' = theta2`, `theta2' = -u theta2 - (g/l) sin theta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    pub damping: f64,
    pub length: f64,
    pub gravity: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            damping: 0.25,
            length: 2.0,
            gravity: 9.81,
        }
    }
}

impl Pendulum {
    pub fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -self.damping * y[1] - self.gravity / self.length * y[0].sin();
    }

    /// `E = l^2 theta2^2 / 2 + g l (1 - cos theta1)`.
    pub fn energy(&self, theta1: f64, theta2: f64) -> f64 {
        0.5 * self.length * self.length * theta2 * theta2
            + self.gravity * self.length * (1.0 - theta1.cos())
    }
}

/// `count` equidistant times on `[t0, t_end]`, endpoints exact.
pub fn equidistant(t0: f64, t_end: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            if j + 1 == count {
                t_end
            } else {
                t0 + (t_end - t0) * j as f64 / (count - 1) as f64
            }
        })
        .collect()
}

/// Samples the damped pendulum at `n_samples` equidistant times on `[0, t_end]`.
pub fn generate_pendulum_data(
    u: f64,
    l: f64,
    g: f64,
    y0: [f64; 2],
    t_end: f64,
    n_samples: usize,
) -> Result<(SampledSignal, SampledSignal)> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(
            "at least two samples are required".into(),
        ));
    }
    let pendulum = Pendulum {
        damping: u,
        length: l,
        gravity: g,
    };
    let times = equidistant(0.0, t_end, n_samples);
    let problem = IvpProblem::new(|y: &[f64], dy: &mut [f64]| pendulum.rhs(y, dy), y0.to_vec(), 0.0, t_end);
    let traj = problem.solve(&times)?;
    Ok((
        SampledSignal::new("theta1", times.clone(), traj.component(0))?,
        SampledSignal::new("theta2", times, traj.component(1))?,
    ))
}

/// Outcome of integrating a recovered model against its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    /// Integrated; no RMS limit was configured.
    Integrated,
    Satisfactory,
    Unsatisfactory,
    NotIntegrable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub names: Vec<String>,
    /// Sorted union of all data times.
    pub times: Vec<f64>,
    /// Data per component at `times`, `None` where that component has no sample.
    pub data: Vec<Vec<Option<f64>>>,
    pub trajectory: Option<Trajectory>,
    /// Per-component RMS of model minus data; empty when not integrable.
    pub rms: Vec<f64>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn is_integrable(&self) -> bool {
        !matches!(self.verdict, Verdict::NotIntegrable(_))
    }

    /// Comparison table `t, data..., model...` as CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push_str(&format!(",{n}"));
        }
        for n in &self.names {
            out.push_str(&format!(",{n}_model"));
        }
        out.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            out.push_str(&crate::dataset::fmt_float(*t));
            for col in &self.data {
                out.push(',');
                if let Some(v) = col[j] {
                    out.push_str(&crate::dataset::fmt_float(v));
                }
            }
            for k in 0..self.names.len() {
                out.push(',');
                if let Some(tr) = &self.trajectory {
                    out.push_str(&crate::dataset::fmt_float(tr.states[j][k]));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        match &self.verdict {
            Verdict::NotIntegrable(why) => format!("verification: model not integrable ({why})\n"),
            v => {
                let mut s = String::new();
                for (n, r) in self.names.iter().zip(&self.rms) {
                    s.push_str(&format!("RMS[{n}] = {r:?}\n"));
                }
                let tag = match v {
                    Verdict::Satisfactory => "satisfactory",
                    Verdict::Unsatisfactory => "unsatisfactory",
                    _ => "integrated",
                };
                s.push_str(&format!("verification: {tag}\n"));
                s
            }
        }
    }
}

/// Integrates `model` from the first data row and compares with every sample.
///
/// All components must start at the same time. `max_rms`, when given, turns
/// the report into a satisfactory/unsatisfactory verdict.
pub fn verify(
    model: &RecoveredModel,
    data: &[SampledSignal],
    options: IvpOptions,
    max_rms: Option<f64>,
) -> Result<VerificationReport> {
    if data.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.len(),
        });
    }
    let t0 = data[0].t_first();
    if data.iter().any(|s| s.t_first() != t0) {
        return Err(Error::InvalidArgument(
            "verification needs all components to start at the same time".into(),
        ));
    }
    let mut times: Vec<f64> = data.iter().flat_map(|s| s.times().iter().copied()).collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    let t_end = *times.last().expect("non-empty");
    let columns: Vec<Vec<Option<f64>>> = data
        .iter()
        .map(|s| {
            times
                .iter()
                .map(|t| {
                    s.times()
                        .binary_search_by(|x| x.partial_cmp(t).expect("finite"))
                        .ok()
                        .map(|i| s.values()[i])
                })
                .collect()
        })
        .collect();
    let y0: Vec<f64> = data.iter().map(|s| s.values()[0]).collect();
    let rhs = model.compile();
    let problem = IvpProblem::new(|y: &[f64], dy: &mut [f64]| rhs.eval_into(y, dy), y0, t0, t_end)
        .with_options(options);
    let names = data.iter().map(|s| s.name().to_string()).collect();
    match problem.solve(&times) {
        Err(Error::NotIntegrable(why)) => Ok(VerificationReport {
            names,
            times,
            data: columns,
            trajectory: None,
            rms: Vec::new(),
            verdict: Verdict::NotIntegrable(why),
        }),
        Err(e) => Err(e),
        Ok(traj) => {
            let rms: Vec<f64> = columns
                .iter()
                .enumerate()
                .map(|(k, col)| {
                    let (sum, count) = col
                        .iter()
                        .zip(&traj.states)
                        .filter_map(|(d, s)| d.map(|d| (s[k] - d).powi(2)))
                        .fold((0.0, 0usize), |(a, c), e| (a + e, c + 1));
                    (sum / count as f64).sqrt()
                })
                .collect();
            let verdict = match max_rms {
                None => Verdict::Integrated,
                Some(limit) if rms.iter().all(|&r| r <= limit) => Verdict::Satisfactory,
                Some(_) => Verdict::Unsatisfactory,
            };
            Ok(VerificationReport {
                names,
                times,
                data: columns,
                trajectory: Some(traj),
                rms,
                verdict,
            })
        }
    }
}
