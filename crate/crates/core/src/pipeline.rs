//! End-to-end reconstruction: fit, truncate, differentiate, assemble, solve,
//! threshold, report.

use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::chebapprox::{fit_on_domain, ChebSeries};
use crate::dataset::{fmt_float, Dataset};
use crate::error::{Error, Result, StageExt};
use crate::gaussnewton::GnConfig;
use crate::integrate::{equidistant, IvpOptions};
use crate::lsq::{assemble_on_grid, solve, GramSystem, LsqSolution, SolveGrid};
use crate::model::{format_protocol, RecoveredModel};

/// Every tunable of a run. Loadable from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of Chebyshev nodes `M + 1`.
    pub cheb_nodes: usize,
    /// Number of coefficients kept after fitting; `None` keeps all.
    pub cheb_truncation: Option<usize>,
    pub max_degree: u32,
    pub include_constant: bool,
    /// Rows `m` of the Gram system.
    pub solve_grid_size: usize,
    pub solve_grid: SolveGrid,
    pub threshold_pct: f64,
    /// Re-solve on the active columns after thresholding.
    pub refit_after_threshold: bool,
    pub rtol: f64,
    pub atol: f64,
    /// RMS limit for a satisfactory verification; `None` reports RMS only.
    pub max_rms: Option<f64>,
    pub gauss_newton: GnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cheb_nodes: 80,
            cheb_truncation: None,
            max_degree: 3,
            include_constant: true,
            solve_grid_size: 250,
            solve_grid: SolveGrid::Equidistant,
            threshold_pct: 0.1,
            refit_after_threshold: false,
            rtol: 1e-9,
            atol: 1e-9,
            max_rms: None,
            gauss_newton: GnConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<RunConfig> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.cheb_nodes == 0 {
            return bad("cheb_nodes must be positive");
        }
        if let Some(k) = self.cheb_truncation {
            if k == 0 || k > self.cheb_nodes {
                return bad("cheb_truncation must lie in 1..=cheb_nodes");
            }
        }
        if self.solve_grid_size < 2 {
            return bad("solve_grid_size must be at least 2");
        }
        if !(0.0..=100.0).contains(&self.threshold_pct) {
            return bad("threshold_pct must lie in [0, 100]");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("integrator tolerances must be positive");
        }
        self.gauss_newton.validate()
    }

    pub fn ivp_options(&self) -> IvpOptions {
        IvpOptions::with_tolerances(self.rtol, self.atol)
    }
}

/// Everything produced by one reconstruction run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub series: Vec<ChebSeries>,
    pub system: GramSystem,
    pub solution: LsqSolution,
    pub model: RecoveredModel,
    pub protocols: Vec<String>,
}

impl Reconstruction {
    /// All component protocols, each preceded by a component header line.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (k, p) in self.protocols.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            out.push_str(&format!(
                "Runtime protocol for y{k} = {} component\n",
                self.model.component_names[k]
            ));
            out.push_str(p);
        }
        out
    }
}

/// Chebyshev series of every component over the shared window.
pub fn approximate(dataset: &Dataset, config: &RunConfig) -> Result<Vec<ChebSeries>> {
    config.validate()?;
    let (lo, hi) = dataset.shared_domain().stage("dataset")?;
    dataset
        .components
        .iter()
        .map(|c| {
            let s = fit_on_domain(c, config.cheb_nodes, lo, hi).stage("chebyshev fit")?;
            match config.cheb_truncation {
                Some(k) => s.truncate(k).stage("truncation"),
                None => Ok(s),
            }
        })
        .collect()
}

/// Runs the full pipeline on a dataset.
pub fn reconstruct(dataset: &Dataset, config: &RunConfig) -> Result<Reconstruction> {
    let series = approximate(dataset, config)?;
    let (lo, hi) = series[0].domain();
    let basis = MonomialBasis::new(dataset.dim(), config.max_degree, config.include_constant).stage("basis")?;
    let system =
        assemble_on_grid(&series, &basis, config.solve_grid_size, config.solve_grid).stage("assemble")?;
    let solution = solve(&system).stage("least squares")?;
    let mut model = RecoveredModel::new(basis, solution.coeffs.clone(), config.threshold_pct)
        .stage("threshold")?
        .with_domain(lo, hi)
        .with_names(dataset.names())?;
    if config.refit_after_threshold {
        model = model.refit(&system).stage("refit")?;
    }
    let protocols = (0..dataset.dim())
        .map(|k| format_protocol(&solution, &model, k))
        .collect::<Result<Vec<_>>>()
        .stage("protocol")?;
    Ok(Reconstruction {
        series,
        system,
        solution,
        model,
        protocols,
    })
}

/// CSV table `t, name, name_deriv, ...` of the series on `points` equidistant times.
pub fn approximation_table(dataset: &Dataset, series: &[ChebSeries], points: usize) -> Result<String> {
    if points < 2 {
        return Err(Error::InvalidArgument("need at least two output points".into()));
    }
    let (lo, hi) = series[0].domain();
    let derivs: Vec<ChebSeries> = series.iter().map(ChebSeries::derivative).collect();
    let mut out = String::from("t");
    for name in dataset.names() {
        out.push_str(&format!(",{name},{name}_deriv"));
    }
    out.push('\n');
    for t in equidistant(lo, hi, points) {
        out.push_str(&fmt_float(t));
        for (s, d) in series.iter().zip(&derivs) {
            out.push_str(&format!(",{},{}", fmt_float(s.evaluate(t)?), fmt_float(d.evaluate(t)?)));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebapprox::SampledSignal;

    #[test]
    fn config_defaults_and_toml() {
        let cfg = RunConfig::from_toml("max_degree = 4\ncheb_truncation = 62\n[gauss_newton]\nptol = 1e-4\n").unwrap();
        assert_eq!(cfg.max_degree, 4);
        assert_eq!(cfg.cheb_truncation, Some(62));
        assert_eq!(cfg.cheb_nodes, 80);
        assert_eq!(cfg.gauss_newton.ptol, 1e-4);
        assert_eq!(cfg.gauss_newton.max_iter, 40);
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml("cheb_truncation = 81\n").is_err());
    }

    #[test]
    fn constant_data_gives_zero_model() {
        let times: Vec<f64> = (0..20).map(|j| j as f64 * 0.5).collect();
        let a = SampledSignal::new("a", times.clone(), vec![1.5; 20]).unwrap();
        let ds = Dataset::new(vec![a]).unwrap();
        // with a linear term the constant column would make A rank deficient
        let cfg = RunConfig {
            max_degree: 1,
            include_constant: false,
            cheb_nodes: 20,
            ..Default::default()
        };
        let rec = reconstruct(&ds, &cfg).unwrap();
        assert!(rec.system.b.iter().all(|v| v.abs() < 1e-12));
        assert!(rec.solution.coeffs[0].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn exponential_rate_recovered() {
        let times: Vec<f64> = (0..=400).map(|j| j as f64 / 400.0).collect();
        let vals = times.iter().map(|t| (2.0 * t).exp()).collect();
        let ds = Dataset::new(vec![SampledSignal::new("y", times, vals).unwrap()]).unwrap();
        let cfg = RunConfig {
            max_degree: 1,
            include_constant: false,
            cheb_nodes: 40,
            cheb_truncation: Some(20),
            ..Default::default()
        };
        let rec = reconstruct(&ds, &cfg).unwrap();
        assert!((rec.model.coeffs[0][0] - 2.0).abs() < 1e-3, "{:?}", rec.model.coeffs);
    }

    #[test]
    fn stage_labels_in_errors() {
        let a = SampledSignal::new("a", vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        let ds = Dataset::new(vec![a]).unwrap();
        let cfg = RunConfig {
            max_degree: 4,
            solve_grid_size: 3,
            cheb_nodes: 10,
            ..Default::default()
        };
        let err = reconstruct(&ds, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("least squares"), "{err}");
    }
}
