use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ode_recon::gaussnewton::{format_report, refine, FitProblem};
use ode_recon::integrate::{generate_pendulum_data, verify, Verdict};
use ode_recon::lsq::SolveGrid;
use ode_recon::pipeline::{approximate, approximation_table, reconstruct, RunConfig};
use ode_recon::{Dataset, Error, RecoveredModel};

/// Reconstructs explicit ODE right-hand sides from sampled trajectories.
#[derive(Parser)]
#[command(name = "ode-recon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Chebyshev series to every component and dump values and derivatives as CSV.
    Approx {
        /// Wide (`t,a,b,...`) or long (`component,t,value`) CSV file.
        data: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
        /// Number of equidistant output times.
        #[arg(long, default_value_t = 250)]
        points: usize,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Full pipeline: fit, differentiate, least squares, threshold, protocol.
    Reconstruct {
        /// Wide or long CSV file.
        data: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
        /// Model file (JSON).
        #[arg(short, long, default_value = "model.json")]
        output: PathBuf,
        /// Protocol text file; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate a recovered model from the first data row and compare with the data.
    Verify {
        /// Model JSON written by `reconstruct`.
        model: PathBuf,
        /// Data the model is compared with; the first row is the initial state.
        data: PathBuf,
        #[command(flatten)]
        opts: IvpOpts,
        /// Per-component RMS limit for a satisfactory verdict [default: none, RMS only].
        #[arg(long)]
        max_rms: Option<f64>,
        /// Comparison CSV `t, data..., model...`; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Refine the active coefficients by damped Gauss-Newton against the raw data.
    Refine {
        /// Model JSON written by `reconstruct`.
        model: PathBuf,
        /// Data the model is compared with; the first row is the initial state.
        data: PathBuf,
        #[command(flatten)]
        opts: IvpOpts,
        /// Prescribed precision of the scaled correction [default: 1e-3].
        #[arg(long)]
        ptol: Option<f64>,
        /// Maximum number of iterations [default: 40].
        #[arg(long)]
        max_iter: Option<usize>,
        /// Initial damping factor [default: 0.01].
        #[arg(long)]
        fc_start: Option<f64>,
        /// Smallest allowed damping factor [default: 0.01].
        #[arg(long)]
        fc_min: Option<f64>,
        /// Refined model and iteration log (JSON).
        #[arg(short, long, default_value = "refined.json")]
        output: PathBuf,
    },
    /// Sample the damped pendulum th1' = th2, th2' = -u th2 - (g/l) sin th1.
    GenPendulum {
        #[arg(long, default_value_t = 0.25)]
        damping: f64,
        #[arg(long, default_value_t = 2.0)]
        length: f64,
        #[arg(long, default_value_t = 9.81)]
        gravity: f64,
        #[arg(long, default_value_t = 1.0)]
        theta1: f64,
        #[arg(long, default_value_t = 0.0)]
        theta2: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 49)]
        samples: usize,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Overrides applied on top of `--config`.
#[derive(Args)]
struct PipelineOpts {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chebyshev nodes M+1 [default: 80].
    #[arg(long)]
    nodes: Option<usize>,
    /// Chebyshev coefficients kept after fitting [default: all].
    #[arg(long)]
    truncation: Option<usize>,
    /// Maximal total degree of the monomials [default: 3].
    #[arg(long)]
    degree: Option<u32>,
    /// Drop the constant monomial.
    #[arg(long)]
    no_constant: bool,
    /// Rows m of the least-squares system [default: 250].
    #[arg(long)]
    grid_size: Option<usize>,
    /// Use Chebyshev instead of equidistant solve points.
    #[arg(long)]
    chebyshev_grid: bool,
    /// Percentage threshold for active terms [default: 0.1].
    #[arg(long)]
    threshold: Option<f64>,
    /// Re-solve on the active terms after thresholding.
    #[arg(long)]
    refit: bool,
}

#[derive(Args)]
struct IvpOpts {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relative integrator tolerance [default: 1e-9].
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute integrator tolerance [default: 1e-9].
    #[arg(long)]
    atol: Option<f64>,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| e.in_stage("config")),
        None => Ok(RunConfig::default()),
    }
}

impl PipelineOpts {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = load_config(&self.config)?;
        if let Some(v) = self.nodes {
            c.cheb_nodes = v;
        }
        if self.truncation.is_some() {
            c.cheb_truncation = self.truncation;
        }
        if let Some(v) = self.degree {
            c.max_degree = v;
        }
        if self.no_constant {
            c.include_constant = false;
        }
        if let Some(v) = self.grid_size {
            c.solve_grid_size = v;
        }
        if self.chebyshev_grid {
            c.solve_grid = SolveGrid::Chebyshev;
        }
        if let Some(v) = self.threshold {
            c.threshold_pct = v;
        }
        if self.refit {
            c.refit_after_threshold = true;
        }
        c.validate().map_err(|e| e.in_stage("config"))?;
        Ok(c)
    }
}

impl IvpOpts {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = load_config(&self.config)?;
        if let Some(v) = self.rtol {
            c.rtol = v;
        }
        if let Some(v) = self.atol {
            c.atol = v;
        }
        c.validate().map_err(|e| e.in_stage("config"))?;
        Ok(c)
    }
}

fn load_data(path: &Path) -> Result<Dataset, Error> {
    Dataset::load(path).map_err(|e| e.in_stage("load dataset"))
}

fn load_model(path: &Path) -> Result<RecoveredModel, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_stage("load model"))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_stage("load model"))
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::from(e).in_stage("write output"))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Approx { data, opts, points, output } => {
            let config = opts.resolve()?;
            let ds = load_data(&data)?;
            let series = approximate(&ds, &config)?;
            let table = approximation_table(&ds, &series, points).map_err(|e| e.in_stage("approx"))?;
            emit(&output, &table)?;
        }
        Command::Reconstruct { data, opts, output, report } => {
            let config = opts.resolve()?;
            let ds = load_data(&data)?;
            let rec = reconstruct(&ds, &config)?;
            let json = serde_json::to_string_pretty(&rec.model).map_err(|e| Error::from(e).in_stage("write output"))?;
            write(&output, &json)?;
            emit(&report, &rec.report())?;
        }
        Command::Verify { model, data, opts, max_rms, output } => {
            let mut config = opts.resolve()?;
            if max_rms.is_some() {
                config.max_rms = max_rms;
            }
            let model = load_model(&model)?;
            let ds = load_data(&data)?;
            let report = verify(&model, &ds.components, config.ivp_options(), config.max_rms)
                .map_err(|e| e.in_stage("verify"))?;
            emit(&output, &report.to_csv())?;
            eprint!("{}", report.summary());
            match report.verdict {
                Verdict::NotIntegrable(_) => return Ok(ExitCode::from(2)),
                Verdict::Unsatisfactory => return Ok(ExitCode::from(3)),
                _ => {}
            }
        }
        Command::Refine { model, data, opts, ptol, max_iter, fc_start, fc_min, output } => {
            let mut config = opts.resolve()?;
            let gn = &mut config.gauss_newton;
            if let Some(v) = ptol {
                gn.ptol = v;
            }
            if let Some(v) = max_iter {
                gn.max_iter = v;
            }
            if let Some(v) = fc_start {
                gn.fc_start = v;
            }
            if let Some(v) = fc_min {
                gn.fc_min = v;
            }
            gn.validate().map_err(|e| e.in_stage("config"))?;
            let model = load_model(&model)?;
            let ds = load_data(&data)?;
            let problem = FitProblem::new(model, ds.components, config.ivp_options())
                .map_err(|e| e.in_stage("gauss-newton"))?;
            let result = refine(&problem, &config.gauss_newton).map_err(|e| e.in_stage("gauss-newton"))?;
            print!("{}", format_report(&result, &config.gauss_newton));
            let refined = problem
                .model
                .with_active_params(&result.coeffs)
                .map_err(|e| e.in_stage("gauss-newton"))?;
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "model": refined,
                "result": result,
            }))
            .map_err(|e| Error::from(e).in_stage("write output"))?;
            write(&output, &json)?;
            if !result.converged {
                let why = result.failure_reason.unwrap_or_else(|| "no convergence".into());
                return Err(Error::GaussNewton(why).in_stage("gauss-newton"));
            }
        }
        Command::GenPendulum { damping, length, gravity, theta1, theta2, t_end, samples, output } => {
            let (a, b) = generate_pendulum_data(damping, length, gravity, [theta1, theta2], t_end, samples)
                .map_err(|e| e.in_stage("gen-pendulum"))?;
            let ds = Dataset::new(vec![a, b]).map_err(|e| e.in_stage("gen-pendulum"))?;
            emit(&output, &ds.to_wide_csv()?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
