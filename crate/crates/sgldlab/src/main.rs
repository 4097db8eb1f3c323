//! Command-line entry point: experiment runners that reproduce the figure
//! data and cost tables, plus direct access to the sampler, the analytic
//! oracle, the Metropolis-Hastings reference chain and dataset generation.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use sgldlab::experiments::{
    self, BiasVarianceConfig, CostRegimesConfig, HeatmapConfig, LogregRmseConfig,
    OracleValidateConfig, RmseConstantCostConfig,
};
use sgldlab::gradient::{precompute_cv, CostLedger, GradientScheme};
use sgldlab::mh::{mh_sample, MhConfig};
use sgldlab::models::{
    find_mode, generate_gaussian_data, generate_logreg_data, load_gaussian_csv,
    load_logistic_csv, save_gaussian_csv, save_logistic_csv, GaussianConjugateModel,
    LangevinAdapter, LogisticRegressionModel, PosteriorModel,
};
use sgldlab::oracle::{
    oracle_bias, oracle_mse, oracle_rr_variance_bias, oracle_stationary_variance, oracle_var_b,
    oracle_variance, OracleInputs,
};
use sgldlab::sampler::{
    run_paths, run_rr_pairs, steps_for_horizon, DriftConvention, InitDistribution, RunConfig,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sgldlab", about = "Stochastic-gradient Langevin dynamics laboratory")]
struct Cli {
    /// Worker threads for path-parallel runs (default: all cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSVs and meta.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Gaussian,
    Logreg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Full,
    Naive,
    Cv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Langevin,
    Ou,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Gaussian)]
    model: ModelKind,
    /// Load the dataset (with its .meta.json sidecar) instead of generating.
    #[arg(long)]
    data_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000)]
    n_data: usize,
    /// Gaussian model: prior variance.
    #[arg(long, default_value_t = 1.0)]
    sigma_theta_sq: f64,
    /// Gaussian model: observation noise variance.
    #[arg(long, default_value_t = 1.0)]
    sigma_y_sq: f64,
    /// Gaussian model: data-generating mean.
    #[arg(long, default_value_t = 1.0)]
    data_mean: f64,
    /// Logistic model: parameter dimension.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Logistic model: prior variance.
    #[arg(long, default_value_t = 10.0)]
    prior_variance: f64,
    /// Dataset-generation seed.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

enum Model {
    Gaussian(GaussianConjugateModel),
    Logreg(LogisticRegressionModel),
}

impl Model {
    fn as_dyn(&self) -> &dyn PosteriorModel {
        match self {
            Model::Gaussian(m) => m,
            Model::Logreg(m) => m,
        }
    }

    /// Natural drift convention of the model's gradient scaling.
    fn natural_convention(&self) -> DriftConvention {
        match self {
            Model::Gaussian(_) => DriftConvention::Ou,
            Model::Logreg(_) => DriftConvention::Langevin,
        }
    }
}

impl ModelArgs {
    fn build(&self) -> Result<Model, Box<dyn std::error::Error>> {
        Ok(match (self.model, &self.data_file) {
            (ModelKind::Gaussian, Some(path)) => Model::Gaussian(load_gaussian_csv(path)?),
            (ModelKind::Gaussian, None) => {
                let data = generate_gaussian_data(
                    self.n_data,
                    self.data_mean,
                    self.sigma_y_sq,
                    self.data_seed,
                );
                Model::Gaussian(GaussianConjugateModel::new(
                    self.sigma_theta_sq,
                    self.sigma_y_sq,
                    data,
                )?)
            }
            (ModelKind::Logreg, Some(path)) => Model::Logreg(load_logistic_csv(path)?),
            (ModelKind::Logreg, None) => Model::Logreg(generate_logreg_data(
                self.dim,
                self.n_data,
                self.prior_variance,
                self.data_seed,
            )?),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bias and variance of the chain state vs batch size (Gaussian).
    BiasVariance(ExperimentArgs),
    /// RMSE across constant-cost (batch, stepsize) families (Gaussian).
    RmseConstantCost(ExperimentArgs),
    /// Oracle relative-bias heatmap of the variance estimator.
    RelbiasHeatmap(ExperimentArgs),
    /// Same heatmap for the Richardson-Romberg extrapolated estimator.
    RrHeatmap(ExperimentArgs),
    /// Same-cost RMSE comparison on logistic regression vs an MH reference.
    LogregRmse(ExperimentArgs),
    /// Cost-regime predictions and oracle-certified minimal-cost slopes.
    CostRegimes(ExperimentArgs),
    /// Oracle-vs-simulation validation battery; nonzero exit on failure.
    OracleValidate {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Negative control: corrupt the oracle stepsize so checks fail.
        #[arg(long)]
        corrupt_h: bool,
    },
    /// Run sampler paths and stream per-path CSV rows.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        /// Stepsize h.
        #[arg(long)]
        h: f64,
        /// Horizon T (steps = ceil(T/h)); exclusive with --steps.
        #[arg(long, short = 'T', conflicts_with = "steps")]
        t: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial state: comma-separated floats, or "mode".
        #[arg(long, default_value = "0")]
        init: String,
        /// Run coupled Richardson-Romberg pairs (fine chain at h/2 with
        /// half the batch) instead of single chains.
        #[arg(long)]
        rr: bool,
        #[arg(long)]
        allow_unstable: bool,
        /// Noise scaling; defaults to the model's natural convention.
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Full)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        /// Output CSV file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print closed-form Gaussian oracle quantities as JSON.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0.0)]
        theta0: f64,
    },
    /// Random-walk Metropolis-Hastings reference sampler.
    Mh {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 10)]
        thin: usize,
        /// Fixed proposal scale (auto-tuned when omitted).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for samples.csv and mh_meta.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a dataset CSV with its .meta.json sidecar.
    Dataset {
        #[command(flatten)]
        model: ModelArgs,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config<T: DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, Box<dyn std::error::Error>> {
    match path {
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => Ok(T::default()),
    }
}

fn prepare_out(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

fn parse_init(
    spec: &str,
    model: &dyn PosteriorModel,
) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    if spec == "mode" {
        let mode = find_mode(model, 1e-8 * model.data_len() as f64, 200)?;
        return Ok(mode.as_slice().to_vec());
    }
    let components: Result<Vec<f64>, _> =
        spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let mut components = components?;
    if components.len() == 1 && model.dim() > 1 {
        components = vec![components[0]; model.dim()];
    }
    if components.len() != model.dim() {
        return Err(format!(
            "init has {} components but the model has dimension {}",
            components.len(),
            model.dim()
        )
        .into());
    }
    Ok(components)
}

fn build_scheme(
    scheme: SchemeArg,
    batch: usize,
    model: &dyn PosteriorModel,
    ledger: &mut CostLedger,
) -> Result<GradientScheme, Box<dyn std::error::Error>> {
    Ok(match scheme {
        SchemeArg::Full => GradientScheme::Full,
        SchemeArg::Naive => GradientScheme::NaiveSubsample { batch },
        SchemeArg::Cv => {
            precompute_cv(model, batch, 1e-8 * model.data_len() as f64, ledger)?
        }
    })
}

fn emit(out: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run_sample(
    model_args: &ModelArgs,
    h: f64,
    t: Option<f64>,
    steps: Option<usize>,
    paths: usize,
    seed: u64,
    init: &str,
    rr: bool,
    allow_unstable: bool,
    convention: Option<ConventionArg>,
    scheme: SchemeArg,
    batch: usize,
    out: &Option<PathBuf>,
) -> Result<(), Box<dyn std::error::Error>> {
    let model = model_args.build()?;
    let dyn_model = model.as_dyn();
    let steps = match (t, steps) {
        (Some(t), None) => steps_for_horizon(t, h),
        (None, Some(s)) => s,
        (None, None) => return Err("one of --T or --steps is required".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let convention = match convention {
        Some(ConventionArg::Langevin) => DriftConvention::Langevin,
        Some(ConventionArg::Ou) => DriftConvention::Ou,
        None => model.natural_convention(),
    };
    let position = parse_init(init, dyn_model)?;
    let run = RunConfig {
        h,
        steps,
        paths,
        seed,
        convention,
        init: InitDistribution::Point { position },
        allow_unstable,
    };
    let mut precompute = CostLedger::default();
    let grad_scheme = build_scheme(scheme, batch, dyn_model, &mut precompute)?;

    let d = dyn_model.dim();
    let mut csv = String::new();
    let theta_cols: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
    if rr {
        let fine_batch = (batch / 2).max(1);
        let fine_scheme = build_scheme(scheme, fine_batch, dyn_model, &mut precompute)?;
        writeln!(csv, "path_id,chain,{},term_evals,steps", theta_cols.join(","))?;
        let outputs = run_rr_pairs(dyn_model, &fine_scheme, &grad_scheme, &run)?;
        for (p, o) in outputs.iter().enumerate() {
            for (chain, state) in [("fine", &o.fine), ("coarse", &o.coarse)] {
                let thetas: Vec<String> =
                    state.as_slice().iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(
                    csv,
                    "{p},{chain},{},{},{}",
                    thetas.join(","),
                    o.ledger.term_evals,
                    o.ledger.steps
                )?;
            }
        }
    } else {
        writeln!(csv, "path_id,{},term_evals,steps", theta_cols.join(","))?;
        let outputs = run_paths(dyn_model, &grad_scheme, &run)?;
        for (p, o) in outputs.iter().enumerate() {
            let thetas: Vec<String> =
                o.final_state.as_slice().iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(csv, "{p},{},{},{}", thetas.join(","), o.ledger.term_evals, o.ledger.steps)?;
        }
    }
    emit(out, &csv)?;
    Ok(())
}

fn run_oracle(
    model_args: &ModelArgs,
    h: f64,
    batch: usize,
    steps: usize,
    paths: usize,
    theta0: f64,
) -> Result<(), Box<dyn std::error::Error>> {
    let model = match model_args.build()? {
        Model::Gaussian(m) => m,
        Model::Logreg(_) => return Err("the analytic oracle covers the Gaussian model only".into()),
    };
    let a = model.drift_a();
    let (mu_p, sigma_p_sq) = model.exact_posterior();
    let var_b = oracle_var_b(model.data(), model.sigma_y_sq(), batch)?;
    let inputs = OracleInputs {
        drift_a: a,
        mean_b: model.drift_b(),
        var_b,
        h,
        theta0_mean: theta0,
        theta0_var: 0.0,
        steps,
        paths,
    };
    inputs.validate()?;
    let (plain_bias, rr_bias) = oracle_rr_variance_bias(a, h, var_b);
    let report = serde_json::json!({
        "drift_a": a,
        "drift_b": model.drift_b(),
        "posterior_mean": mu_p,
        "posterior_variance": sigma_p_sq,
        "var_b": var_b,
        "bias": oracle_bias(&inputs),
        "variance": oracle_variance(&inputs),
        "stationary_variance": oracle_stationary_variance(a, h, var_b),
        "mse": oracle_mse(&inputs),
        "variance_bias_plain": plain_bias,
        "variance_bias_rr": rr_bias,
        "stability_limit": 1.0 / a,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_mh(
    model_args: &ModelArgs,
    steps: usize,
    burn_in: usize,
    thin: usize,
    scale: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let model = model_args.build()?;
    let config = MhConfig { steps, burn_in, thin, proposal_scale: scale, seed };
    // The Gaussian model's potential is half the log target density; the
    // adapter doubles it so MH samples the true posterior.
    let output = match &model {
        Model::Gaussian(m) => mh_sample(&LangevinAdapter::new(m), &config)?,
        Model::Logreg(m) => mh_sample(m, &config)?,
    };
    prepare_out(out)?;
    let d = model.as_dyn().dim();
    let mut csv = String::from("sample_id");
    for j in 1..=d {
        write!(csv, ",theta_{j}")?;
    }
    csv.push('\n');
    for (i, s) in output.samples.iter().enumerate() {
        write!(csv, "{i}")?;
        for v in s.as_slice() {
            write!(csv, ",{v:.17e}")?;
        }
        csv.push('\n');
    }
    std::fs::write(out.join("samples.csv"), csv)?;
    std::fs::write(
        out.join("mh_meta.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "acceptance_rate": output.metadata.acceptance_rate,
            "tuned_scale": output.metadata.tuned_scale,
            "ess": output.metadata.ess,
            "warning": output.metadata.warning,
            "steps": steps,
            "burn_in": burn_in,
            "thin": thin,
            "seed": seed,
        }))?,
    )?;
    if let Some(w) = &output.metadata.warning {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "mh: {} samples, acceptance {:.3}, ess {:.0}",
        output.samples.len(),
        output.metadata.acceptance_rate,
        output.metadata.ess
    );
    Ok(())
}

fn run_dataset(model_args: &ModelArgs, out: &Path) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    match model_args.build()? {
        Model::Gaussian(m) => save_gaussian_csv(&m, out, Some(model_args.data_seed))?,
        Model::Logreg(m) => save_logistic_csv(&m, out, Some(model_args.data_seed))?,
    }
    eprintln!("wrote {} (+ sidecar)", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match &cli.command {
        Command::BiasVariance(args) => {
            let mut cfg: BiasVarianceConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            prepare_out(&args.out)?;
            experiments::run_bias_variance(&cfg, Some(&args.out))?;
        }
        Command::RmseConstantCost(args) => {
            let mut cfg: RmseConstantCostConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            prepare_out(&args.out)?;
            experiments::run_rmse_constant_cost(&cfg, Some(&args.out))?;
        }
        Command::RelbiasHeatmap(args) | Command::RrHeatmap(args) => {
            let mut cfg: HeatmapConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            cfg.rr = matches!(cli.command, Command::RrHeatmap(_));
            prepare_out(&args.out)?;
            experiments::run_heatmap(&cfg, Some(&args.out))?;
        }
        Command::LogregRmse(args) => {
            let mut cfg: LogregRmseConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            prepare_out(&args.out)?;
            let result = experiments::run_logreg_rmse(&cfg, Some(&args.out))?;
            eprintln!(
                "mh reference: ess {:.0}, acceptance {:.3}",
                result.mh_metadata.ess, result.mh_metadata.acceptance_rate
            );
        }
        Command::CostRegimes(args) => {
            let mut cfg: CostRegimesConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            prepare_out(&args.out)?;
            let result = experiments::run_cost_regimes(&cfg, Some(&args.out))?;
            for (scheme, slope) in &result.slopes {
                eprintln!("{}: cost slope {:.3}", scheme.label(), slope);
            }
        }
        Command::OracleValidate { args, corrupt_h } => {
            let mut cfg: OracleValidateConfig = load_config(&args.config)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if *corrupt_h {
                cfg.corrupt_h = true;
            }
            prepare_out(&args.out)?;
            let result = experiments::run_oracle_validate(&cfg, Some(&args.out))?;
            for row in &result.rows {
                eprintln!(
                    "{}: {} (statistic {:.3e}, threshold {:.3e})",
                    row.name,
                    if row.pass { "pass" } else { "FAIL" },
                    row.statistic,
                    row.threshold
                );
            }
            if !result.all_pass {
                eprintln!("oracle validation FAILED");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Sample {
            model,
            h,
            t,
            steps,
            paths,
            seed,
            init,
            rr,
            allow_unstable,
            convention,
            scheme,
            batch,
            out,
        } => {
            run_sample(
                model,
                *h,
                *t,
                *steps,
                *paths,
                *seed,
                init,
                *rr,
                *allow_unstable,
                *convention,
                *scheme,
                *batch,
                out,
            )?;
        }
        Command::Oracle { model, h, batch, steps, paths, theta0 } => {
            run_oracle(model, *h, *batch, *steps, *paths, *theta0)?;
        }
        Command::Mh { model, steps, burn_in, thin, scale, seed, out } => {
            run_mh(model, *steps, *burn_in, *thin, *scale, *seed, out)?;
        }
        Command::Dataset { model, out } => {
            run_dataset(model, out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
