//! `nwdro` command-line front end.
//!
//! Every subcommand folds its flags over an optional JSON [`RunConfig`], calls
//! one library entry point, prints a JSON result on stdout and, with `--out`,
//! writes a CSV whose first line is `# config-hash: <sha256>`.
//!
//! Exit codes: 0 success, 1 invalid input (including usage errors), 2 solver
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nwdro_core::transport::GroundNorm;
use nwdro_core::{BandwidthRule, Error, KernelFamily, KernelSpec, NewsvendorParams, PolicyKind, PortfolioParams};

mod commands;
pub mod config;

pub use config::{Problem, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "nwdro", version, about = "Kernel-weighted Wasserstein DRO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write a CSV result here as well.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for the experiments (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nadaraya-Watson weights of a sample file at a query covariate.
    Weights {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Wasserstein distance and optimal plan between two measure files.
    Wdist {
        /// Measure CSV with header `w,y1,...`.
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long)]
        b: Option<PathBuf>,
        /// Transport order.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, value_enum)]
        norm: Option<NormArg>,
    },
    /// Kernel-weighted DRO newsvendor.
    SolveNewsvendor {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        samples: SampleArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        params: NewsvendorArgs,
        /// Write the generic reformulation LP listing here.
        #[arg(long)]
        lp_out: Option<PathBuf>,
    },
    /// Kernel-weighted DRO mean-CVaR portfolio.
    SolvePortfolio {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        params: PortfolioArgs,
    },
    /// Worst-case distribution for a fixed decision.
    WorstCase {
        #[arg(long, value_enum)]
        problem: Option<ProblemArg>,
        /// Decision; for the portfolio `(z_1..z_d, v)`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        samples: SampleArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        newsvendor: NewsvendorArgs,
        #[command(flatten)]
        portfolio: PortfolioArgs,
    },
    /// Out-of-sample disappointment on synthetic newsvendor data.
    Disappointment {
        /// Sample sizes (comma-separated).
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        sims: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        params: NewsvendorArgs,
    },
    /// Median W1 between the kernel estimate and the true conditional law.
    Concentration {
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Rolling-sample portfolio backtest on a monthly return file.
    Backtest {
        /// Returns CSV with header `date,<name>...`, values in percent.
        #[arg(long)]
        returns: Option<PathBuf>,
        /// Estimation window M.
        #[arg(long)]
        window: Option<usize>,
        /// Radius scales for `eps = k * M^(1/d)` (comma-separated).
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        /// Label for the `portfolio` CSV column (default: file stem).
        #[arg(long)]
        portfolio_name: Option<String>,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        params: PortfolioArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Weights { .. } => "weights",
            Command::Wdist { .. } => "wdist",
            Command::SolveNewsvendor { .. } => "solve-newsvendor",
            Command::SolvePortfolio { .. } => "solve-portfolio",
            Command::WorstCase { .. } => "worst-case",
            Command::Disappointment { .. } => "disappointment",
            Command::Concentration { .. } => "concentration",
            Command::Backtest { .. } => "backtest",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    Euclidean,
    L1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProblemArg {
    Newsvendor,
    Portfolio,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Naive,
    Epanechnikov,
    Gaussian,
}

#[derive(Debug, Default, Args)]
pub struct DataArgs {
    /// Sample CSV with header `x1,...,y1,...`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of covariate columns in `--data`.
    #[arg(long)]
    pub dx: Option<usize>,
    /// Query covariate (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub query: Option<Vec<f64>>,
}

#[derive(Debug, Default, Args)]
pub struct SampleArgs {
    /// Scalar demand samples (comma-separated), instead of `--data`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub samples: Option<Vec<f64>>,
    /// Nominal weights for `--samples`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Default, Args)]
pub struct PolicyArgs {
    /// ew, naive-so, nw-so, naive-dro or nw-dro (comma-separated where a
    /// command accepts several).
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<PolicyKind>>,
    /// Fixed ball radius.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<FamilyArg>,
    /// Fixed bandwidth.
    #[arg(long, conflicts_with = "bandwidth_rate")]
    pub bandwidth: Option<f64>,
    /// Bandwidth `n^(-rate)`.
    #[arg(long)]
    pub bandwidth_rate: Option<f64>,
    /// Use raw covariates instead of z-scores.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Default, Args)]
pub struct NewsvendorArgs {
    #[arg(long)]
    pub backorder: Option<f64>,
    #[arg(long)]
    pub holding: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct PortfolioArgs {
    /// CVaR level.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Weight on expected return.
    #[arg(long)]
    pub gamma: Option<f64>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.data, self.data);
        set(&mut cfg.dim_x, self.dx);
        set(&mut cfg.query, self.query);
    }
}

impl SampleArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.samples, self.samples);
        set(&mut cfg.weights, self.weights);
    }
}

impl PolicyArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.policy, self.policy);
        if self.eps.is_some() {
            // an explicit radius flag beats any schedule from the file
            cfg.eps = self.eps;
            cfg.schedule = None;
        }
    }
}

impl KernelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let mut spec: KernelSpec = cfg.kernel.unwrap_or_default();
        if let Some(f) = self.kernel {
            spec.family = match f {
                FamilyArg::Naive => KernelFamily::Naive,
                FamilyArg::Epanechnikov => KernelFamily::Epanechnikov,
                FamilyArg::Gaussian => KernelFamily::Gaussian,
            };
        }
        if let Some(h) = self.bandwidth {
            spec.bandwidth = BandwidthRule::Fixed(h);
        }
        if let Some(r) = self.bandwidth_rate {
            spec.bandwidth = BandwidthRule::Rate(r);
        }
        if self.no_standardize {
            spec.standardize = false;
        }
        if cfg.kernel.is_some() || spec != KernelSpec::default() {
            cfg.kernel = Some(spec);
        }
    }
}

impl NewsvendorArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if self.backorder.is_none() && self.holding.is_none() && self.lower.is_none() && self.upper.is_none() {
            return;
        }
        let mut p: NewsvendorParams = cfg.newsvendor.unwrap_or_default();
        set_value(&mut p.backorder, self.backorder);
        set_value(&mut p.holding, self.holding);
        set_value(&mut p.lower, self.lower);
        set_value(&mut p.upper, self.upper);
        cfg.newsvendor = Some(p);
    }
}

impl PortfolioArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if self.eta.is_none() && self.gamma.is_none() {
            return;
        }
        let mut p: PortfolioParams = cfg.portfolio.unwrap_or_default();
        set_value(&mut p.eta, self.eta);
        set_value(&mut p.gamma, self.gamma);
        cfg.portfolio = Some(p);
    }
}

fn set_value(slot: &mut f64, flag: Option<f64>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Folds the command's flags over `cfg`.
pub fn merge(command: Command, cfg: &mut RunConfig) {
    match command {
        Command::Weights { data, kernel } => {
            data.apply(cfg);
            kernel.apply(cfg);
        }
        Command::Wdist { a, b, p, norm } => {
            set(&mut cfg.a, a);
            set(&mut cfg.b, b);
            set(&mut cfg.p, p);
            set(
                &mut cfg.norm,
                norm.map(|n| match n {
                    NormArg::Euclidean => GroundNorm::Euclidean,
                    NormArg::L1 => GroundNorm::L1,
                }),
            );
        }
        Command::SolveNewsvendor {
            data,
            samples,
            policy,
            kernel,
            params,
            lp_out: _,
        } => {
            data.apply(cfg);
            samples.apply(cfg);
            policy.apply(cfg);
            kernel.apply(cfg);
            params.apply(cfg);
        }
        Command::SolvePortfolio {
            data,
            policy,
            kernel,
            params,
        } => {
            data.apply(cfg);
            policy.apply(cfg);
            kernel.apply(cfg);
            params.apply(cfg);
        }
        Command::WorstCase {
            problem,
            z,
            data,
            samples,
            policy,
            kernel,
            newsvendor,
            portfolio,
        } => {
            set(
                &mut cfg.problem,
                problem.map(|p| match p {
                    ProblemArg::Newsvendor => Problem::Newsvendor,
                    ProblemArg::Portfolio => Problem::Portfolio,
                }),
            );
            set(&mut cfg.z, z);
            data.apply(cfg);
            samples.apply(cfg);
            policy.apply(cfg);
            kernel.apply(cfg);
            newsvendor.apply(cfg);
            portfolio.apply(cfg);
        }
        Command::Disappointment {
            n,
            sims,
            seed,
            policy,
            kernel,
            params,
        } => {
            set(&mut cfg.n, n);
            set(&mut cfg.sims, sims);
            set(&mut cfg.seed, seed);
            policy.apply(cfg);
            kernel.apply(cfg);
            params.apply(cfg);
        }
        Command::Concentration { ns, reps, seed, kernel } => {
            set(&mut cfg.ns, ns);
            set(&mut cfg.reps, reps);
            set(&mut cfg.seed, seed);
            kernel.apply(cfg);
        }
        Command::Backtest {
            returns,
            window,
            k,
            portfolio_name,
            policy,
            kernel,
            params,
        } => {
            set(&mut cfg.returns, returns);
            set(&mut cfg.window, window);
            set(&mut cfg.k, k);
            set(&mut cfg.portfolio_name, portfolio_name);
            policy.apply(cfg);
            kernel.apply(cfg);
            params.apply(cfg);
        }
    }
}

/// 1 for bad input, 2 for a solver that did not reach an optimum.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotOptimal(_) | Error::IterationLimit(_) | Error::Numerical(_) => 2,
        Error::Window { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Runs one invocation; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(stderr, "error: {}", single_line(&err));
            exit_code(&err)
        }
    }
}

fn single_line(err: &Error) -> String {
    err.to_string().replace('\n', " ")
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> nwdro_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.out, cli.out);
    set(&mut cfg.threads, cli.threads);
    let name = cli.command.name();
    let lp_out = match &cli.command {
        Command::SolveNewsvendor { lp_out, .. } => lp_out.clone(),
        _ => None,
    };
    merge(cli.command, &mut cfg);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let output = pool.install(|| commands::dispatch(name, &cfg, lp_out.as_deref()))?;

    let json = serde_json::to_string_pretty(&output.json).map_err(|e| Error::InvalidInput(e.to_string()))?;
    writeln!(stdout, "{json}").map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })?;
    if let Some(path) = &cfg.out {
        let mut body = format!("# config-hash: {}\n", cfg.hash(name)?).into_bytes();
        body.extend_from_slice(&output.csv);
        std::fs::write(path, body).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok(())
}
