use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxyreg::baseline::{Activation, GcnConfig};
use proxyreg::diagnostics::{degree_stats, proxy_error_stats};
use proxyreg::harness::config::default_params;
use proxyreg::harness::plot::emit_plots;
use proxyreg::harness::sweep::{write_atomic, CellStore};
use proxyreg::harness::{run_sweep, GridAxis, SweepConfig, SweepMode, SweepResult};
use proxyreg::model::{default_beta, GraphSample, ModelParams};
use proxyreg::predict::{evaluate_on_base, EvalOptions};
use proxyreg::proxy::{compute_all_proxies, ScreenConfig};
use proxyreg::regress::{naive_estimate, oracle_estimate, proxy_estimate_with, Method, CSV_HEADER};
use proxyreg::rng::replicate_seed;
use proxyreg::{Error, Result};

/// Node regression on ER-contaminated random dot-product graphs.
#[derive(Parser)]
#[command(name = "proxyreg", version)]
struct Cli {
    /// Base seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Default to n = 30000, d = 250
    #[arg(long, global = true)]
    full_scale: bool,
    /// Reuse finished sweep cells in the output directory
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph and optionally dump it
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Directory for graph.txt and the covariate matrices
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Fit coefficients and report their errors
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated subset of naive_z, proxy_lambda, oracle_x
        #[arg(long, default_value = "naive_z,proxy_lambda")]
        methods: String,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Leave nodes with a zero proxy block out of the proxy fit
        #[arg(long)]
        drop_fallback_rows: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Held-out prediction error of the attention predictor and the baseline
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        gcn: GcnArgs,
        #[arg(long, default_value_t = 200)]
        holdouts: usize,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the ER exponent gamma
    SweepGamma(SweepArgs),
    /// Sweep the covariate noise variance
    SweepEta(SweepArgs),
    /// Sweep the node count
    SweepN(SweepArgs),
    /// Write degrees.csv and proxy_error.csv for one sample
    Diagnose {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Aggregate a results file and draw mean ± SD curves
    Plot {
        /// Defaults to <out-dir>/results.csv
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sigma_x2: Option<f64>,
    #[arg(long)]
    sigma_eta2: Option<f64>,
    #[arg(long)]
    sigma_eps2: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, p: &mut ModelParams) {
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(d) = self.d {
            if d != p.d {
                p.d = d;
                p.beta = default_beta(d);
            }
        }
        for (slot, v) in [
            (&mut p.alpha, self.alpha),
            (&mut p.gamma, self.gamma),
            (&mut p.sigma_x2, self.sigma_x2),
            (&mut p.sigma_eta2, self.sigma_eta2),
            (&mut p.sigma_eps2, self.sigma_eps2),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
    }
}

#[derive(Args, Clone, Default)]
struct GcnArgs {
    #[arg(long)]
    gcn_layers: Option<usize>,
    #[arg(long)]
    gcn_self_weight: Option<f64>,
    /// identity or tanh
    #[arg(long)]
    gcn_activation: Option<String>,
}

impl GcnArgs {
    fn apply(&self, cfg: &mut GcnConfig) -> Result<()> {
        if let Some(l) = self.gcn_layers {
            cfg.layers = l;
        }
        if let Some(w) = self.gcn_self_weight {
            cfg.self_weight = w;
        }
        if let Some(a) = &self.gcn_activation {
            cfg.activation = a.parse::<Activation>()?;
        }
        cfg.validate()
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Flat TOML file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// estimation or prediction
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated grid values
    #[arg(long)]
    grid: Option<String>,
    /// Number of replicate seeds
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated subset of naive, proxy, gcn, attention_predict
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    holdouts: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    gcn: GcnArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let base_params = |model: &ModelArgs| -> Result<ModelParams> {
        let mut p = default_params(cli.full_scale);
        model.apply(&mut p);
        if let Some(s) = cli.seed {
            p.seed = s;
        }
        p.validate()?;
        Ok(p)
    };
    match &cli.command {
        Command::Simulate { model, dump } => {
            let p = base_params(model)?;
            let g = GraphSample::generate(&p)?;
            println!("n = {}, d = {}, seed = {}", p.n, p.d, p.seed);
            println!(
                "t_n = {}, tau = {}, tau_screen = {}, p_n = {}",
                g.derived.t_n, g.derived.tau, g.derived.tau_screen, g.derived.p_n
            );
            println!(
                "edges: geometric {}, er {}, union {}",
                g.edges_geo.len(),
                g.edges_er.len(),
                g.adjacency.num_edges()
            );
            if let Some(dir) = dump {
                g.write_dump(dir)?;
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Estimate {
            model,
            methods,
            seeds,
            drop_fallback_rows,
            out,
        } => {
            let p = base_params(model)?;
            let methods: Vec<Method> = split_list(methods).map(str::parse).collect::<Result<_>>()?;
            if methods.is_empty() {
                return Err(Error::InvalidConfig("no methods given".into()));
            }
            let path = out.clone().unwrap_or_else(|| cli.out_dir.join("estimate.csv"));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for k in 0..*seeds as u64 {
                let params = ModelParams {
                    seed: replicate_seed(p.seed, k),
                    ..p.clone()
                };
                let g = GraphSample::generate(&params)?;
                for &m in &methods {
                    let r = match m {
                        Method::NaiveZ => naive_estimate(&g)?,
                        Method::OracleX => oracle_estimate(&g)?,
                        Method::ProxyLambda => {
                            let cfg = ScreenConfig::for_sample(&g)?;
                            proxy_estimate_with(&g, &compute_all_proxies(&g, &cfg), *drop_fallback_rows)?
                        }
                    };
                    println!("seed {} {:>13}: rel_error {:.4}", params.seed, m, r.rel_error);
                    w.write_record(r.csv_record(&params))?;
                }
            }
            write_output(&path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
        }
        Command::Predict {
            model,
            gcn,
            holdouts,
            seeds,
            out,
        } => {
            let p = base_params(model)?;
            let mut gcn_cfg = GcnConfig::default();
            gcn.apply(&mut gcn_cfg)?;
            let path = out.clone().unwrap_or_else(|| cli.out_dir.join("predict.csv"));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["seed", "method", "mse", "mse_stderr", "fallback_rate", "mean_neighborhood", "holdouts"])?;
            let options = EvalOptions {
                screen: None,
                gcn: Some(gcn_cfg),
            };
            for k in 0..*seeds as u64 {
                let params = ModelParams {
                    seed: replicate_seed(p.seed, k),
                    ..p.clone()
                };
                let base = GraphSample::generate(&params)?;
                let s = evaluate_on_base(&base, *holdouts, &options)?;
                let mut emit = |method: String, e: proxyreg::predict::MseEstimate, fallback: f64| {
                    println!("seed {} {:>17}: mse {:.4} ± {:.4}", params.seed, method, e.mean, e.stderr);
                    w.write_record([
                        params.seed.to_string(),
                        method,
                        e.mean.to_string(),
                        e.stderr.to_string(),
                        fallback.to_string(),
                        s.mean_neighborhood.to_string(),
                        e.count.to_string(),
                    ])
                };
                emit("attention_predict".into(), s.attention, s.fallback_rate)?;
                for (depth, e) in s.gcn.iter().enumerate() {
                    emit(format!("gcn_l{depth}"), *e, 0.0)?;
                }
            }
            write_output(&path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
        }
        Command::SweepGamma(args) => sweep(&cli, GridAxis::Gamma, args),
        Command::SweepEta(args) => sweep(&cli, GridAxis::SigmaEta2, args),
        Command::SweepN(args) => sweep(&cli, GridAxis::N, args),
        Command::Diagnose { model } => {
            let p = base_params(model)?;
            let g = GraphSample::generate(&p)?;
            let degrees = degree_stats(&g, &g.derived)?;
            let cfg = ScreenConfig::for_sample(&g)?;
            let proxies = compute_all_proxies(&g, &cfg);
            let errors = proxy_error_stats(&proxies, g.latent.view(), g.observed.view())?;
            fs::create_dir_all(&cli.out_dir)?;
            let mut buf = Vec::new();
            degrees.write_csv(&mut buf)?;
            write_output(&cli.out_dir.join("degrees.csv"), &buf)?;
            let mut buf = Vec::new();
            errors.write_csv(&mut buf, &proxies.fallback)?;
            write_output(&cli.out_dir.join("proxy_error.csv"), &buf)?;
            let er = degrees.er_summary();
            let geo = degrees.geometric_summary();
            let [s2, s1] = degrees.screened_summary();
            println!("ER degree: mean {:.1} (n^gamma = {:.1})", er.mean, degrees.expected_er);
            match degrees.er_band_fraction {
                Some(f) => println!("ER degree in [n^gamma/2, 2 n^gamma]: {:.4}", f),
                None => println!("ER degree band: n/a"),
            }
            println!(
                "geometric degree: mean {:.1} (n^alpha / t_n = {:.1})",
                geo.mean, degrees.geometric_order
            );
            println!("screened counts: mean {:.1} / {:.1}", s2.mean, s1.mean);
            println!("screened-ER exponent: {:.4}", degrees.screened_er_exponent);
            println!(
                "mean |lambda - x|^2 / d = {:.4}, mean |z - x|^2 / d = {:.4}, fallback rate {:.4}",
                errors.mean_proxy_error, errors.mean_naive_error, errors.fallback_rate
            );
            Ok(())
        }
        Command::Plot { input } => {
            let path = input.clone().unwrap_or_else(|| cli.out_dir.join("results.csv"));
            let result = SweepResult::read_csv(&fs::read_to_string(&path)?)?;
            for p in emit_plots(&result, &cli.out_dir)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn sweep(cli: &Cli, axis: GridAxis, args: &SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::defaults(axis, cli.full_scale);
    if let Some(path) = &args.config {
        cfg.apply_toml(&fs::read_to_string(path)?)?;
    }
    if let Some(mode) = &args.mode {
        if mode.parse::<SweepMode>()? == SweepMode::Prediction && cfg.mode != SweepMode::Prediction {
            cfg = cfg.prediction();
        } else {
            cfg.mode = mode.parse()?;
        }
    }
    if let Some(grid) = &args.grid {
        cfg.grid = split_list(grid)
            .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidConfig(format!("bad grid value {v:?}"))))
            .collect::<Result<_>>()?;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = split_list(methods).map(str::parse).collect::<Result<_>>()?;
    }
    if let Some(s) = args.seeds {
        cfg.num_seeds = s;
    }
    if let Some(h) = args.holdouts {
        cfg.holdouts = h;
    }
    if let Some(s) = cli.seed {
        cfg.base.seed = s;
    }
    args.model.apply(&mut cfg.base);
    args.gcn.apply(&mut cfg.gcn)?;
    cfg.validate()?;

    let store = CellStore::open(&cli.out_dir.join("cells"), &cfg, cli.resume)?;
    let result = run_sweep(&cfg, Some(&store))?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf, &cfg.header_comments())?;
    let path = cli.out_dir.join("results.csv");
    write_output(&path, &buf)?;
    println!("wrote {} ({} rows)", path.display(), result.rows.len());
    for p in emit_plots(&result, &cli.out_dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    write_atomic(path, bytes)
}
