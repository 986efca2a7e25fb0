//! Command-line surface: fit, predict, bf, simulate and fmri-fit
//! subcommands, each writing CSV artifacts plus a manifest that echoes the
//! resolved configuration.

use crate::bayes_factor::{copula_r_squared, log_bayes_factor, BfRequest};
use crate::copula::{build_factor, RegressionData};
use crate::error::{Error, Result};
use crate::io;
use crate::margins::{fit_margin, MarginKind};
use crate::predict::{self, MarginSpec};
use crate::priors::GPrior;
use crate::sampler::{run_chain, SamplerConfig};
use crate::simstudy::{self, MethodSpec, SimCase, SimScenario};
use crate::spatial::{self, FmriDataset, SpatialConfig};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "copula-bvs",
    version,
    about = "Marginally-calibrated Bayesian variable selection with implicit Gaussian copulas"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for every random stream of the run
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory (created if missing)
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// MCMC sweeps
    #[arg(long, global = true, default_value_t = 5000)]
    sweeps: usize,

    /// Burn-in sweeps
    #[arg(long, global = true, default_value_t = 1000)]
    burnin: usize,

    /// Prior on g: hyper-g, hyper-g-n, zellner-siow or fixed:<value>
    #[arg(long = "g-prior", global = true, default_value = "hyper-g")]
    g_prior: String,

    /// Hyperparameter a of the hyper-g family
    #[arg(long = "hyper-a", global = true, default_value_t = 4.0)]
    hyper_a: f64,

    /// Margin estimator: kde, empirical or normal
    #[arg(long, global = true, default_value = "kde")]
    margin: String,

    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the selection model to a regression CSV
    Fit {
        /// CSV with header; response first, covariates after
        #[arg(long)]
        data: PathBuf,
        /// Also dump the fitted margin's (grid, pdf, cdf) triples
        #[arg(long = "dump-margin", default_value_t = false)]
        dump_margin: bool,
    },
    /// Predictive densities and cross-validated log scores
    Predict {
        #[arg(long)]
        data: PathBuf,
        /// CSV of covariate rows to predict at (defaults to the covariate means)
        #[arg(long = "x-new-file")]
        x_new_file: Option<PathBuf>,
        /// Number of response-grid points for the density dump
        #[arg(long = "grid-points", default_value_t = 401)]
        grid_points: usize,
        /// Also compute the k-fold cross-validated mean log score
        #[arg(long = "cv-folds")]
        cv_folds: Option<usize>,
    },
    /// Bayes factor between two indicator configurations
    Bf {
        #[arg(long)]
        data: PathBuf,
        /// Bitstring for the numerator model, e.g. 01101
        #[arg(long = "model-a")]
        model_a: String,
        /// Bitstring for the denominator model
        #[arg(long = "model-b")]
        model_b: String,
        /// Quadrature node count
        #[arg(long, default_value_t = 201)]
        nodes: usize,
    },
    /// Simulation study over the three response-generating cases
    Simulate {
        /// normal, lognormal or implicit-copula
        #[arg(long, default_value = "lognormal")]
        case: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 8.0)]
        snr: f64,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        /// Comma list of method specs like copula:hyper-g or gaussian:fixed:100
        #[arg(long, default_value = "copula:hyper-g,gaussian:hyper-g")]
        methods: String,
        #[arg(long = "cv-folds", default_value_t = 10)]
        cv_folds: usize,
        /// Also emit SVG plots
        #[arg(long, default_value_t = false)]
        svg: bool,
    },
    /// Spatial activation mapping on a voxel-grid container
    FmriFit {
        /// Path to the dataset manifest
        #[arg(long)]
        data: PathBuf,
        /// Trend-prior scale d (overrides the dataset manifest)
        #[arg(long)]
        d: Option<f64>,
        #[arg(long = "theta-max", default_value_t = 0.45)]
        theta_max: f64,
        /// Grid CSV overriding the dataset's external field
        #[arg(long = "delta-file")]
        delta_file: Option<PathBuf>,
        /// Activation threshold (default: chi-square(1) deviance cutoff, 0.8722)
        #[arg(long)]
        threshold: Option<f64>,
    },
}

pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::InvalidInput(e.to_string())),
    };
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.global.threads > 0 {
        // ignore failure when a pool already exists (repeat in-process runs)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global();
    }
    std::fs::create_dir_all(&cli.global.out)?;
    match &cli.command {
        Command::Fit { data, dump_margin } => cmd_fit(&cli.global, data, *dump_margin),
        Command::Predict {
            data,
            x_new_file,
            grid_points,
            cv_folds,
        } => cmd_predict(&cli.global, data, x_new_file.as_deref(), *grid_points, *cv_folds),
        Command::Bf {
            data,
            model_a,
            model_b,
            nodes,
        } => cmd_bf(&cli.global, data, model_a, model_b, *nodes),
        Command::Simulate {
            case,
            n,
            p,
            snr,
            replicates,
            methods,
            cv_folds,
            svg,
        } => cmd_simulate(&cli.global, case, *n, *p, *snr, *replicates, methods, *cv_folds, *svg),
        Command::FmriFit {
            data,
            d,
            theta_max,
            delta_file,
            threshold,
        } => cmd_fmri(&cli.global, data, *d, *theta_max, delta_file.as_deref(), *threshold),
    }
}

fn sampler_config(g: &GlobalOpts) -> SamplerConfig {
    SamplerConfig::new(g.sweeps, g.burnin, g.seed)
}

fn base_manifest(g: &GlobalOpts, command: &str) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("version".into(), crate::VERSION.into()),
        ("seed".into(), g.seed.to_string()),
        ("sweeps".into(), g.sweeps.to_string()),
        ("burnin".into(), g.burnin.to_string()),
        ("g_prior".into(), g.g_prior.clone()),
        ("hyper_a".into(), format!("{}", g.hyper_a)),
        ("margin".into(), g.margin.clone()),
        ("threads".into(), g.threads.to_string()),
    ]
}

fn load_and_prepare(
    g: &GlobalOpts,
    data: &Path,
) -> Result<(RegressionData, crate::margins::MarginModel, GPrior, Vec<String>)> {
    let table = io::load_regression_csv(data)?;
    let margin_kind = MarginKind::parse(&g.margin)?;
    let margin = fit_margin(&table.y, margin_kind)?;
    let reg = RegressionData::new(table.y, table.x, &margin)?;
    let prior = GPrior::parse(&g.g_prior, reg.n(), g.hyper_a)?;
    Ok((reg, margin, prior, table.covariate_names))
}

fn gamma_bits(gamma: &[bool]) -> String {
    gamma.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str, p: usize) -> Result<Vec<bool>> {
    if s.len() != p {
        return Err(Error::InvalidInput(format!(
            "model bitstring `{s}` has {} bits, design has {p} covariates",
            s.len()
        )));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidInput(format!("bad bit `{other}` in model string"))),
        })
        .collect()
}

fn cmd_fit(g: &GlobalOpts, data: &Path, dump_margin: bool) -> Result<()> {
    let (reg, margin, prior, names) = load_and_prepare(g, data)?;
    let trace = run_chain(&reg, &prior, &sampler_config(g))?;

    if dump_margin {
        if let Some(dump) = margin.grid_dump() {
            let rows: Vec<Vec<f64>> = dump.iter().map(|&(y, p, c)| vec![y, p, c]).collect();
            io::write_csv(&g.out.join("margin_diagnostics.csv"), &["y", "pdf", "cdf"], &rows)?;
        }
    }

    let probs = trace.inclusion_probabilities()?;
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(probs.iter())
        .map(|(n, p)| vec![n.clone(), format!("{p}")])
        .collect();
    io::write_csv_records(&g.out.join("inclusion_probs.csv"), &["covariate", "probability"], &rows)?;

    let trace_rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .enumerate()
        .map(|(k, rec)| {
            vec![
                k.to_string(),
                format!("{}", rec.g),
                rec.gamma.iter().filter(|&&b| b).count().to_string(),
                format!("{}", rec.log_kernel),
                gamma_bits(&rec.gamma),
            ]
        })
        .collect();
    io::write_csv_records(
        &g.out.join("trace.csv"),
        &["sweep", "g", "q_gamma", "log_kernel", "gamma"],
        &trace_rows,
    )?;

    let top: Vec<Vec<String>> = trace
        .top_models(20)
        .into_iter()
        .map(|(gamma, freq)| vec![gamma_bits(&gamma), format!("{freq}")])
        .collect();
    io::write_csv_records(&g.out.join("top-models.csv"), &["model", "frequency"], &top)?;

    let mut manifest = base_manifest(g, "fit");
    manifest.push(("data".into(), data.display().to_string()));
    manifest.push(("n".into(), reg.n().to_string()));
    manifest.push(("p".into(), reg.p().to_string()));
    manifest.push((
        "centering_offsets".into(),
        io::join_floats(reg.offsets.iter().cloned()),
    ));
    io::write_manifest(&g.out.join("manifest.txt"), &manifest)?;
    println!(
        "fit: n={} p={} sweeps={} -> {}",
        reg.n(),
        reg.p(),
        g.sweeps,
        g.out.display()
    );
    Ok(())
}

fn cmd_predict(
    g: &GlobalOpts,
    data: &Path,
    x_new_file: Option<&Path>,
    grid_points: usize,
    cv_folds: Option<usize>,
) -> Result<()> {
    let table = io::load_regression_csv(data)?;
    let margin_kind = MarginKind::parse(&g.margin)?;
    let margin = fit_margin(&table.y, margin_kind)?;
    let reg = RegressionData::new(table.y.clone(), table.x.clone(), &margin)?;
    let prior = GPrior::parse(&g.g_prior, reg.n(), g.hyper_a)?;
    let trace = run_chain(&reg, &prior, &sampler_config(g))?;

    // prediction points: covariate rows from a file (shifted by the training
    // offsets) or the single all-means row
    let points: Vec<DVector<f64>> = match x_new_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut rows = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if lineno == 0 || line.trim().is_empty() {
                    continue;
                }
                let cells: Vec<f64> = line
                    .split(',')
                    .enumerate()
                    .map(|(c, cell)| {
                        cell.trim().parse().map_err(|_| Error::Parse {
                            path: path.display().to_string(),
                            row: lineno + 1,
                            col: c + 1,
                            msg: format!("`{}` is not a number", cell.trim()),
                        })
                    })
                    .collect::<Result<_>>()?;
                if cells.len() != reg.p() {
                    return Err(Error::InvalidInput(format!(
                        "x-new row {} has {} covariates, expected {}",
                        lineno + 1,
                        cells.len(),
                        reg.p()
                    )));
                }
                rows.push(DVector::from_iterator(
                    reg.p(),
                    cells.iter().zip(reg.offsets.iter()).map(|(v, o)| v - o),
                ));
            }
            rows
        }
        None => vec![DVector::zeros(reg.p())],
    };

    let lo = margin.quantile(1e-4);
    let hi = margin.quantile(1.0 - 1e-4);
    let pad = 0.1 * (hi - lo);
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| lo - pad + (hi - lo + 2.0 * pad) * k as f64 / (grid_points - 1) as f64)
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, x_new) in points.iter().enumerate() {
        let dens = predict::predictive_density(&trace, &reg, &margin, x_new, &grid)?;
        let mean = predict::predictive_mean(&trace, &reg, &margin, x_new)?;
        for (k, &y) in grid.iter().enumerate() {
            rows.push(vec![idx as f64, y, dens[k]]);
        }
        println!("predict: point {idx} predictive mean {mean}");
    }
    io::write_csv(&g.out.join("predictive_density.csv"), &["point", "y", "density"], &rows)?;

    if let Some(folds) = cv_folds {
        let mls = predict::cv_mean_log_score(
            &table.y,
            &table.x,
            MarginSpec::Kind(margin_kind),
            &prior,
            &sampler_config(g),
            folds,
        )?;
        io::write_csv(&g.out.join("mls.csv"), &["folds", "mls"], &[vec![folds as f64, mls]])?;
        println!("predict: {folds}-fold mean log score {mls}");
    }

    let mut manifest = base_manifest(g, "predict");
    manifest.push(("data".into(), data.display().to_string()));
    manifest.push(("grid_points".into(), grid_points.to_string()));
    manifest.push((
        "centering_offsets".into(),
        io::join_floats(reg.offsets.iter().cloned()),
    ));
    io::write_manifest(&g.out.join("manifest.txt"), &manifest)?;
    Ok(())
}

fn cmd_bf(g: &GlobalOpts, data: &Path, model_a: &str, model_b: &str, nodes: usize) -> Result<()> {
    let (reg, _margin, prior, _names) = load_and_prepare(g, data)?;
    let gamma_a = parse_bits(model_a, reg.p())?;
    let gamma_b = parse_bits(model_b, reg.p())?;
    let mut req = BfRequest::new(gamma_a.clone(), gamma_b.clone(), prior.clone());
    req.nodes = nodes;
    let log_bf = log_bayes_factor(&reg, &req)?;

    // R-squared values at the posterior-median g from a standard chain run
    let trace = run_chain(&reg, &prior, &sampler_config(g))?;
    let median_g = trace.posterior_median_g()?;
    let fa = build_factor(&reg, &gamma_a)?;
    let fb = build_factor(&reg, &gamma_b)?;
    let r2_a = copula_r_squared(&fa, median_g, &reg.z)?;
    let r2_b = copula_r_squared(&fb, median_g, &reg.z)?;

    io::write_csv_records(
        &g.out.join("bf.csv"),
        &["model_a", "model_b", "log_bf", "median_g", "r2_a", "r2_b"],
        &[vec![
            model_a.into(),
            model_b.into(),
            format!("{log_bf}"),
            format!("{median_g}"),
            format!("{r2_a}"),
            format!("{r2_b}"),
        ]],
    )?;
    let mut manifest = base_manifest(g, "bf");
    manifest.push(("data".into(), data.display().to_string()));
    manifest.push(("model_a".into(), model_a.into()));
    manifest.push(("model_b".into(), model_b.into()));
    manifest.push(("nodes".into(), nodes.to_string()));
    io::write_manifest(&g.out.join("manifest.txt"), &manifest)?;
    println!("bf: log BF({model_a} | {model_b}) = {log_bf}, R2 at median g: {r2_a} vs {r2_b}");
    Ok(())
}

fn parse_methods(spec: &str, n: usize, a: f64) -> Result<Vec<MethodSpec>> {
    let mut methods = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (engine, prior_spec) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("bad method spec `{part}`")))?;
        let prior = GPrior::parse(prior_spec, n, a)?;
        let m = match engine {
            "copula" => MethodSpec::copula(prior),
            "gaussian" => MethodSpec::gaussian(prior),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown method engine `{other}` (use copula or gaussian)"
                )))
            }
        };
        methods.push(m);
    }
    Ok(methods)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    g: &GlobalOpts,
    case: &str,
    n: usize,
    p: usize,
    snr: f64,
    replicates: usize,
    methods: &str,
    cv_folds: usize,
    svg: bool,
) -> Result<()> {
    let case = SimCase::parse(case)?;
    let methods = parse_methods(methods, n, g.hyper_a)?;
    let scenario = SimScenario {
        case,
        n,
        p,
        snr,
        replicates,
        seed: g.seed,
    };
    let report = simstudy::run_study(&scenario, &methods, &sampler_config(g), cv_folds)?;

    let mls_rows: Vec<Vec<String>> = report
        .mls
        .iter()
        .map(|r| {
            vec![
                r.replicate.to_string(),
                r.method.clone(),
                case.name().into(),
                format!("{}", r.mls),
            ]
        })
        .collect();
    io::write_csv_records(
        &g.out.join("mls.csv"),
        &["replicate", "method", "case", "mls"],
        &mls_rows,
    )?;

    let mut pr_rows: Vec<Vec<String>> = Vec::new();
    for (method, curve) in &report.pr_curves {
        for pt in curve {
            pr_rows.push(vec![
                method.clone(),
                format!("{}", pt.threshold),
                format!("{}", pt.recall),
                format!("{}", pt.precision),
            ]);
        }
    }
    io::write_csv_records(
        &g.out.join("pr_curves.csv"),
        &["method", "threshold", "recall", "precision"],
        &pr_rows,
    )?;

    if svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = report
            .pr_curves
            .iter()
            .map(|(m, curve)| {
                (
                    m.clone(),
                    curve.iter().map(|pt| (pt.recall, pt.precision)).collect(),
                )
            })
            .collect();
        io::write_svg_lines(
            &g.out.join("pr_curves.svg"),
            &format!("precision-recall, case {}", case.name()),
            "recall",
            "precision",
            &series,
        )?;

        // MLS strip plot: per method, replicate scores spread along x
        let all: Vec<f64> = report.mls.iter().map(|r| r.mls).collect();
        let (lo, hi) = all
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = (hi - lo).max(1e-12);
        let series: Vec<(String, Vec<(f64, f64)>)> = methods
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let xs = (k as f64 + 0.5) / methods.len() as f64;
                let pts = report
                    .mls_values(&m.label)
                    .iter()
                    .map(|&v| (xs, (v - lo) / span))
                    .collect();
                (m.label.clone(), pts)
            })
            .collect();
        io::write_svg_lines(
            &g.out.join("mls.svg"),
            &format!("cross-validated mean log scores, case {}", case.name()),
            "method",
            "mls (scaled)",
            &series,
        )?;
    }

    let mut manifest = base_manifest(g, "simulate");
    manifest.push(("case".into(), case.name().into()));
    manifest.push(("n".into(), n.to_string()));
    manifest.push(("p".into(), p.to_string()));
    manifest.push(("snr".into(), format!("{snr}")));
    manifest.push(("replicates".into(), replicates.to_string()));
    manifest.push(("cv_folds".into(), cv_folds.to_string()));
    manifest.push((
        "methods".into(),
        methods
            .iter()
            .map(|m| m.label.clone())
            .collect::<Vec<_>>()
            .join(";"),
    ));
    io::write_manifest(&g.out.join("manifest.txt"), &manifest)?;
    for m in &methods {
        println!("simulate: {} mean MLS {}", m.label, report.mean_mls(&m.label));
    }
    Ok(())
}

fn cmd_fmri(
    g: &GlobalOpts,
    data: &Path,
    d_override: Option<f64>,
    theta_max: f64,
    delta_file: Option<&Path>,
    threshold: Option<f64>,
) -> Result<()> {
    let mut dataset = FmriDataset::load(data)?;
    if let Some(d) = d_override {
        dataset.d = d;
    }
    if let Some(path) = delta_file {
        let text = std::fs::read_to_string(path)?;
        let mut vals = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            for (c, cell) in line.split(',').enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    row: lineno + 1,
                    col: c + 1,
                    msg: format!("`{}` is not a number", cell.trim()),
                })?;
                vals.push(v);
            }
        }
        if vals.len() != dataset.rows * dataset.cols {
            return Err(Error::InvalidInput(format!(
                "delta file holds {} values, grid needs {}",
                vals.len(),
                dataset.rows * dataset.cols
            )));
        }
        dataset.delta = vals;
    }

    let margin_kind = MarginKind::parse(&g.margin)?;
    let prior = GPrior::parse(&g.g_prior, dataset.t_len, g.hyper_a)?;
    let mut config = SpatialConfig::new(g.sweeps, g.burnin, g.seed, prior);
    config.margin = margin_kind;
    config.theta_max = theta_max;
    if let Some(t) = threshold {
        config.threshold = t;
    }
    let fit = spatial::fit_spatial(&dataset, &config, None)?;

    write_grid_csv(&g.out.join("probability.csv"), &fit.probability, fit.rows, fit.cols)?;
    write_grid_csv(&g.out.join("amplitude.csv"), &fit.amplitude, fit.rows, fit.cols)?;
    let binary: Vec<f64> = fit.binary.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_grid_csv(&g.out.join("activation.csv"), &binary, fit.rows, fit.cols)?;

    io::write_pgm(&g.out.join("probability.pgm"), &fit.probability, fit.rows, fit.cols, 0.0, 1.0)?;
    let amp_max = fit
        .amplitude
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-12);
    io::write_pgm(
        &g.out.join("amplitude.pgm"),
        &fit.amplitude,
        fit.rows,
        fit.cols,
        -amp_max,
        amp_max,
    )?;

    let trace_rows: Vec<Vec<f64>> = fit
        .trace
        .iter()
        .enumerate()
        .map(|(k, &(gv, th, q))| vec![k as f64, gv, th, q as f64])
        .collect();
    io::write_csv(&g.out.join("trace.csv"), &["sweep", "g", "theta", "q"], &trace_rows)?;

    let mls_rows = vec![
        vec!["Active".to_string(), format!("{}", fit.mls.active)],
        vec!["Inactive".to_string(), format!("{}", fit.mls.inactive)],
        vec!["Overall".to_string(), format!("{}", fit.mls.overall)],
        vec!["E(q|y)".to_string(), format!("{}", fit.mls.e_q)],
        vec!["Std(q|y)".to_string(), format!("{}", fit.mls.sd_q)],
    ];
    io::write_csv_records(&g.out.join("mls_breakdown.csv"), &["metric", "value"], &mls_rows)?;

    let mut manifest = base_manifest(g, "fmri-fit");
    manifest.push(("data".into(), data.display().to_string()));
    manifest.push(("d".into(), format!("{}", dataset.d)));
    manifest.push(("theta_max".into(), format!("{theta_max}")));
    manifest.push(("threshold".into(), format!("{}", fit.threshold)));
    manifest.push(("grid".into(), format!("{}x{}", fit.rows, fit.cols)));
    manifest.push(("T".into(), dataset.t_len.to_string()));
    io::write_manifest(&g.out.join("manifest.txt"), &manifest)?;
    println!(
        "fmri-fit: {} voxels, E(q|y) = {}, overall MLS = {}, g acceptance {:.2}",
        dataset.voxel_count(),
        fit.mls.e_q,
        fit.mls.overall,
        fit.g_accept_rate
    );
    Ok(())
}

fn write_grid_csv(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    let header: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|r| values[r * cols..(r + 1) * cols].to_vec())
        .collect();
    io::write_csv(path, &header_refs, &data)
}
