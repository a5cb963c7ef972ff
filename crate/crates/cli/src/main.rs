//! `phrec`: phase-type recurrent-event models from the command line.
//!
//! Exit codes: 0 on success, 1 on a validation problem (flags, files,
//! malformed models or data), 2 on a numerical failure (integration
//! breakdown, non-convergence).

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use phrec_core::cancer::{cancer_tables, CancerError, CancerParams, ForwardRange};
use phrec_core::counting::{count_distribution, CountError, CountOptions};
use phrec_core::fit::{bootstrap, fit, BootstrapConfig, FitConfig, FitError, NmOptions};
use phrec_core::heart::{
    heart_tables, likelihood_ratio, load_patients, log_likelihood, scenario_counts, HeartError,
    HeartParams, IngestError, LikelihoodOptions, DAYS_PER_MONTH, DAYS_PER_YEAR, SOJOURN_AGES,
    TABLE_COMBOS, TABLE_HORIZONS_MONTHS,
};
use phrec_core::sim::simulate_counts;
use phrec_core::stage::{Destination, StageError, StageModel};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod render;

#[derive(Parser)]
#[command(name = "phrec", version, about = "Phase-type multi-state recurrent-event models")]
struct Cli {
    /// Worker threads; the PHREC_THREADS environment variable takes
    /// precedence when set.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ForwardArg {
    Standard,
    ShiftedDown,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model JSON document and print its shape.
    Validate { model: PathBuf },
    /// Maximum-likelihood calibration of the two-stage transplant model.
    Fit {
        /// Patient CSV (id,start,stop,event,transplant,age,year,surgery).
        #[arg(long)]
        data: PathBuf,
        /// Aging phases per stage.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, default_value_t = 0x9e3779b97f4a7c15)]
        seed: u64,
        /// Objective evaluation budget per start.
        #[arg(long)]
        max_evals: Option<usize>,
        /// Pin a parameter, e.g. --freeze b=0 (repeatable).
        #[arg(long)]
        freeze: Vec<String>,
        /// Write the full result as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transition-count distribution P[N(t) = l] for a model document.
    CountProb {
        #[arg(long)]
        model: PathBuf,
        /// Stage label or 1-based stage number.
        #[arg(long, default_value = "1")]
        start_stage: String,
        /// Comma-separated horizons; suffix d/m/y converts into the model's
        /// time unit (e.g. 30d,6m,1y).
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 5)]
        lmax: usize,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
    },
    /// Expected time spent in a stage up to each horizon.
    Sojourn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        stage: String,
        /// Conditioning time: the stage is occupied at u.
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long)]
        t: String,
    },
    /// Stage-occupancy probability P[in `to` at u+t | in `from` at u].
    Transprob {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        from: String,
        /// Stage label, 1-based number, or "death".
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long)]
        t: String,
    },
    /// Nonparametric bootstrap of the transplant-model fit.
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 0x5851f42d4c957f2d)]
        seed: u64,
        /// Starts for the central fit that anchors the replicates.
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo transition counts; prints JSON and a frequency CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "1")]
        start_stage: String,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 5)]
        lmax: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Reproduce the transplant-study summary tables.
    HeartDemo {
        /// Patient CSV; enables the log-likelihood line (and --refit).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Re-estimate instead of using the stored reference estimates.
        #[arg(long)]
        refit: bool,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, default_value_t = 0x9e3779b97f4a7c15)]
        seed: u64,
        /// Write count.csv/sojourn.csv/single.csv here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reproduce the staged-cancer summary tables.
    CancerDemo {
        #[arg(long, value_enum, default_value_t = ForwardArg::Standard)]
        forward: ForwardArg,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// An error on its way to an exit code.
struct CliError {
    module: &'static str,
    message: String,
    numerical: bool,
}

impl CliError {
    fn validation(module: &'static str, message: impl Into<String>) -> Self {
        CliError {
            module,
            message: message.into(),
            numerical: false,
        }
    }

    fn numerical(module: &'static str, message: impl Into<String>) -> Self {
        CliError {
            module,
            message: message.into(),
            numerical: true,
        }
    }

    fn code(&self) -> ExitCode {
        ExitCode::from(if self.numerical { 2 } else { 1 })
    }
}

fn stage_err(e: StageError) -> CliError {
    use phrec_core::matrix::MatrixError;
    let numerical = matches!(
        e,
        StageError::ZeroProbabilityStage { .. } | StageError::Matrix(MatrixError::Singular)
    );
    if numerical {
        CliError::numerical("stage", e.to_string())
    } else {
        CliError::validation("stage", e.to_string())
    }
}

fn count_err(e: CountError) -> CliError {
    match e {
        CountError::BadHorizons => CliError::validation("count-ode", e.to_string()),
        CountError::Stage(s) => stage_err(s),
        other => CliError::numerical("count-ode", other.to_string()),
    }
}

fn heart_err(e: HeartError) -> CliError {
    match e {
        HeartError::BadParameter { .. } | HeartError::WrongStageCount { .. }
        | HeartError::NoPatients => CliError::validation("heart-model", e.to_string()),
        HeartError::Stage(s) => stage_err(s),
        HeartError::Count(c) => count_err(c),
        other => CliError::numerical("heart-model", other.to_string()),
    }
}

fn fit_err(e: FitError) -> CliError {
    match e {
        FitError::NothingFree | FitError::BadConfig(_) => {
            CliError::validation("fitter", e.to_string())
        }
        FitError::Heart(h) => heart_err(h),
        other => CliError::numerical("fitter", other.to_string()),
    }
}

fn ingest_err(e: IngestError) -> CliError {
    CliError::validation("ingest", e.to_string())
}

fn cancer_err(e: CancerError) -> CliError {
    match e {
        CancerError::Stage(s) => stage_err(s),
        CancerError::Count(c) => count_err(c),
        other => CliError::validation("cancer-model", other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let threads = std::env::var("PHREC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(k) = threads {
        // A second build_global in one process is harmless here: the pool is
        // already sized, so just keep going.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global();
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phrec: {}: {}", e.module, e.message);
            e.code()
        }
    }
}

fn load_model(path: &Path) -> Result<StageModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::validation("cli", format!("cannot read {}: {e}", path.display()))
    })?;
    StageModel::from_json_str(&text).map_err(stage_err)
}

fn resolve_stage(model: &StageModel, label: &str) -> Result<usize, CliError> {
    model.stage_by_label(label).ok_or_else(|| {
        CliError::validation(
            "cli",
            format!(
                "unknown stage {:?}; labels are {:?} (or 1-based numbers)",
                label,
                model.stage_labels()
            ),
        )
    })
}

/// Parse one horizon token, converting a d/m/y suffix into the model's unit.
fn parse_horizon(token: &str, time_unit: &str) -> Result<f64, CliError> {
    let token = token.trim();
    let (number, suffix) = match token.chars().last() {
        Some(c) if c.is_ascii_alphabetic() => (&token[..token.len() - 1], Some(c)),
        _ => (token, None),
    };
    let value: f64 = number.parse().map_err(|_| {
        CliError::validation("cli", format!("cannot parse horizon {token:?}"))
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(CliError::validation(
            "cli",
            format!("horizon {token:?} must be finite and non-negative"),
        ));
    }
    let Some(suffix) = suffix else {
        return Ok(value);
    };
    let in_days = match suffix.to_ascii_lowercase() {
        'd' => value,
        'm' => value * DAYS_PER_MONTH,
        'y' => value * DAYS_PER_YEAR,
        other => {
            return Err(CliError::validation(
                "cli",
                format!("unknown unit suffix {other:?} (use d, m, or y)"),
            ))
        }
    };
    match time_unit {
        "day" => Ok(in_days),
        "month" => Ok(in_days / DAYS_PER_MONTH),
        "year" => Ok(in_days / DAYS_PER_YEAR),
        other => Err(CliError::validation(
            "cli",
            format!("model counts time in {other:?}; give horizons as bare numbers"),
        )),
    }
}

fn parse_horizons(list: &str, time_unit: &str) -> Result<Vec<f64>, CliError> {
    let horizons: Vec<f64> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_horizon(s, time_unit))
        .collect::<Result<_, _>>()?;
    if horizons.is_empty() {
        return Err(CliError::validation("cli", "no horizons given"));
    }
    Ok(horizons)
}

const PARAM_NAMES: [&str; 9] = [
    "a", "b", "q", "p", "lambda0", "lambda1", "gamma1", "gamma2", "gamma3",
];

fn parse_freeze(spec: &str) -> Result<(usize, f64), CliError> {
    let (name, value) = spec.split_once('=').ok_or_else(|| {
        CliError::validation("cli", format!("--freeze wants name=value, got {spec:?}"))
    })?;
    let index = PARAM_NAMES
        .iter()
        .position(|&n| n == name.trim())
        .ok_or_else(|| {
            CliError::validation(
                "cli",
                format!("unknown parameter {:?}; choose from {PARAM_NAMES:?}", name.trim()),
            )
        })?;
    let value: f64 = value.trim().parse().map_err(|_| {
        CliError::validation("cli", format!("cannot parse value in {spec:?}"))
    })?;
    Ok((index, value))
}

fn write_artifact(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| {
        CliError::validation("cli", format!("cannot write {}: {e}", path.display()))
    })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { model } => {
            let m = load_model(&model)?;
            println!(
                "valid: {} stages x {} states, labels [{}], time unit {}",
                m.stages(),
                m.states_per_stage(),
                m.stage_labels().join(", "),
                m.time_unit()
            );
            Ok(())
        }

        Command::CountProb {
            model,
            start_stage,
            t,
            lmax,
            rtol,
            atol,
        } => {
            let m = load_model(&model)?;
            let start = resolve_stage(&m, &start_stage)?;
            let horizons = parse_horizons(&t, m.time_unit())?;
            let mut opts = CountOptions::default();
            if let Some(r) = rtol {
                opts.rtol = r;
            }
            if let Some(a) = atol {
                opts.atol = a;
            }
            let dist = count_distribution(&m, start, &horizons, lmax, &opts).map_err(count_err)?;
            let header: Vec<String> = (0..=lmax).map(|l| format!("n{l}")).collect();
            println!("t,{},tail", header.join(","));
            for (h, &ti) in horizons.iter().enumerate() {
                let row: Vec<String> = (0..=lmax)
                    .map(|l| render::num(dist.prob(h, l)))
                    .collect();
                println!("{},{},{}", render::num(ti), row.join(","), render::num(dist.tail(h)));
            }
            Ok(())
        }

        Command::Sojourn { model, stage, u, t } => {
            let m = load_model(&model)?;
            let stage = resolve_stage(&m, &stage)?;
            let horizons = parse_horizons(&t, m.time_unit())?;
            println!("t,expected_{}", m.time_unit());
            for &ti in &horizons {
                let v = m.expected_sojourn(stage, u, ti).map_err(stage_err)?;
                println!("{},{}", render::num(ti), render::num(v));
            }
            Ok(())
        }

        Command::Transprob {
            model,
            from,
            to,
            u,
            t,
        } => {
            let m = load_model(&model)?;
            let from = resolve_stage(&m, &from)?;
            let to = if to.eq_ignore_ascii_case("death") {
                Destination::Death
            } else {
                Destination::Stage(resolve_stage(&m, &to)?)
            };
            let horizons = parse_horizons(&t, m.time_unit())?;
            println!("t,probability");
            for &ti in &horizons {
                let v = m.stage_transition_prob(from, to, u, ti).map_err(stage_err)?;
                println!("{},{}", render::num(ti), render::num(v));
            }
            Ok(())
        }

        Command::Fit {
            data,
            n,
            starts,
            seed,
            max_evals,
            freeze,
            out,
        } => {
            let patients = load_patients(&data).map_err(ingest_err)?;
            let mut config = FitConfig::new(LikelihoodOptions {
                n,
                ..LikelihoodOptions::default()
            });
            config.starts = starts;
            config.seed = seed;
            if let Some(me) = max_evals {
                config.nm = NmOptions {
                    max_evals: me,
                    ..config.nm
                };
            }
            for spec in &freeze {
                config.frozen.push(parse_freeze(spec)?);
            }
            let result = fit(&patients, &config).map_err(fit_err)?;
            let theta = result.params.to_array();
            println!("parameter,estimate");
            for (name, value) in PARAM_NAMES.iter().zip(theta) {
                println!("{name},{}", render::num(value));
            }
            println!("loglik,{}", render::num(result.loglik));
            eprintln!(
                "fit: {} patients, {} starts, {} evaluations, converged: {}",
                patients.len(),
                result.starts,
                result.evals,
                result.converged
            );
            if let Some(path) = out {
                let doc = serde_json::json!({
                    "params": result.params,
                    "loglik": result.loglik,
                    "converged": result.converged,
                    "evals": result.evals,
                    "starts": result.starts,
                });
                write_artifact(&path, &serde_json::to_string_pretty(&doc).unwrap())?;
            }
            Ok(())
        }

        Command::Bootstrap {
            data,
            n,
            replicates,
            seed,
            starts,
            out,
        } => {
            let patients = load_patients(&data).map_err(ingest_err)?;
            let likelihood = LikelihoodOptions {
                n,
                ..LikelihoodOptions::default()
            };
            let mut fit_config = FitConfig::new(likelihood);
            fit_config.starts = starts;
            let center = fit(&patients, &fit_config).map_err(fit_err)?;
            let mut config = BootstrapConfig::new(likelihood);
            config.replicates = replicates;
            config.seed = seed;
            let boot = bootstrap(&patients, &center.params, &config).map_err(fit_err)?;
            let theta = center.params.to_array();
            println!("parameter,estimate,std,ci_lo,ci_hi");
            for (j, name) in PARAM_NAMES.iter().enumerate() {
                println!(
                    "{name},{},{},{},{}",
                    render::num(theta[j]),
                    render::num(boot.std[j]),
                    render::num(boot.ci95[j].0),
                    render::num(boot.ci95[j].1)
                );
            }
            eprintln!(
                "bootstrap: {} replicates, {} failed, central loglik {}",
                replicates,
                boot.failed,
                render::num(center.loglik)
            );
            if let Some(path) = out {
                let doc = serde_json::json!({
                    "center": center.params,
                    "loglik": center.loglik,
                    "std": boot.std.to_vec(),
                    "ci95": boot.ci95.iter().map(|&(lo, hi)| vec![lo, hi]).collect::<Vec<_>>(),
                    "failed": boot.failed,
                    "estimates": boot.estimates,
                });
                write_artifact(&path, &serde_json::to_string_pretty(&doc).unwrap())?;
            }
            Ok(())
        }

        Command::Simulate {
            model,
            start_stage,
            t,
            lmax,
            paths,
            seed,
        } => {
            let m = load_model(&model)?;
            let start = resolve_stage(&m, &start_stage)?;
            let horizons = parse_horizons(&t, m.time_unit())?;
            if paths == 0 {
                return Err(CliError::validation("cli", "--paths must be positive"));
            }
            let sim = simulate_counts(&m, start, &horizons, lmax, paths, seed)
                .map_err(stage_err)?;
            let freq: Vec<Vec<f64>> = (0..horizons.len())
                .map(|h| (0..=lmax + 1).map(|l| sim.freq(h, l)).collect())
                .collect();
            let occupancy: Vec<Vec<f64>> = (0..horizons.len())
                .map(|h| (0..=m.stages()).map(|s| sim.occupancy_freq(h, s)).collect())
                .collect();
            let doc = serde_json::json!({
                "paths": paths,
                "seed": seed,
                "horizons": horizons,
                "lmax": lmax,
                "freq": freq,
                "occupancy": occupancy,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            let header: Vec<String> = (0..=lmax).map(|l| format!("n{l}")).collect();
            println!("t,{},overflow", header.join(","));
            for (h, &ti) in horizons.iter().enumerate() {
                let row: Vec<String> = (0..=lmax + 1).map(|l| render::num(sim.freq(h, l))).collect();
                println!("{},{}", render::num(ti), row.join(","));
            }
            Ok(())
        }

        Command::HeartDemo {
            data,
            refit,
            starts,
            seed,
            out_dir,
        } => heart_demo(data.as_deref(), refit, starts, seed, out_dir.as_deref()),

        Command::CancerDemo { forward, out_dir } => {
            let forward = match forward {
                ForwardArg::Standard => ForwardRange::Standard,
                ForwardArg::ShiftedDown => ForwardRange::ShiftedDown,
            };
            cancer_demo(forward, out_dir.as_deref())
        }
    }
}

fn heart_demo(
    data: Option<&Path>,
    refit: bool,
    starts: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let opts = LikelihoodOptions::default();
    let patients = match data {
        Some(path) => Some(load_patients(path).map_err(ingest_err)?),
        None => None,
    };
    if refit && patients.is_none() {
        return Err(CliError::validation("cli", "--refit needs --data"));
    }

    let params = if refit {
        let patients = patients.as_ref().unwrap();
        let mut config = FitConfig::new(opts);
        config.starts = starts;
        config.seed = seed;
        let full = fit(patients, &config).map_err(fit_err)?;
        let no_gamma = phrec_core::fit::fit_restricted(
            patients,
            &config,
            &[(6, 0.0), (7, 0.0), (8, 0.0)],
        )
        .map_err(fit_err)?;
        let no_b = phrec_core::fit::fit_restricted(patients, &config, &[(1, 0.0)])
            .map_err(fit_err)?;
        println!("# likelihood-ratio tests");
        println!("test,statistic,df");
        println!(
            "covariates,{},3",
            render::num(likelihood_ratio(full.loglik, no_gamma.loglik))
        );
        println!(
            "pretransplant_excess,{},1",
            render::num(likelihood_ratio(full.loglik, no_b.loglik))
        );
        full.params
    } else {
        HeartParams::reference()
    };

    let theta = params.to_array();
    println!("# parameters{}", if refit { " (refit)" } else { " (reference)" });
    println!("parameter,estimate");
    for (name, value) in PARAM_NAMES.iter().zip(theta) {
        println!("{name},{}", render::num(value));
    }
    if let Some(patients) = &patients {
        let ll = log_likelihood(&params, patients, &opts).map_err(heart_err)?;
        let counts = scenario_counts(patients);
        println!(
            "# {} patients (censored {}, censored post-transplant {}, died {}, died post-transplant {}); log-likelihood {}",
            patients.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            render::num(ll)
        );
    }

    let tables = heart_tables(&params, &opts).map_err(heart_err)?;

    let mut count_csv = String::from("age,year,surgery,transitions,m1,m3,m6,m12,m36\n");
    for (c, &(age, year, surgery)) in TABLE_COMBOS.iter().enumerate() {
        for l in 0..3 {
            let cells: Vec<String> = (0..5).map(|h| render::cell(tables.count[c][l][h])).collect();
            count_csv.push_str(&format!(
                "{age},{year},{surgery},{l},{}\n",
                cells.join(",")
            ));
        }
    }
    let mut sojourn_csv = String::from("age,m1,m3,m6,m12,m36\n");
    for (a, &age) in SOJOURN_AGES.iter().enumerate() {
        let cells: Vec<String> = (0..5).map(|h| format!("{:.1}", tables.sojourn[a][h])).collect();
        sojourn_csv.push_str(&format!("{age},{}\n", cells.join(",")));
    }
    let transitions = ["disease-transplant", "disease-death", "disease-transplant-death"];
    let mut single_csv = String::from("transition,m1,m3,m6,m12,m36\n");
    for (r, name) in transitions.iter().enumerate() {
        let cells: Vec<String> = (0..5).map(|h| render::cell(tables.single[r][h])).collect();
        single_csv.push_str(&format!("{name},{}\n", cells.join(",")));
    }

    let horizon_headers: Vec<String> = TABLE_HORIZONS_MONTHS
        .iter()
        .map(|m| format!("{m:.0} mo"))
        .collect();
    let mut count_rows = Vec::new();
    for (c, &(age, year, surgery)) in TABLE_COMBOS.iter().enumerate() {
        for l in 0..3 {
            let mut row = vec![format!("age {age:.0} yr {year:.0} surg {surgery:.0} N={l}")];
            row.extend((0..5).map(|h| render::cell(tables.count[c][l][h])));
            count_rows.push(row);
        }
    }
    let mut text = render::table("transition-count probabilities", &horizon_headers, &count_rows);
    let sojourn_rows: Vec<Vec<String>> = SOJOURN_AGES
        .iter()
        .enumerate()
        .map(|(a, &age)| {
            let mut row = vec![format!("age {age:.0}")];
            row.extend((0..5).map(|h| format!("{:.1}", tables.sojourn[a][h])));
            row
        })
        .collect();
    text.push_str(&render::table(
        "expected days in the disease stage",
        &horizon_headers,
        &sojourn_rows,
    ));
    let single_rows: Vec<Vec<String>> = transitions
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut row = vec![name.to_string()];
            row.extend((0..5).map(|h| render::cell(tables.single[r][h])));
            row
        })
        .collect();
    text.push_str(&render::table(
        "single-transition probabilities (age 30)",
        &horizon_headers,
        &single_rows,
    ));
    print!("{text}");

    emit_tables(
        out_dir,
        &[("count", &count_csv), ("sojourn", &sojourn_csv), ("single", &single_csv)],
    )
}

fn cancer_demo(forward: ForwardRange, out_dir: Option<&Path>) -> Result<(), CliError> {
    let tables = cancer_tables(&CancerParams::default(), forward).map_err(cancer_err)?;
    let horizons = [6, 12, 24, 36];

    let mut count_csv = String::from("input_stage,transitions,m6,m12,m24,m36\n");
    for s in 0..5 {
        for l in 0..3 {
            let cells: Vec<String> = (0..4).map(|h| render::cell(tables.count[s][l][h])).collect();
            count_csv.push_str(&format!("{s},{l},{}\n", cells.join(",")));
        }
    }
    let mut sojourn_csv = String::from("input_stage,m6,m12,m24,m36\n");
    for s in 0..5 {
        let cells: Vec<String> = (0..4).map(|h| format!("{:.1}", tables.sojourn[s][h])).collect();
        sojourn_csv.push_str(&format!("{s},{}\n", cells.join(",")));
    }
    let dests = ["R", "0", "1", "2", "3", "4", "death"];
    let mut single_csv = String::from("input_stage,horizon_months,to_R,to_0,to_1,to_2,to_3,to_4,to_death\n");
    for s in 0..5 {
        for (w, months) in [6, 12].iter().enumerate() {
            let cells: Vec<String> = (0..7)
                .map(|d| render::cell(tables.one_transition[s][w][d]))
                .collect();
            single_csv.push_str(&format!("{s},{months},{}\n", cells.join(",")));
        }
    }

    let horizon_headers: Vec<String> = horizons.iter().map(|m| format!("{m} mo")).collect();
    let mut count_rows = Vec::new();
    for s in 0..5 {
        for l in 0..3 {
            let mut row = vec![format!("stage {s} N={l}")];
            row.extend((0..4).map(|h| render::cell(tables.count[s][l][h])));
            count_rows.push(row);
        }
    }
    let mut text = render::table("transition-count probabilities", &horizon_headers, &count_rows);
    let sojourn_rows: Vec<Vec<String>> = (0..5)
        .map(|s| {
            let mut row = vec![format!("stage {s}")];
            row.extend((0..4).map(|h| format!("{:.1}", tables.sojourn[s][h])));
            row
        })
        .collect();
    text.push_str(&render::table(
        "expected months in the input stage",
        &horizon_headers,
        &sojourn_rows,
    ));
    let dest_headers: Vec<String> = dests.iter().map(|d| format!("to {d}")).collect();
    let mut single_rows = Vec::new();
    for s in 0..5 {
        for (w, months) in [6, 12].iter().enumerate() {
            let mut row = vec![format!("stage {s} by {months} mo")];
            row.extend((0..7).map(|d| render::cell(tables.one_transition[s][w][d])));
            single_rows.push(row);
        }
    }
    text.push_str(&render::table(
        "single-transition probabilities",
        &dest_headers,
        &single_rows,
    ));
    print!("{text}");

    emit_tables(
        out_dir,
        &[("count", &count_csv), ("sojourn", &sojourn_csv), ("single", &single_csv)],
    )
}

/// Write each named CSV into `out_dir`, or print it to stdout under a `#`
/// marker when no directory was given.
fn emit_tables(out_dir: Option<&Path>, tables: &[(&str, &String)]) -> Result<(), CliError> {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| {
                CliError::validation("cli", format!("cannot create {}: {e}", dir.display()))
            })?;
            for (name, csv) in tables {
                write_artifact(&dir.join(format!("{name}.csv")), csv)?;
            }
            Ok(())
        }
        None => {
            for (name, csv) in tables {
                println!("# {name}");
                print!("{csv}");
            }
            Ok(())
        }
    }
}
