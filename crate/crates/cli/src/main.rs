//! Command-line front end: simulation runs, verification checks, moment
//! evaluation, and the full acceptance report.
//!
//! Exit codes: 0 = success / all checks pass, 1 = a verification failed,
//! 2 = usage or parameter error.

use std::fs;
use std::io::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qswap_core::boson::survival_exact;
use qswap_core::configspace::{duality_h, BosonConfig, ParticleConfig};
use qswap_core::error::Error;
use qswap_core::exact::{boson_exact_moment, qhahn_exact_distribution, swap_exact_apply};
use qswap_core::moments::{
    beta_moment_quad, plan_q_nested, plan_shift_nested, qhahn_moment_quad, TimeKind,
};
use qswap_core::polymer::{fpp_fill, polymer_fill, polymer_swap, BetaParams};
use qswap_core::qhahn_sim::{
    qhahn_continuous_run, qhahn_discrete_run, qtasep_run, ContParams, NuSeq, QParams, SimState,
};
use qswap_core::rng::replica_stream;
use qswap_core::stats::{bonferroni, chisq_two_sample, ks_two_sample, EmpiricalDist};
use qswap_core::swap::{backward_continuous_run, stationary_run, BackwardSchedule, StationaryParams};
use qswap_core::{run_all, run_criterion, ReportConfig};

use rayon::prelude::*;

// ---------------------------------------------------------------------------
// argument structure

#[derive(Parser)]
#[command(
    name = "qswap",
    about = "Simulation and verification toolkit for q-deformed exclusion \
             processes, their swap/backward dynamics, and the beta polymer",
    version
)]
struct Cli {
    /// Master seed for all randomness (env QSWAP_SEED supplies the default).
    #[arg(long, global = true, env = "QSWAP_SEED", default_value_t = 7)]
    seed: u64,

    /// Worker threads for replica fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Plain key-value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Scale replica counts down 10x for smoke runs.
    #[arg(long, global = true)]
    fast: bool,

    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    out: OutFormat,

    /// Output path; '-' writes to stdout.
    #[arg(long, global = true, default_value = "-")]
    out_file: String,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample particle trajectories and emit final tracked positions.
    Sim(SimArgs),
    /// Swap-operator checks.
    Swap {
        #[command(subcommand)]
        cmd: SwapCmd,
    },
    /// Backward (left-jump) dynamics.
    Backward {
        #[command(subcommand)]
        cmd: BackwardCmd,
    },
    /// The distribution-preserving process built from iterated swaps.
    Stationary {
        #[command(subcommand)]
        cmd: StationaryCmd,
    },
    /// Duality between the particle chain and the stack chain.
    Duality {
        #[command(subcommand)]
        cmd: DualityCmd,
    },
    /// Exact survival probability of the dual walk system.
    Survival(SurvivalArgs),
    /// Contour-integral moment evaluation.
    Moments(MomentsArgs),
    /// Beta-polymer partition functions and identities.
    Polymer {
        #[command(subcommand)]
        cmd: PolymerCmd,
    },
    /// Zero-temperature first-passage times on the polymer lattice.
    Fpp(FppArgs),
    /// Acceptance report.
    Report {
        #[command(subcommand)]
        cmd: ReportCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    /// Discrete-time parallel-update chain.
    QhahnDiscrete,
    /// Continuous-time chain with the same one-step law.
    QhahnCont,
    /// Continuous-time chain with single right jumps at rate 1 - q^gap.
    Qtasep,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    #[arg(long)]
    q: f64,
    /// Comma-separated per-particle values; the last one repeats forever.
    /// Not used by the qtasep model.
    #[arg(long, default_value = "0.3")]
    nu: String,
    /// Discrete one-step intensity (discrete model only).
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    /// Number of steps (discrete) or time horizon (continuous).
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    /// Comma-separated particle indices to report.
    #[arg(long, default_value = "1,2,3,4,5")]
    track: String,
}

#[derive(Subcommand)]
enum SwapCmd {
    /// Exact-distribution check: chain + swap operator vs chain with the two
    /// neighbouring parameters transposed, in total variation.
    Verify {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        t: usize,
        /// Which neighbouring pair (n, n+1) to transpose.
        #[arg(long)]
        n: usize,
        /// Truncation of per-step jump sizes in the exact computation.
        #[arg(long, default_value_t = 60)]
        jmax: usize,
    },
}

#[derive(Subcommand)]
enum BackwardCmd {
    /// Run the forward chain to a horizon, then the backward dynamics, and
    /// emit tracked positions.
    Run {
        #[arg(long)]
        q: f64,
        /// Homogeneous forward parameter.
        #[arg(long, default_value_t = 0.3)]
        nu: f64,
        /// Base value of the backward jump-rate schedule.
        #[arg(long)]
        nu0: f64,
        /// Forward time horizon before the backward phase.
        #[arg(long, default_value_t = 2.0)]
        tparam: f64,
        /// Duration of the backward phase.
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value = "1,2,3,4,5")]
        track: String,
    },
}

#[derive(Subcommand)]
enum StationaryCmd {
    /// Run the distribution-preserving process and emit tracked positions.
    Run {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        tparam: f64,
        #[arg(long)]
        tau: f64,
        /// `step` or `file:<path>` with an encoded configuration.
        #[arg(long, default_value = "step")]
        init: String,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, default_value = "1,2,3,4,5")]
        track: String,
    },
    /// Statistical check that the process preserves the right-jump chain's
    /// time-tparam distribution.
    Verify {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        tparam: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
}

#[derive(Subcommand)]
enum DualityCmd {
    /// MC estimate of the duality observable vs the exact dual probability.
    Verify {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        t: usize,
        /// Comma-separated dual occupation vector, e.g. 3,2,1.
        #[arg(long)]
        nvec: String,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
}

#[derive(Args)]
struct SurvivalArgs {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    tparam: f64,
    /// Comma-separated start parts of the dual walk system, e.g. 3,2,1.
    #[arg(long)]
    m: String,
    /// Truncation radius; defaults to an automatic choice.
    #[arg(long = "R")]
    r_cap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MomentKind {
    /// Discrete-time particle-chain moments E prod q^{x_n + n}.
    Qhahn,
    /// Continuous-time homogeneous-chain moments.
    QhahnCont,
    /// Beta-polymer joint moments E prod Z(t, n).
    Beta,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long, value_enum)]
    kind: MomentKind,
    /// Comma-separated particle / lattice indices, outermost first.
    #[arg(long)]
    nvec: String,
    /// Time: step count for discrete kinds, horizon for the continuous kind.
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long)]
    nus: String,
    #[arg(long)]
    gamma: f64,
    /// Quadrature nodes per contour.
    #[arg(long = "M", default_value_t = 512)]
    nodes: usize,
}

#[derive(Subcommand)]
enum PolymerCmd {
    /// Sample partition values Z(T, n) for n = 1..N.
    Fill {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
    },
    /// KS check of the one-site swap operator against the environment with
    /// two neighbouring parameters transposed.
    SwapVerify {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
    /// KS check of the parameter-shift identity at offset s.
    ShiftVerify {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
    /// Sample first-passage values F(T, n) for n = 1..N.
    Fpp {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        nus: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
    },
}

#[derive(Args)]
struct FppArgs {
    #[arg(long = "T")]
    t: usize,
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    nus: String,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Run every acceptance check and emit a JSON summary.
    All,
    /// Run a single numbered acceptance check (1..=12).
    One {
        #[arg(long)]
        id: usize,
    },
}

// ---------------------------------------------------------------------------
// small helpers

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{what} entry '{p}': {e}")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("{what} entry '{p}': {e}")))
        })
        .collect()
}

fn nuseq_from_list(list: &[f64]) -> Result<NuSeq, Error> {
    match list {
        [] => Err(Error::Parse("empty nu list".into())),
        [single] => Ok(NuSeq::Homogeneous(*single)),
        rest => Ok(NuSeq::Explicit {
            head: rest.to_vec(),
            tail: *rest.last().unwrap(),
        }),
    }
}

#[derive(Serialize)]
struct Row {
    replica: u64,
    time: f64,
    observable: String,
    value: f64,
}

fn emit_rows(rows: &[Row], out: OutFormat, path: &str) -> Result<(), Error> {
    let mut buf = String::new();
    match out {
        OutFormat::Csv => {
            buf.push_str("replica,time,observable,value\n");
            for r in rows {
                buf.push_str(&format!(
                    "{},{},{},{}\n",
                    r.replica, r.time, r.observable, r.value
                ));
            }
        }
        OutFormat::Json => {
            buf = serde_json::to_string_pretty(rows)
                .map_err(|e| Error::Parse(format!("serialization: {e}")))?;
            buf.push('\n');
        }
    }
    if path == "-" {
        std::io::stdout()
            .write_all(buf.as_bytes())
            .map_err(|e| Error::Parse(format!("stdout: {e}")))?;
    } else {
        fs::write(path, buf).map_err(|e| Error::Parse(format!("writing {path}: {e}")))?;
    }
    Ok(())
}

fn scaled_replicas(replicas: usize, fast: bool) -> usize {
    if fast {
        (replicas / 10).max(100)
    } else {
        replicas
    }
}

/// Parallel replica fan-out with a deterministic per-replica stream and
/// reduction in replica order.
fn par_replicas<T, F>(reps: usize, seed: u64, f: F) -> Result<Vec<T>, Error>
where
    T: Send,
    F: Fn(&mut qswap_core::rng::Rng) -> Result<T, Error> + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(&mut replica_stream(seed, r)))
        .collect()
}

fn position_rows<F>(reps: usize, seed: u64, track: &[usize], time: f64, run: F) -> Result<Vec<Row>, Error>
where
    F: Fn(&mut qswap_core::rng::Rng) -> Result<ParticleConfig, Error> + Sync,
{
    let finals = par_replicas(reps, seed, run)?;
    let mut rows = Vec::with_capacity(reps * track.len());
    for (r, cfg) in finals.iter().enumerate() {
        for &n in track {
            rows.push(Row {
                replica: r as u64,
                time,
                observable: format!("x{n}"),
                value: cfg.position(n) as f64,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// config-file preprocessing

/// Reads a plain key-value file (one `key value` or `key = value` per line,
/// `#` comments) and appends `--key value` for any key not already given on
/// the command line.  Explicit flags take precedence.
fn apply_config_file(mut argv: Vec<String>) -> Result<Vec<String>, Error> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let Some(path) = argv.get(pos + 1).cloned() else {
        return Err(Error::Parse("--config needs a file path".into()));
    };
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Parse(format!("config {path}: {e}")))?;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => match line.split_once(char::is_whitespace) {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            },
        };
        let flag = format!("--{key}");
        if argv.iter().any(|a| *a == flag) {
            continue;
        }
        argv.push(flag);
        if !value.is_empty() {
            argv.push(value.to_string());
        }
    }
    Ok(argv)
}

// ---------------------------------------------------------------------------
// dispatch

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match apply_config_file(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Domain(_)
                | Error::Validation(_)
                | Error::ParameterOrder(_)
                | Error::InfeasibleContour(_)
                | Error::Parse(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.cmd {
        Cmd::Sim(a) => cmd_sim(cli, a),
        Cmd::Swap { cmd } => cmd_swap(cli, cmd),
        Cmd::Backward { cmd } => cmd_backward(cli, cmd),
        Cmd::Stationary { cmd } => cmd_stationary(cli, cmd),
        Cmd::Duality { cmd } => cmd_duality(cli, cmd),
        Cmd::Survival(a) => cmd_survival(a),
        Cmd::Moments(a) => cmd_moments(a),
        Cmd::Polymer { cmd } => cmd_polymer(cli, cmd),
        Cmd::Fpp(a) => cmd_fpp(cli, a),
        Cmd::Report { cmd } => cmd_report(cli, cmd),
    }
}

fn cmd_sim(cli: &Cli, a: &SimArgs) -> Result<bool, Error> {
    let track = parse_usize_list(&a.track, "--track")?;
    let reps = scaled_replicas(a.replicas, cli.fast);
    let rows = match a.model {
        SimModel::QhahnDiscrete => {
            let nus = nuseq_from_list(&parse_f64_list(&a.nu, "--nu")?)?;
            let params = QParams::new(a.q, nus, a.gamma)?;
            let steps = a.t as usize;
            position_rows(reps, cli.seed, &track, steps as f64, |rng| {
                let mut st = SimState::step();
                qhahn_discrete_run(&mut st, &params, steps, rng)?;
                Ok(st.config)
            })?
        }
        SimModel::QhahnCont => {
            let nus = nuseq_from_list(&parse_f64_list(&a.nu, "--nu")?)?;
            let params = ContParams::new(a.q, nus)?;
            position_rows(reps, cli.seed, &track, a.t, |rng| {
                let mut st = SimState::step();
                qhahn_continuous_run(&mut st, &params, a.t, rng)?;
                Ok(st.config)
            })?
        }
        SimModel::Qtasep => position_rows(reps, cli.seed, &track, a.t, |rng| {
            let mut st = SimState::step();
            qtasep_run(&mut st, a.q, a.t, rng)?;
            Ok(st.config)
        })?,
    };
    emit_rows(&rows, cli.out, &cli.out_file)?;
    Ok(true)
}

fn cmd_swap(_cli: &Cli, cmd: &SwapCmd) -> Result<bool, Error> {
    let SwapCmd::Verify {
        q,
        nus,
        gamma,
        t,
        n,
        jmax,
    } = cmd;
    let nu_list = parse_f64_list(nus, "--nus")?;
    if nu_list.len() < n + 1 {
        return Err(Error::Validation(format!(
            "--nus needs at least {} entries to transpose the pair ({n}, {})",
            n + 1,
            n + 1
        )));
    }
    let params = QParams::new(*q, nuseq_from_list(&nu_list)?, *gamma)?;
    let mut transposed = nu_list.clone();
    transposed.swap(n - 1, *n);
    let params_t = QParams::new(*q, nuseq_from_list(&transposed)?, *gamma)?;

    let base = qhahn_exact_distribution(&params, *t, *jmax)?;
    let swapped = swap_exact_apply(&base, *n, &params)?;
    let direct = qhahn_exact_distribution(&params_t, *t, *jmax)?;
    let tv = swapped.tv_distance(&direct);
    let leak = swapped.leak() + direct.leak();
    let threshold = 1e-10 + leak;
    let pass = tv <= threshold;
    println!(
        "swap verify: TV = {tv:.3e}, truncation leak = {leak:.3e}, threshold = {threshold:.3e} -> {}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}

fn cmd_backward(cli: &Cli, cmd: &BackwardCmd) -> Result<bool, Error> {
    let BackwardCmd::Run {
        q,
        nu,
        nu0,
        tparam,
        tau,
        replicas,
        track,
    } = cmd;
    let track = parse_usize_list(track, "--track")?;
    let reps = scaled_replicas(*replicas, cli.fast);
    let params = ContParams::new(*q, NuSeq::Homogeneous(*nu))?;
    let schedule = BackwardSchedule::new(*nu0)?;
    let rows = position_rows(reps, cli.seed, &track, *tau, |rng| {
        let mut st = SimState::step();
        qhahn_continuous_run(&mut st, &params, *tparam, rng)?;
        backward_continuous_run(&st.config, *q, schedule, 0.0, *tau, rng)
    })?;
    emit_rows(&rows, cli.out, &cli.out_file)?;
    Ok(true)
}

fn cmd_stationary(cli: &Cli, cmd: &StationaryCmd) -> Result<bool, Error> {
    match cmd {
        StationaryCmd::Run {
            q,
            tparam,
            tau,
            init,
            replicas,
            track,
        } => {
            let track = parse_usize_list(track, "--track")?;
            let reps = scaled_replicas(*replicas, cli.fast);
            let sp = StationaryParams::new(*q, *tparam)?;
            let init_cfg = match init.as_str() {
                "step" => ParticleConfig::step(),
                other => match other.strip_prefix("file:") {
                    Some(path) => {
                        let text = fs::read_to_string(path)
                            .map_err(|e| Error::Parse(format!("init file {path}: {e}")))?;
                        ParticleConfig::decode(text.trim())?
                    }
                    None => {
                        return Err(Error::Parse(format!(
                            "--init must be 'step' or 'file:<path>', got '{other}'"
                        )))
                    }
                },
            };
            let rows = position_rows(reps, cli.seed, &track, *tau, |rng| {
                let mut st = SimState::new(init_cfg.clone());
                stationary_run(&mut st, sp, *tau, rng)?;
                Ok(st.config)
            })?;
            emit_rows(&rows, cli.out, &cli.out_file)?;
            Ok(true)
        }
        StationaryCmd::Verify {
            q,
            tparam,
            tau,
            replicas,
        } => {
            let reps = scaled_replicas(*replicas, cli.fast);
            let sp = StationaryParams::new(*q, *tparam)?;
            let track = 5usize;
            let baseline = par_replicas(reps, cli.seed.wrapping_add(1), |rng| {
                let mut st = SimState::step();
                qtasep_run(&mut st, *q, *tparam, rng)?;
                Ok((1..=track).map(|n| st.config.position(n)).collect::<Vec<_>>())
            })?;
            let evolved = par_replicas(reps, cli.seed.wrapping_add(2), |rng| {
                let mut st = SimState::step();
                qtasep_run(&mut st, *q, *tparam, rng)?;
                st.time = 0.0;
                stationary_run(&mut st, sp, *tau, rng)?;
                Ok((1..=track).map(|n| st.config.position(n)).collect::<Vec<_>>())
            })?;
            let alpha = bonferroni(1e-3, track);
            let mut pass = true;
            for k in 0..track {
                let a = EmpiricalDist::from_discrete(baseline.iter().map(|r| r[k]));
                let b = EmpiricalDist::from_discrete(evolved.iter().map(|r| r[k]));
                let rep = chisq_two_sample(&a, &b, 10, alpha)?;
                println!(
                    "stationary verify x_{}: chi2 = {:.3}, p = {:.3e} -> {}",
                    k + 1,
                    rep.statistic,
                    rep.p_value.unwrap_or(f64::NAN),
                    if rep.pass { "ok" } else { "FAIL" }
                );
                pass &= rep.pass;
            }
            Ok(pass)
        }
    }
}

fn cmd_duality(cli: &Cli, cmd: &DualityCmd) -> Result<bool, Error> {
    let DualityCmd::Verify {
        q,
        nus,
        gamma,
        t,
        nvec,
        replicas,
    } = cmd;
    let nu_list = parse_f64_list(nus, "--nus")?;
    let params = QParams::new(*q, nuseq_from_list(&nu_list)?, *gamma)?;
    let parts: Vec<u32> = parse_usize_list(nvec, "--nvec")?
        .into_iter()
        .map(|v| v as u32)
        .collect();
    let dual = BosonConfig::from_unsorted(parts)?;
    let exact = boson_exact_moment(&dual, *t, &params)?;
    let reps = scaled_replicas(*replicas, cli.fast);
    let sample = par_replicas(reps, cli.seed, |rng| {
        let mut st = SimState::step();
        qhahn_discrete_run(&mut st, &params, *t, rng)?;
        Ok(duality_h(&st.config, &dual, *q))
    })?;
    let rep = qswap_core::stats::moment_ci(&sample, exact, 4.0, 0.0);
    println!(
        "duality verify: mc = {:.6}, exact = {:.6}, z = {:.2} -> {}",
        rep.statistic,
        exact,
        rep.z_score.unwrap_or(f64::NAN),
        if rep.pass { "PASS" } else { "FAIL" }
    );
    Ok(rep.pass)
}

fn cmd_survival(a: &SurvivalArgs) -> Result<bool, Error> {
    let parts: Vec<u32> = parse_usize_list(&a.m, "--m")?
        .into_iter()
        .map(|v| v as u32)
        .collect();
    let start = BosonConfig::from_unsorted(parts)?;
    let (value, drift) = survival_exact(&start, a.q, a.tparam, a.r_cap)?;
    println!("survival = {value:.12} (harmonic-equation drift {drift:.3e})");
    Ok(true)
}

fn cmd_moments(a: &MomentsArgs) -> Result<bool, Error> {
    let nvec = parse_usize_list(&a.nvec, "--nvec")?;
    let nu_list = parse_f64_list(&a.nus, "--nus")?;
    let ell = nvec.len();
    let n_max = *nvec.iter().max().unwrap_or(&0);
    let value = match a.kind {
        MomentKind::Qhahn | MomentKind::QhahnCont => {
            let params = QParams::new(a.q, nuseq_from_list(&nu_list)?, a.gamma)?;
            let poles: Vec<f64> = (1..=n_max).map(|j| params.nu(j)).collect();
            let plan = plan_q_nested(&poles, a.q, ell)?.with_nodes(a.nodes);
            let time = match a.kind {
                MomentKind::Qhahn => TimeKind::Discrete(a.t as usize),
                _ => TimeKind::Continuous(a.t),
            };
            qhahn_moment_quad(&nvec, time, &params, &plan)?
        }
        MomentKind::Beta => {
            if nu_list.len() < n_max {
                return Err(Error::Validation(format!(
                    "--nus needs {n_max} entries for --nvec {:?}",
                    nvec
                )));
            }
            let plan = plan_shift_nested(&nu_list[..nvec[0]], ell)?.with_nodes(a.nodes);
            beta_moment_quad(&nvec, a.t as usize, &nu_list, a.gamma, &plan)?
        }
    };
    println!("{value:.12}");
    Ok(true)
}

fn cmd_polymer(cli: &Cli, cmd: &PolymerCmd) -> Result<bool, Error> {
    match cmd {
        PolymerCmd::Fill {
            t,
            n,
            nus,
            gamma,
            replicas,
        } => {
            let params = BetaParams::new(parse_f64_list(nus, "--nus")?, *gamma)?;
            let reps = scaled_replicas(*replicas, cli.fast);
            let sheets = par_replicas(reps, cli.seed, |rng| polymer_fill(*t, *n, &params, rng))?;
            let mut rows = Vec::new();
            for (r, sheet) in sheets.iter().enumerate() {
                for k in 1..=*n {
                    rows.push(Row {
                        replica: r as u64,
                        time: *t as f64,
                        observable: format!("Z({t},{k})"),
                        value: sheet.value(*t, k),
                    });
                }
            }
            emit_rows(&rows, cli.out, &cli.out_file)?;
            Ok(true)
        }
        PolymerCmd::SwapVerify {
            t,
            n,
            nus,
            gamma,
            replicas,
        } => {
            let nu_list = parse_f64_list(nus, "--nus")?;
            let params = BetaParams::new(nu_list.clone(), *gamma)?;
            let mut transposed = nu_list;
            if transposed.len() < n + 1 {
                return Err(Error::Validation(format!(
                    "--nus needs at least {} entries to transpose the pair ({n}, {})",
                    n + 1,
                    n + 1
                )));
            }
            transposed.swap(n - 1, *n);
            let params_t = BetaParams::new(transposed, *gamma)?;
            let reps = scaled_replicas(*replicas, cli.fast);
            let a = par_replicas(reps, cli.seed.wrapping_add(1), |rng| {
                let sheet = polymer_fill(*t, n + 1, &params, rng)?;
                polymer_swap(&sheet, *t, *n, &params, rng)
            })?;
            let b = par_replicas(reps, cli.seed.wrapping_add(2), |rng| {
                Ok(polymer_fill(*t, *n, &params_t, rng)?.value(*t, *n))
            })?;
            let rep = ks_two_sample(
                &EmpiricalDist::from_continuous(a),
                &EmpiricalDist::from_continuous(b),
                1e-3,
            )?;
            println!(
                "polymer swap verify at (t, n) = ({t}, {n}): KS D = {:.4}, p = {:.3e} -> {}",
                rep.statistic,
                rep.p_value.unwrap_or(f64::NAN),
                if rep.pass { "PASS" } else { "FAIL" }
            );
            Ok(rep.pass)
        }
        PolymerCmd::ShiftVerify {
            t,
            n,
            s,
            nus,
            gamma,
            replicas,
        } => {
            let nu_list = parse_f64_list(nus, "--nus")?;
            if nu_list.len() < n + s {
                return Err(Error::Validation(format!(
                    "--nus needs at least {} entries for N = {n}, s = {s}",
                    n + s
                )));
            }
            let params = BetaParams::new(nu_list.clone(), *gamma)?;
            let shifted = BetaParams::new(nu_list[*s..].to_vec(), *gamma)?;
            let reps = scaled_replicas(*replicas, cli.fast);
            let a = par_replicas(reps, cli.seed.wrapping_add(1), |rng| {
                qswap_core::polymer::modified_lattice_fill(*t, *s, *n, &params, rng)
            })?;
            let b = par_replicas(reps, cli.seed.wrapping_add(2), |rng| {
                Ok(polymer_fill(*t, *n, &shifted, rng)?.row(*t).to_vec())
            })?;
            let alpha = bonferroni(1e-3, *n);
            let mut pass = true;
            for k in 1..=*n {
                // modified_lattice_fill returns 0-based entries for n = 1..=N,
                // while row(t) keeps the boundary column Z(t, 0) at index 0
                let rep = ks_two_sample(
                    &EmpiricalDist::from_continuous(a.iter().map(|r| r[k - 1])),
                    &EmpiricalDist::from_continuous(b.iter().map(|r| r[k])),
                    alpha,
                )?;
                println!(
                    "polymer shift verify s = {s}, Z({t},{k}): KS D = {:.4}, p = {:.3e} -> {}",
                    rep.statistic,
                    rep.p_value.unwrap_or(f64::NAN),
                    if rep.pass { "ok" } else { "FAIL" }
                );
                pass &= rep.pass;
            }
            Ok(pass)
        }
        PolymerCmd::Fpp {
            t,
            n,
            nus,
            gamma,
            replicas,
        } => cmd_fpp(
            cli,
            &FppArgs {
                t: *t,
                n: *n,
                nus: nus.clone(),
                gamma: *gamma,
                replicas: *replicas,
            },
        ),
    }
}

fn cmd_fpp(cli: &Cli, a: &FppArgs) -> Result<bool, Error> {
    let params = BetaParams::new(parse_f64_list(&a.nus, "--nus")?, a.gamma)?;
    let reps = scaled_replicas(a.replicas, cli.fast);
    let t = a.t;
    let n = a.n;
    let sheets = par_replicas(reps, cli.seed, |rng| fpp_fill(t, n, &params, rng))?;
    let mut rows = Vec::new();
    for (r, sheet) in sheets.iter().enumerate() {
        for k in 1..=n {
            rows.push(Row {
                replica: r as u64,
                time: t as f64,
                observable: format!("F({t},{k})"),
                value: sheet.value(t, k),
            });
        }
    }
    emit_rows(&rows, cli.out, &cli.out_file)?;
    Ok(true)
}

fn cmd_report(cli: &Cli, cmd: &ReportCmd) -> Result<bool, Error> {
    let cfg = ReportConfig::new(cli.seed, cli.fast);
    let results = match cmd {
        ReportCmd::All => run_all(&cfg)?,
        ReportCmd::One { id } => vec![run_criterion(*id, &cfg)?],
    };
    let pass = results.iter().all(|r| r.pass);
    let summary = serde_json::json!({
        "seed": cli.seed,
        "fast": cli.fast,
        "pass": pass,
        "criteria": results,
    });
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Parse(format!("serialization: {e}")))?;
    if cli.out_file == "-" {
        println!("{text}");
    } else {
        fs::write(&cli.out_file, text + "\n")
            .map_err(|e| Error::Parse(format!("writing {}: {e}", cli.out_file)))?;
    }
    Ok(pass)
}
