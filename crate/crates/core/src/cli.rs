//! Command-line front end. Every subcommand writes its artifacts into a fresh
//! `<out>/<timestamp>/` directory and prints one summary line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, run_dir, write_json};
use crate::budget::{filling_budget, heights, iterated_budget, LengthPolicy, ProfileParams};
use crate::config::RunConfig;
use crate::convergence::{run_convergence_suite, ConvergenceReport, REPORT_SCHEMA};
use crate::error::{Error, Result};
use crate::hybrid::build_metric;
use crate::sphere::{build_net, geodesic_distance, Net, NetDocument, SpherePoint, NET_SCHEMA};
use crate::threads::{ThreadSystem, ThreadsDocument, THREADS_SCHEMA};
use crate::tunnel::{
    generate_profile, sample_grid, write_profile_csv, ProfileDocument, RadialProfile,
    PROFILE_SCHEMA,
};

pub const QUERY_SCHEMA: &str = "query/1";
pub const FILLING_SCHEMA: &str = "filling/1";
pub const SUMMARY_SCHEMA: &str = "summary/1";

#[derive(Debug, Parser)]
#[command(
    name = "flatlab",
    version,
    about = "Spheres with threads, tunnel profiles and filling budgets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Root directory for run artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Policy {
    ThreadLength,
    AtLeastMinimal,
}

impl From<Policy> for LengthPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::ThreadLength => LengthPolicy::ThreadLength,
            Policy::AtLeastMinimal => LengthPolicy::AtLeastMinimal,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a maximal eps-separated net on S^m.
    Net {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Place thread endpoints for a saved net.
    Threads {
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Distance between two sphere points in the sphere with threads.
    Query {
        #[arg(long)]
        threads: PathBuf,
        /// Comma-separated ambient coordinates.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Also dump all endpoint-pair distances as CSV.
        #[arg(long)]
        pairs_csv: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a tunnel profile with CSV samples (and a mesh for m = 2).
    Profile {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        rho0: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long = "L")]
        length: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Skip the positive scalar curvature check for m >= 3.
        #[arg(long)]
        no_psc_gate: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Filling budget: iterated over a thread system, or for one tunnel.
    Budget {
        #[arg(long, requires = "profile", conflicts_with_all = ["rho", "diam", "vol"])]
        threads: Option<PathBuf>,
        /// Profile document whose rho0/rho sets the neck factor.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Policy::AtLeastMinimal)]
        length_policy: Policy,
        #[arg(long, requires_all = ["diam", "vol"])]
        rho: Option<f64>,
        #[arg(long)]
        diam: Option<f64>,
        #[arg(long)]
        vol: Option<f64>,
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Neck scale; defaults to rho / 4.
        #[arg(long)]
        rho0: Option<f64>,
        /// Tunnel length; defaults to the shortest the bend allows.
        #[arg(long = "L")]
        length: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the convergence suite described by a config file.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// JSON object merged over the config.
        #[arg(long)]
        set: Option<String>,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect report.json files under a directory into one summary.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Net { m, eps, seed, out } => cmd_net(m, eps, seed, &out.out),
        Command::Threads { net, out } => cmd_threads(&net, &out.out),
        Command::Query {
            threads,
            x,
            y,
            pairs_csv,
            out,
        } => cmd_query(&threads, &x, &y, pairs_csv, &out.out),
        Command::Profile {
            m,
            rho0,
            rho,
            length,
            samples,
            no_psc_gate,
            out,
        } => cmd_profile(m, rho0, rho, length, samples, !no_psc_gate, &out.out),
        Command::Budget {
            threads,
            profile,
            length_policy,
            rho,
            diam,
            vol,
            m,
            rho0,
            length,
            out,
        } => match threads {
            Some(t) => cmd_budget_threads(&t, profile.as_deref(), length_policy.into(), &out.out),
            None => {
                let (Some(rho), Some(diam), Some(vol)) = (rho, diam, vol) else {
                    return Err(Error::Validation(
                        "budget needs --threads with --profile, or --rho, --diam and --vol".into(),
                    ));
                };
                cmd_budget_direct(m, rho, diam, vol, rho0, length, &out.out)
            }
        },
        Command::Verify { config, set, out } => cmd_verify(&config, set.as_deref(), out),
        Command::Report { runs, out } => cmd_report(&runs, &out.out),
    }
}

fn load_net(path: &Path) -> Result<Net> {
    Net::try_from(read_json::<NetDocument>(path, NET_SCHEMA)?)
}

fn load_threads(path: &Path) -> Result<ThreadSystem> {
    ThreadSystem::try_from(read_json::<ThreadsDocument>(path, THREADS_SCHEMA)?)
}

fn parse_point(text: &str) -> Result<SpherePoint> {
    let coords = text
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("cannot parse coordinate {c:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    SpherePoint::new(coords)
}

fn cmd_net(m: usize, eps: f64, seed: u64, out: &Path) -> Result<()> {
    let net = build_net(m, eps, seed)?;
    let dir = run_dir(out)?;
    let path = dir.join("net.json");
    write_json(&path, &net.to_document())?;
    println!(
        "net: m={m} eps={eps} seed={seed} N={} min_separation={:.6} -> {}",
        net.count(),
        net.min_separation(),
        path.display()
    );
    Ok(())
}

fn cmd_threads(net: &Path, out: &Path) -> Result<()> {
    let net = load_net(net)?;
    let system = ThreadSystem::from_net(&net)?;
    system.validate()?;
    let dir = run_dir(out)?;
    let path = dir.join("threads.json");
    write_json(&path, &system.to_document())?;
    println!(
        "threads: N={} K={} rho={:.6e} -> {}",
        net.count(),
        system.thread_count(),
        system.rho(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct QueryDocument {
    schema: String,
    x: SpherePoint,
    y: SpherePoint,
    d_sphere: f64,
    d_hybrid: f64,
}

fn cmd_query(threads: &Path, x: &str, y: &str, pairs_csv: bool, out: &Path) -> Result<()> {
    let system = load_threads(threads)?;
    let (x, y) = (parse_point(x)?, parse_point(y)?);
    let metric = build_metric(&system);
    let d = metric.distance(&x, &y)?;
    let dir = run_dir(out)?;
    let doc = QueryDocument {
        schema: QUERY_SCHEMA.into(),
        d_sphere: geodesic_distance(&x, &y),
        d_hybrid: d,
        x,
        y,
    };
    write_json(&dir.join("query.json"), &doc)?;
    if pairs_csv {
        metric.write_pair_csv(BufWriter::new(File::create(dir.join("pairs.csv"))?))?;
    }
    println!("{d}");
    Ok(())
}

fn cmd_profile(
    m: usize,
    rho0: f64,
    rho: f64,
    length: f64,
    samples: usize,
    gate: bool,
    out: &Path,
) -> Result<()> {
    if samples < 2 {
        return Err(Error::Validation("need at least 2 samples".into()));
    }
    let profile = generate_profile(m, rho0, rho, length)?;
    let dir = run_dir(out)?;
    write_json(&dir.join("profile.json"), &profile.to_document(samples))?;
    write_profile_csv(
        &sample_grid(&profile, samples),
        BufWriter::new(File::create(dir.join("profile.csv"))?),
    )?;
    if m == 2 {
        profile.write_obj(
            201,
            48,
            BufWriter::new(File::create(dir.join("profile.obj"))?),
        )?;
    }
    let min_r = sample_grid(&profile, samples)
        .iter()
        .map(|s| s.scalar_curvature)
        .fold(f64::INFINITY, f64::min);
    println!(
        "profile: m={m} rho0={rho0} rho={rho} L={length} L'={:.9} beta={:.6} min_scalar={min_r:.6e} -> {}",
        profile.axial_length(),
        profile.bend().beta(),
        dir.display()
    );
    if gate && m >= 3 {
        if let Some(bad) = profile.psc_violation(samples) {
            return Err(Error::Invariant(format!(
                "first nonpositive scalar curvature {} at s = {} (domain {:?})",
                bad.scalar_curvature,
                bad.s,
                profile.domain()
            )));
        }
    }
    Ok(())
}

fn cmd_budget_threads(
    threads: &Path,
    profile: Option<&Path>,
    policy: LengthPolicy,
    out: &Path,
) -> Result<()> {
    let system = load_threads(threads)?;
    let profile = profile.ok_or_else(|| Error::Validation("--threads needs --profile".into()))?;
    let doc: ProfileDocument = read_json(profile, PROFILE_SCHEMA)?;
    let params = ProfileParams {
        rho0_factor: doc.rho0 / doc.rho,
        length_policy: policy,
    };
    let budget = iterated_budget(&system, params)?;
    budget.validate()?;
    let dir = run_dir(out)?;
    let path = dir.join("budget.json");
    write_json(&path, &budget)?;
    println!(
        "budget: eps={} K={} total_dF={:.9e} total_dGH={:.9e} -> {}",
        budget.eps,
        budget.thread_count,
        budget.total_df,
        budget.total_dgh,
        path.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FillingDocument {
    schema: String,
    #[serde(flatten)]
    budget: crate::budget::FillingBudget,
}

fn cmd_budget_direct(
    m: usize,
    rho: f64,
    diam: f64,
    vol: f64,
    rho0: Option<f64>,
    length: Option<f64>,
    out: &Path,
) -> Result<()> {
    heights(rho, diam)?;
    let bend = std::sync::Arc::new(crate::tunnel::TunnelBend::new(
        m,
        rho0.unwrap_or(0.25 * rho),
        rho,
    )?);
    let length = length.unwrap_or_else(|| bend.minimal_length());
    let profile = crate::tunnel::TunnelProfile::new(bend, length)?;
    let budget = filling_budget(&profile, vol, diam)?;
    let dir = run_dir(out)?;
    let path = dir.join("filling.json");
    write_json(
        &path,
        &FillingDocument {
            schema: FILLING_SCHEMA.into(),
            budget,
        },
    )?;
    println!(
        "budget: rho={rho} diam={diam} vol={vol} h={:.12} h0={:.12} dF={:.9e} dGH={:.12} -> {}",
        budget.h,
        budget.h0,
        budget.df_bound,
        budget.dgh_bound,
        path.display()
    );
    Ok(())
}

fn cmd_verify(config: &Path, set: Option<&str>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(json) = set {
        cfg = cfg.apply_json(json)?;
    }
    let mut cfg = cfg.apply_env()?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    cfg.validate()?;
    let report = run_convergence_suite(&cfg.suite())?;
    let dir = run_dir(&cfg.output_dir)?;
    write_json(&dir.join("config.json"), &cfg)?;
    write_json(&dir.join("report.json"), &report)?;
    report.write_csv(BufWriter::new(File::create(dir.join("report.csv"))?))?;
    report.write_plot_csv(BufWriter::new(File::create(dir.join("plot.csv"))?))?;
    let errors = report.per_eps.iter().filter(|r| r.error.is_some()).count();
    let failed: Vec<String> = report
        .per_eps
        .iter()
        .filter(|r| r.error.is_none() && !r.gates_ok())
        .map(|r| format!("eps={} seed={}", r.eps, r.seed))
        .collect();
    println!(
        "verify: m={} rows={} gates_ok={} trend_ok={:?} errors={errors} -> {}",
        report.m,
        report.per_eps.len(),
        failed.is_empty(),
        report.trend_ok,
        dir.display()
    );
    if !failed.is_empty() {
        return Err(Error::Invariant(format!(
            "deviation or Lipschitz bound breached at {}",
            failed.join(", ")
        )));
    }
    if errors > 0 {
        return Err(Error::Construction(format!(
            "{errors} schedule rows failed to build"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RunSummary {
    path: PathBuf,
    m: usize,
    rows: usize,
    gates_ok: bool,
    trend_ok: Vec<bool>,
    max_sup_deviation: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryDocument {
    schema: String,
    runs: Vec<RunSummary>,
}

fn find_reports(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_reports(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "report.json") {
            found.push(p);
        }
    }
    Ok(())
}

fn cmd_report(runs: &Path, out: &Path) -> Result<()> {
    if !runs.is_dir() {
        return Err(Error::Validation(format!(
            "{} is not a directory",
            runs.display()
        )));
    }
    let mut paths = Vec::new();
    find_reports(runs, &mut paths)?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for p in &paths {
        let report: ConvergenceReport = read_json(p, REPORT_SCHEMA)?;
        report.validate()?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        let text = String::from_utf8(buf).expect("csv is UTF-8");
        let run = p.parent().unwrap_or(runs).display().to_string();
        rows.extend(text.lines().skip(1).map(|l| format!("{run},{l}")));
        summaries.push(RunSummary {
            path: p.clone(),
            m: report.m,
            rows: report.per_eps.len(),
            gates_ok: report.all_gates_ok(),
            trend_ok: report.trend_ok.clone(),
            max_sup_deviation: report
                .per_eps
                .iter()
                .filter_map(|r| r.stats.as_ref().map(|s| s.sup_deviation))
                .fold(0.0, f64::max),
        });
    }
    let dir = run_dir(out)?;
    let ok = summaries.iter().filter(|s| s.gates_ok).count();
    write_json(
        &dir.join("summary.json"),
        &SummaryDocument {
            schema: SUMMARY_SCHEMA.into(),
            runs: summaries,
        },
    )?;
    let mut csv = String::from(
        "run,eps,N,K,sup_dev,max_ratio,min_ratio,gh_est,dF_budget,dGH_budget,seed,wall_ms\n",
    );
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    fs::write(dir.join("summary.csv"), csv)?;
    println!(
        "report: {} runs, {ok} with all gates ok -> {}",
        paths.len(),
        dir.display()
    );
    Ok(())
}
