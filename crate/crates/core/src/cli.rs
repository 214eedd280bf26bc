//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, parse_config, to_toml, DEFAULT_CONFIG};
use crate::error::{Error, Result};
use crate::gnss::DesignOptions;
use crate::simulation::{
    apply_table_preset, figure_data, run_campaign, sweep_tables, Campaign, FigureId, Method, Outcome, ScenarioConfig,
    METRICS,
};
use crate::validate::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const SCHEMA: &str = "# schema: hybrid-attitude v1";

#[derive(Debug, Parser)]
#[command(name = "hybrid-attitude", version, about = "Hybrid GNSS + 5G attitude determination campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Scenario file (TOML); the bundled defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Properties,
    Oracles,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo campaign on one scenario.
    Simulate(CampaignArgs),
    /// Success-rate and attitude-error grids over satellites and stations.
    Table {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=7))]
        table: u32,
        #[command(flatten)]
        common: CampaignArgs,
    },
    /// Figure series in long format.
    Figure {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
        figure: u32,
        #[command(flatten)]
        common: CampaignArgs,
    },
    /// Invariant and oracle smoke checks.
    Validate {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, hide = true)]
        flip_g0_sign: bool,
    },
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn run(command: &Command) -> Result<i32> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Table { table, common } => table_cmd(*table, common),
        Command::Figure { figure, common } => figure_cmd(*figure, common),
        Command::Validate { suite, flip_g0_sign } => Ok(validate_cmd(*suite, *flip_g0_sign)),
    }
}

fn resolve_config(args: &CampaignArgs) -> Result<ScenarioConfig> {
    if args.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    match &args.config {
        Some(path) => load_config(path),
        None => parse_config(DEFAULT_CONFIG),
    }
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Run<'a> {
    command: String,
    args: &'a CampaignArgs,
    started: u64,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn start(command: String, args: &'a CampaignArgs) -> Result<Self> {
        fs::create_dir_all(&args.out)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", args.out.display())))?;
        Ok(Run { command, args, started: unix_now(), outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.args.out.join(name);
        write_atomic(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(mut self, cfg: &ScenarioConfig) -> Result<()> {
        self.write("config.toml", &to_toml(cfg))?;
        let mut m = String::new();
        let config = self.args.config.as_ref().map_or("(bundled default)".to_string(), |p| p.display().to_string());
        let _ = writeln!(m, "command={}", self.command);
        let _ = writeln!(m, "config={config}");
        let _ = writeln!(m, "resolved_config=config.toml");
        let _ = writeln!(m, "base_seed={}", self.args.seed);
        let _ = writeln!(m, "n_trials={}", self.args.trials);
        let _ = writeln!(m, "tool_version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "started_unix={}", self.started);
        let _ = writeln!(m, "finished_unix={}", unix_now());
        let names: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(m, "outputs={}", names.join(";"));
        write_atomic(&self.args.out.join("manifest"), &m)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn aggregate_csv(c: &Campaign) -> String {
    let mut s = format!("{SCHEMA} aggregate\nmethod,metric,value\n");
    let agg = &c.aggregate;
    for method in Method::ALL {
        let Some(a) = agg.method(method) else { continue };
        let _ = writeln!(s, "{method},n_trials,{}", agg.n_trials);
        let _ = writeln!(s, "{method},n_failed,{}", a.n_failed);
        let _ = writeln!(s, "{method},n_bound_not_closed,{}", a.n_bound_not_closed);
        if let Some(rate) = a.success_rate {
            let _ = writeln!(s, "{method},success_rate,{rate}");
        }
        for name in METRICS {
            if let Some(m) = a.metrics.get(name) {
                let _ = writeln!(s, "{method},{name}_mean,{}", m.mean);
                let _ = writeln!(s, "{method},{name}_rmse,{}", m.rmse);
            }
        }
    }
    s
}

pub fn trials_csv(c: &Campaign) -> String {
    let fields = ["status", "success", "float_Z", "float_R", "fixed_R_frob", "fixed_R_deg", "bound_closed", "n_candidates"];
    let mut s = format!("{SCHEMA} trials\ntrial,seed");
    for method in Method::ALL {
        for f in fields {
            let _ = write!(s, ",{method}_{f}");
        }
    }
    s.push('\n');
    for (i, t) in c.trials.iter().enumerate() {
        let _ = write!(s, "{i},{}", t.seed);
        for method in Method::ALL {
            match t.outcome(method) {
                Outcome::Ok(r) => {
                    let success = r.success.map_or(String::new(), |b| u8::from(b).to_string());
                    let _ = write!(
                        s,
                        ",ok,{success},{},{},{},{},{},{}",
                        fmt_opt(r.float_z_error),
                        fmt_opt(r.float_r_error),
                        r.fixed_r_error_frobenius,
                        r.fixed_r_error_deg,
                        u8::from(r.bound_closed),
                        r.n_candidates
                    );
                }
                Outcome::Failed(_) => s.push_str(",failed,,,,,,,"),
                Outcome::Skipped => s.push_str(",skipped,,,,,,,"),
            }
        }
        s.push('\n');
    }
    s
}

fn simulate(args: &CampaignArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let mut run = Run::start("simulate".into(), args)?;
    let campaign = run_campaign(&cfg, args.trials, args.seed, args.jobs)?;
    run.write("aggregate.csv", &aggregate_csv(&campaign))?;
    run.write("trials.csv", &trials_csv(&campaign))?;
    run.finish(&cfg)?;
    let hybrid_failed = campaign.aggregate.method(Method::Hybrid).is_none_or(|a| a.n_failed == a.n_run);
    if hybrid_failed {
        eprintln!("error: every trial failed");
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

pub const TABLE_SATS: [usize; 4] = [5, 6, 7, 8];
pub const TABLE_BS: [usize; 5] = [0, 1, 2, 3, 4];

fn grid_csv(kind: &str, sats: &[usize], bs: &[usize], values: &[Vec<f64>]) -> String {
    let mut s = format!("{SCHEMA} {kind}\nn_sats");
    for l in bs {
        let _ = write!(s, ",L{l}");
    }
    s.push('\n');
    for (n, row) in sats.iter().zip(values) {
        let _ = write!(s, "{n}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn table_cmd(table: u32, args: &CampaignArgs) -> Result<i32> {
    let cfg = apply_table_preset(&resolve_config(args)?, table)?;
    let mut run = Run::start(format!("table --table {table}"), args)?;
    let grid = sweep_tables(&cfg, &TABLE_SATS, &TABLE_BS, args.trials, args.seed, args.jobs)?;
    // Both tables of a pair come from the same campaign.
    let (succ_id, err_id) = if table % 2 == 0 { (table, table + 1) } else { (table - 1, table) };
    run.write(
        &format!("table{succ_id}_success.csv"),
        &grid_csv("success_rate", &grid.sat_range, &grid.bs_range, &grid.success),
    )?;
    run.write(
        &format!("table{err_id}_error.csv"),
        &grid_csv("mean_fixed_attitude_error_deg", &grid.sat_range, &grid.bs_range, &grid.error_deg),
    )?;
    run.finish(&cfg)?;
    let all_failed = grid.aggregates.iter().flatten().all(|a| a.method(Method::Hybrid).is_none_or(|h| h.n_failed == h.n_run));
    Ok(if all_failed { EXIT_FAILURE } else { EXIT_OK })
}

fn figure_cmd(figure: u32, args: &CampaignArgs) -> Result<i32> {
    let cfg = resolve_config(args)?;
    let id = FigureId::from_number(figure)?;
    let mut run = Run::start(format!("figure --figure {figure}"), args)?;
    let rows = figure_data(id, &cfg, args.trials, args.seed, args.jobs)?;
    let mut s = format!("{SCHEMA} fig{figure}\nsetup,method,metric,trial_or_L,value\n");
    for r in &rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.setup, r.method, r.metric, r.trial_or_l, r.value);
    }
    run.write(&format!("fig{figure}.csv"), &s)?;
    run.finish(&cfg)?;
    Ok(EXIT_OK)
}

fn validate_cmd(suite: SuiteArg, flip_g0_sign: bool) -> i32 {
    let suite = match suite {
        SuiteArg::Properties => Suite::Properties,
        SuiteArg::Oracles => Suite::Oracles,
        SuiteArg::All => Suite::All,
    };
    let results = run_suite(suite, DesignOptions { flip_g0_sign });
    let mut failed = Vec::new();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        EXIT_OK
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        EXIT_FAILURE
    }
}
