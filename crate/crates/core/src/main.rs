use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssq::cli::{
    describe_params, exit, exit_code, parse_criteria, run_detect, run_verify, to_json, DetectRequest, Report, Suite,
};
use ssq::error::Result;
use ssq::search::SearchConfig;

#[derive(Parser)]
#[command(
    name = "ssq",
    version,
    about = "Entanglement criteria for symmetric multiqubit states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate entanglement criteria on a state file.
    Detect(DetectArgs),
    /// Run a numerical verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// JSON file with search settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    rapidity_cap: Option<f64>,
    #[arg(long)]
    coarse_grid: Option<usize>,
    #[arg(long)]
    refine_iters: Option<usize>,
}

impl SearchArgs {
    fn resolve(&self) -> Result<SearchConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_slice(&std::fs::read(p)?)?,
            None => SearchConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.rapidity_cap {
            cfg.rapidity_cap = v;
        }
        if let Some(v) = self.coarse_grid {
            cfg.coarse_grid = v;
        }
        if let Some(v) = self.refine_iters {
            cfg.refine_iters = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// State file (JSON).
    #[arg(long)]
    state: PathBuf,
    /// Comma-separated criteria, or `all`.
    #[arg(long, default_value = "all")]
    criteria: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// identities, equivalence-n2, equivalence-n3, proportionality or prep-roundtrip.
    #[arg(long)]
    suite: String,
    #[arg(long)]
    samples: Option<usize>,
    /// Write the JSON detail here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-statistic CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

fn print_summary(r: &Report) {
    for c in &r.criteria {
        let verdict = format!("{:?}", c.verdict);
        eprintln!(
            "{:<16} {:>14.6e}  {verdict:<13} {}",
            c.criterion.to_string(),
            c.margin,
            describe_params(&c.params)
        );
    }
    for s in &r.skipped {
        eprintln!("{:<16} skipped: {}", s.criterion, s.reason);
    }
    if let Some(o) = &r.oracle {
        for i in &o.inconsistencies {
            eprintln!("warning: {i}");
        }
    }
}

fn detect(args: DetectArgs) -> Result<i32> {
    let req = DetectRequest {
        state: args.state,
        criteria: parse_criteria(&args.criteria)?,
        config: args.search.resolve()?,
        out: args.out,
        timing: args.timing,
    };
    let report = run_detect(&req)?;
    let json = to_json(&report)?;
    match &req.out {
        Some(p) => {
            std::fs::write(p, json)?;
            print_summary(&report);
        }
        None => print!("{json}"),
    }
    Ok(exit::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<i32> {
    let suite: Suite = args.suite.parse()?;
    let cfg = args.search.resolve()?;
    let report = run_verify(suite, args.samples, cfg.seed, &cfg)?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    println!("{} {suite}", if report.passed { "PASS" } else { "FAIL" });
    if let Some(p) = &args.out {
        std::fs::write(p, to_json(&report)?)?;
    }
    if let Some(p) = &args.csv {
        std::fs::write(p, report.to_csv()?)?;
    }
    Ok(if report.passed {
        exit::SUCCESS
    } else {
        exit::SUITE_FAILURE
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::INPUT_ERROR
            } else {
                exit::SUCCESS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
