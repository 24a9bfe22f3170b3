use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prodmc::harness::{
    beta_product_experiment, gllvm_experiment, verify, write_beta_csv, write_diagnostics_csv, write_gllvm_csv,
    BetaConfig, GllvmConfig, Settings, Suite,
};
use prodmc::{Error, Execution, Result};

#[derive(Parser)]
#[command(name = "prodmc", version, about = "Joint and marginal Monte Carlo estimators of product expectations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Products of independent Beta variables against the known truth.
    BetaProduct(Flags),
    /// Marginal likelihood estimators on a simulated latent trait model.
    Gllvm(Flags),
    /// Run the oracle suites.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with the same keys as the flags; its values win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// `R` or `start:end:step`.
    #[arg(long)]
    r_schedule: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    kept: Option<usize>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Flags {
    fn settings(&self) -> Result<Settings> {
        let cli = Settings {
            seed: self.seed,
            out: self.out.clone(),
            n: self.n,
            alpha: self.alpha,
            beta: self.beta,
            r_schedule: self.r_schedule.clone(),
            replicates: self.replicates,
            batches: self.batches,
            batch_size: self.batch_size,
            p: self.p,
            cases: self.cases,
            k: self.k,
            quad_order: self.quad_order,
            burn_in: self.burn_in,
            thin: self.thin,
            kept: self.kept,
        };
        let Some(path) = &self.config else { return Ok(cli) };
        let file = Settings::from_file(path)?;
        let (merged, warnings) = Settings::merge(&cli, &file);
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(merged)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::from(e).context(format!("creating {}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// `dir/stem.csv` -> `dir/stem_{suffix}.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::BetaProduct(flags) => {
            let s = flags.settings()?;
            let cfg = BetaConfig::from_settings(&s)?;
            let rows = beta_product_experiment(&cfg, flags.exec())?;
            write_beta_csv(&rows, open_out(s.out.as_deref())?)?;
            Ok(true)
        }
        Command::Gllvm(flags) => {
            let s = flags.settings()?;
            let cfg = GllvmConfig::from_settings(&s)?;
            let study = gllvm_experiment(&cfg, flags.exec())?;
            write_gllvm_csv(&study, open_out(s.out.as_deref())?)?;
            if let Some(out) = &s.out {
                write_diagnostics_csv(&study, open_out(Some(&sibling(out, "diagnostics")))?)?;
                study.data.write_csv(open_out(Some(&sibling(out, "data")))?)?;
            }
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = verify(suite.parse::<Suite>()?)?;
            for c in &report.checks {
                println!("{c}");
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error[E_VERIFY]: one or more checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
