use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use logconcave::lcmle::write_fit;
use logconcave::sim::tailprob::{tailprob, write_tailprob_csv, TailProbConfig, DEFAULT_EPS};
use logconcave::sim::verify::{verify, write_verify_csv, VerifyConfig};
use logconcave::sim::{parse_gammas, simulate, Grid, SimulationConfig, DEFAULT_GAMMAS};
use logconcave::{certify, fit_mle, CertificateReport, Error, ReferenceDensity, SolverConfig, SortedSample};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(name = "logconcave", version, about = "Log-concave density MLE and tail experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the MLE to one number per line and write the fit plus its certificate.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantile bands of phi_hat(x) and phi_hat'(x+) over repeated fits.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 150)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// lo:hi:step
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
        /// Comma-separated quantile levels.
        #[arg(long)]
        gammas: Option<String>,
    },
    /// Observed tail-event rates against their bounds.
    Tailprob {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        /// Comma-separated Chernov deviations.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Run the self-check battery; exits nonzero if any suite fails.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        tamper: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Reference law, e.g. uniform:0,1, gaussian:0,1, exponential:1, logistic:0,1, gamma:2,1.
    #[arg(long, default_value = "uniform:0,1")]
    family: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_out(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_numbers(path: &Path) -> logconcave::Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut xs = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        xs.push(t.parse::<f64>().map_err(|_| Error::Parse {
            line: k + 1,
            message: format!("not a number: '{t}'"),
        })?);
    }
    Ok(xs)
}

fn cmd_fit(input: &Path, out: Option<&Path>) -> logconcave::Result<()> {
    let sample = SortedSample::new(&read_numbers(input)?)?;
    let fit = fit_mle(&sample, &SolverConfig::default())?;
    let report = certify(&fit, &sample, &Default::default());
    let mut w = open_out(out)?;
    write_fit(&fit, &mut w)?;
    writeln!(w, "# certificate")?;
    writeln!(w, "{}", CertificateReport::CSV_HEADER)?;
    writeln!(w, "{}", report.to_csv_row())?;
    w.flush()?;
    Ok(())
}

fn parse_list(s: &str) -> logconcave::Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number '{p}'"))))
        .collect()
}

fn run(cli: Cli) -> logconcave::Result<bool> {
    match cli.command {
        Command::Fit { input, out } => cmd_fit(&input, out.as_deref())?,
        Command::Simulate {
            common,
            n,
            reps,
            grid,
            gammas,
        } => {
            let cfg = SimulationConfig {
                family: common.family.parse::<ReferenceDensity>()?,
                n,
                reps,
                grid: grid.parse::<Grid>()?,
                gammas: match gammas {
                    Some(g) => parse_gammas(&g)?,
                    None => DEFAULT_GAMMAS.to_vec(),
                },
                seed: common.seed,
                threads: common.threads,
            };
            let q = simulate(&cfg)?;
            if q.failures > 0 {
                eprintln!("warning: {} of {reps} replications failed and were skipped", q.failures);
            }
            let mut w = open_out(common.out.as_deref())?;
            q.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Tailprob {
            common,
            n,
            tau,
            reps,
            eps,
        } => {
            let cfg = TailProbConfig {
                family: common.family.parse()?,
                n,
                tau,
                reps,
                seed: common.seed,
                eps: match eps {
                    Some(e) => parse_list(&e)?,
                    None => DEFAULT_EPS.to_vec(),
                },
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(common.threads)
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot start thread pool: {e}")))?;
            let rows = pool.install(|| tailprob(&cfg))?;
            let mut w = open_out(common.out.as_deref())?;
            write_tailprob_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Verify { seed, out, tamper } => {
            let rows = verify(&VerifyConfig { seed, tamper })?;
            let mut w = open_out(out.as_deref())?;
            write_verify_csv(&rows, &mut w)?;
            w.flush()?;
            let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.suite).collect();
            if !failed.is_empty() {
                eprintln!("failed suites: {}", failed.join(", "));
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}
