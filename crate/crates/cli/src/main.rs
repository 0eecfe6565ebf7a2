//! Command-line driver.
//!
//! Exit codes: 0 on success, 2 when a config or input file is rejected, 3
//! when a campaign finished but most trials were inconclusive.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rswc::bounds::{standard_table, BoundRow, BoundsConfig};
use rswc::harness::{
    run_campaign, summary_csv, write_outputs, DecodeRequest, DecoderKind, ExperimentConfig, NetworkSpec, Scheme,
};
use rswc::nsn::{rate_region_check, MultiPmf, NsnTopology};

#[derive(Parser)]
#[command(name = "rswc", version, about = "Simulator for real-valued Slepian-Wolf codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and print its summary CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Decode one instance and print the transcript as JSON.
    Decode {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the bounds table as CSV.
    Bounds {
        /// Defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a network topology and optionally simulate it.
    Nsn {
        #[arg(long)]
        topology: PathBuf,
        /// Source pmf; without it the topology is only validated.
        #[arg(long)]
        pmf: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = NsnDecoderArg::Typicality)]
        decoder: NsnDecoderArg,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check a rate vector against the achievable region of a network.
    RateRegion {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        pmf: PathBuf,
        /// Replaces the encoder rates of the topology, in encoder order.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunFlags {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NsnDecoderArg {
    Typicality,
    Med,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

fn config_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn campaign(config: &ExperimentConfig) -> Result<u8, Failure> {
    config.validate().map_err(config_failure)?;
    let result = run_campaign(config).map_err(config_failure)?;
    write_outputs(&result, &config.outputs).map_err(|e| Failure { code: 1, msg: e.to_string() })?;
    print!("{}", summary_csv(&result.summary));
    if result.summary.inconclusive_dominated() {
        eprintln!("most trials were inconclusive; raise node_budget");
        return Ok(3);
    }
    Ok(0)
}

fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Simulate { config, run } => {
            let mut c = ExperimentConfig::from_json(&read(&config)?).map_err(config_failure)?;
            run.apply(&mut c);
            campaign(&c)
        }
        Command::Decode { config } => {
            let req = DecodeRequest::from_json(&read(&config)?).map_err(config_failure)?;
            let t = req.run().map_err(config_failure)?;
            println!("{}", serde_json::to_string(&t).map_err(config_failure)?);
            Ok(0)
        }
        Command::Bounds { config, seed } => {
            let mut c = match config {
                Some(p) => serde_json::from_str::<BoundsConfig>(&read(&p)?).map_err(config_failure)?,
                None => BoundsConfig::default(),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            let rows = standard_table(&c).map_err(config_failure)?;
            println!("{}", BoundRow::CSV_HEADER);
            for r in rows {
                println!("{}", r.to_csv());
            }
            Ok(0)
        }
        Command::Nsn {
            topology,
            pmf,
            n,
            eps,
            decoder,
            run,
        } => {
            let topo = NsnTopology::from_json(&read(&topology)?).map_err(config_failure)?;
            let violations = topo.validate();
            if !violations.is_empty() {
                for v in &violations {
                    println!("{v}");
                }
                return Err(config_failure("topology is not a normal source network without helpers"));
            }
            println!("topology ok");
            let Some(pmf) = pmf else { return Ok(0) };
            let pmf = MultiPmf::from_json(&read(&pmf)?).map_err(config_failure)?;
            let mut c = ExperimentConfig::from_json(&format!(r#"{{"scheme":"nsn","n_grid":[{n}],"eps":{eps}}}"#))
                .map_err(config_failure)?;
            c.scheme = Scheme::Nsn;
            c.decoder = Some(match decoder {
                NsnDecoderArg::Typicality => DecoderKind::Typicality,
                NsnDecoderArg::Med => DecoderKind::Med,
            });
            c.network = Some(NetworkSpec { topology: topo, pmf });
            run.apply(&mut c);
            campaign(&c)
        }
        Command::RateRegion { topology, pmf, rates } => {
            let mut topo = NsnTopology::from_json(&read(&topology)?).map_err(config_failure)?;
            let pmf = MultiPmf::from_json(&read(&pmf)?).map_err(config_failure)?;
            if let Some(r) = rates {
                if r.len() != topo.encoders.len() {
                    return Err(config_failure(format!(
                        "{} rates given for {} encoders",
                        r.len(),
                        topo.encoders.len()
                    )));
                }
                for (e, v) in topo.encoders.iter_mut().zip(r) {
                    e.rate = v;
                }
            }
            let check = rate_region_check(&topo, &pmf).map_err(config_failure)?;
            println!("decoder\tsubset\trate_sum\trequired\tstatus");
            for i in &check.inequalities {
                let subset: Vec<String> = i.subset.iter().map(ToString::to_string).collect();
                println!(
                    "{}\t{{{}}}\t{}\t{}\t{}",
                    i.decoder,
                    subset.join(","),
                    i.rate_sum,
                    i.required,
                    if i.satisfied { "ok" } else { "violated" }
                );
            }
            println!("achievable: {}", check.achievable);
            Ok(0)
        }
    }
}
