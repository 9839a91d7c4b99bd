use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ies_core::data::ScenarioConfig;
use ies_core::io::{self, RunSettings};
use ies_core::oracle::{existence_uniqueness_check, verify_oracle_vs_numeric};
use ies_core::scenario::{mode_trends, run_mode, sensitivity_residential_fraction, verification_failures, RunOptions, RunOutcome};

#[derive(Parser)]
#[command(name = "ies", version, about = "Leader-follower price scheduling for coupled electricity and district heating")]
struct Cli {
    /// Output directory (overrides the manifest)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative optimality gap for branch-and-bound
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Print the search log to stderr
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a scenario
    Validate { manifest: PathBuf },
    /// Solve one mode and write schedule, summary and audit files
    Solve {
        manifest: PathBuf,
        #[arg(long)]
        mode: Option<u8>,
    },
    /// Solve modes 1-6 and write a comparison table
    Modes { manifest: PathBuf },
    /// Mode 5 over residential volume shares, e.g. `0.1..0.9`, `0.2..0.8:0.2` or `0.3,0.5`
    Sensitivity {
        manifest: PathBuf,
        #[arg(long)]
        k: String,
    },
    /// Compare the closed-form follower response with a numeric solve
    OracleCheck {
        manifest: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Validation(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

fn parse_k(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("cannot parse K values '{spec}'");
    if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (h, s.parse::<f64>().map_err(|_| bad())?),
            None => (rest, 0.1),
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        // rounded so that 0.1 steps print as 0.3 rather than 0.30000000000000004
        Ok((0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect())
    } else {
        spec.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

struct Context {
    cfg: ScenarioConfig,
    settings: RunSettings,
    opts: RunOptions,
    out: PathBuf,
}

fn load(cli: &Cli, manifest: &Path) -> Result<Context, Failure> {
    let (cfg, settings) = io::load_scenario(manifest).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut opts = settings.run_options(cli.verbose);
    if let Some(g) = cli.gap {
        opts.gap_tol = g;
    }
    let out = cli.out.clone().unwrap_or_else(|| settings.output_dir.clone());
    Ok(Context { cfg, settings, opts, out })
}

fn print_summary(o: &RunOutcome) {
    let s = &o.summary;
    println!(
        "mode {}: status {} gap {:.2e} nodes {} time {:.1}s",
        s.mode, s.status, s.gap, s.nodes, s.solve_seconds
    );
    println!(
        "  net revenue {:.2}  earnings {:.2}  operating cost {:.2}",
        s.net_revenue, s.earnings, s.operating_cost
    );
    println!(
        "  user energy cost {:.2}  comfort loss {:.2}  overall cost {:.2}",
        s.user_energy_cost, s.comfort_loss, s.overall_cost
    );
    println!("  heat cut {:.2} MWh  CHP heat {:.2} MWh", s.total_heat_cut, s.chp_heat);
}

fn solve_one(ctx: &Context, mode: u8, out: &Path) -> Result<RunOutcome, Failure> {
    let o = run_mode(&ctx.cfg, mode, &ctx.opts).map_err(|e| Failure::Solver(e.to_string()))?;
    io::write_outputs(&ctx.cfg, &o, out).map_err(|e| Failure::Validation(e.to_string()))?;
    print_summary(&o);
    Ok(o)
}

fn check(o: &RunOutcome) -> Result<(), Failure> {
    let f = verification_failures(o);
    if f.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("mode {}: {}", o.mode, f.join("; "))))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { manifest } => {
            let ctx = load(cli, manifest)?;
            println!(
                "ok: T = {}, {} thermal units, {} CHP units, {} storages, mode {}",
                ctx.cfg.horizon,
                ctx.cfg.thermal.len(),
                ctx.cfg.chp.len(),
                ctx.cfg.storages.len(),
                ctx.cfg.mode
            );
            for c in existence_uniqueness_check(&ctx.cfg) {
                println!("  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(())
        }
        Command::Solve { manifest, mode } => {
            let ctx = load(cli, manifest)?;
            let mode = mode.unwrap_or(ctx.cfg.mode);
            if !(1..=6).contains(&mode) {
                return Err(Failure::Validation(format!("mode = {mode}: mode must be in 1..=6")));
            }
            let o = solve_one(&ctx, mode, &ctx.out)?;
            println!("outputs written to {}", ctx.out.display());
            check(&o)
        }
        Command::Modes { manifest } => {
            let ctx = load(cli, manifest)?;
            let mut runs = Vec::new();
            for mode in 1..=6 {
                runs.push(solve_one(&ctx, mode, &ctx.out.join(format!("mode{mode}")))?);
            }
            let rows: Vec<_> = runs.iter().map(|r| r.summary.clone()).collect();
            io::write_mode_table(&rows, &ctx.out).map_err(|e| Failure::Validation(e.to_string()))?;
            println!("\n{:>4} {:>14} {:>14} {:>14} {:>12} {:>12}", "mode", "net revenue", "earnings", "op. cost", "comfort", "heat cut");
            for s in &rows {
                println!(
                    "{:>4} {:>14.2} {:>14.2} {:>14.2} {:>12.2} {:>12.2}",
                    s.mode, s.net_revenue, s.earnings, s.operating_cost, s.comfort_loss, s.total_heat_cut
                );
            }
            for (name, ok) in mode_trends(&runs) {
                println!("trend {}: {name}", if ok { "holds" } else { "INVERTED" });
            }
            runs.iter().try_for_each(check)
        }
        Command::Sensitivity { manifest, k } => {
            let ctx = load(cli, manifest)?;
            let ks = parse_k(k).map_err(Failure::Validation)?;
            if let Some(bad) = ks.iter().find(|&&k| !(k > 0.0 && k < 1.0)) {
                return Err(Failure::Validation(format!("k = {bad}: residential share must be in (0,1)")));
            }
            let runs = sensitivity_residential_fraction(&ctx.cfg, &ks, &ctx.opts).map_err(|e| Failure::Solver(e.to_string()))?;
            let rows: Vec<_> = runs.iter().map(|(k, o)| (*k, o.summary.clone())).collect();
            io::write_sensitivity(&rows, &ctx.out).map_err(|e| Failure::Validation(e.to_string()))?;
            println!("{:>5} {:>14} {:>14} {:>12} {:>14} {:>12}", "K", "earnings", "op. cost", "comfort", "overall cost", "heat cut");
            for (k, s) in &rows {
                println!(
                    "{:>5} {:>14.2} {:>14.2} {:>12.2} {:>14.2} {:>12.2}",
                    k, s.earnings, s.operating_cost, s.comfort_loss, s.overall_cost, s.total_heat_cut
                );
            }
            let rising = rows.windows(2).all(|w| w[1].1.earnings >= w[0].1.earnings);
            println!("trend {}: earnings nondecreasing in K", if rising { "holds" } else { "INVERTED" });
            runs.iter().try_for_each(|(_, o)| check(o))
        }
        Command::OracleCheck { manifest, trials, seed } => {
            let ctx = load(cli, manifest)?;
            let n = trials.unwrap_or(ctx.settings.oracle_trials);
            let seed = seed.unwrap_or(ctx.settings.seed);
            let report = verify_oracle_vs_numeric(&ctx.cfg, n, seed).map_err(|e| Failure::Solver(e.to_string()))?;
            println!("{}/{} trials agree, max |dF| = {:.3e}", report.passed(), report.trials.len(), report.max_objective_gap());
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Verification("closed-form follower response disagrees with the numeric solve".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Validation(m) => format!("validation error: {m}"),
                Failure::Solver(m) => format!("solver failure: {m}"),
                Failure::Verification(m) => format!("verification failure: {m}"),
            };
            eprintln!("{msg}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_k;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k("0.1..0.9").unwrap(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(parse_k("0.2..0.8:0.3").unwrap(), vec![0.2, 0.5, 0.8]);
        assert_eq!(parse_k("0.3, 0.5").unwrap(), vec![0.3, 0.5]);
        assert!(parse_k("a..b").is_err());
    }
}
