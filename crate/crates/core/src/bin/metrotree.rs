//! Experiment driver: validate a configuration, run simulations, run
//! the Einstein-relation experiment and produce diagnostic reports.

use clap::{Parser, Subcommand};
use metrotree::config::ExperimentConfig;
use metrotree::diagnostics;
use metrotree::distributions::{
    brw_speed, check_xm, shifted_binomial_p0, SpeedDirection,
};
use metrotree::estimators;
use metrotree::regeneration::block_stats;
use metrotree::runner::{collect_block_runs, merged_blocks, RunSpec};
use metrotree::walk::FnObserver;
use serde::Serialize;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "metrotree", version, about = "Metropolis walks on disordered trees")]
struct Cli {
    /// Path to the experiment TOML config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the law and kernel assumptions; print derived constants.
    Validate,
    /// Run replicas; write trajectories, blocks, tails and metadata.
    Simulate,
    /// Run the Einstein-relation experiment over the beta grid.
    Einstein,
    /// Run structural cross-checks and escape-probability curves.
    Diagnostics,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool configured before first use");
    }
    let Some(config_path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let mut cfg = match ExperimentConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config parse error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let result = match cli.command {
        Command::Validate => cmd_validate(&cfg),
        Command::Simulate => cmd_simulate(&cfg, &cli.out),
        Command::Einstein => cmd_einstein(&cfg, &cli.out),
        Command::Diagnostics => cmd_diagnostics(&cfg, &cli.out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_validate(cfg: &ExperimentConfig) -> anyhow::Result<u8> {
    let law = match cfg.validate() {
        Ok(law) => law,
        Err(e) => {
            println!("FAIL assumption: {e}");
            return Ok(1);
        }
    };
    let d = cfg.model.d;
    println!("beta0 = {}", law.beta0());
    println!("ess_sup = {}", law.ess_sup());
    match &cfg.law {
        metrotree::config::LawSpec::TwoPoint { .. } => {
            println!("p0 threshold (d={d}, n=1) = {}", shifted_binomial_p0(d, 1));
        }
        metrotree::config::LawSpec::ShiftedBinomial { n, .. } => {
            println!("p0 threshold (d={d}, n={n}) = {}", shifted_binomial_p0(d, *n));
        }
        metrotree::config::LawSpec::Tilted { .. } => {}
    }
    let report = check_xm(&law, d);
    println!(
        "Lambda minimum = {} at beta* = {}",
        report.lambda_min, report.beta_star
    );
    if !report.satisfies_xm {
        println!("FAIL assumption: growth condition (Lambda minimum not positive)");
        return Ok(1);
    }
    let vmax = brw_speed(&law, d, SpeedDirection::Max)?;
    let vmin = brw_speed(&law, d, SpeedDirection::Min)?;
    println!("BRW max speed prediction = {vmax}");
    println!("BRW min speed prediction = {vmin}");
    println!("all assumptions pass");
    Ok(0)
}

/// Writes a CSV with the config hash on a leading comment line.
fn write_csv(
    path: &Path,
    hash: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> anyhow::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# config_hash={hash}")?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ReplicaSummary {
    replica: u32,
    n_blocks: Option<usize>,
    tau1: Option<u64>,
    note: Option<String>,
    final_level: u32,
    final_s: f64,
}

#[derive(Serialize)]
struct SimulateMetadata {
    config_hash: String,
    config: ExperimentConfig,
    beta: f64,
    total_blocks: usize,
    speed: Option<estimators::Estimate>,
    sigma2: Option<estimators::Estimate>,
    speed_note: Option<String>,
    replicas: Vec<ReplicaSummary>,
}

fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<u8> {
    let law = cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let beta = cfg.beta();
    let spec = cfg.run_spec(law, beta);

    let runs = collect_block_runs(&spec);
    let blocks = merged_blocks(&runs);

    write_csv(
        &out.join("blocks.csv"),
        &hash,
        "replica,dtau,ds",
        runs.iter().flat_map(|r| {
            let replica = r.replica;
            r.regen
                .as_ref()
                .map(|o| o.blocks.clone())
                .unwrap_or_default()
                .into_iter()
                .map(move |b| format!("{replica},{},{}", b.dtau, b.ds))
        }),
    )?;

    if let Ok(stats) = block_stats(&blocks) {
        write_csv(
            &out.join("tau_tail.csv"),
            &hash,
            "t,survival_prob",
            stats
                .dtau_tail
                .iter()
                .map(|(t, p)| format!("{t},{p}")),
        )?;
    }

    export_trajectories(cfg, &spec, out, &hash)?;

    let (speed, speed_note) = match estimators::speed_from_blocks_with_floor(
        &blocks,
        cfg.run.min_blocks,
    ) {
        Ok(est) => (Some(est), None),
        Err(e) => (None, Some(format!("insufficient regenerations: {e}"))),
    };
    let sigma2 = if beta == 0.0 {
        estimators::sigma2_from_blocks_with_floor(&blocks, cfg.run.min_blocks).ok()
    } else {
        None
    };

    let metadata = SimulateMetadata {
        config_hash: hash,
        config: cfg.clone(),
        beta,
        total_blocks: blocks.len(),
        speed,
        sigma2,
        speed_note: speed_note.clone(),
        replicas: runs
            .iter()
            .map(|r| ReplicaSummary {
                replica: r.replica,
                n_blocks: r.regen.as_ref().map(|o| o.blocks.len()).ok(),
                tau1: r.regen.as_ref().map(|o| o.tau1).ok(),
                note: r.regen.as_ref().err().map(|e| e.to_string()),
                final_level: r.final_state.vertex.level(),
                final_s: r.final_state.s,
            })
            .collect(),
    };
    write_json(&out.join("metadata.json"), &metadata)?;
    if let Some(note) = speed_note {
        println!("{note}");
    } else {
        let est = metadata.speed.as_ref().unwrap();
        println!(
            "speed estimate {} +- {} from {} blocks",
            est.value, est.stderr, est.n_units
        );
    }
    Ok(0)
}

/// Re-runs the first few replicas with a subsampling observer and
/// writes one trajectory CSV each.
fn export_trajectories(
    cfg: &ExperimentConfig,
    spec: &RunSpec,
    out: &Path,
    hash: &str,
) -> anyhow::Result<()> {
    let stride = cfg.run.stride.max(1);
    let n_files = cfg.run.trajectory_replicas.min(spec.n_replicas);
    for replica in 0..n_files {
        let mut rows: Vec<String> = vec!["0,0,0".to_string()];
        let params = spec.params();
        let env = spec.environment(replica);
        let mut rng = spec.walker_rng(replica);
        let mut obs = FnObserver(|rec: &metrotree::walk::StepRecord| {
            if rec.n % stride == 0 {
                rows.push(format!("{},{},{}", rec.n, rec.level, rec.s));
            }
        });
        metrotree::walk::run_trajectory(&env, &params, spec.n_steps, &mut rng, &mut obs);
        write_csv(
            &out.join(format!("trajectory_{replica}.csv")),
            hash,
            "step,level,S",
            rows,
        )?;
    }
    Ok(())
}

fn cmd_einstein(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<u8> {
    let law = cfg.validate()?;
    let grid = cfg
        .model
        .beta_grid
        .clone()
        .ok_or_else(|| anyhow::anyhow!("einstein requires model.beta_grid"))?;
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let base = cfg.run_spec(law, 0.0);
    let report = estimators::einstein_report(&base, &grid, cfg.run.min_blocks)?;

    let sigma2 = report.sigma2_hat.value;
    write_csv(
        &out.join("einstein.csv"),
        &hash,
        "beta,v_hat,stderr,beta_sigma2_half",
        report
            .beta_grid
            .iter()
            .map(|(beta, est)| {
                format!("{beta},{},{},{}", est.value, est.stderr, beta * sigma2 / 2.0)
            }),
    )?;
    #[derive(Serialize)]
    struct EinsteinFile<'a> {
        config_hash: &'a str,
        report: &'a metrotree::ERReport,
    }
    write_json(
        &out.join("einstein.json"),
        &EinsteinFile {
            config_hash: &hash,
            report: &report,
        },
    )?;
    println!(
        "sigma2 = {} +- {}; slope = {} +- {}; ratio 2*slope/sigma2 = {}",
        report.sigma2_hat.value,
        report.sigma2_hat.stderr,
        report.slope_hat.value,
        report.slope_hat.stderr,
        report.ratio
    );
    for (beta, why) in &report.failures {
        println!("grid point beta={beta} failed: {why}");
    }
    let pass = (report.ratio - 1.0).abs() <= 0.15 && report.failures.is_empty();
    println!("einstein ratio check: {}", if pass { "pass" } else { "fail" });
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct DiagnosticsReport {
    config_hash: String,
    kernel_identity_depth: u32,
    recursion_vs_dense_max_diff: f64,
    hitting_mc_zscore: f64,
    reversibility: Option<Vec<diagnostics::FunctionalCheck>>,
    brw_speed_prediction: f64,
    brw_speed_empirical: estimators::Estimate,
}

fn cmd_diagnostics(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<u8> {
    let law = cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let d = cfg.model.d;
    let beta = cfg.beta();
    let spec = cfg.run_spec(law.clone(), beta);
    let params = spec.params();
    let env = spec.environment(0);

    // conductance product formula vs the kernel (asserted at build time)
    let depth = 6u32.min(20 / (d - 1).max(1)).max(3);
    let view = diagnostics::conductances(&env, &params, depth)?;

    // hitting probability: recursion vs dense harmonic solve
    let mut max_diff = 0.0f64;
    let small = diagnostics::conductances(&env, &params, 3)?;
    for v in 0..small.nodes.len() {
        if small.nodes[v].parent == usize::MAX || small.nodes[v].level >= 3 {
            continue;
        }
        let a = diagnostics::hitting_probability(&small, v, 3)?;
        let b = diagnostics::hitting_probability_dense(&small, &env, &params, v, 3)?;
        max_diff = max_diff.max((a - b).abs());
    }

    // Monte Carlo vs exact hitting probability
    let v = diagnostics::node_index(&view, &[0]).unwrap();
    let exact = diagnostics::hitting_probability(&view, v, depth)?;
    let mc = diagnostics::hitting_probability_mc(
        &env,
        &params,
        &[0],
        depth,
        100_000,
        cfg.run.seed ^ 0x6d63,
    );
    let zscore = (mc.value - exact) / mc.stderr.max(1e-12);

    // reversibility functional identity (defined at beta = 0 only)
    let reversibility = if beta == 0.0 {
        Some(diagnostics::reversibility_test(
            &law,
            d,
            0.0,
            cfg.model.h,
            200_000,
            cfg.run.seed ^ 0x7265,
        )?)
    } else {
        None
    };

    // escape-probability curve
    let d_grid: Vec<u32> = (1..=8).collect();
    let escape = diagnostics::escape_probability(
        &law,
        d,
        beta,
        cfg.model.h,
        &d_grid,
        5_000,
        cfg.run.seed ^ 0x6573,
    );
    write_csv(
        &out.join("escape.csv"),
        &hash,
        "D,estimate,stderr",
        escape
            .iter()
            .map(|(dd, est)| format!("{dd},{},{}", est.value, est.stderr)),
    )?;

    // branching random walk speed: prediction vs small-level empirical
    let prediction = brw_speed(&law, d, SpeedDirection::Max)?;
    let seeds: Vec<u64> = (0..50).map(|i| cfg.run.seed.wrapping_add(1000 + i)).collect();
    let empirical = diagnostics::empirical_brw_speed(&law, d, 10, true, &seeds)?;

    let report = DiagnosticsReport {
        config_hash: hash,
        kernel_identity_depth: depth,
        recursion_vs_dense_max_diff: max_diff,
        hitting_mc_zscore: zscore,
        reversibility,
        brw_speed_prediction: prediction,
        brw_speed_empirical: empirical,
    };
    write_json(&out.join("diagnostics.json"), &report)?;

    let mut pass = max_diff < 1e-10 && zscore.abs() < 4.0;
    if let Some(checks) = &report.reversibility {
        for c in checks {
            if c.diff_mean.abs() > 4.0 * c.diff_stderr.max(1e-12) {
                pass = false;
                println!("reversibility functional {} out of band", c.name);
            }
        }
    }
    println!(
        "kernel identity verified to depth {depth}; recursion vs dense max diff = {max_diff}; hitting MC z = {zscore}"
    );
    println!("diagnostics: {}", if pass { "pass" } else { "fail" });
    Ok(if pass { 0 } else { 1 })
}
