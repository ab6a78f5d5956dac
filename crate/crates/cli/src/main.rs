//! Campaign runner CLI.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use svmfuzz_core::evm::asm::parse_hex_bytecode;
use svmfuzz_core::runner::{
    run_contract, write_cfg_dump, write_outputs, write_trace_dumps, AttackerMode, RunnerOptions,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Attacker {
    Normal,
    Reentrancy,
    Alternate,
}

impl From<Attacker> for AttackerMode {
    fn from(a: Attacker) -> Self {
        match a {
            Attacker::Normal => AttackerMode::Normal,
            Attacker::Reentrancy => AttackerMode::Reentrancy,
            Attacker::Alternate => AttackerMode::Alternate,
        }
    }
}

/// Adaptive coverage-guided fuzzer for EVM bytecode.
#[derive(Parser, Debug)]
#[command(name = "svmfuzz", version, about)]
struct Cli {
    /// Contract init bytecode: hex text, optional 0x prefix, whitespace-tolerant.
    #[arg(long, env = "SVMFUZZ_BYTECODE")]
    bytecode: Option<PathBuf>,

    /// Contract ABI JSON document.
    #[arg(long, env = "SVMFUZZ_ABI")]
    abi: Option<PathBuf>,

    /// Campaign budget in seconds.
    #[arg(long, env = "SVMFUZZ_DURATION", default_value_t = 120)]
    duration: u64,

    /// RNG seed; identical seeds with a generation bound reproduce runs exactly.
    #[arg(long, env = "SVMFUZZ_SEED", default_value_t = 0)]
    seed: u64,

    /// Distance-guided seed selection.
    #[arg(long, env = "SVMFUZZ_ADAPTIVE", value_enum, default_value_t = Toggle::On)]
    adaptive: Toggle,

    /// Which attacker account sends the transactions.
    #[arg(long, env = "SVMFUZZ_ATTACKER", value_enum, default_value_t = Attacker::Normal)]
    attacker: Attacker,

    /// Output directory.
    #[arg(long, env = "SVMFUZZ_OUT", default_value = "out")]
    out: PathBuf,

    /// Stop after this many generations (deterministic stop).
    #[arg(long, env = "SVMFUZZ_GENERATIONS")]
    generations: Option<u64>,

    /// Manifest of contracts: one `<bytecode-path> <abi-path>` pair per line.
    #[arg(long, env = "SVMFUZZ_MANIFEST")]
    manifest: Option<PathBuf>,

    /// Parallel workers for --manifest (independent processes).
    #[arg(long, env = "SVMFUZZ_JOBS", default_value_t = 1)]
    jobs: usize,

    /// Write an equivalent command script alongside the outputs.
    #[arg(long)]
    emit_script: bool,

    /// Dump the discovered CFG as DOT.
    #[arg(long)]
    dump_cfg: bool,

    /// Re-execute the suite and dump one trace file per test case.
    #[arg(long)]
    dump_trace: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("svmfuzz: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.duration == 0 {
        bail!("--duration must be positive");
    }
    if let Some(manifest) = &cli.manifest {
        return run_manifest(cli, manifest);
    }
    let (Some(bytecode), Some(abi)) = (&cli.bytecode, &cli.abi) else {
        bail!("--bytecode and --abi are required (or use --manifest)");
    };
    run_single(cli, bytecode, abi, &cli.out)
}

fn options_of(cli: &Cli) -> RunnerOptions {
    RunnerOptions {
        duration: Duration::from_secs(cli.duration),
        rng_seed: cli.seed,
        adaptive: matches!(cli.adaptive, Toggle::On),
        attacker: cli.attacker.into(),
        max_generations: cli.generations,
        ..Default::default()
    }
}

fn run_single(cli: &Cli, bytecode: &Path, abi: &Path, out: &Path) -> Result<()> {
    let hex = std::fs::read_to_string(bytecode)
        .with_context(|| format!("reading {}", bytecode.display()))?;
    let init_code = parse_hex_bytecode(&hex)?;
    let abi_doc = std::fs::read(abi).with_context(|| format!("reading {}", abi.display()))?;
    let opts = options_of(cli);

    if cli.emit_script {
        emit_script(cli, bytecode, abi, out)?;
    }

    let outcome = run_contract(&init_code, &abi_doc, &opts)?;
    std::fs::create_dir_all(out)?;
    write_outputs(&outcome, out)?;
    if cli.dump_cfg {
        write_cfg_dump(&outcome, out)?;
    }
    if cli.dump_trace {
        write_trace_dumps(&outcome, &init_code, &abi_doc, &opts, out)?;
    }

    println!(
        "executed {} test cases in {} generations; branches {}/{} covered; suite size {}",
        outcome.executions,
        outcome.stats.len(),
        outcome.registry.covered_count(),
        outcome.registry.known_count(),
        outcome.suite.len(),
    );
    if let Some(s) = outcome.stats.last() {
        println!(
            "throughput {:.0} execs/sec; adaptive attribution {:.1}%",
            s.execs_per_sec, s.adaptive_pct
        );
    }
    for report in &outcome.reports {
        println!(
            "vulnerability: {} ({:?}) test case {} call {} x{}",
            report.oracle.name(),
            report.confidence,
            report.test_case_id,
            report.call_index,
            report.occurrences
        );
    }
    Ok(())
}

fn run_manifest(cli: &Cli, manifest: &Path) -> Result<()> {
    let text = std::fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let exe = std::env::current_exe().context("locating svmfuzz executable")?;
    let mut pending: Vec<(PathBuf, PathBuf, PathBuf)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(code), Some(abi)) = (parts.next(), parts.next()) else {
            bail!("manifest line {}: expected `<bytecode> <abi>`", i + 1);
        };
        let code = PathBuf::from(code);
        let stem = code
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("contract-{i}"));
        pending.push((code, PathBuf::from(abi), cli.out.join(stem)));
    }

    // independent worker processes, at most `jobs` at a time
    let jobs = cli.jobs.max(1);
    let mut active: Vec<(std::process::Child, PathBuf)> = Vec::new();
    let mut failures = 0usize;
    let mut queue = pending.into_iter();
    loop {
        while active.len() < jobs {
            let Some((code, abi, out)) = queue.next() else {
                break;
            };
            let mut cmd = Command::new(&exe);
            cmd.arg("--bytecode")
                .arg(&code)
                .arg("--abi")
                .arg(&abi)
                .arg("--out")
                .arg(&out)
                .arg("--duration")
                .arg(cli.duration.to_string())
                .arg("--seed")
                .arg(cli.seed.to_string())
                .arg("--adaptive")
                .arg(match cli.adaptive {
                    Toggle::On => "on",
                    Toggle::Off => "off",
                })
                .arg("--attacker")
                .arg(match cli.attacker {
                    Attacker::Normal => "normal",
                    Attacker::Reentrancy => "reentrancy",
                    Attacker::Alternate => "alternate",
                });
            if let Some(g) = cli.generations {
                cmd.arg("--generations").arg(g.to_string());
            }
            // children must not re-read the parent's path settings
            cmd.env_remove("SVMFUZZ_MANIFEST")
                .env_remove("SVMFUZZ_BYTECODE")
                .env_remove("SVMFUZZ_ABI")
                .env_remove("SVMFUZZ_OUT");
            let child = cmd
                .spawn()
                .with_context(|| format!("spawning worker for {}", code.display()))?;
            active.push((child, code));
        }
        if active.is_empty() {
            break;
        }
        let (mut child, code) = active.remove(0);
        let status = child.wait()?;
        if !status.success() {
            eprintln!("worker for {} failed: {status}", code.display());
            failures += 1;
        }
    }
    if failures > 0 {
        bail!("{failures} manifest worker(s) failed");
    }
    Ok(())
}

fn emit_script(cli: &Cli, bytecode: &Path, abi: &Path, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let script = format!(
        "#!/usr/bin/env bash\n\
         # command equivalent to this in-process run\n\
         set -eu\n\
         svmfuzz \\\n  --bytecode {} \\\n  --abi {} \\\n  --duration {} \\\n  --seed {} \\\n  --adaptive {} \\\n  --attacker {} \\\n  --out {}\n",
        bytecode.display(),
        abi.display(),
        cli.duration,
        cli.seed,
        match cli.adaptive {
            Toggle::On => "on",
            Toggle::Off => "off",
        },
        match cli.attacker {
            Attacker::Normal => "normal",
            Attacker::Reentrancy => "reentrancy",
            Attacker::Alternate => "alternate",
        },
        out.display(),
    );
    std::fs::write(out.join("run.sh"), script)?;
    Ok(())
}
