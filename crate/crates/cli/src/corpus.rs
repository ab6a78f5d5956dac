//! Writes the bundled contract corpus to disk as hex bytecode and ABI files,
//! plus a manifest consumable by `svmfuzz --manifest`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use svmfuzz_core::evm::asm;
use svmfuzz_core::fixtures;

#[derive(Parser, Debug)]
#[command(name = "svmfuzz-corpus", version, about)]
struct Cli {
    /// Directory to write the corpus into.
    #[arg(long, default_value = "fixtures")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("svmfuzz-corpus: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))?;
    let mut manifest = String::new();
    for fixture in fixtures::all() {
        let hex_path = cli.out.join(format!("{}.hex", fixture.name));
        let abi_path = cli.out.join(format!("{}.abi.json", fixture.name));
        std::fs::write(&hex_path, format!("{}\n", asm::to_hex(&fixture.init_code)))?;
        std::fs::write(&abi_path, fixture.abi_json.trim_start())?;
        manifest.push_str(&format!(
            "{} {}\n",
            hex_path.display(),
            abi_path.display()
        ));
    }
    std::fs::write(cli.out.join("manifest.txt"), manifest)?;
    println!(
        "wrote {} contracts to {}",
        fixtures::all().len(),
        cli.out.display()
    );
    Ok(())
}
