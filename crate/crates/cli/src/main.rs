use anyhow::Result;
use clap::Parser;
use czfault_cli::{run, Cli};

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = cli.resolve_config()?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    for path in run(cli.command, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}
