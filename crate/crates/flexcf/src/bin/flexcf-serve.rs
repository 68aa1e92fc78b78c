//! Serve a saved forest (`model.json`) over the external-predictor protocol
//! on stdin/stdout.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flexcf::core::forest::TreeEnsembleModel;

#[derive(Parser)]
#[command(name = "flexcf-serve", version)]
struct Args {
    #[arg(long)]
    model: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let model: TreeEnsembleModel = match std::fs::read_to_string(&args.model)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => {
            eprintln!("flexcf-serve: {}: {e}", args.model.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = model.validate() {
        eprintln!("flexcf-serve: {e}");
        return ExitCode::from(2);
    }
    let n = model.n_features();
    match flexcf::external::serve(&model, n, io::stdin().lock(), io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flexcf-serve: {e}");
            ExitCode::from(3)
        }
    }
}
