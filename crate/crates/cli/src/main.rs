use clap::Parser;
use fraclan_cli::commands::{run, Cli};

fn main() {
    match run(Cli::parse()) {
        Ok(out) => {
            for note in &out.notes {
                println!("{note}");
            }
            println!("wrote {} files to {}", out.files.len(), out.dir.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
