use clap::Parser;

fn main() {
    let cli = cwb::Cli::parse();
    match cwb::run(&cli) {
        Ok(summary) => {
            if !summary.is_empty() {
                eprintln!("{summary}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
