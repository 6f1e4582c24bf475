use clap::Parser;

fn main() {
    let cli = gapflow::cli::Cli::parse();
    std::process::exit(gapflow::cli::main_with(&cli));
}
