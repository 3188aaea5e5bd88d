use clap::Parser;

fn main() {
    let cli = ndpp_cli::Cli::parse();
    std::process::exit(ndpp_cli::run(&cli));
}
