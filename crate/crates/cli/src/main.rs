use clap::Parser;

fn main() {
    let cli = rsfw_cli::Cli::parse();
    std::process::exit(rsfw_cli::run(cli));
}
