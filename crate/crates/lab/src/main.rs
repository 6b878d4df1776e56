use clap::Parser;

fn main() {
    let cli = tcp_lab::cli::Cli::parse();
    std::process::exit(tcp_lab::cli::run(cli));
}
