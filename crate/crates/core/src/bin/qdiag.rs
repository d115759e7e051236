use clap::Parser;

fn main() {
    let args = qdiag::cli::Args::parse();
    std::process::exit(qdiag::cli::main_with_args(args));
}
