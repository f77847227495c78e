use clap::Parser;

fn main() {
    let args = ismq_cli::Args::parse();
    std::process::exit(ismq_cli::run(&args));
}
