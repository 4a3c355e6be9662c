use clap::Parser;

fn main() {
    let args = thinfilm::cli::Args::parse();
    std::process::exit(thinfilm::cli::run(&args));
}
