use clap::Parser;

fn main() {
    let args = plap_cli::Args::parse();
    std::process::exit(plap_cli::main_with(&args));
}
