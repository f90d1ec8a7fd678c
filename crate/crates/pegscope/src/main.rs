use std::process::exit;

fn main() {
    exit(pegscope::cli::run(std::env::args_os()));
}
