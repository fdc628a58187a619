use std::io;
use std::panic;

fn main() {
    // an internal panic still maps onto the input-error exit code
    let code = panic::catch_unwind(|| {
        maxent::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr())
    })
    .unwrap_or(maxent::cli::EXIT_INPUT);
    std::process::exit(code);
}
