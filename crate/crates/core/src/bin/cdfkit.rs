fn main() {
    let mut stdin = std::io::BufReader::new(std::io::stdin());
    let code = cdfkit::cli::run(std::env::args_os(), &mut stdin, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
