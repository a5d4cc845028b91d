fn main() {
    let code = dbcore::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
