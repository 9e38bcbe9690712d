fn main() {
    std::process::exit(learned_lsm_bench::cli::cli_main(std::env::args_os()));
}
