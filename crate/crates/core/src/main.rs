fn main() {
    std::process::exit(pos_lab::cli_io::cli_main(std::env::args_os()));
}
