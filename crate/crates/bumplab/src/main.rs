fn main() {
    std::process::exit(bumplab::run_command(std::env::args_os()));
}
