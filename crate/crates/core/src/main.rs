fn main() {
    std::process::exit(bgcam::cli::run(std::env::args_os()));
}
