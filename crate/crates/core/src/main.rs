fn main() {
    std::process::exit(layout_workbench::app::cli::run(std::env::args_os()));
}
