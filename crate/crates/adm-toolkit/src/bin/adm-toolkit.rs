fn main() {
    std::process::exit(adm_toolkit::data::cli::run());
}
