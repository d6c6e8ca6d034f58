fn main() {
    std::process::exit(ulam_diffusion::cli::main_entry());
}
