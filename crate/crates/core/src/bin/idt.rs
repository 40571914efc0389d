fn main() {
    std::process::exit(idt_core::cli::run(std::env::args_os()));
}
