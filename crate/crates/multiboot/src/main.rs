use std::env;

fn main() {
    if let Ok(threads) = env::var("MULTIBOOT_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MULTIBOOT_THREADS must be a positive integer, got `{threads}`");
                std::process::exit(multiboot::cli::EXIT_INPUT);
            }
        }
    }
    std::process::exit(multiboot::cli::run(env::args_os()));
}
