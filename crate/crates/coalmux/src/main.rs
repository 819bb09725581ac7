fn main() {
    // COALMUX_THREADS caps the worker pool; results are identical for any
    // thread count.
    if let Ok(threads) = std::env::var("COALMUX_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    std::process::exit(coalmux::cli::run());
}
