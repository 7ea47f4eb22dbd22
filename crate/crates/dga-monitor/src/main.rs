fn main() {
    // Die quietly on a closed pipe (`... | head`) like other Unix tools
    // instead of panicking on the next write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(dga_monitor::cli::run());
}
