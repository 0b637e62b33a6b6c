fn main() {
    std::process::exit(tweetscale::cli::run(std::env::args_os()));
}
