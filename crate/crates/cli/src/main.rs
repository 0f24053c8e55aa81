use std::io;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed = std::env::var(aoi_lab::config::SEED_ENV).ok();
    let code = aoi_lab::run(args, seed.as_deref(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
