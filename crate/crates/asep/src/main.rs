use std::io::Write;

fn main() {
    let outcome = asep::cli::run_from(std::env::args_os());
    if let Some(m) = &outcome.message {
        eprintln!("{m}");
    }
    let to_stdout = !outcome.output.is_empty() && !std::env::args().any(|a| a == "--out" || a.starts_with("--out="));
    if to_stdout {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(outcome.output.as_bytes());
        let _ = out.flush();
    }
    std::process::exit(outcome.code);
}
