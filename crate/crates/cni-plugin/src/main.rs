use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::ExitCode;

fn main() -> ExitCode {
    let env: HashMap<String, String> = std::env::vars().collect();
    let mut stdin = Vec::new();
    let outcome = match std::io::stdin().read_to_end(&mut stdin) {
        Ok(_) => slingkube_cni::run(&env, stdin),
        Err(e) => slingkube_cni::Outcome::read_failure(e),
    };
    let mut out = std::io::stdout().lock();
    if !outcome.stdout.is_empty() {
        let _ = writeln!(out, "{}", outcome.stdout);
    }
    match outcome.success {
        true => ExitCode::SUCCESS,
        false => ExitCode::FAILURE,
    }
}
