use aftnet::{verify, Error, Result};
use clap::Args;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Only run checks whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(a: VerifyArgs) -> Result<()> {
    let checks = verify::run(a.filter.as_deref(), a.seed);
    if checks.is_empty() {
        let names: Vec<&str> = verify::ALL.iter().map(|(n, _)| *n).collect();
        return Err(Error::Config(format!("no check matches; available: {}", names.join(", "))));
    }
    for c in &checks {
        println!("{}", c);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(Error::NumericDomain(format!("{} check(s) failed", failed)));
    }
    Ok(())
}
