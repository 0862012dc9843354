//! Writes the stated-form vs oracle report as markdown.
//!
//! cargo run --release --example findings_report -- [OUT.md] [TRIALS]

use track_purity::findings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next();
    let trials: u64 = args.next().map(|t| t.parse()).transpose()?.unwrap_or(100_000);
    let report = findings::to_markdown(&findings::collect(trials, 42)?);
    match out {
        Some(path) => std::fs::write(path, report)?,
        None => print!("{report}"),
    }
    Ok(())
}
