//! Run every randomized identity check with reduced trial counts.

use conspo_lab::propcheck::{run_all, TrialCounts};
use conspo_lab::Result;

fn main() -> Result<()> {
    let reports = run_all(TrialCounts::uniform(50), 42, None)?;
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} checks, {failed} failed", reports.len());
    Ok(())
}
