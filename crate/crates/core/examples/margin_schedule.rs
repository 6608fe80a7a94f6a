//! Cosine warmup of the contrastive margin.

use conspo_lab::schedule::MarginSchedule;
use conspo_lab::Result;

fn main() -> Result<()> {
    let s = MarginSchedule::new(0.01, 0.3, 1000)?;
    for t in [0, 50, 100, 150, 200, 250, 300, 500, 1000] {
        println!("step {t:>4}  progress {:.3}  margin {:.6}", s.progress(t)?, s.margin_at(t)?);
    }
    Ok(())
}
