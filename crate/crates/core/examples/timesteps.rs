//! Logit-normal timestep sampling: an ASCII histogram of draws against the
//! density, for a few location and scale settings.

use rhythmlab::random::SeededRng;
use rhythmlab::timestep::{logit_normal_pdf, sample_timestep, LogitNormalParams};
use rhythmlab::Result;

const BINS: usize = 20;
const DRAWS: usize = 200_000;

fn main() -> Result<()> {
    for (m, s) in [(0.0, 1.0), (0.5, 1.0), (0.0, 0.5)] {
        let params = LogitNormalParams::new(m, s)?;
        let mut rng = SeededRng::new(5);
        let mut counts = [0usize; BINS];
        for _ in 0..DRAWS {
            let t = sample_timestep(&mut rng, params);
            counts[((t * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
        println!("m = {m}, s = {s}");
        for (i, &c) in counts.iter().enumerate() {
            let mid = (i as f64 + 0.5) / BINS as f64;
            let empirical = c as f64 / DRAWS as f64 * BINS as f64;
            let pdf = logit_normal_pdf(mid, params)?;
            let bar = "#".repeat((empirical * 20.0).round() as usize);
            println!("  {mid:.3}  emp {empirical:5.3}  pdf {pdf:5.3}  {bar}");
        }
    }
    Ok(())
}
