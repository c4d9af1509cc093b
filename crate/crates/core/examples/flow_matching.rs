//! Straight-line probability path between noise and data, and the flow
//! matching loss of a perfect and an untrained velocity predictor.

use rhythmlab::flow::{fm_loss, interpolate, sample_noise, target_velocity};
use rhythmlab::latent::LatentSequence;
use rhythmlab::lyrics::PhonemeGrid;
use rhythmlab::model::ConditionBundle;
use rhythmlab::random::SeededRng;
use rhythmlab::sample::{euler_integrate, FnField};
use rhythmlab::Result;

fn main() -> Result<()> {
    let mut rng = SeededRng::new(3);
    let z1 = LatentSequence::new(4, 2, vec![1.0, -1.0, 2.0, 0.5, 0.0, 0.0, -2.0, 1.5])?;
    let z0 = sample_noise(&mut rng, 4, 2);

    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let zt = interpolate(&z0, &z1, t)?;
        println!("t = {t:4.2}  z_t frame 0 = {:?}", zt.frame(0));
    }

    let v = target_velocity(&z0, &z1)?;
    println!("loss with exact velocity  {:.3e}", fm_loss(&v, &z0, &z1)?);
    println!(
        "loss with zero velocity   {:.4}",
        fm_loss(&LatentSequence::zeros(4, 2), &z0, &z1)?
    );

    // The constant target velocity transports z0 onto z1 in a single Euler step.
    let field = FnField(|_: &LatentSequence, _: &ConditionBundle| Ok(v.clone()));
    let cond = ConditionBundle::new(
        PhonemeGrid::empty(4, 21.5),
        LatentSequence::zeros(1, 2),
        0.0,
    );
    for n in [1, 8] {
        let z = euler_integrate(&field, &z0, &cond, n, 1.0)?;
        println!(
            "euler {n} step(s): mean |z - z1| = {:.2e}",
            z.mean_abs_diff(&z1)?
        );
    }
    Ok(())
}
