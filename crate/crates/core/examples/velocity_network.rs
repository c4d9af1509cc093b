//! The conditional velocity network: parameter inventory, a forward pass on
//! a synthetic song window, and a gradient check of the loss at tiny size.

use rhythmlab::flow::{interpolate, sample_noise, target_velocity};
use rhythmlab::lyrics::PhonemeVocab;
use rhythmlab::model::{ConditionBundle, NetConfig, VelocityNet};
use rhythmlab::random::SeededRng;
use rhythmlab::synth::{Corpus, CorpusConfig, SynthSpec};
use rhythmlab::Result;

fn main() -> Result<()> {
    let config = NetConfig::default();
    let net = VelocityNet::<f32>::new(config.clone(), 0)?;
    println!(
        "{} tensors, {} parameters",
        net.params.len(),
        net.params.num_scalars()
    );
    for (name, t) in net.params.iter().take(6) {
        println!("  {name:20} {:?}", t.shape());
    }

    let corpus = Corpus::generate(
        SynthSpec::default(),
        PhonemeVocab::default(),
        CorpusConfig {
            n_songs: 1,
            ..CorpusConfig::default()
        },
    )?;
    let song = &corpus.songs[0];
    let z1 = song.latent.window(0, 128)?;
    let grid = song.grid.window(0, 128);
    let prompt = song.latent.window(200, 22)?;
    let mut rng = SeededRng::new(9);
    let z0 = sample_noise(&mut rng, 128, config.latent_channels);

    let started = std::time::Instant::now();
    for t in [0.1, 0.5, 0.9] {
        let cond = ConditionBundle::new(grid.clone(), prompt.clone(), t);
        let v = net.velocity(&interpolate(&z0, &z1, t)?, &cond)?;
        let target = target_velocity(&z0, &z1)?;
        println!(
            "t = {t}: mean |v - target| = {:.4}",
            v.mean_abs_diff(&target)?
        );
    }
    println!(
        "3 forward passes on 128 frames: {:.1} ms",
        started.elapsed().as_secs_f64() * 1e3
    );

    let style = net.encode_style(&prompt)?;
    println!("style vector[..4] = {:?}", &style[..4]);

    let tiny = VelocityNet::<f64>::new(NetConfig::tiny(2, 40), 1)?;
    let z_t = sample_noise(&mut rng, 4, 2);
    let target = sample_noise(&mut rng, 4, 2);
    let mut g = grid.window(40, 4);
    g.spans.clear();
    let cond = ConditionBundle::new(g, sample_noise(&mut rng, 3, 2), 0.3);
    let report = tiny.grad_check_fm_loss(&z_t, &cond, &target, 1e-5)?;
    println!(
        "tiny gradcheck: max rel err {:.2e} over {} coordinates",
        report.max_relative_error, report.coordinates
    );
    Ok(())
}
