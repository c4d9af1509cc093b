use super::*;
use crate::lyrics::PAD;

fn grid(tokens: Vec<usize>) -> PhonemeGrid {
    PhonemeGrid {
        tokens,
        frame_rate: 21.5,
        spans: vec![],
    }
}

fn random_latent(rng: &mut SeededRng, l: usize, c: usize) -> LatentSequence {
    LatentSequence::new(l, c, rng.normal_vec(l * c)).unwrap()
}

fn tiny_setup(seed: u64) -> (VelocityNet<f64>, LatentSequence, ConditionBundle) {
    let net = VelocityNet::<f64>::new(NetConfig::tiny(2, 5), seed).unwrap();
    let mut rng = SeededRng::new(seed + 1);
    let z = random_latent(&mut rng, 4, 2);
    let style = random_latent(&mut rng, 3, 2);
    let cond = ConditionBundle::new(grid(vec![1, 0, 3, 4]), style, 0.37);
    (net, z, cond)
}

#[test]
fn timestep_embedding_shape_and_values() {
    let e = embed_timestep(0.0, 8).unwrap();
    assert_eq!(&e[..4], &[0.0; 4]);
    assert_eq!(&e[4..], &[1.0; 4]);
    assert_eq!(
        embed_timestep(0.3, 64).unwrap(),
        embed_timestep(0.3, 64).unwrap()
    );
    let a = embed_timestep(0.3, 64).unwrap();
    let b = embed_timestep(0.7, 64).unwrap();
    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    assert!(d.sqrt() > 0.1);
    // lowest frequency is 1 rad per unit time, highest 1e4
    let e = embed_timestep(0.5, 8).unwrap();
    assert!((e[0] - 0.5f64.sin()).abs() < 1e-15);
    assert!((e[3] - 5000f64.sin()).abs() < 1e-9);
    assert!(embed_timestep(1.5, 8).is_err());
}

#[test]
fn style_encoder_matches_scalar_gru() {
    let (net, _, _) = tiny_setup(3);
    let mut rng = SeededRng::new(9);
    let seg = random_latent(&mut rng, 3, 2);
    let mut h = vec![0.0; 4];
    for j in 0..3 {
        h = reference_gru_step(&net.params, seg.frame(j), &h).unwrap();
    }
    let got = net.encode_style(&seg).unwrap();
    for (a, b) in got.iter().zip(&h) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let one = seg.window(0, 1).unwrap();
    let want = reference_gru_step(&net.params, one.frame(0), &[0.0; 4]).unwrap();
    let got = net.encode_style(&one).unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_style_weights_give_zero_state() {
    let (mut net, _, _) = tiny_setup(4);
    for (name, t) in net.params.iter_mut() {
        if name.starts_with("style.") {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let seg = LatentSequence::filled(5, 2, 3.0);
    assert_eq!(net.encode_style(&seg).unwrap(), vec![0.0; 4]);
}

#[test]
fn style_encoder_is_order_sensitive() {
    let (net, _, _) = tiny_setup(5);
    let fwd = LatentSequence::new(2, 2, vec![1.0, -0.5, -2.0, 0.7]).unwrap();
    let rev = LatentSequence::new(2, 2, vec![-2.0, 0.7, 1.0, -0.5]).unwrap();
    assert_ne!(
        net.encode_style(&fwd).unwrap(),
        net.encode_style(&rev).unwrap()
    );
    assert!(net.encode_style(&LatentSequence::zeros(0, 2)).is_err());
}

#[test]
fn global_condition_is_style_plus_time() {
    let (mut net, _, cond) = tiny_setup(6);
    let temb = embed_timestep(cond.t, 8).unwrap();
    let h = net.encode_style(&cond.style_segment).unwrap();
    let (w, b) = (
        net.params.get("style.proj").unwrap(),
        net.params.get("style.proj_b").unwrap(),
    );
    let g = net.global_condition(&cond).unwrap();
    for j in 0..8 {
        let s: f64 = (0..4).map(|i| h[i] * w.at2(i, j)).sum::<f64>() + b.data()[j];
        assert!((g[j] - (s + temb[j])).abs() < 1e-12);
    }
    for name in ["style.proj", "style.proj_b"] {
        net.params
            .get_mut(name)
            .unwrap()
            .data_mut()
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }
    assert_eq!(net.global_condition(&cond).unwrap(), temb);
}

#[test]
fn dropped_style_uses_null_vector() {
    let (net, _, cond) = tiny_setup(7);
    let mut dropped = cond.clone();
    dropped.drop_style = true;
    dropped.style_segment = LatentSequence::zeros(0, 2);
    let g = net.global_condition(&dropped).unwrap();
    let null = net.params.get("null_style").unwrap().data();
    let temb = embed_timestep(cond.t, 8).unwrap();
    for j in 0..8 {
        assert!((g[j] - (null[j] + temb[j])).abs() < 1e-15);
    }
}

#[test]
fn assembled_input_layout() {
    let (net, z, cond) = tiny_setup(8);
    let x = net.assemble_input(&z, &cond).unwrap();
    assert_eq!(x.shape(), &[4, 2 + 3 + 8]);
    let emb = net.params.get("phoneme_embed").unwrap();
    for j in 0..4 {
        assert_eq!(x.at2(j, 0), z.frame(j)[0]);
        for e in 0..3 {
            assert_eq!(x.at2(j, 2 + e), emb.at2(cond.phoneme_grid.tokens[j], e));
        }
        for k in 0..8 {
            assert_eq!(x.at2(j, 5 + k), x.at2(0, 5 + k));
        }
    }

    let mut pads = cond.clone();
    pads.phoneme_grid = grid(vec![PAD; 4]);
    let x = net.assemble_input(&z, &pads).unwrap();
    for j in 0..4 {
        for e in 0..3 {
            assert_eq!(x.at2(j, 2 + e), emb.at2(PAD, e));
        }
    }

    let mut dropped = cond.clone();
    dropped.drop_lyrics = true;
    let x = net.assemble_input(&z, &dropped).unwrap();
    let null = net.params.get("null_lyrics").unwrap().data();
    for j in 0..4 {
        for e in 0..3 {
            assert_eq!(x.at2(j, 2 + e), null[e]);
        }
    }

    let mut short = cond;
    short.phoneme_grid = grid(vec![1, 2]);
    assert!(matches!(
        net.assemble_input(&z, &short),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn output_shape_matches_input_for_several_lengths() {
    let net = VelocityNet::<f64>::new(NetConfig::default(), 1).unwrap();
    let mut rng = SeededRng::new(2);
    for l in [1, 7, 64] {
        let z = random_latent(&mut rng, l, 16);
        let cond = ConditionBundle::new(grid(vec![3; l]), random_latent(&mut rng, 5, 16), 0.5);
        let v = net.velocity(&z, &cond).unwrap();
        assert_eq!(v.shape(), [l, 16]);
        assert!(v.is_finite());
    }
    let z = random_latent(&mut rng, 257, 16);
    let cond = ConditionBundle::new(grid(vec![3; 257]), random_latent(&mut rng, 5, 16), 0.5);
    assert!(net.velocity(&z, &cond).is_err());
}

#[test]
fn zero_output_projection_gives_zero_velocity() {
    let (mut net, z, cond) = tiny_setup(9);
    for name in ["out.w", "out.b"] {
        net.params
            .get_mut(name)
            .unwrap()
            .data_mut()
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }
    let v = net.velocity(&z, &cond).unwrap();
    assert!(v.data().iter().all(|&x| x == 0.0));
}

#[test]
fn tiny_network_gradients_match_finite_differences() {
    let (net, z, cond) = tiny_setup(10);
    let mut rng = SeededRng::new(11);
    let target = random_latent(&mut rng, 4, 2);
    let report = net.grad_check_fm_loss(&z, &cond, &target, 1e-5).unwrap();
    assert!(report.passes(1e-4), "{report:?}");
    let dropped = cond.unconditional();
    let report = net.grad_check_fm_loss(&z, &dropped, &target, 1e-5).unwrap();
    assert!(report.passes(1e-4), "{report:?}");
}

#[test]
fn grid_permutation_changes_output() {
    let (net, z, cond) = tiny_setup(12);
    let mut perm = cond.clone();
    perm.phoneme_grid = grid(vec![4, 3, 0, 1]);
    assert_ne!(
        net.velocity(&z, &cond).unwrap(),
        net.velocity(&z, &perm).unwrap()
    );
}

#[test]
fn fully_dropped_conditions_ignore_content() {
    let (net, z, cond) = tiny_setup(13);
    let mut rng = SeededRng::new(14);
    let other = ConditionBundle::new(
        grid(vec![2, 2, 2, 2]),
        random_latent(&mut rng, 6, 2),
        cond.t,
    );
    let a = net.velocity(&z, &cond.unconditional()).unwrap();
    let b = net.velocity(&z, &other.unconditional()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, net.velocity(&z, &cond).unwrap());
}

#[test]
fn forward_is_deterministic_and_precision_consistent() {
    let (net, z, cond) = tiny_setup(15);
    let a = net.velocity(&z, &cond).unwrap();
    assert_eq!(a, net.velocity(&z, &cond).unwrap());
    let b = net.cast::<f32>().velocity(&z, &cond).unwrap();
    assert!(a.mean_abs_diff(&b).unwrap() < 1e-5);
}

#[test]
fn config_and_layout_validation() {
    let bad = NetConfig {
        n_heads: 3,
        ..NetConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let zero = NetConfig {
        n_layers: 0,
        ..NetConfig::default()
    };
    assert!(zero.validate().is_err());
    let net = VelocityNet::<f32>::new(NetConfig::tiny(2, 5), 0).unwrap();
    assert!(VelocityNet::from_params(NetConfig::tiny(3, 5), net.params.clone()).is_err());
    assert!(VelocityNet::from_params(NetConfig::tiny(2, 5), net.params).is_ok());
}

#[test]
fn seeded_init_is_reproducible() {
    let a = VelocityNet::<f32>::new(NetConfig::default(), 42).unwrap();
    let b = VelocityNet::<f32>::new(NetConfig::default(), 42).unwrap();
    let c = VelocityNet::<f32>::new(NetConfig::default(), 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
