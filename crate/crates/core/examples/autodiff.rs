//! Reverse-mode gradients of a two-layer MLP on the tape, checked against
//! central finite differences.

use rhythmlab::random::SeededRng;
use rhythmlab::tensor::{grad_check, Tape, Tensor, Var};
use rhythmlab::Result;

fn mlp(tape: &mut Tape<f64>, p: &[Var]) -> Result<Var> {
    let (x, w1, b1, w2, b2, y) = (p[0], p[1], p[2], p[3], p[4], p[5]);
    let h = tape.affine(x, w1, b1)?;
    let h = tape.gelu(h)?;
    let out = tape.affine(h, w2, b2)?;
    let out = tape.softmax(out, 1)?;
    tape.squared_error(out, y)
}

fn main() -> Result<()> {
    let mut rng = SeededRng::new(11);
    let mut rand = |shape: &[usize]| {
        let n = shape.iter().product();
        Tensor::from_f64(shape.to_vec(), &rng.normal_vec(n))
    };
    let params = vec![
        rand(&[5, 3])?,
        rand(&[3, 8])?,
        rand(&[8])?,
        rand(&[8, 4])?,
        rand(&[4])?,
        rand(&[5, 4])?,
    ];

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = mlp(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    println!("loss            {:.6}", tape.value(loss).item()?);
    println!("tape nodes      {}", tape.len());
    let g = grads.wrt(&tape, vars[1]);
    println!("dL/dW1[0, ..3]  {:?}", &g.data()[..3]);

    let report = grad_check(mlp, &params, 1e-5)?;
    println!(
        "gradcheck       max rel err {:.2e} over {} coordinates",
        report.max_relative_error, report.coordinates
    );
    assert!(report.passes(1e-4));
    Ok(())
}
