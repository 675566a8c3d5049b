use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softpg_core::diffcore::{Node, Tape, Tensor};
use softpg_core::nn::{encode, gru_step, Activation, Encoder, GruCell, LinearLayer};
use softpg_core::Result;

type Build = dyn Fn(&mut Tape<f64>, &[Node]) -> Result<Node>;

/// Tape gradients of a scalar function of several tensors next to central
/// differences, entry by entry.
fn compare(inputs: &[Tensor<f64>], build: &Build, tol: f64) {
    let mut tape = Tape::new();
    let leaves: Vec<Node> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &leaves).unwrap();
    tape.backward(out).unwrap();
    let eval = |xs: &[Tensor<f64>]| {
        let mut t = Tape::new();
        let ls: Vec<Node> = xs.iter().map(|x| t.leaf(x.clone())).collect();
        let o = build(&mut t, &ls).unwrap();
        t.value(o).item().unwrap()
    };
    let h = 1e-6;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = tape.grad(leaves[i]).data();
        for (j, &g) in analytic.iter().enumerate().take(input.len()) {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let err = (g - numeric).abs() / numeric.abs().max(1.0);
            assert!(
                err < tol,
                "input {i} entry {j}: tape {g} vs fd {numeric}"
            );
        }
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// Contracts a vector output with fixed weights so every entry matters.
fn weighted_sum(tape: &mut Tape<f64>, x: Node) -> Result<Node> {
    let n = tape.value(x).len();
    let w = tape.leaf_vector((0..n).map(|i| 0.3 + 0.17 * i as f64).collect());
    let p = tape.mul(x, w)?;
    Ok(tape.sum(p))
}

#[test]
fn matmul_matrix_and_vector_rhs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = [random(&mut rng, &[3, 4]), random(&mut rng, &[4, 2])];
    compare(
        &inputs,
        &|t, x| {
            let m = t.matmul(x[0], x[1])?;
            let sq = t.mul(m, m)?;
            Ok(t.sum(sq))
        },
        1e-7,
    );
    let inputs = [random(&mut rng, &[3, 4]), random(&mut rng, &[4])];
    compare(
        &inputs,
        &|t, x| {
            let m = t.matmul(x[0], x[1])?;
            weighted_sum(t, m)
        },
        1e-7,
    );
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&mut rng, &[5]);
    let b = random(&mut rng, &[5]);
    let positive = a.map(|v| v.abs() + 0.2);
    compare(
        &[a.clone(), b.clone()],
        &|t, x| {
            let s = t.add(x[0], x[1])?;
            let d = t.sub(s, x[1])?;
            let m = t.mul(d, x[1])?;
            let n = t.neg(m);
            let th = t.tanh(n);
            let sg = t.sigmoid(x[0]);
            let e = t.exp(sg);
            let r = t.relu(x[1]);
            let all = t.add_n(&[th, e, r])?;
            weighted_sum(t, all)
        },
        1e-7,
    );
    compare(
        &[positive],
        &|t, x| {
            let l = t.log(x[0])?;
            weighted_sum(t, l)
        },
        1e-7,
    );
}

#[test]
fn scale_and_scale_by() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = [random(&mut rng, &[1]), random(&mut rng, &[2, 3])];
    compare(
        &inputs,
        &|t, x| {
            let s = t.scale_by(x[0], x[1])?;
            let s = t.scale(s, -2.5);
            let sq = t.mul(s, s)?;
            Ok(t.sum(sq))
        },
        1e-7,
    );
}

#[test]
fn softmax_and_log_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[6]);
    compare(
        std::slice::from_ref(&x),
        &|t, x| {
            let p = t.softmax(x[0])?;
            weighted_sum(t, p)
        },
        1e-7,
    );
    compare(
        &[x],
        &|t, x| {
            let p = t.log_softmax(x[0])?;
            let a = t.pick(p, 2)?;
            let b = weighted_sum(t, p)?;
            t.add(a, b)
        },
        1e-7,
    );
}

#[test]
fn linear_layer_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layer = LinearLayer::<f64>::init(4, 3, &mut rng);
    let bias = random(&mut rng, &[3]);
    let x = random(&mut rng, &[4]);
    compare(
        &[layer.weight.clone(), bias, x],
        &|t, n| {
            let bound = softpg_core::nn::BoundLinear {
                weight: n[0],
                bias: n[1],
            };
            let y = bound.forward(t, n[2])?;
            let y = t.tanh(y);
            weighted_sum(t, y)
        },
        1e-7,
    );
}

#[test]
fn gru_step_gradients_through_every_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cell = GruCell::<f64>::init(3, 4, &mut rng);
    for b in [
        &mut cell.b_ir,
        &mut cell.b_iz,
        &mut cell.b_in,
        &mut cell.b_hr,
        &mut cell.b_hz,
        &mut cell.b_hn,
    ] {
        *b = random(&mut rng, &[4]);
    }
    let x = random(&mut rng, &[3]);
    let h = random(&mut rng, &[4]).map(f64::tanh);
    let blocks = vec![
        cell.w_ir.clone(),
        cell.w_iz.clone(),
        cell.w_in.clone(),
        cell.w_hr.clone(),
        cell.w_hz.clone(),
        cell.w_hn.clone(),
        cell.b_ir.clone(),
        cell.b_iz.clone(),
        cell.b_in.clone(),
        cell.b_hr.clone(),
        cell.b_hz.clone(),
        cell.b_hn.clone(),
        x,
        h,
    ];
    compare(
        &blocks,
        &|t, n| {
            let bound = softpg_core::nn::BoundGru {
                w_ir: n[0],
                w_iz: n[1],
                w_in: n[2],
                w_hr: n[3],
                w_hz: n[4],
                w_hn: n[5],
                b_ir: n[6],
                b_iz: n[7],
                b_in: n[8],
                b_hr: n[9],
                b_hz: n[10],
                b_hn: n[11],
            };
            // two steps so the hidden-path gradient is exercised twice
            let h1 = gru_step(t, &bound, n[12], n[13])?;
            let h2 = gru_step(t, &bound, n[12], h1)?;
            weighted_sum(t, h2)
        },
        1e-7,
    );
}

#[test]
fn encoder_first_layer_weight_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for act in [Activation::Tanh, Activation::Relu] {
        let enc = Encoder::<f64>::init(5, &[4, 3], act, &mut rng).unwrap();
        let obs: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.55).collect();
        let mut tape = Tape::new();
        let bound = enc.bind(&mut tape);
        let out = encode(&mut tape, &bound, &obs).unwrap();
        let loss = weighted_sum(&mut tape, out).unwrap();
        tape.backward(loss).unwrap();
        let mut nodes = Vec::new();
        bound.nodes(&mut nodes);
        let analytic = tape.grad(nodes[0]).data().to_vec();
        let h = 1e-6;
        for (j, &g) in analytic.iter().enumerate() {
            let value = |delta: f64| {
                let mut e = enc.clone();
                e.layers[0].0.weight.data_mut()[j] += delta;
                let mut t = Tape::new();
                let b = e.bind(&mut t);
                let o = encode(&mut t, &b, &obs).unwrap();
                let l = weighted_sum(&mut t, o).unwrap();
                t.value(l).item().unwrap()
            };
            let numeric = (value(h) - value(-h)) / (2.0 * h);
            assert!((g - numeric).abs() < 1e-7, "{act:?} weight {j}");
        }
    }
}

#[test]
fn backward_accumulates_across_paths_and_calls() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf_vector(vec![2.0, -1.0]);
    let a = tape.mul(x, x).unwrap();
    let b = tape.scale(x, 3.0);
    let s = tape.add(a, b).unwrap();
    let y = tape.sum(s);
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).data(), &[7.0, 1.0]);
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).data(), &[14.0, 2.0]);
    tape.zero_grad();
    tape.backward(y).unwrap();
    assert_eq!(tape.grad(x).data(), &[7.0, 1.0]);
}

#[test]
fn mismatched_shapes_are_rejected() {
    let mut tape = Tape::<f64>::new();
    let a = tape.leaf_vector(vec![1.0, 2.0]);
    let b = tape.leaf_vector(vec![1.0, 2.0, 3.0]);
    assert!(tape.add(a, b).is_err());
    let m = tape.leaf(Tensor::zeros(&[2, 2]));
    assert!(tape.matmul(m, b).is_err());
    assert!(tape.backward(a).is_err());
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-40.0f64..40.0, 1..20)) {
        let mut tape = Tape::new();
        let x = tape.leaf_vector(xs.clone());
        let p = tape.softmax(x).unwrap();
        let lp = tape.log_softmax(x).unwrap();
        let probs = tape.value(p).data();
        let total: f64 = probs.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (&q, &l) in probs.iter().zip(tape.value(lp).data()) {
            prop_assert!(l <= 0.0 && l.is_finite());
            prop_assert!((q - l.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_hidden_state_stays_in_unit_box(
        seed in 0u64..1000,
        x in prop::collection::vec(-50.0f64..50.0, 3),
        h in prop::collection::vec(-1.0f64..=1.0, 4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = GruCell::<f64>::init(3, 4, &mut rng);
        let mut tape = Tape::new();
        let bound = cell.bind(&mut tape);
        let xn = tape.leaf_vector(x);
        let mut hn = tape.leaf_vector(h);
        for _ in 0..5 {
            hn = gru_step(&mut tape, &bound, xn, hn).unwrap();
            prop_assert!(tape.value(hn).data().iter().all(|v| v.abs() <= 1.0));
        }
    }
}
