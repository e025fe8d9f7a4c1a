use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{central_difference, relative_error};
use super::*;

fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Checks d/dx of `Σ w ⊙ op(x…)` for random `w` against central differences.
fn check(inputs: Vec<Mat<f64>>, op: impl Fn(&mut Graph<f64>, &[Var]) -> Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let build = |g: &mut Graph<f64>, mats: &[Mat<f64>], w: &Mat<f64>| -> (Vec<Var>, Var) {
        let vars: Vec<Var> = mats.iter().map(|m| g.constant(m.clone())).collect();
        let out = op(g, &vars);
        let wv = g.constant(w.clone());
        let prod = g.mul(out, wv);
        (vars, g.sum(prod))
    };
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|m| g.constant(m.clone())).collect();
        let o = op(&mut g, &vars);
        g.shape(o)
    };
    let weights = random_mat(out_shape.0, out_shape.1, &mut rng);

    let mut g = Graph::new();
    let (vars, loss) = build(&mut g, &inputs, &weights);
    let grads = g.backward(loss).unwrap();

    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.node(vars[k]).map(|m| m.data.clone()).unwrap_or_else(|| vec![0.0; input.len()]);
        let numeric = central_difference(
            |x| {
                let mut mats = inputs.clone();
                mats[k] = Mat::from_vec(input.rows, input.cols, x.to_vec());
                let mut g = Graph::new();
                let (_, l) = build(&mut g, &mats, &weights);
                g.scalar(l)
            },
            &input.data,
            1e-4,
        );
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "input {k}: relative error {err}");
    }
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_mat(3, 4, &mut rng);
    let b = random_mat(3, 4, &mut rng);
    check(vec![a.clone(), b.clone()], |g, v| g.add(v[0], v[1]));
    check(vec![a.clone(), b.clone()], |g, v| g.sub(v[0], v[1]));
    check(vec![a.clone(), b.clone()], |g, v| g.mul(v[0], v[1]));
    check(vec![a.clone()], |g, v| g.scale(v[0], -2.5));
    check(vec![a.clone()], |g, v| g.add_scalar(v[0], 0.75));
    check(vec![a.clone()], |g, v| g.tanh(v[0]));
    check(vec![a.clone()], |g, v| g.softplus(v[0]));
    check(vec![a.clone()], |g, v| g.square(v[0]));
    // keep clear of the kinks at zero
    let shifted = a.map(|x| if x.abs() < 0.05 { x + 0.1 } else { x });
    check(vec![shifted.clone()], |g, v| g.relu(v[0]));
    check(vec![shifted], |g, v| g.abs(v[0]));
}

#[test]
fn matmul_and_broadcasts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_mat(6, 4, &mut rng);
    let w = random_mat(4, 3, &mut rng);
    check(vec![a.clone(), w], |g, v| g.matmul(v[0], v[1]));
    let b = random_mat(2, 4, &mut rng);
    check(vec![a.clone(), b.clone()], |g, v| g.add_seg_rows(v[0], v[1], 3));
    check(vec![a.clone(), b], |g, v| g.mul_seg_rows(v[0], v[1], 3));
    let row = random_mat(1, 4, &mut rng);
    check(vec![a, row], |g, v| g.add_row(v[0], v[1]));
}

#[test]
fn reductions_and_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_mat(6, 5, &mut rng);
    check(vec![a.clone()], |g, v| g.seg_max(v[0], 3));
    check(vec![a.clone()], |g, v| g.seg_max(v[0], 6));
    check(vec![a.clone()], |g, v| g.mean(v[0]));
    check(vec![a.clone()], |g, v| g.slice_cols(v[0], 1, 4));
    let b = random_mat(4, 5, &mut rng);
    check(vec![a.clone(), b.clone()], |g, v| g.concat_rows(&[v[0], v[1]]));
    check(vec![a, b], |g, v| g.concat_seg_rows(&[v[0], v[1]], &[3, 2]));
}

#[test]
fn normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_mat(8, 3, &mut rng);
    check(vec![a.clone()], |g, v| g.normalize(v[0], 4, 1e-5));
    check(vec![a], |g, v| g.normalize(v[0], 8, 1e-5));
}

#[test]
fn chamfer_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_mat(10, 3, &mut rng);
    let q = random_mat(6, 3, &mut rng);
    check(vec![p, q], |g, v| g.chamfer(v[0], v[1], 5, 3));
}

#[test]
fn untouched_parameter_has_no_gradient() {
    let mut g = Graph::<f64>::new();
    let used = g.param(ParamId(0), &Mat::filled(1, 1, 2.0));
    let _unused = g.param(ParamId(1), &Mat::filled(1, 1, 3.0));
    let sq = g.square(used);
    let loss = g.sum(sq);
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.param(ParamId(0)).unwrap().data, vec![4.0]);
    assert!(grads.param(ParamId(1)).is_none());
}

#[test]
fn shared_parameter_accumulates() {
    let mut g = Graph::<f64>::new();
    let a = g.param(ParamId(0), &Mat::filled(1, 1, 3.0));
    let again = g.param(ParamId(0), &Mat::filled(1, 1, 3.0));
    assert_eq!(a, again);
    let prod = g.mul(a, again);
    let loss = g.sum(prod);
    assert_eq!(g.backward(loss).unwrap().param(ParamId(0)).unwrap().data, vec![6.0]);
}

#[test]
fn backward_requires_recording() {
    let mut g = Graph::<f64>::inference();
    let a = g.constant(Mat::filled(1, 1, 1.0));
    let l = g.sum(a);
    assert!(matches!(g.backward(l), Err(crate::Error::NoRecordedForward)));
}

#[test]
fn detach_stops_gradient() {
    let mut g = Graph::<f64>::new();
    let a = g.param(ParamId(0), &Mat::filled(1, 1, 3.0));
    let d = g.detach(a);
    let prod = g.mul(a, d);
    let loss = g.sum(prod);
    // d/da (a · const) = const
    assert_eq!(g.backward(loss).unwrap().param(ParamId(0)).unwrap().data, vec![3.0]);
}
