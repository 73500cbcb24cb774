//! Library results checked against independent oracles: fixed-point
//! big-integer arithmetic for softmax and cross-entropy, and plain scalar
//! re-implementations of the forward pass and of one alternating step.

use expertnet::expertnet::{expert_inputs, Batch, ExpertNetConfig, ExpertNetModel, TrainConfig};
use expertnet::nn::{cross_entropy, softmax, Activation, Layer, LrSchedule, Network, SgdConfig, Terminal};
use expertnet::{data, rng, DatasetF64, TensorF64};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;

/// Fixed-point reals with 60 decimal digits after the point.
mod fixed {
    use super::*;

    pub fn scale() -> BigInt {
        BigInt::from(10).pow(60)
    }

    /// Exact value of an `f64`, rounded to the fixed-point grid.
    pub fn from_f64(v: f64) -> BigInt {
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mant = if exp == 0 { (bits & ((1 << 52) - 1)) << 1 } else { (bits & ((1 << 52) - 1)) | (1 << 52) };
        let e = exp - 1075;
        let m = BigInt::from(mant) * scale();
        let magnitude = if e >= 0 { m << e as usize } else { m >> (-e) as usize };
        magnitude * sign
    }

    pub fn to_f64(v: &BigInt) -> f64 {
        // 60 digits overflow f64 parsing only in exponent range, not here.
        let s = scale();
        let int = v / &s;
        let frac = (v - &int * &s).abs();
        let text = format!("{}{}.{:0>60}", if v.is_negative() && int.is_zero() { "-" } else { "" }, int, frac);
        text.parse().unwrap()
    }

    pub fn mul(a: &BigInt, b: &BigInt) -> BigInt {
        a * b / scale()
    }

    pub fn div(a: &BigInt, b: &BigInt) -> BigInt {
        a * scale() / b
    }

    pub fn exp(x: &BigInt) -> BigInt {
        let s = scale();
        let mut halvings = 0;
        let mut r = x.clone();
        while r.abs() > s.clone() / 1000 {
            r /= 2;
            halvings += 1;
        }
        let (mut sum, mut term, mut n) = (s.clone(), s.clone(), 1u32);
        loop {
            term = mul(&term, &r) / n;
            if term.is_zero() {
                break;
            }
            sum += &term;
            n += 1;
        }
        for _ in 0..halvings {
            sum = mul(&sum, &sum);
        }
        sum
    }

    fn atanh(z: &BigInt) -> BigInt {
        let z2 = mul(z, z);
        let (mut sum, mut power, mut n) = (BigInt::zero(), z.clone(), 1u32);
        loop {
            let term = &power / n;
            if term.is_zero() {
                break;
            }
            sum += term;
            power = mul(&power, &z2);
            n += 2;
        }
        sum
    }

    pub fn ln(y: &BigInt) -> BigInt {
        assert!(y.is_positive());
        let s = scale();
        let ln2 = atanh(&div(&s, &(BigInt::from(3) * &s))) * 2;
        let (mut y, mut k) = (y.clone(), 0i64);
        while y > s.clone() * 3 / 2 {
            y /= 2;
            k += 1;
        }
        while y < s.clone() * 3 / 4 {
            y *= 2;
            k -= 1;
        }
        let z = div(&(&y - &s), &(&y + &s));
        atanh(&z) * 2 + ln2 * k
    }
}

fn softmax_oracle(x: &[f64]) -> Vec<f64> {
    let xs: Vec<BigInt> = x.iter().map(|&v| fixed::from_f64(v)).collect();
    let m = xs.iter().max().unwrap().clone();
    let e: Vec<BigInt> = xs.iter().map(|v| fixed::exp(&(v - &m))).collect();
    let total: BigInt = e.iter().sum();
    e.iter().map(|v| fixed::to_f64(&fixed::div(v, &total))).collect()
}

fn cross_entropy_oracle(t: &[f64], p: &[f64]) -> f64 {
    let total: BigInt = t
        .iter()
        .zip(p)
        .filter(|(t, _)| **t != 0.0)
        .map(|(&t, &p)| fixed::mul(&fixed::from_f64(t), &fixed::ln(&fixed::from_f64(p))))
        .sum();
    -fixed::to_f64(&total)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn fixed_point_oracle_self_check() {
    let one = fixed::scale();
    assert!(rel(fixed::to_f64(&fixed::exp(&one)), std::f64::consts::E) < 1e-15);
    assert!(rel(fixed::to_f64(&fixed::ln(&(BigInt::from(10) * &one))), std::f64::consts::LN_10) < 1e-15);
    assert!(fixed::to_f64(&fixed::ln(&one)).abs() < 1e-50);
    assert_eq!(fixed::to_f64(&fixed::from_f64(-0.375)), -0.375);
    assert!(BigInt::one() < one);
}

#[test]
fn softmax_matches_high_precision_oracle() {
    let x = [3.1, -0.7, 12.4];
    let oracle = softmax_oracle(&x);
    let frozen = [9.141568690309073e-5, 2.045039475783708e-6, 0.9999065392736212];
    let lib = softmax(&x).unwrap();
    for i in 0..3 {
        assert!(rel(frozen[i], oracle[i]) < 1e-15, "frozen {} vs oracle {}", frozen[i], oracle[i]);
        assert!(rel(lib[i], oracle[i]) < 1e-12, "library {} vs oracle {}", lib[i], oracle[i]);
    }
}

#[test]
fn cross_entropy_matches_high_precision_oracle() {
    let (t, p) = ([0.5, 0.5], [0.25, 0.75]);
    let oracle = cross_entropy_oracle(&t, &p);
    let frozen = 0.8369882167858358;
    assert!(rel(frozen, oracle) < 1e-15);
    assert!(rel(cross_entropy(&t, &p).unwrap(), oracle) < 1e-12);
    let ln4 = cross_entropy(&[1.0, 0.0, 0.0, 0.0], &[0.25; 4]).unwrap();
    assert!(rel(ln4, cross_entropy_oracle(&[1.0], &[0.25])) < 1e-12);
}

#[test]
fn softmax_oracle_over_random_inputs() {
    let mut r = rng::stream(4);
    for _ in 0..50 {
        let k = r.random_range(1..=8);
        let x: Vec<f64> = (0..k).map(|_| r.random_range(-30.0..30.0)).collect();
        let oracle = softmax_oracle(&x);
        for (a, b) in softmax(&x).unwrap().iter().zip(&oracle) {
            assert!(rel(*a, *b) < 1e-12 || (a - b).abs() < 1e-300);
        }
    }
}

// ----------------------------------------------------------------- scalar MLP

/// Dense layers as row-major `(weights[out][in], bias[out])`.
type ScalarLayers = Vec<(Vec<Vec<f64>>, Vec<f64>)>;

fn scalar_layers(net: &Network<f64>) -> ScalarLayers {
    net.layers()
        .iter()
        .filter_map(|l| match l {
            Layer::Dense(d) => {
                Some((d.weight().data().chunks(d.input_dim()).map(|r| r.to_vec()).collect(), d.bias().data().to_vec()))
            }
            Layer::Activation(_) => None,
        })
        .collect()
}

/// Forward pass with `hidden` after every dense layer but the last and a
/// softmax at the end; returns pre-activations and activations per layer.
fn scalar_forward(layers: &ScalarLayers, x: &[f64], slope: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut acts = vec![x.to_vec()];
    let mut pre = Vec::new();
    for (li, (w, b)) in layers.iter().enumerate() {
        let input = acts.last().unwrap();
        let z: Vec<f64> =
            w.iter().zip(b).map(|(row, bo)| bo + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>()).collect();
        let a = if li + 1 == layers.len() {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        } else {
            z.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect()
        };
        pre.push(z);
        acts.push(a);
    }
    (pre, acts)
}

/// One momentum-SGD step on mean softmax cross-entropy, using the fused
/// gradient `p - t` at the logits.
#[allow(clippy::too_many_arguments)]
fn scalar_sgd(
    layers: &mut ScalarLayers,
    velocity: &mut ScalarLayers,
    xs: &[Vec<f64>],
    targets: &[Vec<f64>],
    slope: f64,
    lr: f64,
    momentum: f64,
    decay: f64,
) {
    let n = xs.len() as f64;
    let mut grads: ScalarLayers =
        layers.iter().map(|(w, b)| (vec![vec![0.0; w[0].len()]; w.len()], vec![0.0; b.len()])).collect();
    for (x, t) in xs.iter().zip(targets) {
        let (pre, acts) = scalar_forward(layers, x, slope);
        let mut delta: Vec<f64> = acts.last().unwrap().iter().zip(t).map(|(p, t)| (p - t) / n).collect();
        for li in (0..layers.len()).rev() {
            for (o, d) in delta.iter().enumerate() {
                grads[li].1[o] += d;
                for (i, a) in acts[li].iter().enumerate() {
                    grads[li].0[o][i] += d * a;
                }
            }
            if li > 0 {
                delta = (0..acts[li].len())
                    .map(|i| {
                        let back: f64 = delta.iter().enumerate().map(|(o, d)| d * layers[li].0[o][i]).sum();
                        back * if pre[li - 1][i] > 0.0 { 1.0 } else { slope }
                    })
                    .collect();
            }
        }
    }
    for li in 0..layers.len() {
        let (w, b) = &mut layers[li];
        let (vw, vb) = &mut velocity[li];
        for o in 0..w.len() {
            for i in 0..w[o].len() {
                vw[o][i] = momentum * vw[o][i] + grads[li].0[o][i] + decay * w[o][i];
                w[o][i] -= lr * vw[o][i];
            }
            vb[o] = momentum * vb[o] + grads[li].1[o] + decay * b[o];
            b[o] -= lr * vb[o];
        }
    }
}

fn max_diff(a: &ScalarLayers, b: &ScalarLayers) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|((wa, ba), (wb, bb))| {
            let w = wa.iter().flatten().zip(wb.iter().flatten()).map(|(x, y)| (x - y).abs());
            let bias = ba.iter().zip(bb).map(|(x, y)| (x - y).abs());
            w.chain(bias).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn forward_pass_matches_scalar_reevaluation() {
    let mut r = rng::stream(8);
    for _ in 0..20 {
        let (input, hidden, k) = (r.random_range(1..6), r.random_range(1..9), r.random_range(2..6));
        let net =
            Network::<f64>::mlp(input, &[hidden], k, Activation::LeakyRelu(0.2), Terminal::Softmax, &mut r).unwrap();
        let rows = r.random_range(1..5);
        let x = TensorF64::matrix(rows, input, (0..rows * input).map(|_| r.random_range(-3.0..3.0)).collect()).unwrap();
        let out = net.predict(&x).unwrap();
        let layers = scalar_layers(&net);
        for i in 0..rows {
            let (_, acts) = scalar_forward(&layers, x.row(i), 0.2);
            for (a, b) in out.row(i).iter().zip(acts.last().unwrap()) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }
}

fn small_model(seed: u64, momentum: f64, decay: f64) -> ExpertNetModel<f64> {
    let opt = SgdConfig { momentum, weight_decay: decay, schedule: LrSchedule::constant(0.1) };
    let cfg = ExpertNetConfig {
        amateur_hidden: vec![4],
        expert_hidden: vec![3],
        leaky_slope: 0.01,
        amateur_opt: opt,
        expert_opt: opt,
        ..Default::default()
    };
    ExpertNetModel::new(3, 2, &cfg, seed).unwrap()
}

#[test]
fn two_class_step_replays_against_scalar_oracle() {
    let mut r = rng::stream(21);
    let mut model = small_model(5, 0.9, 1e-3);
    let mut a_layers = scalar_layers(&model.amateur);
    let mut e_layers = scalar_layers(&model.expert);
    let zero = |l: &ScalarLayers| -> ScalarLayers {
        l.iter().map(|(w, b)| (vec![vec![0.0; w[0].len()]; w.len()], vec![0.0; b.len()])).collect()
    };
    let (mut va, mut ve) = (zero(&a_layers), zero(&e_layers));
    for step in 0..4 {
        let n = 5;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let given: Vec<usize> = truth.iter().map(|&t| if r.random_bool(0.3) { 1 - t } else { t }).collect();

        // Amateur uses relu, i.e. a leaky slope of zero.
        let z: Vec<Vec<f64>> = xs
            .iter()
            .zip(&given)
            .map(|(x, &y)| {
                let mut v = scalar_forward(&a_layers, x, 0.0).1.pop().unwrap();
                v.extend((0..2).map(|c| if c == y { 1.0 } else { 0.0 }));
                v
            })
            .collect();
        let t: Vec<Vec<f64>> =
            truth.iter().map(|&c| (0..2).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect();
        scalar_sgd(&mut e_layers, &mut ve, &z, &t, 0.01, 0.1, 0.9, 1e-3);
        let soft: Vec<Vec<f64>> = z.iter().map(|zi| scalar_forward(&e_layers, zi, 0.01).1.pop().unwrap()).collect();
        scalar_sgd(&mut a_layers, &mut va, &xs, &soft, 0.0, 0.1, 0.9, 1e-3);

        let x = TensorF64::from_rows(&xs).unwrap();
        model.train_step(&Batch { x: &x, given: &given, truth: &truth }, 0.1).unwrap();
        let (da, de) =
            (max_diff(&scalar_layers(&model.amateur), &a_layers), max_diff(&scalar_layers(&model.expert), &e_layers));
        assert!(da < 1e-8 && de < 1e-8, "step {step}: amateur {da:e}, expert {de:e}");
    }
}

#[test]
fn amateur_target_equals_frozen_expert_copy() {
    let mut model = small_model(9, 0.9, 1e-4);
    let x = TensorF64::from_rows(&[vec![0.5, -1.0, 2.0], vec![1.5, 0.3, -0.2]]).unwrap();
    let (given, truth) = ([0, 1], [1, 1]);
    let z = expert_inputs(&model.amateur.predict(&x).unwrap(), &given).unwrap();
    let before = model.clone();
    model.train_step(&Batch { x: &x, given: &given, truth: &truth }, 0.1).unwrap();
    // The Expert is not touched after its own update, so a frozen copy of the
    // post-step Expert reproduces the Amateur's training target.
    let frozen = model.expert.clone();
    let mut replay = before.clone();
    let target = frozen.predict(&z).unwrap();
    let g = replay.amateur.gradients(&x, &target, &expertnet::nn::LossKind::CrossEntropy).unwrap();
    expertnet::nn::sgd_step(&mut replay.amateur, &g.grads, &mut replay.amateur_opt, 0.1).unwrap();
    assert_eq!(replay.amateur, model.amateur);
    assert_ne!(before.expert, model.expert);
}

#[test]
fn inference_matches_argmax_scan() {
    let spec = data::BlobSpec { classes: 3, per_class: 40, dim: 4, separation: 3.0, spread: 1.0 };
    let clean: DatasetF64 = data::make_blobs(&spec, 3).unwrap();
    let given: Vec<usize> =
        clean.true_labels().iter().enumerate().map(|(i, &t)| if i % 4 == 0 { (t + 1) % 3 } else { t }).collect();
    let ds = clean.with_given_labels(given.clone()).unwrap();
    let mut model = ExpertNetModel::<f64>::new(4, 3, &ExpertNetConfig::default(), 1).unwrap();
    model.train(&ds, &ds, &TrainConfig { epochs: 2, batch_size: 16, seed: 0 }).unwrap();

    let scan = |probs: &TensorF64| -> Vec<usize> {
        probs
            .iter_rows()
            .map(|row| {
                let mut best = 0;
                for j in 1..row.len() {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    };
    let pa = model.amateur.predict(ds.features()).unwrap();
    assert_eq!(model.infer_amateur(ds.features()).unwrap(), scan(&pa));
    let mut z = Vec::new();
    for (row, &y) in pa.iter_rows().zip(&given) {
        z.push(row.iter().copied().chain((0..3).map(|c| f64::from(u8::from(c == y)))).collect::<Vec<_>>());
    }
    let pf = model.expert.predict(&TensorF64::from_rows(&z).unwrap()).unwrap();
    assert_eq!(model.infer_full(ds.features(), &given).unwrap(), scan(&pf));
    assert_eq!(data::predictions(&TensorF64::from_rows(&[vec![0.4, 0.4, 0.2]]).unwrap()), vec![0]);
}
