//! Finite-difference cases for every differentiable operation and the
//! end-to-end loss. Each case draws its own tiny shapes from the seed.

use asqg_core::autodiff::{SeedRng, Tape, Tensor, Var};
use asqg_core::model::{
    attend, condition, keyword_net, lstm_step, output_scores, Ablation, AttentionMemory, Dropout,
    EncodedAnswer, ExampleIds, LstmWeights, Model, Weights,
};
use asqg_core::train::{nll_loss, nll_value, Batch};
use asqg_core::Result;
use rand::Rng;

use super::*;

pub const SEEDS: u64 = 20;

pub type Case = Box<dyn Fn(&mut SeedRng) -> Result<f64>>;

/// Worst relative error of `case` over all seeds.
pub fn worst_over_seeds(case: &Case) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let mut rng = SeedRng::new(1000 + seed);
        worst = worst.max(case(&mut rng)?);
    }
    Ok(worst)
}

fn dim(rng: &mut SeedRng) -> usize {
    rng.gen_range(1..=8)
}

fn weights(rng: &mut SeedRng) -> Vec<f64> {
    (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random inputs of the given shapes through `op`, reduced to a scalar.
fn op_case<F>(rng: &mut SeedRng, shapes: &[Vec<usize>], op: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let inputs: Vec<Tensor> = shapes.iter().map(|s| random_tensor(rng, s)).collect();
    let r = weights(rng);
    fd_check(&inputs, |tape, v| {
        let out = op(tape, v)?;
        reduce(tape, out, &r)
    })
}

fn random_mask(rng: &mut SeedRng, n: usize) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let keep = rng.gen_range(0..n);
    m[keep] = true;
    m
}

/// Gradient of a model-level scalar with respect to every weight tensor.
fn model_case<F>(model: &Model, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &Weights<Var>) -> Result<Var>,
{
    let tensors: Vec<Tensor> = model
        .weights
        .named()
        .into_iter()
        .map(|(_, t)| t.clone())
        .collect();
    fd_check(&tensors, |tape, vars| {
        let mut k = 0;
        let w = model.weights.map(|_, _| {
            k += 1;
            vars[k - 1]
        });
        f(tape, &w)
    })
}

fn attention_case(rng: &mut SeedRng, ablation: Ablation) -> Result<f64> {
    let seed = rng.gen();
    let mut r2 = SeedRng::new(seed);
    let model = tiny_model(seed, ablation);
    let n = r2.gen_range(1..=5);
    let m = r2.gen_range(1..=3);
    let passage = random_ids(&mut r2, model.config.vocab_size, n);
    let answer = random_ids(&mut r2, model.config.vocab_size, m);
    let s = random_tensor(&mut r2, &[model.config.d_dec]);
    let r = weights(&mut r2);
    model_case(&model, |tape, w| {
        let mut drop = Dropout::eval();
        let cond = condition(tape, w, &passage, &answer, &mut drop)?;
        let mem = AttentionMemory::new(tape, w, &cond.passage, None)?;
        let s_prev = tape.constant(s.clone());
        let (alpha, context) = attend(tape, w, &mem, s_prev, &cond.passage)?;
        let scores = output_scores(tape, w, s_prev, context)?;
        let out = tape.concat(&[alpha, context, scores])?;
        reduce(tape, out, &r)
    })
}

fn random_example(rng: &mut SeedRng, vocab: usize) -> ExampleIds {
    let n = rng.gen_range(1..=5);
    let m = rng.gen_range(1..=3);
    let q = rng.gen_range(1..=4);
    ExampleIds {
        passage: random_ids(rng, vocab, n),
        answer: random_ids(rng, vocab, m),
        question: random_ids(rng, vocab, q),
    }
}

fn shift_param(model: &mut Model, k: usize, i: usize, delta: f64) {
    let mut idx = 0;
    model.weights.for_each_mut(|_, t| {
        if idx == k {
            t.data_mut()[i] += delta;
        }
        idx += 1;
    });
}

/// Loss of a two-example batch with dropout 0.3 and a fixed mask seed,
/// checked against the loss itself rather than a reduced tape output.
fn loss_case(rng: &mut SeedRng, ablation: Ablation) -> Result<f64> {
    let seed: u64 = rng.gen();
    let mut model = tiny_model(seed, ablation);
    let examples: Vec<ExampleIds> = (0..2)
        .map(|_| random_example(rng, model.config.vocab_size))
        .collect();
    let batch = Batch::new(examples.iter().collect())?;
    let drop_seed = rng.gen();
    let fresh_drop = || Dropout::train(0.3, SeedRng::new(drop_seed));
    let analytic = nll_loss(&model, &batch, &mut fresh_drop()?)?;

    let mut worst: f64 = 0.0;
    for k in 0..analytic.grads.len() {
        for i in 0..analytic.grads[k].len() {
            let mut loss_at = |delta: f64| -> Result<f64> {
                shift_param(&mut model, k, i, delta);
                let v = nll_value(&model, &batch, &mut fresh_drop()?);
                shift_param(&mut model, k, i, -delta);
                v
            };
            let numeric = (loss_at(FD_STEP)? - loss_at(-FD_STEP)?) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.grads[k].data()[i], numeric));
        }
    }
    Ok(worst)
}

fn case<F>(f: F) -> Case
where
    F: Fn(&mut SeedRng) -> Result<f64> + 'static,
{
    Box::new(f)
}

pub fn cases() -> Vec<(&'static str, Case)> {
    vec![
        (
            "matmul",
            case(|rng| {
                let (m, k, n) = (dim(rng), dim(rng), dim(rng));
                op_case(rng, &[vec![m, k], vec![k, n]], |t, v| t.matmul(v[0], v[1]))
            }),
        ),
        (
            "matmul_nt",
            case(|rng| {
                let (m, k, n) = (dim(rng), dim(rng), dim(rng));
                op_case(rng, &[vec![m, k], vec![n, k]], |t, v| {
                    t.matmul_nt(v[0], v[1])
                })
            }),
        ),
        (
            "matvec",
            case(|rng| {
                let (m, k) = (dim(rng), dim(rng));
                op_case(rng, &[vec![m, k], vec![k]], |t, v| t.matvec(v[0], v[1]))
            }),
        ),
        (
            "vecmat",
            case(|rng| {
                let (m, k) = (dim(rng), dim(rng));
                op_case(rng, &[vec![m], vec![m, k]], |t, v| t.vecmat(v[0], v[1]))
            }),
        ),
        (
            "add",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n], vec![n]], |t, v| t.add(v[0], v[1]))
            }),
        ),
        (
            "add_row",
            case(|rng| {
                let (m, n) = (dim(rng), dim(rng));
                op_case(rng, &[vec![m, n], vec![n]], |t, v| t.add_row(v[0], v[1]))
            }),
        ),
        (
            "mul",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n], vec![n]], |t, v| t.mul(v[0], v[1]))
            }),
        ),
        (
            "mul_const",
            case(|rng| {
                let n = dim(rng);
                let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                op_case(rng, &[vec![n]], move |t, v| t.mul_const(v[0], f.clone()))
            }),
        ),
        (
            "scale",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n]], |t, v| Ok(t.scale(v[0], -1.7)))
            }),
        ),
        (
            "tanh",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n]], |t, v| Ok(t.tanh(v[0])))
            }),
        ),
        (
            "sigmoid",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n]], |t, v| Ok(t.sigmoid(v[0])))
            }),
        ),
        (
            "softmax",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n]], |t, v| t.softmax(v[0], None))
            }),
        ),
        (
            "softmax_masked",
            case(|rng| {
                let n = dim(rng);
                let mask = random_mask(rng, n);
                op_case(rng, &[vec![n]], move |t, v| t.softmax(v[0], Some(&mask)))
            }),
        ),
        (
            "log_softmax",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n]], |t, v| t.log_softmax(v[0], None))
            }),
        ),
        (
            "log_softmax_masked_pick",
            case(|rng| {
                let n = dim(rng);
                let mask = random_mask(rng, n);
                let i = mask.iter().position(|&m| m).expect("one kept");
                op_case(rng, &[vec![n]], move |t, v| {
                    let l = t.log_softmax(v[0], Some(&mask))?;
                    t.pick(l, i)
                })
            }),
        ),
        (
            "sum",
            case(|rng| {
                let (m, n) = (dim(rng), dim(rng));
                op_case(rng, &[vec![m, n]], |t, v| Ok(t.sum(v[0])))
            }),
        ),
        (
            "add_all",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n], vec![n], vec![n]], |t, v| t.add_all(v))
            }),
        ),
        (
            "concat",
            case(|rng| {
                let (a, b) = (dim(rng), dim(rng));
                op_case(rng, &[vec![a], vec![b]], |t, v| t.concat(v))
            }),
        ),
        (
            "slice",
            case(|rng| {
                let n = dim(rng) + 1;
                let start = rng.gen_range(0..n);
                let len = rng.gen_range(1..=n - start);
                op_case(rng, &[vec![n]], move |t, v| t.slice(v[0], start, len))
            }),
        ),
        (
            "row",
            case(|rng| {
                let (m, n) = (dim(rng), dim(rng));
                let i = rng.gen_range(0..m);
                op_case(rng, &[vec![m, n]], move |t, v| {
                    // The same row read twice accumulates.
                    let r = t.row(v[0], i)?;
                    let r2 = t.row(v[0], i)?;
                    t.mul(r, r2)
                })
            }),
        ),
        (
            "stack",
            case(|rng| {
                let n = dim(rng);
                op_case(rng, &[vec![n], vec![n]], |t, v| t.stack(v))
            }),
        ),
        (
            "weight_norm",
            case(|rng| {
                let (m, n) = (dim(rng), dim(rng));
                op_case(rng, &[vec![m, n], vec![]], |t, v| t.weight_norm(v[0], v[1]))
            }),
        ),
        (
            "lstm_step",
            case(|rng| {
                let (d_in, d) = (dim(rng), dim(rng));
                let shapes = [
                    vec![4 * d, d_in],
                    vec![4 * d, d],
                    vec![4 * d],
                    vec![d_in],
                    vec![d],
                    vec![d],
                ];
                op_case(rng, &shapes, move |t, v| {
                    let w = LstmWeights {
                        w_x: v[0],
                        w_h: v[1],
                        b: v[2],
                    };
                    let (h, c) = lstm_step(t, &w, v[3], v[4], v[5])?;
                    t.concat(&[h, c])
                })
            }),
        ),
        (
            "keyword_net",
            case(|rng| {
                let (m, d) = (rng.gen_range(1..=5), dim(rng));
                let layers = rng.gen_range(1..=4);
                op_case(rng, &[vec![d], vec![m, d]], move |t, v| {
                    let states = (0..m).map(|i| t.row(v[1], i)).collect::<Result<Vec<_>>>()?;
                    let answer = EncodedAnswer {
                        states,
                        matrix: v[1],
                        final_state: v[0],
                    };
                    Ok(keyword_net(t, v[0], &answer, layers)?.0)
                })
            }),
        ),
        (
            "attention_full",
            case(|rng| attention_case(rng, Ablation::FULL)),
        ),
        (
            "attention_generic_decoder",
            case(|rng| attention_case(rng, Ablation::GENERIC_DECODER)),
        ),
        ("nll_loss_full", case(|rng| loss_case(rng, Ablation::FULL))),
        (
            "nll_loss_no_keyword",
            case(|rng| loss_case(rng, Ablation::NO_KEYWORD)),
        ),
        (
            "nll_loss_generic_decoder",
            case(|rng| loss_case(rng, Ablation::GENERIC_DECODER)),
        ),
    ]
}
