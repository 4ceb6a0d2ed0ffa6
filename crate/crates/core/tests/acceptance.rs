//! Acceptance suite. Every test prints one `PASS`/`FAIL` line to stderr
//! (written directly so it shows up even when output is captured) and then
//! asserts.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metaformer::data::corrupt::mask_count;
use metaformer::data::{sample_mask, synthetic_cohort, AtlasSpec, NoiseMask, StandardizerState, SynthConfig};
use metaformer::eval::{
    accuracy, auc, f1, precision, recall, run_cv_experiment, stratified_kfold, CvReport, ExperimentConfig, Variant,
};
use metaformer::model::{AtlasEnsemble, HeadMode, ModelConfig, SatConfig, SingleAtlasTransformer};
use metaformer::nn::gradcheck::{central_difference, relative_error};
use metaformer::nn::{
    gelu, gelu_backward, grad_check, softmax_backward, softmax_rows, EncoderLayer, LayerNorm, Linear, Mode,
    MultiHeadAttention, ParamVisitor, Tensor,
};
use metaformer::train::{cross_entropy_loss, mamse_batch, mamse_loss, train_epoch, AdamW, Example, TrainConfig};
use metaformer::train::fit::{ClassifyObjective, Objective};

fn report(name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance [{status}] {name}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::from_vec(shape, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const EPS: f64 = metaformer::nn::gradcheck::DEFAULT_EPS;
const TRIALS: u64 = 20;

/// Finite-difference check over every parameter of `model`; `loss` runs the
/// forward and backward passes and returns the loss.
fn check_params<M: ParamVisitor + Clone>(model: &M, loss: impl Fn(&mut M) -> f64) -> f64 {
    let mut m = model.clone();
    let x0 = m.flat_values();
    grad_check(
        |x| {
            m.set_flat_values(x);
            m.zero_grad();
            let l = loss(&mut m);
            (l, m.flat_grads())
        },
        &x0,
        EPS,
    )
}

/// Like [`check_params`], but parameters selected by `invariant` are ones the
/// loss cannot depend on (a bias added to every attention key shifts all
/// scores of a row equally, and softmax ignores that shift). Relative error
/// is meaningless for their exactly-zero gradient, so they are required to
/// be zero instead: `|analytic| <= 1e-12` and `|numeric| <= 1e-9`. Returns
/// the worst relative error over the remaining coordinates, or infinity if
/// an invariant coordinate is not zero.
fn check_params_with_invariant<M: ParamVisitor + Clone>(
    model: &M,
    loss: impl Fn(&mut M) -> f64,
    invariant: impl Fn(&str) -> bool,
) -> f64 {
    let mut m = model.clone();
    let x0 = m.flat_values();
    let mut frozen = Vec::new();
    m.visit(&mut |p| frozen.extend(std::iter::repeat_n(invariant(&p.name), p.len())));
    let mut eval = |x: &[f64]| {
        m.set_flat_values(x);
        m.zero_grad();
        let l = loss(&mut m);
        (l, m.flat_grads())
    };
    let (_, analytic) = eval(&x0);
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let n = central_difference(|x| eval(x).0, &x0, i, EPS);
        if frozen[i] {
            if a.abs() > 1e-12 || n.abs() > 1e-9 {
                return f64::INFINITY;
            }
        } else {
            worst = worst.max(relative_error(a, n));
        }
    }
    worst
}

fn is_key_bias(name: &str) -> bool {
    name.ends_with(".bk")
}

/// Runs `trials` seeded checks and returns the worst error.
fn worst(trials: u64, f: impl Fn(&mut ChaCha8Rng) -> f64) -> f64 {
    (0..trials).map(|t| f(&mut rng(1000 + t))).fold(0.0, f64::max)
}

fn toy_sat_config(name: &str, dropout: f64) -> SatConfig {
    SatConfig {
        atlas: AtlasSpec::new(name, 4).unwrap(),
        d_model: 8,
        n_layers: 2,
        d_ff: 4,
        n_heads: 2,
        dropout_rate: dropout,
    }
}

#[test]
fn gradient_integrity() {
    let start = Instant::now();
    let mut results: Vec<(&str, f64, f64)> = Vec::new();
    let (b, l, d) = (3usize, 3usize, 8usize);

    results.push((
        "linear",
        worst(TRIALS, |r| {
            let lin = Linear::new("lin", 5, 4, r);
            let x = normal_vec(r, b * 5);
            let proj = normal_vec(r, b * 4);
            let p = check_params(&lin, |m| {
                let xt = tensor(&[b, 5], x.clone());
                let y = m.forward(&xt).unwrap();
                m.backward(&xt, &tensor(&[b, 4], proj.clone()), false).unwrap();
                dot(y.data(), &proj)
            });
            let mut lin = lin;
            let i = grad_check(
                |xv| {
                    let xt = tensor(&[b, 5], xv.to_vec());
                    let y = lin.forward(&xt).unwrap();
                    let dx = lin.backward(&xt, &tensor(&[b, 4], proj.clone()), true).unwrap().unwrap();
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            );
            p.max(i)
        }),
        1e-5,
    ));

    results.push((
        "gelu",
        worst(TRIALS, |r| {
            let x = normal_vec(r, 12);
            let proj = normal_vec(r, 12);
            grad_check(
                |xv| {
                    let xt = tensor(&[12], xv.to_vec());
                    let y = gelu(&xt);
                    let dx = gelu_backward(&xt, &tensor(&[12], proj.clone()));
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            )
        }),
        1e-5,
    ));

    results.push((
        "layer norm",
        worst(TRIALS, |r| {
            let mut ln = LayerNorm::new("ln", d, 1e-5);
            let gain = normal_vec(r, d);
            let bias = normal_vec(r, d);
            ln.gain.value.data_mut().iter_mut().zip(&gain).for_each(|(g, v)| *g = 1.0 + 0.3 * v);
            ln.bias.value.data_mut().copy_from_slice(&bias);
            let x = normal_vec(r, b * d);
            let proj = normal_vec(r, b * d);
            let p = check_params(&ln, |m| {
                let (y, c) = m.forward(&tensor(&[b, d], x.clone())).unwrap();
                m.backward(&c, &tensor(&[b, d], proj.clone())).unwrap();
                dot(y.data(), &proj)
            });
            let i = grad_check(
                |xv| {
                    let mut m = ln.clone();
                    let (y, c) = m.forward(&tensor(&[b, d], xv.to_vec())).unwrap();
                    let dx = m.backward(&c, &tensor(&[b, d], proj.clone())).unwrap();
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            );
            p.max(i)
        }),
        1e-5,
    ));

    results.push((
        "softmax",
        worst(TRIALS, |r| {
            let x = normal_vec(r, b * 5);
            let proj = normal_vec(r, b * 5);
            grad_check(
                |xv| {
                    let y = softmax_rows(&tensor(&[b, 5], xv.to_vec()));
                    let dx = softmax_backward(&y, &tensor(&[b, 5], proj.clone()));
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            )
        }),
        1e-5,
    ));

    results.push((
        "attention",
        worst(TRIALS, |r| {
            let attn = MultiHeadAttention::new("attn", d, 2, r);
            let x = normal_vec(r, b * l * d);
            let proj = normal_vec(r, b * l * d);
            let p = check_params_with_invariant(
                &attn,
                |m| {
                    let (y, c) = m.forward(&tensor(&[b, l, d], x.clone())).unwrap();
                    m.backward(&c, &tensor(&[b, l, d], proj.clone())).unwrap();
                    dot(y.data(), &proj)
                },
                is_key_bias,
            );
            let i = grad_check(
                |xv| {
                    let mut m = attn.clone();
                    let (y, c) = m.forward(&tensor(&[b, l, d], xv.to_vec())).unwrap();
                    let dx = m.backward(&c, &tensor(&[b, l, d], proj.clone())).unwrap();
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            );
            p.max(i)
        }),
        1e-5,
    ));

    results.push((
        "encoder layer",
        worst(TRIALS, |r| {
            let enc = EncoderLayer::new("enc", d, 4, 2, r);
            let x = normal_vec(r, b * l * d);
            let proj = normal_vec(r, b * l * d);
            let p = check_params_with_invariant(
                &enc,
                |m| {
                    let (y, c) = m.forward(&tensor(&[b, l, d], x.clone()), 0.0, &mut Mode::Eval).unwrap();
                    m.backward(&c, &tensor(&[b, l, d], proj.clone())).unwrap();
                    dot(y.data(), &proj)
                },
                is_key_bias,
            );
            let i = grad_check(
                |xv| {
                    let mut m = enc.clone();
                    let (y, c) = m.forward(&tensor(&[b, l, d], xv.to_vec()), 0.0, &mut Mode::Eval).unwrap();
                    let dx = m.backward(&c, &tensor(&[b, l, d], proj.clone())).unwrap();
                    (dot(y.data(), &proj), dx.into_data())
                },
                &x,
                EPS,
            );
            p.max(i)
        }),
        1e-5,
    ));

    results.push((
        "embedding",
        worst(TRIALS, |r| {
            let sat = SingleAtlasTransformer::new(toy_sat_config("e", 0.0), "sat0", HeadMode::Classify, r).unwrap();
            let x = normal_vec(r, b * 6);
            let proj = normal_vec(r, b * d);
            let embed_loss = |m: &mut SingleAtlasTransformer, xv: &[f64], need_dx: bool| {
                let xt = tensor(&[b, 6], xv.to_vec());
                let y = m.embed_forward(&xt).unwrap();
                let dx = m.embed_backward(&xt, &tensor(&[b, 1, d], proj.clone()), need_dx).unwrap();
                (dot(y.data(), &proj), dx)
            };
            let mut embed_only = sat.clone();
            let p = {
                let x0 = embed_only.embed.flat_values();
                grad_check(
                    |w| {
                        embed_only.embed.set_flat_values(w);
                        embed_only.zero_grad();
                        let (loss, _) = embed_loss(&mut embed_only, &x, false);
                        (loss, embed_only.embed.flat_grads())
                    },
                    &x0,
                    EPS,
                )
            };
            let i = grad_check(
                |xv| {
                    let mut m = sat.clone();
                    let (loss, dx) = embed_loss(&mut m, xv, true);
                    (loss, dx.unwrap().into_data())
                },
                &x,
                EPS,
            );
            p.max(i)
        }),
        1e-5,
    ));

    results.push((
        "cross entropy",
        worst(TRIALS, |r| {
            let logits = normal_vec(r, b * 2);
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..2)).collect();
            grad_check(
                |z| {
                    let (loss, g) = cross_entropy_loss(&tensor(&[b, 2], z.to_vec()), &labels).unwrap();
                    (loss, g.into_data())
                },
                &logits,
                EPS,
            )
        }),
        1e-6,
    ));

    let mut mamse_zero_ok = true;
    results.push((
        "masked imputation loss",
        {
            let mut worst_err = 0.0f64;
            for t in 0..TRIALS {
                let r = &mut rng(2000 + t);
                let lens = [6usize, 10, 15];
                let masks: Vec<Vec<NoiseMask>> = (0..b)
                    .map(|_| lens.iter().enumerate().map(|(i, &n)| sample_mask(i, n, 0.3, r)).collect())
                    .collect();
                let originals: Vec<Tensor> = lens.iter().map(|&n| tensor(&[b, n], normal_vec(r, b * n))).collect();
                let preds: Vec<f64> = lens.iter().flat_map(|&n| normal_vec(r, b * n)).collect();
                let split = |flat: &[f64]| -> Vec<Tensor> {
                    let mut off = 0;
                    lens.iter()
                        .map(|&n| {
                            let t = tensor(&[b, n], flat[off..off + b * n].to_vec());
                            off += b * n;
                            t
                        })
                        .collect()
                };
                let (_, grads) = mamse_batch(&split(&preds), &originals, &masks).unwrap();
                for (i, g) in grads.iter().enumerate() {
                    for s in 0..b {
                        for (j, v) in g.row(s).iter().enumerate() {
                            if !masks[s][i].is_masked(j) && *v != 0.0 {
                                mamse_zero_ok = false;
                            }
                        }
                    }
                }
                worst_err = worst_err.max(grad_check(
                    |flat| {
                        let (loss, g) = mamse_batch(&split(flat), &originals, &masks).unwrap();
                        (loss, g.into_iter().flat_map(|t| t.into_data()).collect())
                    },
                    &preds,
                    EPS,
                ));
            }
            worst_err
        },
        1e-6,
    ));

    results.push((
        "full SAT",
        worst(TRIALS, |r| {
            let sat = SingleAtlasTransformer::new(toy_sat_config("s", 0.0), "sat0", HeadMode::Classify, r).unwrap();
            let x = tensor(&[b, 6], normal_vec(r, b * 6));
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..2)).collect();
            check_params(&sat, |m| {
                let (logits, cache) = m.forward_classify(&x, &mut Mode::Eval).unwrap();
                let (loss, g) = cross_entropy_loss(&logits, &labels).unwrap();
                m.backward(&cache, &g).unwrap();
                loss
            })
        }),
        1e-5,
    ));

    results.push((
        "full METAFormer",
        worst(TRIALS, |r| {
            let configs: Vec<SatConfig> = ["a", "b", "c"].iter().map(|n| toy_sat_config(n, 0.0)).collect();
            let model = AtlasEnsemble::metaformer(&configs, HeadMode::Classify, r).unwrap();
            let views: Vec<Tensor> = (0..3).map(|_| tensor(&[b, 6], normal_vec(r, b * 6))).collect();
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..2)).collect();
            check_params(&model, |m| {
                let (logits, caches) = m.forward_logits(&views, &mut Mode::Eval).unwrap();
                let (loss, g) = cross_entropy_loss(&logits, &labels).unwrap();
                m.backward_logits(&caches, &g).unwrap();
                loss
            })
        }),
        1e-5,
    ));

    let elapsed = start.elapsed().as_secs_f64();
    let failures: Vec<String> = results
        .iter()
        .filter(|(_, err, tol)| !(err < tol))
        .map(|(n, err, tol)| format!("{n} {err:.2e} >= {tol:.0e}"))
        .collect();
    let summary: Vec<String> = results.iter().map(|(n, e, _)| format!("{n} {e:.1e}")).collect();
    let pass = failures.is_empty() && mamse_zero_ok && elapsed < 60.0;
    report(
        "1 gradient integrity",
        pass,
        &format!(
            "{} ops x {TRIALS} trials, max rel err [{}], unmasked grads exactly zero: {mamse_zero_ok}, {elapsed:.1}s",
            results.len(),
            summary.join(", ")
        ),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(mamse_zero_ok, "masked loss has nonzero gradient at an unmasked position");
    assert!(elapsed < 60.0, "took {elapsed:.1}s");
}

#[test]
fn architecture_shapes_and_constants() {
    let builtin = AtlasSpec::builtin();
    let lens: Vec<usize> = builtin.iter().map(|a| a.feature_len()).collect();
    let lens_ok = lens == [6670, 19900, 12720] && builtin.iter().all(|a| a.feature_len() == a.k * (a.k - 1) / 2);

    let mut r = rng(7);
    let mut counts_ok = true;
    let mut scale_ok = true;
    let mut sats = Vec::new();
    for a in &builtin {
        let cfg = SatConfig::standard(a.clone(), 0.1);
        let sat = SingleAtlasTransformer::new(cfg.clone(), "sat0", HeadMode::Classify, &mut r).unwrap();
        // Independent count: embedding, per layer (attention projections,
        // two layer norms, feed-forward), head.
        let (n, dm, ff) = (a.feature_len(), 256usize, 128usize);
        let per_layer = 4 * (dm * dm + dm) + 2 * (2 * dm) + (dm * ff + ff) + (ff * dm + dm);
        let oracle = (n * dm + dm) + 2 * per_layer + (dm * 2 + 2);
        counts_ok &= sat.param_count() == oracle && cfg.classify_param_count() == oracle;
        scale_ok &= sat.embed_scale() == 16.0;
        sats.push(cfg);
    }
    let ensemble = AtlasEnsemble::metaformer(&sats, HeadMode::Classify, &mut r).unwrap();
    let views: Vec<Tensor> = builtin
        .iter()
        .map(|a| tensor(&[4, a.feature_len()], normal_vec(&mut r, 4 * a.feature_len())))
        .collect();
    let probs = ensemble.forward_probs(&views).unwrap();
    let max_dev = (0..4).map(|i| (probs.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let pass = lens_ok && counts_ok && scale_ok && max_dev <= 1e-9;
    report(
        "2 architecture shapes",
        pass,
        &format!(
            "feature lengths {lens:?}, embed scale 16: {scale_ok}, param counts match: {counts_ok}, max |sum p - 1| {max_dev:.1e}"
        ),
    );
    assert!(lens_ok && counts_ok && scale_ok);
    assert!(max_dev <= 1e-9);
}

#[test]
fn masked_imputation_semantics() {
    let pred = [1.0, 2.0, 0.0, 0.0];
    let orig = [0.0, 0.0, 0.0, 0.0];
    let mask = NoiseMask {
        atlas_index: 0,
        mask: vec![0, 0, 1, 1],
    };
    let empty = [0.5, -0.5];
    let empty_mask = NoiseMask {
        atlas_index: 1,
        mask: vec![1, 1],
    };
    let empty_mask2 = NoiseMask {
        atlas_index: 2,
        ..empty_mask.clone()
    };
    let (loss, grads) = mamse_loss(
        &[&pred, &empty, &empty],
        &[&orig, &[0.0, 0.0], &[0.0, 0.0]],
        &[&mask, &empty_mask, &empty_mask2],
    )
    .unwrap();
    let hand_ok = (loss - 1.25 / 3.0).abs() <= 1e-9;
    let zero_ok = grads[0][2] == 0.0 && grads[0][3] == 0.0 && grads[1..].iter().flatten().all(|&g| g == 0.0);

    let mut r = rng(3);
    let mut counts = Vec::new();
    let mut count_ok = true;
    let mut random_zero_ok = true;
    for a in AtlasSpec::builtin() {
        let n = a.feature_len();
        let expected = (0.1 * n as f64).round() as usize;
        let m = sample_mask(0, n, 0.1, &mut r);
        count_ok &= m.masked_count() == expected && mask_count(n, 0.1) == expected;
        counts.push(m.masked_count());
        let p = normal_vec(&mut r, n);
        let o = normal_vec(&mut r, n);
        let (_, g) = mamse_loss(&[&p], &[&o], &[&m]).unwrap();
        random_zero_ok &= g[0].iter().enumerate().all(|(j, &v)| m.is_masked(j) || v == 0.0);
    }
    let pass = hand_ok && zero_ok && count_ok && random_zero_ok;
    report(
        "3 masked imputation loss",
        pass,
        &format!("hand example {loss:.5} (expect 0.41667), unmasked grads zero: {}, masked counts {counts:?}", zero_ok && random_zero_ok),
    );
    assert!(hand_ok, "{loss}");
    assert!(zero_ok && random_zero_ok && count_ok);
}

fn auc_oracle(scores: &[f64], labels: &[usize]) -> f64 {
    let mut credit = 0.0;
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            n_pos += 1;
        } else {
            n_neg += 1;
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 0 {
                if scores[i] > scores[j] {
                    credit += 1.0;
                } else if scores[i] == scores[j] {
                    credit += 0.5;
                }
            }
        }
    }
    credit / (n_pos * n_neg) as f64
}

#[test]
fn metric_oracles() {
    let mut r = rng(11);
    let mut auc_ok = 0;
    let mut cm_max_err = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(2..=50);
        let mut labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        labels[0] = 1;
        labels[1] = 0;
        labels.shuffle(&mut r);
        // Coarse grid so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..8) as f64 / 8.0).collect();
        if auc(&scores, &labels).unwrap() == auc_oracle(&scores, &labels) {
            auc_ok += 1;
        }
        let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s > 0.5)).collect();
        let (mut tp, mut fp, mut fnn, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (&p, &y) in preds.iter().zip(&labels) {
            match (p, y) {
                (1, 1) => tp += 1.0,
                (1, _) => fp += 1.0,
                (_, 1) => fnn += 1.0,
                _ => tn += 1.0,
            }
        }
        let acc = accuracy(&preds, &labels).unwrap();
        let (prec, _) = precision(&preds, &labels).unwrap();
        let rec = recall(&preds, &labels).unwrap();
        let prec_o = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec_o = tp / (tp + fnn);
        let f1_o = if prec_o + rec_o > 0.0 { 2.0 * prec_o * rec_o / (prec_o + rec_o) } else { 0.0 };
        for (a, b) in [
            (acc, (tp + tn) / n as f64),
            (prec, prec_o),
            (rec, rec_o),
            (f1(prec, rec), f1_o),
        ] {
            cm_max_err = cm_max_err.max((a - b).abs());
        }
    }
    // TP 3, FP 1, FN 2, TN 4
    let preds = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
    let labels = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
    let worked = (
        accuracy(&preds, &labels).unwrap(),
        precision(&preds, &labels).unwrap().0,
        recall(&preds, &labels).unwrap(),
    );
    let worked_f1 = f1(worked.1, worked.2);
    let worked_ok = (worked.0 - 0.7).abs() < 1e-12
        && (worked.1 - 0.75).abs() < 1e-12
        && (worked.2 - 0.6).abs() < 1e-12
        && (worked_f1 - 0.6667).abs() < 5e-5;
    let pass = auc_ok == 200 && cm_max_err <= 1e-12 && worked_ok;
    report(
        "4 metric oracles",
        pass,
        &format!(
            "AUC exact on {auc_ok}/200, confusion max err {cm_max_err:.1e}, worked example ({:.4}, {:.4}, {:.4}, {:.4})",
            worked.0, worked.1, worked.2, worked_f1
        ),
    );
    assert_eq!(auc_ok, 200);
    assert!(cm_max_err <= 1e-12);
    assert!(worked_ok);
}

fn desk_atlases() -> Vec<AtlasSpec> {
    vec![
        AtlasSpec::new("AAL", 16).unwrap(),
        AtlasSpec::new("CC200", 20).unwrap(),
        AtlasSpec::new("DOS160", 24).unwrap(),
    ]
}

/// Reduced architecture and schedule used for the synthetic experiments.
fn desk_experiment(seed: u64) -> ExperimentConfig {
    let model = ModelConfig {
        d_model: 32,
        n_layers: 2,
        d_ff: 16,
        n_heads: 4,
        dropout: 0.1,
        atlases: desk_atlases(),
    };
    let train = TrainConfig {
        max_epochs: 200,
        batch_size: 32,
        patience: 20,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let mut cfg = ExperimentConfig::new(model, train, seed);
    cfg.folds = 5;
    cfg
}

fn desk_cohort(delta: f64, seed: u64) -> metaformer::data::Cohort {
    synthetic_cohort(&SynthConfig {
        n_asd: 150,
        n_tc: 150,
        atlases: desk_atlases(),
        t_len: 100,
        delta,
        seed,
    })
    .unwrap()
}

#[test]
fn protocol_integrity() {
    let mut labels = vec![1usize; 406];
    labels.extend(vec![0; 476]);
    let folds = stratified_kfold(&labels, 10, 0.3, 5).unwrap();
    let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    let positives: Vec<usize> = folds.iter().map(|f| f.test.iter().filter(|&&i| labels[i] == 1).count()).collect();
    let folds_ok = folds.len() == 10
        && sizes.iter().all(|s| (88..=89).contains(s))
        && positives.iter().all(|p| (40..=41).contains(p));

    let cohort = synthetic_cohort(&SynthConfig {
        n_asd: 30,
        n_tc: 30,
        atlases: vec![
            AtlasSpec::new("AAL", 6).unwrap(),
            AtlasSpec::new("CC200", 7).unwrap(),
            AtlasSpec::new("DOS160", 8).unwrap(),
        ],
        t_len: 40,
        delta: 0.5,
        seed: 2,
    })
    .unwrap();
    let mut cfg = ExperimentConfig::new(
        ModelConfig {
            d_model: 8,
            n_layers: 1,
            d_ff: 4,
            n_heads: 2,
            dropout: 0.1,
            atlases: cohort.atlases.clone(),
        },
        TrainConfig {
            max_epochs: 6,
            patience: 2,
            batch_size: 16,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        4,
    );
    cfg.folds = 5;
    let variants = Variant::all(3);
    let outcome = run_cv_experiment(&cohort, &variants, &cfg).unwrap();
    let mut leaks = 0;
    let mut stages_seen = 0;
    for audit in &outcome.audits {
        for (_, indices) in &audit.stages {
            stages_seen += 1;
            leaks += indices.iter().filter(|i| audit.test.contains(i)).count();
        }
    }
    let fingerprints_ok = outcome.variant_fingerprints.iter().all(|&f| f == outcome.fingerprint);
    let audits_ok = outcome.audits.len() == variants.len() * cfg.folds && outcome.audits.iter().all(|a| a.check().is_ok());
    let pass = folds_ok && leaks == 0 && audits_ok && fingerprints_ok;
    report(
        "5 protocol integrity",
        pass,
        &format!(
            "fold sizes {sizes:?}, positives {positives:?}, {stages_seen} audited stages with {leaks} leaked indices, {} variants share fingerprint {:016x}: {fingerprints_ok}",
            variants.len(),
            outcome.fingerprint
        ),
    );
    assert!(folds_ok);
    assert_eq!(leaks, 0);
    assert!(audits_ok && fingerprints_ok);
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_metaformer")).args(args).output().unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

fn tree_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "run.json" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn cli_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).display().to_string();
    std::fs::write(
        p("synth.json"),
        r#"{"n_asd":20,"n_tc":20,"atlases":[{"name":"AAL","k":6},{"name":"CC200","k":7},{"name":"DOS160","k":8}],"t_len":50,"delta":0.5,"seed":9}"#,
    )
    .unwrap();
    std::fs::write(
        p("run.json"),
        r#"{"model":{"d_model":8,"n_layers":1,"d_ff":4,"n_heads":2},"train":{"max_epochs":8,"patience":3,"batch_size":8,"learning_rate":0.001}}"#,
    )
    .unwrap();
    run_cli(&["synth", "--config", &p("synth.json"), "--out", &p("syn")]);
    run_cli(&["connectome", "--manifest", &p("syn/manifest.csv"), "--out", &p("fc")]);
    let cv = |out: &str, threads: &str| {
        run_cli(&[
            "cv", "--data", &p("fc"), "--config", &p("run.json"), "--variants", "METAFormer,METAFormer PT,SAT (AAL)",
            "--folds", "4", "--seed", "13", "--threads", threads, "--out", &p(out),
        ])
    };
    cv("a", "1");
    cv("b", "1");
    cv("c", "4");
    let (a, b, c) = (tree_files(&tmp.path().join("a")), tree_files(&tmp.path().join("b")), tree_files(&tmp.path().join("c")));
    let checkpoints = a.iter().filter(|(n, _)| n.ends_with(".ckpt")).count();
    let single_ok = a == b && checkpoints == 12;
    let csv = |files: &[(String, Vec<u8>)]| -> Vec<(String, Vec<u8>)> {
        files.iter().filter(|(n, _)| n.ends_with(".csv")).cloned().collect()
    };
    let multi_ok = csv(&a) == csv(&c) && !csv(&a).is_empty();
    report(
        "6 determinism",
        single_ok && multi_ok,
        &format!(
            "threads 1 twice: {} files identical incl. {checkpoints} checkpoints: {single_ok}; threads 4 CSVs identical: {multi_ok}",
            a.len()
        ),
    );
    assert!(single_ok && multi_ok);
}

#[test]
fn capacity_sanity() {
    let start = Instant::now();
    let cohort = synthetic_cohort(&SynthConfig {
        n_asd: 16,
        n_tc: 16,
        atlases: vec![AtlasSpec::new("toy", 16).unwrap()],
        t_len: 60,
        delta: 0.0,
        seed: 21,
    })
    .unwrap();
    let conns: Vec<_> = cohort.subjects.iter().map(|s| &s.connectomes[0]).collect();
    let st = StandardizerState::fit(&conns, "all").unwrap();
    // Labels are random, so only memorization can fit them.
    let mut labels: Vec<usize> = (0..32).map(|i| i % 2).collect();
    labels.shuffle(&mut rng(5));
    let examples: Vec<Example> = conns
        .iter()
        .zip(&labels)
        .map(|(c, &label)| Example {
            views: vec![st.apply(c).unwrap().features],
            label,
        })
        .collect();
    let sat_cfg = SatConfig {
        atlas: cohort.atlases[0].clone(),
        d_model: 32,
        n_layers: 2,
        d_ff: 16,
        n_heads: 4,
        dropout_rate: 0.0,
    };
    let mut model = AtlasEnsemble::single(sat_cfg, HeadMode::Classify, &mut rng(6)).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        dropout_rate: 0.0,
        p_aug: 0.0,
        ..TrainConfig::default()
    };
    let objective = ClassifyObjective::new(&examples, &cfg);
    assert_eq!(objective.head_mode(), HeadMode::Classify);
    let all: Vec<usize> = (0..32).collect();
    let mut opt = AdamW::new();
    let train_accuracy = |m: &AtlasEnsemble| {
        let correct = examples
            .iter()
            .filter(|e| {
                let p = m.predict_one(&[&e.views[0]]).unwrap();
                usize::from(p[1] > p[0]) == e.label
            })
            .count();
        correct as f64 / examples.len() as f64
    };
    let mut reached = None;
    for epoch in 1..=500 {
        let mut r = rng(100 + epoch);
        train_epoch(&mut model, &objective, &all, &mut opt, &cfg, &mut r).unwrap();
        if train_accuracy(&model) == 1.0 {
            reached = Some(epoch);
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = reached.is_some() && elapsed < 120.0;
    report(
        "7 capacity sanity",
        pass,
        &format!(
            "100% training accuracy on 32 random-label connectomes (n=120) at epoch {reached:?}, {elapsed:.1}s"
        ),
    );
    assert!(reached.is_some(), "final accuracy {}", train_accuracy(&model));
    assert!(elapsed < 120.0);
}

fn mean_accuracy(reports: &[CvReport], name: &str) -> f64 {
    reports.iter().find(|r| r.variant == name).unwrap().mean()[0]
}

#[test]
fn directional_replication() {
    let start = Instant::now();
    let variants = vec![
        Variant::MetaFormer { pretrained: false },
        Variant::MetaFormer { pretrained: true },
        Variant::Sat { atlas: 0, pretrained: true },
        Variant::Sat { atlas: 1, pretrained: true },
        Variant::Sat { atlas: 2, pretrained: true },
    ];
    let mut rows = Vec::new();
    let mut a_every = true;
    let mut a_strict = 0;
    let mut b_ok = true;
    let mut scratch_range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..3u64 {
        let cohort = desk_cohort(0.3, seed);
        let outcome = run_cv_experiment(&cohort, &variants, &desk_experiment(seed)).unwrap();
        let scratch = mean_accuracy(&outcome.reports, "METAFormer");
        let pt = mean_accuracy(&outcome.reports, "METAFormer PT");
        let sat_pt: Vec<f64> = ["SAT (AAL) PT", "SAT (CC200) PT", "SAT (DOS160) PT"]
            .iter()
            .map(|n| mean_accuracy(&outcome.reports, n))
            .collect();
        scratch_range = (scratch_range.0.min(scratch), scratch_range.1.max(scratch));
        a_every &= pt >= scratch - 0.01;
        a_strict += usize::from(pt > scratch);
        b_ok &= sat_pt.iter().all(|&s| pt >= s - 0.02);
        rows.push(format!(
            "seed {seed}: scratch {scratch:.3} PT {pt:.3} SAT-PT [{:.3} {:.3} {:.3}]",
            sat_pt[0], sat_pt[1], sat_pt[2]
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = a_every && a_strict >= 2 && b_ok && elapsed < 1200.0;
    report(
        "8 directional replication",
        pass,
        &format!(
            "{}; PT > scratch in {a_strict}/3 seeds, PT >= scratch-0.01 always: {a_every}, PT >= SAT-PT-0.02: {b_ok}, scratch range {:.3}-{:.3}, {elapsed:.0}s",
            rows.join("; "),
            scratch_range.0,
            scratch_range.1
        ),
    );
    assert!(a_every && a_strict >= 2, "{rows:?}");
    assert!(b_ok, "{rows:?}");
    assert!(elapsed < 1200.0);
}

#[test]
fn null_signal_control() {
    let cohort = desk_cohort(0.0, 0);
    let variants = Variant::all(3);
    let outcome = run_cv_experiment(&cohort, &variants, &desk_experiment(0)).unwrap();
    let mut rows = Vec::new();
    let mut pass = true;
    for r in &outcome.reports {
        let m = r.mean();
        pass &= (m[0] - 0.5).abs() <= 0.15 && (m[4] - 0.5).abs() <= 0.15;
        rows.push(format!("{} acc {:.3} auc {:.3}", r.variant, m[0], m[4]));
    }
    report("9 null-signal control", pass, &rows.join("; "));
    assert!(pass, "{rows:?}");
}
