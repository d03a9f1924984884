//! Library forward passes against the straight-line oracles. Each check
//! returns the largest absolute deviation over `instances` random draws.

use mcsttm::autograd::Tape;
use mcsttm::graph::adaptive_adjacency;
use mcsttm::model::{gated_fusion, prediction_head};
use mcsttm::spatial::{spatial_forward, GraphSupports, SpatialParams};
use mcsttm::temporal::{attention_scores, position_encode, qkv_project, temporal_forward, AttentionParams, PositionCodebook};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub fn rand_nodes(rng: &mut ChaCha8Rng, m: usize, t: usize, f: usize) -> Vec<Mat> {
    (0..m).map(|_| rand_mat(rng, t, f)).collect()
}

pub fn attn_weights(rng: &mut ChaCha8Rng, f: usize, fh: usize, heads: usize) -> AttnWeights {
    AttnWeights {
        wq: rand_mat(rng, f, f),
        wk: rand_mat(rng, f, f),
        wv: rand_mat(rng, f, f),
        f0: rand_mat(rng, f, fh),
        f1: rand_mat(rng, fh, fh),
        f2: rand_mat(rng, fh, f),
        heads,
    }
}

pub fn bind_attn<'t>(tape: &'t Tape, w: &AttnWeights) -> AttentionParams<'t> {
    let c = |m: &Mat| tape.constant(to_tensor(m));
    AttentionParams {
        w_q: c(&w.wq),
        w_k: c(&w.wk),
        w_v: c(&w.wv),
        ff_w0: c(&w.f0),
        ff_w1: c(&w.f1),
        ff_w2: c(&w.f2),
        heads: w.heads,
    }
}

pub fn adaptive_adjacency_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, r) = (rng.random_range(1..7), rng.random_range(1..5));
        let (ec, er) = (rand_mat(&mut rng, m, r), rand_mat(&mut rng, r, m));
        let tape = Tape::new();
        let got = adaptive_adjacency(tape.constant(to_tensor(&ec)), tape.constant(to_tensor(&er))).unwrap();
        let want = adaptive_oracle(&ec, &er);
        let want: Vec<f64> = want.into_iter().flatten().collect();
        worst = worst.max(max_diff(got.value().data(), &want));
    }
    worst
}

pub fn spatial_forward_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, t, f) = (rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..5));
        let x = rand_nodes(&mut rng, m, t, f);
        let a: Vec<Mat> = (0..3).map(|_| rand_mat(&mut rng, m, m)).collect();
        let w: Vec<Mat> = (0..3).map(|_| rand_mat(&mut rng, f, f)).collect();
        let tape = Tape::new();
        let c = |m: &Mat| tape.constant(to_tensor(m));
        let supports = GraphSupports {
            adaptive: Some(c(&a[0])),
            fwd: Some(c(&a[1])),
            bwd: Some(c(&a[2])),
        };
        let params = SpatialParams {
            w0: c(&w[0]),
            w1: c(&w[1]),
            w2: c(&w[2]),
        };
        let got = spatial_forward(tape.constant(to_tensor3(&x)), supports, params).unwrap();
        let want = spatial_oracle(&x, &[(&a[0], &w[0]), (&a[1], &w[1]), (&a[2], &w[2])]);
        worst = worst.max(max_diff(got.value().data(), &to_tensor3(&want).into_data()));
    }
    worst
}

pub fn attention_scores_match_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = rng.random_range(1..4);
        let f = heads * rng.random_range(1..3);
        let (m, t) = (rng.random_range(1..4), rng.random_range(1..6));
        let x = rand_nodes(&mut rng, m, t, f);
        let w = attn_weights(&mut rng, f, 3, heads);
        let tape = Tape::new();
        let (q, k, _) = qkv_project(tape.constant(to_tensor3(&x)), &bind_attn(&tape, &w)).unwrap();
        let got = attention_scores(q, k, f).unwrap().value();
        for n in 0..m {
            let want = attention_scores_oracle(&x[n], &w);
            for h in 0..heads {
                for i in 0..t {
                    for j in 0..t {
                        worst = worst.max((got.at(&[n, h, i, j]) - want[h][i][j]).abs());
                    }
                }
            }
        }
    }
    worst
}

pub fn temporal_forward_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = rng.random_range(1..4);
        let f = heads * rng.random_range(1..3);
        let (m, t, fh) = (rng.random_range(1..4), rng.random_range(1..6), rng.random_range(1..6));
        let x = rand_nodes(&mut rng, m, t, f);
        let w = attn_weights(&mut rng, f, fh, heads);
        let tape = Tape::new();
        let got = temporal_forward(tape.constant(to_tensor3(&x)), &bind_attn(&tape, &w)).unwrap();
        let want: Vec<Mat> = x.iter().map(|xn| temporal_oracle(xn, &w)).collect();
        worst = worst.max(max_diff(got.value().data(), &to_tensor3(&want).into_data()));
    }
    worst
}

pub fn position_encoding_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, t, f, s) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4), rng.random_range(1..30));
        let x = rand_nodes(&mut rng, m, t, f);
        let (tod, dow) = (rand_mat(&mut rng, s, f), rand_mat(&mut rng, 7, f));
        let idx: Vec<usize> = (0..t).map(|_| rng.random_range(0..10_000)).collect();
        let tape = Tape::new();
        let cb = PositionCodebook {
            tod: tape.constant(to_tensor(&tod)),
            dow: tape.constant(to_tensor(&dow)),
        };
        let got = position_encode(tape.constant(to_tensor3(&x)), &idx, cb).unwrap();
        let want: Vec<Mat> = x.iter().map(|xn| position_oracle(xn, &idx, &tod, &dow)).collect();
        worst = worst.max(max_diff(got.value().data(), &to_tensor3(&want).into_data()));
    }
    worst
}

pub fn gated_fusion_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, p, f) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..6));
        let xh = rand_nodes(&mut rng, m, p, f);
        let xd = rand_nodes(&mut rng, m, p, f);
        let (f1, f2) = (rand_mat(&mut rng, f, 1), rand_mat(&mut rng, f, 1));
        let tape = Tape::new();
        let out = gated_fusion(
            tape.constant(to_tensor3(&xh)),
            tape.constant(to_tensor3(&xd)),
            tape.constant(to_tensor(&f1)),
            tape.constant(to_tensor(&f2)),
        )
        .unwrap();
        let (gate, fused) = (out.gate.value(), out.fused.value());
        let col = |a: &Mat| a.iter().map(|r| r[0]).collect::<Vec<f64>>();
        for n in 0..m {
            let (g, want) = fusion_oracle(&xh[n], &xd[n], &col(&f1), &col(&f2));
            for i in 0..p {
                worst = worst.max((gate.at(&[n, i, 0]) - g[i]).abs());
                for c in 0..f {
                    worst = worst.max((fused.at(&[n, i, c]) - want[i][c]).abs());
                }
            }
        }
    }
    worst
}

pub fn prediction_head_matches_oracle(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, p, f, q, fm) = (
            rng.random_range(1..4),
            rng.random_range(1..5),
            rng.random_range(1..5),
            rng.random_range(1..5),
            rng.random_range(1..4),
        );
        let x = rand_nodes(&mut rng, m, p, f);
        let (ka, kb) = (rand_mat(&mut rng, p * f, q * fm), rand_mat(&mut rng, q * fm, q));
        let tape = Tape::new();
        let got = prediction_head(
            tape.constant(to_tensor3(&x)),
            tape.constant(to_tensor(&ka)),
            tape.constant(to_tensor(&kb)),
            q,
            fm,
        )
        .unwrap();
        let want: Vec<Mat> = x.iter().map(|xn| conv_oracle(&conv_oracle(xn, &ka, q, fm), &kb, q, 1)).collect();
        worst = worst.max(max_diff(got.value().data(), &to_tensor3(&want).into_data()));
    }
    worst
}
