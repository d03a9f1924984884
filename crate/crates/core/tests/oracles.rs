//! Forward passes compared against straight-line recomputation on many
//! random tiny instances.

mod common;

use common::checks;
use common::*;
use mcsttm::autograd::Tape;
use mcsttm::data::{make_channels, SeriesTable};
use mcsttm::graph::{adaptive_adjacency, AdjacencyPair};
use mcsttm::model::{channel_pipeline, init_params, st_block_forward, Ablation, ModelConfig, StModel};
use mcsttm::spatial::{spatial_forward, GraphSupports};
use mcsttm::temporal::{position_encode, temporal_forward};
use mcsttm::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: u64 = 120;
const TOL: f64 = 1e-10;

#[test]
fn each_operation_matches_its_oracle() {
    let all: [(&str, fn(u64) -> f64); 7] = [
        ("adaptive_adjacency", checks::adaptive_adjacency_matches_oracle),
        ("spatial_forward", checks::spatial_forward_matches_oracle),
        ("attention_scores", checks::attention_scores_match_oracle),
        ("temporal_forward", checks::temporal_forward_matches_oracle),
        ("position_encode", checks::position_encoding_matches_oracle),
        ("gated_fusion", checks::gated_fusion_matches_oracle),
        ("prediction_head", checks::prediction_head_matches_oracle),
    ];
    for (name, check) in all {
        let worst = check(INSTANCES);
        assert!(worst < TOL, "{name}: {worst:e}");
    }
}

fn mat_of(t: &Tensor) -> Mat {
    let c = t.shape()[1];
    t.data().chunks(c).map(|r| r.to_vec()).collect()
}

/// The whole model for one sample, built only from the straight-line helpers.
fn model_oracle(model: &StModel, x_hour: &Mat, x_day: &Mat, hidx: &[usize], didx: &[usize]) -> Mat {
    let cfg = &model.config;
    let p = |n: &str| mat_of(model.params.get(n).unwrap());
    let adp = adaptive_oracle(&p("adaptive.e_c"), &p("adaptive.e_r"));
    let (fwd, bwd) = (mat_of(&model.adjacency.fwd), mat_of(&model.adjacency.bwd));
    let channel = |c: &str, x: &Mat, idx: &[usize]| -> Vec<Mat> {
        let expand = p(&format!("{c}.expand"));
        let mut r: Vec<Mat> = x
            .iter()
            .map(|series| series.iter().map(|v| expand[0].iter().map(|e| v * e).collect()).collect())
            .collect();
        let (tod, dow) = (p(&format!("{c}.pos.tod")), p(&format!("{c}.pos.dow")));
        for k in 0..cfg.blocks {
            let b = |n: &str| p(&format!("{c}.block{k}.{n}"));
            let (w0, w1, w2) = (b("spatial.w0"), b("spatial.w1"), b("spatial.w2"));
            let s = spatial_oracle(&r, &[(&adp, &w0), (&fwd, &w1), (&bwd, &w2)]);
            let w = AttnWeights {
                wq: b("attn.wq"),
                wk: b("attn.wk"),
                wv: b("attn.wv"),
                f0: b("ff.w0"),
                f1: b("ff.w1"),
                f2: b("ff.w2"),
                heads: cfg.heads,
            };
            let out: Vec<Mat> = s.iter().map(|sn| temporal_oracle(&position_oracle(sn, idx, &tod, &dow), &w)).collect();
            r = r.iter().zip(&out).map(|(a, b)| add(a, b)).collect();
        }
        let t = r[0].len();
        let (oc, al) = (p(&format!("{c}.out_conv")), p(&format!("{c}.align")));
        r.iter()
            .map(|rn| conv_oracle(&conv_oracle(rn, &oc, t, cfg.feat_dim), &al, cfg.hour_len, cfg.feat_dim))
            .collect()
    };
    let hour = channel("hour", x_hour, hidx);
    let day = channel("day", x_day, didx);
    let col = |a: &Mat| a.iter().map(|r| r[0]).collect::<Vec<f64>>();
    let (f1, f2) = (col(&p("gate.f1")), col(&p("gate.f2")));
    let (ka, kb) = (p("head.conv_a"), p("head.conv_b"));
    hour.iter()
        .zip(&day)
        .map(|(h, d)| {
            let (_, fused) = fusion_oracle(h, d, &f1, &f2);
            let y = conv_oracle(&conv_oracle(&fused, &ka, cfg.horizon, cfg.mid_width()), &kb, cfg.horizon, 1);
            y.iter().map(|r| r[0]).collect()
        })
        .collect()
}

fn tiny_cfg(blocks: usize) -> ModelConfig {
    ModelConfig {
        nodes: 3,
        hour_len: 4,
        day_len: 2,
        horizon: 2,
        slices_per_day: 5,
        feat_dim: 4,
        blocks,
        heads: 2,
        adaptive_rank: 3,
        ff_width: 5,
    }
}

#[test]
fn full_model_matches_straight_line_composition() {
    for seed in 0..30 {
        for blocks in [1, 2] {
            let cfg = tiny_cfg(blocks);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let adjacency = AdjacencyPair {
                fwd: Tensor::uniform(&[3, 3], 0.0, 1.0, &mut rng),
                bwd: Tensor::uniform(&[3, 3], 0.0, 1.0, &mut rng),
            };
            let model = StModel::new(cfg.clone(), Ablation::full(), adjacency, &mut rng).unwrap();
            let table = SeriesTable::from_fn(40, 3, 5, |_, _| 0.0).unwrap();
            let vals = (0..120).map(|_| rng.random_range(-2.0..2.0)).collect();
            let table = table.with_values(vals).unwrap();
            let anchors = [10, 23, 36];
            let batch = make_channels(&table, &anchors, &cfg).unwrap();
            let got = model.predict(&batch).unwrap();
            for (b, &t) in anchors.iter().enumerate() {
                let (xh, xd, _) = naive_windows(&table, t, 4, 2, 2, 5);
                let hidx: Vec<usize> = (t - 3..=t).collect();
                let didx = vec![t - 10, t - 5];
                let want = model_oracle(&model, &xh, &xd, &hidx, &didx);
                for n in 0..3 {
                    for k in 0..2 {
                        assert!((got.at(&[b, n, k, 0]) - want[n][k]).abs() < 1e-9, "seed {seed} K={blocks}");
                    }
                }
            }
        }
    }
}

#[test]
fn st_block_and_channel_pipeline_chain_sub_operations() {
    let cfg = tiny_cfg(2);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = init_params(&cfg, &mut rng).unwrap();
        let model = StModel::from_parts(cfg.clone(), Ablation::full(), AdjacencyPair::identity(3), params).unwrap();
        let tape = Tape::new();
        let bound = model.params.bind_frozen(&tape);
        let vars = model.vars(&tape, &bound).unwrap();
        let supports = GraphSupports {
            adaptive: Some(adaptive_adjacency(vars.e_c, vars.e_r).unwrap()),
            fwd: Some(vars.fixed_fwd),
            bwd: Some(vars.fixed_bwd),
        };
        let x = tape.constant(Tensor::uniform(&[3, 4, 1], -1.0, 1.0, &mut rng));
        let idx = [7, 8, 9, 10];
        let ch = &vars.hour;

        // block = temporal(position(spatial(x)))
        let r1 = x.matmul(ch.expand).unwrap();
        let blk = st_block_forward(r1, &idx, supports, ch.codebook, &ch.blocks[0], Ablation::full()).unwrap();
        let manual = temporal_forward(
            position_encode(spatial_forward(r1, supports, ch.blocks[0].spatial).unwrap(), &idx, ch.codebook).unwrap(),
            &ch.blocks[0].attention,
        )
        .unwrap();
        assert_eq!(blk.value(), manual.value());

        // two-step residual recursion, then output and alignment maps
        let r2 = r1.add(blk).unwrap();
        let r3 = r2
            .add(st_block_forward(r2, &idx, supports, ch.codebook, &ch.blocks[1], Ablation::full()).unwrap())
            .unwrap();
        let conv = |v, k, t| mcsttm::autograd::temporal_conv(v, k, t, 4).unwrap();
        let manual = conv(conv(r3, ch.out_conv, 4), ch.align, 4);
        let got = channel_pipeline(x, &idx, ch, supports, Ablation::full(), 4).unwrap();
        assert_eq!(got.value(), manual.value());
    }
}
