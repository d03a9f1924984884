//! Straight-line reference computations on plain nested vectors, written
//! without the tensor or tape code so they can serve as independent oracles.

#![allow(dead_code)]

pub mod checks;

use mcsttm::data::SeriesTable;
use mcsttm::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn to_tensor(m: &Mat) -> Tensor {
    let (r, c) = (m.len(), m[0].len());
    Tensor::new(&[r, c], m.iter().flatten().copied().collect()).unwrap()
}

/// `[a, b, c]` nested vectors to a tensor.
pub fn to_tensor3(x: &[Mat]) -> Tensor {
    let (a, b, c) = (x.len(), x[0].len(), x[0][0].len());
    Tensor::new(&[a, b, c], x.iter().flatten().flatten().copied().collect()).unwrap()
}

pub fn from_tensor3(t: &Tensor) -> Vec<Mat> {
    let s = t.shape();
    (0..s[0])
        .map(|i| (0..s[1]).map(|j| (0..s[2]).map(|k| t.at(&[i, j, k])).collect()).collect())
        .collect()
}

pub fn mm(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[i][l] * b[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn relu(a: &Mat) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn softmax_rows(a: &Mat) -> Mat {
    a.iter()
        .map(|r| {
            let mx = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - mx).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `softmax(relu(E_c E_r))`.
pub fn adaptive_oracle(e_c: &Mat, e_r: &Mat) -> Mat {
    softmax_rows(&relu(&mm(e_c, e_r)))
}

/// `Σ_terms A · X_t · W` per time step; `x` is `[M][T][f]`.
pub fn spatial_oracle(x: &[Mat], terms: &[(&Mat, &Mat)]) -> Vec<Mat> {
    let (m, t, f) = (x.len(), x[0].len(), x[0][0].len());
    let mut out = vec![vec![vec![0.0; f]; t]; m];
    for (a, w) in terms {
        for step in 0..t {
            let xt: Mat = (0..m).map(|n| x[n][step].clone()).collect();
            let y = mm(&mm(a, &xt), w);
            for n in 0..m {
                for c in 0..f {
                    out[n][step][c] += y[n][c];
                }
            }
        }
    }
    out
}

/// Per-node attention block on `x: [T][f]` with `h` heads.
pub struct AttnWeights {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub f0: Mat,
    pub f1: Mat,
    pub f2: Mat,
    pub heads: usize,
}

pub fn head_cols(a: &Mat, h: usize, dh: usize) -> Mat {
    a.iter().map(|r| r[h * dh..(h + 1) * dh].to_vec()).collect()
}

/// Scores `[h][T][T]` for one node.
pub fn attention_scores_oracle(x: &Mat, w: &AttnWeights) -> Vec<Mat> {
    let f = x[0].len();
    let dh = f / w.heads;
    let q = mm(x, &w.wq);
    let k = mm(x, &w.wk);
    (0..w.heads)
        .map(|h| {
            let logits = mm(&head_cols(&q, h, dh), &transpose(&head_cols(&k, h, dh)));
            let scaled: Mat = logits.iter().map(|r| r.iter().map(|v| v / (f as f64).sqrt()).collect()).collect();
            softmax_rows(&scaled)
        })
        .collect()
}

/// `M = merge(S V) + x`, `out = relu(relu(M F0) F1) F2 + M` for one node.
pub fn temporal_oracle(x: &Mat, w: &AttnWeights) -> Mat {
    let (t, f) = (x.len(), x[0].len());
    let dh = f / w.heads;
    let v = mm(x, &w.wv);
    let scores = attention_scores_oracle(x, w);
    let mut merged = vec![vec![0.0; f]; t];
    for h in 0..w.heads {
        let o = mm(&scores[h], &head_cols(&v, h, dh));
        for i in 0..t {
            for c in 0..dh {
                merged[i][h * dh + c] = o[i][c];
            }
        }
    }
    let m = add(&merged, x);
    add(&mm(&relu(&mm(&relu(&mm(&m, &w.f0)), &w.f1)), &w.f2), &m)
}

/// `x + tod[i mod s] + dow[(i div s) mod 7]` for each step of one node.
pub fn position_oracle(x: &Mat, idx: &[usize], tod: &Mat, dow: &Mat) -> Mat {
    let s = tod.len();
    x.iter()
        .zip(idx)
        .map(|(row, &i)| {
            row.iter()
                .enumerate()
                .map(|(c, v)| v + tod[i % s][c] + dow[(i / s) % 7][c])
                .collect()
        })
        .collect()
}

/// Flattened time-feature map of one node: `vec(x) · K` reshaped to `[t_out][f_out]`.
pub fn conv_oracle(x: &Mat, k: &Mat, t_out: usize, f_out: usize) -> Mat {
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let y = mm(&vec![flat], k);
    (0..t_out).map(|i| y[0][i * f_out..(i + 1) * f_out].to_vec()).collect()
}

/// Gate and fused value per (step, feature) for one node.
pub fn fusion_oracle(xh: &Mat, xd: &Mat, f1: &[f64], f2: &[f64]) -> (Vec<f64>, Mat) {
    let mut gates = Vec::new();
    let mut fused = Vec::new();
    for (rh, rd) in xh.iter().zip(xd) {
        let z: f64 = rh.iter().zip(f1).map(|(a, b)| a * b).sum::<f64>() + rd.iter().zip(f2).map(|(a, b)| a * b).sum::<f64>();
        let g = sigmoid(z);
        gates.push(g);
        fused.push(rh.iter().zip(rd).map(|(a, b)| g * a + (1.0 - g) * b).collect());
    }
    (gates, fused)
}

/// Hour window, day window and targets of anchor `t` read with plain index loops.
pub fn naive_windows(table: &SeriesTable, t: usize, p: usize, d: usize, q: usize, s: usize) -> (Mat, Mat, Mat) {
    let m = table.nodes();
    let mut hour = vec![vec![0.0; p]; m];
    let mut day = vec![vec![0.0; d]; m];
    let mut y = vec![vec![0.0; q]; m];
    for n in 0..m {
        for k in 0..p {
            hour[n][k] = table.get(t - (p - 1) + k, n);
        }
        for k in 0..d {
            day[n][k] = table.get(t - (d - k) * s, n);
        }
        for k in 0..q {
            y[n][k] = table.get(t + 1 + k, n);
        }
    }
    (hour, day, y)
}

/// Compares `make_channels` with [`naive_windows`] on every valid anchor.
/// Returns the number of anchors checked or the first mismatch.
pub fn windows_match_naive(table: &SeriesTable, cfg: &mcsttm::model::ModelConfig) -> Result<usize, String> {
    let anchors = mcsttm::data::valid_anchors(table, cfg);
    let (p, d, q, s) = (cfg.hour_len, cfg.day_len, cfg.horizon, cfg.slices_per_day);
    let m = table.nodes();
    for chunk in anchors.chunks(512) {
        let batch = mcsttm::data::make_channels(table, chunk, cfg).map_err(|e| e.to_string())?;
        for (b, &t) in chunk.iter().enumerate() {
            let (hour, day, y) = naive_windows(table, t, p, d, q, s);
            for n in 0..m {
                let same = (0..p).all(|k| batch.x_hour.at(&[b, n, k, 0]) == hour[n][k])
                    && (0..d).all(|k| batch.x_day.at(&[b, n, k, 0]) == day[n][k])
                    && (0..q).all(|k| batch.y.at(&[b, n, k, 0]) == y[n][k]);
                if !same {
                    return Err(format!("anchor {t} node {n} differs"));
                }
            }
            let base = table.start_index;
            let hidx: Vec<usize> = (0..p).map(|k| base + t + 1 + k - p).collect();
            let didx: Vec<usize> = (0..d).map(|k| base + t - (d - k) * s).collect();
            if batch.hour_time_index[b * p..(b + 1) * p] != hidx[..] || batch.day_time_index[b * d..(b + 1) * d] != didx[..] {
                return Err(format!("anchor {t} time indices differ"));
            }
        }
    }
    Ok(anchors.len())
}
