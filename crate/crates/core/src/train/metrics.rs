use crate::autograd::Var;
use crate::error::{Error, Result};

/// Mean absolute error, differentiable in `pred`.
pub fn mae_loss<'t>(pred: Var<'t>, target: Var<'t>) -> Result<Var<'t>> {
    let (ps, ts) = (pred.shape(), target.shape());
    if ps != ts {
        return Err(Error::dim("mae_loss", &ps, &ts));
    }
    Ok(pred.sub(target)?.abs().mean())
}

/// MAE, MAPE in percent, and RMSE of one evaluation set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub mae: f64,
    /// `None` when every target is masked out by the MAPE threshold.
    pub mape: Option<f64>,
    pub rmse: f64,
}

impl Metrics {
    pub const ZERO: Metrics = Metrics {
        mae: 0.0,
        mape: Some(0.0),
        rmse: 0.0,
    };
}

/// Running sums from which [`Metrics`] are finalized.
#[derive(Clone, Copy, Debug, Default)]
pub struct MetricAccumulator {
    abs: f64,
    sq: f64,
    n: usize,
    pct: f64,
    n_pct: usize,
}

impl MetricAccumulator {
    pub fn push(&mut self, pred: f64, target: f64, mape_epsilon: f64) {
        let e = pred - target;
        self.abs += e.abs();
        self.sq += e * e;
        self.n += 1;
        if target.abs() > mape_epsilon {
            self.pct += (e / target).abs();
            self.n_pct += 1;
        }
    }

    pub fn finish(&self) -> Result<Metrics> {
        if self.n == 0 {
            return Err(Error::Input("no points to compute metrics over".into()));
        }
        let n = self.n as f64;
        Ok(Metrics {
            mae: self.abs / n,
            mape: (self.n_pct > 0).then(|| 100.0 * self.pct / self.n_pct as f64),
            rmse: (self.sq / n).sqrt(),
        })
    }
}

/// MAE = mean |e|, RMSE = sqrt(mean e²), MAPE = mean |e / target|·100
/// over targets with `|target| > mape_epsilon`.
pub fn metrics(pred: &[f64], target: &[f64], mape_epsilon: f64) -> Result<Metrics> {
    if pred.len() != target.len() {
        return Err(Error::dim("metrics", &[pred.len()], &[target.len()]));
    }
    let mut acc = MetricAccumulator::default();
    for (p, t) in pred.iter().zip(target) {
        acc.push(*p, *t, mape_epsilon);
    }
    acc.finish()
}
