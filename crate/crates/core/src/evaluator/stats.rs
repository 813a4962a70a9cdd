//! Descriptive statistics for daily demand series: coefficient of
//! variation, correlation with a paired series, and relative RMSE of
//! lagged self-prediction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stddev: f64,
    pub cv: f64,
    pub pearson_r: Option<f64>,
    pub r_squared: Option<f64>,
    /// Relative RMSE of predicting day t with day t - lag, keyed by lag.
    pub rrmse_by_lag: BTreeMap<usize, f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_stddev(xs: &[f64], m: f64) -> f64 {
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::precondition(
            "correlation undefined for a constant series",
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Summarize `series`. `paired` must have the same length when given;
/// `lags` must be shorter than the series. A constant series has cv 0
/// but no defined correlation, and a zero-mean series has no defined cv
/// or relative error, both reported as errors rather than NaN.
pub fn summary_stats(series: &[f64], paired: Option<&[f64]>, lags: &[usize]) -> Result<SeriesStats> {
    if series.len() < 2 {
        return Err(Error::precondition("need at least 2 observations"));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("series contains a non-finite value"));
    }
    let m = mean(series);
    if m == 0.0 {
        return Err(Error::precondition(
            "relative statistics undefined for a zero-mean series",
        ));
    }
    let sd = sample_stddev(series, m);

    let (pearson_r, r_squared) = match paired {
        None => (None, None),
        Some(ys) => {
            if ys.len() != series.len() {
                return Err(Error::precondition(format!(
                    "paired series length {} does not match {}",
                    ys.len(),
                    series.len()
                )));
            }
            if ys.iter().any(|x| !x.is_finite()) {
                return Err(Error::data("paired series contains a non-finite value"));
            }
            let r = pearson(series, ys)?;
            (Some(r), Some(r * r))
        }
    };

    let mut rrmse_by_lag = BTreeMap::new();
    for &lag in lags {
        if lag == 0 || lag >= series.len() {
            return Err(Error::precondition(format!(
                "lag {lag} out of range for a series of {}",
                series.len()
            )));
        }
        let mut se = 0.0;
        for t in lag..series.len() {
            let e = series[t] - series[t - lag];
            se += e * e;
        }
        let rmse = (se / (series.len() - lag) as f64).sqrt();
        rrmse_by_lag.insert(lag, rmse / m);
    }

    Ok(SeriesStats {
        n: series.len(),
        mean: m,
        stddev: sd,
        cv: sd / m,
        pearson_r,
        r_squared,
        rrmse_by_lag,
    })
}
