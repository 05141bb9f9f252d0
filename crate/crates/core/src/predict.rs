//! Target prediction for new instances: a posterior-weighted sum of the
//! per-subgroup target means, with subgroup likelihoods from independent
//! equal-variance Gaussians centred on the checkerboard block means.

use serde::{Deserialize, Serialize};

use crate::biclusters::BiclusterModel;
use crate::error::{Result, SubicError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub y_hat: f64,
    /// Normalized posterior weight of each row cluster.
    pub q: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
}

/// Variance used by the likelihood: the pooled residual variance, floored at
/// 1e-9 of the data variance.
pub fn effective_sigma2(model: &BiclusterModel) -> f64 {
    let floor = 1e-9 * model.x_variance;
    let s = model.sigma2.max(floor);
    if s > 0.0 {
        s
    } else {
        f64::MIN_POSITIVE.sqrt()
    }
}

fn centered(x_new: &[f64], model: &BiclusterModel) -> Result<Vec<f64>> {
    let p = model.col_labels.m();
    if x_new.len() != p {
        return Err(SubicError::DimensionMismatch(format!(
            "instance has {} features, model expects {p}",
            x_new.len()
        )));
    }
    if let Some(j) = x_new.iter().position(|v| !v.is_finite()) {
        return Err(SubicError::BadCell {
            row: 1,
            column: model.column_names.get(j).cloned().unwrap_or_else(|| j.to_string()),
            value: x_new[j].to_string(),
        });
    }
    Ok(x_new
        .iter()
        .zip(model.column_means.iter().zip(&model.column_scales))
        .map(|(x, (m, s))| (x - m) / s)
        .collect())
}

fn loglik_centered(xc: &[f64], model: &BiclusterModel, r: usize, sigma2: f64) -> f64 {
    let norm = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    let means = &model.block_means[r];
    let ll: f64 = xc
        .iter()
        .zip(model.col_labels.labels())
        .map(|(x, &c)| {
            let d = x - means[c];
            norm - 0.5 * d * d / sigma2
        })
        .sum();
    ll + model.priors[r].ln()
}

/// Log of `P(x_new | row cluster r) P(row cluster r)`; `x_new` in raw units.
pub fn component_loglik(x_new: &[f64], model: &BiclusterModel, r: usize) -> Result<f64> {
    if r >= model.row_labels.k() {
        return Err(SubicError::InvalidConfig(format!(
            "row cluster {r} out of range (model has {})",
            model.row_labels.k()
        )));
    }
    let xc = centered(x_new, model)?;
    Ok(loglik_centered(&xc, model, r, effective_sigma2(model)))
}

/// Normalizes log weights with log-sum-exp.
pub fn posterior_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / total).collect()
}

pub fn predict(x_new: &[f64], model: &BiclusterModel) -> Result<Prediction> {
    let xc = centered(x_new, model)?;
    let sigma2 = effective_sigma2(model);
    let log_likelihoods: Vec<f64> = (0..model.row_labels.k())
        .map(|r| loglik_centered(&xc, model, r, sigma2))
        .collect();
    let q = posterior_weights(&log_likelihoods);
    let y_hat = q.iter().zip(&model.y_means).map(|(q, y)| q * y).sum::<f64>();
    if !y_hat.is_finite() {
        return Err(SubicError::Numeric("non-finite prediction".into()));
    }
    Ok(Prediction {
        y_hat,
        q,
        log_likelihoods,
    })
}
