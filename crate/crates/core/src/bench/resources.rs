//! Additive resource model: base plus one H-over-L delta per engine, fitted
//! per resource dimension by least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::BenchError;
use crate::types::{Combo, Engine, Resources, Tier};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceModel {
    pub base: Resources,
    /// Cost of choosing H over L for each engine. May be negative.
    pub delta: BTreeMap<Engine, Resources>,
    /// Observed minus predicted, per input row.
    pub fit_residuals: Vec<Resources>,
    /// Coefficient of determination per dimension, in
    /// [`Resources::DIMENSIONS`] order.
    pub r_squared: [f64; 4],
}

fn design_row(combo: Combo) -> [f64; 5] {
    let h = |e: Engine| if combo.tier(e) == Tier::H { 1.0 } else { 0.0 };
    [1.0, h(Engine::Od), h(Engine::Asr), h(Engine::Tc), h(Engine::Gr)]
}

impl ResourceModel {
    pub fn predicted(&self, combo: Combo) -> Resources {
        Engine::ALL.iter().fold(self.base, |acc, e| {
            if combo.tier(*e) == Tier::H {
                acc + self.delta[e]
            } else {
                acc
            }
        })
    }

    /// Splits the model into non-negative per-tier costs: a positive delta
    /// is charged to H, a negative one to L, and the base absorbs the shift.
    /// Returns `(base, per-engine (H cost, L cost))`; predictions are unchanged.
    pub fn tier_costs(&self) -> (Resources, BTreeMap<Engine, (Resources, Resources)>) {
        let mut base = self.base.to_array();
        let mut costs = BTreeMap::new();
        for e in Engine::ALL {
            let d = self.delta[&e].to_array();
            let mut h = [0.0; 4];
            let mut l = [0.0; 4];
            for k in 0..4 {
                if d[k] >= 0.0 {
                    h[k] = d[k];
                } else {
                    l[k] = -d[k];
                    base[k] += d[k];
                }
            }
            costs.insert(e, (Resources::from_array(h), Resources::from_array(l)));
        }
        (Resources::from_array(base), costs)
    }
}

/// Least-squares fit of `resource = base + Σ delta_e · [tier_e = H]`.
pub fn fit_resource_model(rows: &[(Combo, Resources)]) -> Result<ResourceModel, BenchError> {
    let x = DMatrix::from_fn(rows.len(), 5, |i, j| design_row(rows[i].0)[j]);
    let svd = x.clone().svd(true, true);
    let rank = svd.rank(1e-9);
    if rank < 5 {
        return Err(BenchError::Rank { rows: rows.len(), rank });
    }

    let mut coef = [[0.0; 5]; 4];
    let mut r_squared = [0.0; 4];
    let mut residuals = vec![[0.0; 4]; rows.len()];
    for dim in 0..4 {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|(_, r)| r.to_array()[dim]));
        let b = svd.solve(&y, 1e-12).map_err(|e| BenchError::Fit(e.to_string()))?;
        let fitted = &x * &b;
        let mean = y.mean();
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for i in 0..rows.len() {
            let r = y[i] - fitted[i];
            residuals[i][dim] = r;
            ss_res += r * r;
            ss_tot += (y[i] - mean).powi(2);
        }
        r_squared[dim] = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res < 1e-12 { 1.0 } else { 0.0 };
        for j in 0..5 {
            coef[dim][j] = b[j];
        }
    }

    let column = |j: usize| Resources::from_array([coef[0][j], coef[1][j], coef[2][j], coef[3][j]]);
    let delta = Engine::ALL.iter().enumerate().map(|(k, e)| (*e, column(k + 1))).collect();
    Ok(ResourceModel {
        base: column(0),
        delta,
        fit_residuals: residuals.into_iter().map(Resources::from_array).collect(),
        r_squared,
    })
}
