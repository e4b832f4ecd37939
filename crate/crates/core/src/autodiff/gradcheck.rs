use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamSet;
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates checked; every coordinate when the model is smaller.
    pub max_coords: usize,
    /// Denominator floor so near-zero gradients compare absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 256,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Parameter and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Compares analytic gradients against central differences.
///
/// `loss` returns the loss value and its analytic gradient per parameter.
pub fn grad_check<F>(loss: F, params: &ParamSet, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet) -> Result<(f64, BTreeMap<String, Matrix>)>,
{
    let (_, analytic) = loss(params)?;
    let coords: Vec<(String, usize)> = params
        .iter()
        .flat_map(|(name, m)| (0..m.as_slice().len()).map(move |i| (name.to_string(), i)))
        .collect();
    let chosen: Vec<usize> = if coords.len() <= cfg.max_coords {
        (0..coords.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut idx = sample(&mut rng, coords.len(), cfg.max_coords).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: chosen.len(),
        worst: None,
    };
    let mut probe = params.clone();
    for &c in &chosen {
        let (name, i) = &coords[c];
        let orig = params.get(name).expect("listed").as_slice()[*i];
        probe.get_mut(name).expect("listed").as_mut_slice()[*i] = orig + cfg.step;
        let (plus, _) = loss(&probe)?;
        probe.get_mut(name).expect("listed").as_mut_slice()[*i] = orig - cfg.step;
        let (minus, _) = loss(&probe)?;
        probe.get_mut(name).expect("listed").as_mut_slice()[*i] = orig;
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let a = analytic.get(name).map_or(0.0, |g| g.as_slice()[*i]);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((name.clone(), *i));
        }
    }
    Ok(report)
}
