use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{AccumulatedMatrix, FamiliarityMatrix};
use crate::error::ModelError;
use crate::landmark::LandmarkIndex;

/// Density of the zero-mean normal distribution with standard deviation `sigma`.
pub fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Spatially smooths the completed familiarity matrix.
///
/// Each cell becomes the sum over the landmark itself and every column
/// landmark within `eta_dis_km` of it, weighted by the normal density of
/// their distance with `σ₀ = eta_dis_km / 3`. Columns keep the order of `mp`.
pub fn accumulate(mp: &FamiliarityMatrix, index: &LandmarkIndex, eta_dis_km: f64) -> Result<AccumulatedMatrix, ModelError> {
    if !(eta_dis_km > 0.0) || !eta_dis_km.is_finite() {
        return Err(ModelError::InvalidRadius(eta_dis_km));
    }
    let sigma0 = eta_dis_km / 3.0;
    let cols = mp.landmarks();
    let mut column_of = BTreeMap::new();
    for (j, id) in cols.iter().enumerate() {
        let pos = index.position(id).ok_or_else(|| ModelError::UnknownLandmark(id.clone()))?;
        column_of.insert(pos, j);
    }

    // near[k] lists (j, weight) for every column j that column k contributes to.
    let near: Vec<Vec<(usize, f64)>> = cols
        .iter()
        .map(|id| {
            let here = &index.get(id).expect("checked above").location;
            index
                .within(here, eta_dis_km)
                .into_iter()
                .filter_map(|(l, d)| {
                    let j = *column_of.get(&index.position(&l.id)?)?;
                    let d = if &l.id == id { 0.0 } else { d };
                    Some((j, gaussian_pdf(d, sigma0)))
                })
                .collect()
        })
        .collect();

    let mut sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, k, v) in mp.iter() {
        for &(j, weight) in &near[k] {
            *sums.entry((i, j)).or_insert(0.0) += weight * v;
        }
    }
    let mut out = AccumulatedMatrix::new(mp.workers().to_vec(), cols.to_vec());
    for ((i, j), v) in sums {
        out.set(i, j, v);
    }
    Ok(out)
}
