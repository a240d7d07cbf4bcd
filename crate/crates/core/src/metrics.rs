//! Score vectors, per-row summary statistics and the exact hypervolume indicator.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{HvoError, Result};

/// Largest objective count accepted by [`hypervolume_indicator`].
pub const MAX_HV_DIMENSIONS: usize = 8;

/// Per-dimension quality scores of one output, one entry per evaluation dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HvoError::EmptyScoreVector);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(HvoError::NonFinite(format!("score value {v}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ScoreVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Reference point for hypervolume computation. Must be weakly dominated by
/// every point it is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferencePoint(Vec<f64>);

impl ReferencePoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HvoError::InvalidReferencePoint("empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HvoError::InvalidReferencePoint(
                "non-finite coordinate".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn origin(dimensions: usize) -> Self {
        Self(vec![0.0; dimensions])
    }

    /// Per-dimension minimum of `points` shifted down by `delta`, i.e. a
    /// point slightly worse than the nadir of the set.
    pub fn nadir_offset<P: AsRef<[f64]>>(points: &[P], delta: f64) -> Result<Self> {
        let first = points.first().ok_or(HvoError::EmptyGroup)?.as_ref();
        let mut nadir = first.to_vec();
        for p in points {
            let p = p.as_ref();
            check_dims(nadir.len(), p.len())?;
            for (n, &v) in nadir.iter_mut().zip(p) {
                *n = n.min(v);
            }
        }
        Self::new(nadir.into_iter().map(|v| v - delta).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ReferencePoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(HvoError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Arithmetic mean of the dimension scores (the "Overall" column).
pub fn overall_score(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(HvoError::EmptyScoreVector);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (divisor `M - 1`) across the dimension scores.
pub fn dimension_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(HvoError::StdUndefined(values.len()));
    }
    let mean = overall_score(values)?;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Mean and population standard deviation of one column of a point set.
pub(crate) fn mean_and_population_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Exact hypervolume (Lebesgue measure of the union of boxes `[reference, p]`)
/// under maximization.
///
/// Two objectives use a direct sweep; higher counts slice along the last
/// objective and recurse on the slabs. Dominated and duplicate points do not
/// change the result. An empty point set has zero hypervolume.
pub fn hypervolume_indicator<P: AsRef<[f64]>>(points: &[P], reference: &[f64]) -> Result<f64> {
    let dims = reference.len();
    if dims == 0 {
        return Err(HvoError::InvalidReferencePoint("empty".into()));
    }
    if dims > MAX_HV_DIMENSIONS {
        return Err(HvoError::InvalidConfig(format!(
            "hypervolume supports at most {MAX_HV_DIMENSIONS} dimensions, got {dims}"
        )));
    }
    if reference.iter().any(|v| !v.is_finite()) {
        return Err(HvoError::InvalidReferencePoint(
            "non-finite coordinate".into(),
        ));
    }
    let mut pts: Vec<&[f64]> = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref();
        check_dims(dims, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(HvoError::NonFinite("hypervolume point".into()));
        }
        if p.iter().zip(reference).any(|(v, r)| v < r) {
            return Err(HvoError::InvalidReferencePoint(format!(
                "reference {reference:?} is not weakly dominated by {p:?}"
            )));
        }
        pts.push(p);
    }
    Ok(hv_recursive(pts, reference, dims))
}

/// Lexicographic descending order; breaks ties on the slicing coordinate.
fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Drops dominated points and duplicates.
fn nondominated(mut pts: Vec<&[f64]>) -> Vec<&[f64]> {
    pts.sort_by(|a, b| lex_desc(a, b));
    let mut front: Vec<&[f64]> = Vec::with_capacity(pts.len());
    // In lexicographic descending order no later point can dominate an earlier one.
    for p in pts {
        if !front.iter().any(|q| weakly_dominates(q, p)) {
            front.push(p);
        }
    }
    front
}

fn hv_recursive(mut pts: Vec<&[f64]>, reference: &[f64], dims: usize) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    match dims {
        1 => pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max) - reference[0],
        2 => {
            pts.sort_by(|a, b| lex_desc(a, b));
            let mut area = 0.0;
            let mut best_y = reference[1];
            for p in pts {
                if p[1] > best_y {
                    area += (p[0] - reference[0]) * (p[1] - best_y);
                    best_y = p[1];
                }
            }
            area
        }
        _ => {
            // The 1-D and 2-D cases skip dominated points by construction;
            // filtering here keeps the slab recursion small.
            let mut pts = nondominated(pts);
            let last = dims - 1;
            pts.sort_by(|a, b| {
                b[last]
                    .partial_cmp(&a[last])
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| lex_desc(&a[..last], &b[..last]))
            });
            let mut volume = 0.0;
            for i in 0..pts.len() {
                let lower = pts.get(i + 1).map_or(reference[last], |p| p[last]);
                let thickness = pts[i][last] - lower;
                if thickness <= 0.0 {
                    continue;
                }
                let slab: Vec<&[f64]> = pts[..=i].iter().map(|p| &p[..last]).collect();
                volume += hv_recursive(slab, &reference[..last], last) * thickness;
            }
            volume
        }
    }
}
