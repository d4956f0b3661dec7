use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::pod::{ReducedBasis, SnapshotMeta, SnapshotSet};

/// Per-feature affine map sending the training minimum to −1 and the
/// maximum to +1. Constant features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl InputScaling {
    pub fn fit(x: &DenseMatrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Invalid("cannot fit input scaling to no samples".into()));
        }
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for r in 0..x.rows() {
            for (j, &v) in x.row(r).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    2.0 * (v - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply_rows(&self, x: &DenseMatrix) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = (0..x.rows()).map(|r| self.apply(x.row(r))).collect();
        DenseMatrix::from_fn(x.rows(), x.cols(), |r, c| rows[r][c])
    }

    /// True if any feature of `x` lies outside the training box.
    pub fn extrapolates(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .any(|(&v, (&lo, &hi))| v < lo - 1e-12 * lo.abs().max(1.0) || v > hi + 1e-12 * hi.abs().max(1.0))
    }
}

/// Per-output standardisation (zero mean, unit variance on the training
/// targets). Outputs with zero variance keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TargetScaling {
    pub fn fit(y: &DenseMatrix) -> Result<Self> {
        if y.rows() == 0 {
            return Err(Error::Invalid("cannot fit target scaling to no samples".into()));
        }
        let n = y.rows() as f64;
        let mut mean = vec![0.0; y.cols()];
        for r in 0..y.rows() {
            for (m, v) in mean.iter_mut().zip(y.row(r)) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; y.cols()];
        for r in 0..y.rows() {
            for ((s, v), m) in var.iter_mut().zip(y.row(r)).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var
            .iter()
            .map(|&s| if s > 0.0 { s.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn forward(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Inclusive range of time-step indices used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWindow {
    pub first: usize,
    pub last: usize,
}

impl StepWindow {
    /// Steps `1..=m`.
    pub fn full(m: usize) -> Self {
        Self { first: 1, last: m }
    }

    /// Steps `2..=m`.
    pub fn without_first(m: usize) -> Self {
        Self { first: 2, last: m }
    }

    /// Steps `skip+1..=m`.
    pub fn restricted(m: usize, skip: usize) -> Self {
        Self { first: skip + 1, last: m }
    }

    pub fn contains(&self, step: usize) -> bool {
        (self.first..=self.last).contains(&step)
    }
}

/// Random split of parameter indices `0..n` into `n_train` training and
/// `n − n_train` test indices (both sorted).
pub fn split_parameters(n: usize, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train > n || n_train == 0 {
        return Err(Error::Invalid(format!("cannot pick {n_train} training parameters out of {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `(ν, Ū, t)` inputs and reduced-coefficient targets of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    /// Raw inputs, one row per sample.
    pub inputs: DenseMatrix,
    /// Reduced coefficients `ΦᵀX s`, one row per sample.
    pub targets: DenseMatrix,
    pub input_scaling: InputScaling,
    pub target_scaling: TargetScaling,
    /// Snapshot column of every sample.
    pub columns: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn scaled_inputs(&self) -> DenseMatrix {
        self.input_scaling.apply_rows(&self.inputs)
    }

    pub fn scaled_targets(&self) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = (0..self.targets.rows())
            .map(|r| self.target_scaling.forward(self.targets.row(r)))
            .collect();
        DenseMatrix::from_fn(self.targets.rows(), self.targets.cols(), |r, c| rows[r][c])
    }
}

/// Network input for one snapshot.
pub fn input_row(meta: &SnapshotMeta) -> Vec<f64> {
    let mut x = meta.params.clone();
    x.push(meta.time);
    x
}

/// Columns of `set` whose parameter is one of `params` and whose step lies
/// in `window`.
pub fn select_columns(set: &SnapshotSet, params: &[Vec<f64>], window: StepWindow) -> Vec<usize> {
    (0..set.cols())
        .filter(|&j| {
            let m = &set.meta[j];
            window.contains(m.step) && params.iter().any(|p| p == &m.params)
        })
        .collect()
}

/// Training set from the snapshot columns of the given parameters inside
/// `window`, with targets obtained by projecting onto `basis`.
pub fn build_training_set(
    set: &SnapshotSet,
    basis: &ReducedBasis,
    params: &[Vec<f64>],
    window: StepWindow,
) -> Result<TrainingSet> {
    check_len("basis / snapshot rows", basis.full_dim(), set.rows())?;
    let columns = select_columns(set, params, window);
    if columns.is_empty() {
        return Err(Error::Invalid(format!(
            "no {} snapshots in steps {}..={} for the chosen parameters",
            set.component, window.first, window.last
        )));
    }
    let inputs: Vec<Vec<f64>> = columns.iter().map(|&j| input_row(&set.meta[j])).collect();
    let targets: Vec<Vec<f64>> = columns
        .iter()
        .map(|&j| basis.project(&set.column(j)))
        .collect::<Result<_>>()?;
    let inputs = DenseMatrix::from_rows(&inputs)?;
    let targets = DenseMatrix::from_rows(&targets)?;
    Ok(TrainingSet {
        input_scaling: InputScaling::fit(&inputs)?,
        target_scaling: TargetScaling::fit(&targets)?,
        inputs,
        targets,
        columns,
    })
}

/// Every set restricted to the columns of `params` inside `window`, for
/// building window-specific POD bases.
pub fn restrict_sets(sets: &[SnapshotSet], params: &[Vec<f64>], window: StepWindow) -> Result<Vec<SnapshotSet>> {
    sets.iter()
        .map(|s| s.select(|m| window.contains(m.step) && params.iter().any(|p| p == &m.params)))
        .collect()
}
