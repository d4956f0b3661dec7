use std::io::Write;

use serde::{Deserialize, Serialize};

use super::data::{build_training_set, input_row, select_columns, InputScaling, StepWindow, TargetScaling};
use super::mlp::{adam_train, AdamOptions, Architecture, Mlp, TrainReport};
use crate::error::{check_len, Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::ns::TransientConfig;
use crate::par;
use crate::pod::{Component, PodBases, ReducedBasis, SnapshotSet};

/// Components learned by the surrogate.
pub const STATE_COMPONENTS: [Component; 4] = [Component::U1, Component::P1, Component::U2, Component::P2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PodNnOptions {
    pub architecture: Architecture,
    pub adam: AdamOptions,
    pub seed: u64,
}

impl Default for PodNnOptions {
    fn default() -> Self {
        Self {
            architecture: Architecture::Base,
            adam: AdamOptions::default(),
            seed: 0,
        }
    }
}

/// Trained network of one component with its input and output scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct PodNnModel {
    pub component: Component,
    pub net: Mlp,
    pub input_scaling: InputScaling,
    pub target_scaling: TargetScaling,
}

/// Sidecar data of a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub component: Component,
    pub input_scaling: InputScaling,
    pub target_scaling: TargetScaling,
}

impl PodNnModel {
    /// Reduced coefficients at `(params, t)`.
    pub fn predict(&self, params: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut x = params.to_vec();
        x.push(t);
        if self.input_scaling.extrapolates(&x) {
            log::debug!("{}: input {x:?} lies outside the training box", self.component);
        }
        let y = self.net.forward(&self.input_scaling.apply(&x))?;
        Ok(self.target_scaling.inverse(&y))
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            component: self.component,
            input_scaling: self.input_scaling.clone(),
            target_scaling: self.target_scaling.clone(),
        }
    }

    pub fn from_parts(net: Mlp, meta: ModelMeta) -> Result<Self> {
        check_len("model input scaling", net.d_in(), meta.input_scaling.min.len())?;
        check_len("model target scaling", net.d_out(), meta.target_scaling.mean.len())?;
        Ok(Self {
            component: meta.component,
            net,
            input_scaling: meta.input_scaling,
            target_scaling: meta.target_scaling,
        })
    }
}

/// Trains one component on the given parameters and step window.
pub fn train_component(
    set: &SnapshotSet,
    basis: &ReducedBasis,
    params: &[Vec<f64>],
    window: StepWindow,
    opts: &PodNnOptions,
) -> Result<(PodNnModel, TrainReport)> {
    let ts = build_training_set(set, basis, params, window)?;
    let sizes = opts.architecture.sizes(ts.inputs.cols(), ts.targets.cols());
    let mut net = Mlp::new(&sizes, opts.seed.wrapping_add(set.component.index() as u64))?;
    let report = adam_train(&mut net, &ts.scaled_inputs(), &ts.scaled_targets(), &opts.adam)
        .map_err(|e| Error::Invalid(format!("training {}: {e}", set.component)))?;
    Ok((
        PodNnModel {
            component: set.component,
            net,
            input_scaling: ts.input_scaling,
            target_scaling: ts.target_scaling,
        },
        report,
    ))
}

/// Trains the four state components concurrently. `sets` is indexed by
/// [`Component::index`].
pub fn train_state_components(
    sets: &[SnapshotSet],
    bases: &PodBases,
    params: &[Vec<f64>],
    window: StepWindow,
    opts: &PodNnOptions,
) -> Result<Vec<(PodNnModel, TrainReport)>> {
    par::map_slice(&STATE_COMPONENTS, |&c| {
        train_component(&sets[c.index()], bases.get(c), params, window, opts)
    })
    .into_iter()
    .collect()
}

/// Full-order field of `component` from reduced coefficients: `α l + Φ c`
/// for velocities, `Φ c` otherwise.
pub fn reconstruct(component: Component, coeffs: &[f64], bases: &PodBases, alpha: f64) -> Result<Vec<f64>> {
    let mut v = bases.get(component).reconstruct(coeffs)?;
    if let Some(i) = velocity_subdomain(component) {
        for (vi, li) in v.iter_mut().zip(&bases.liftings[i]) {
            *vi += alpha * li;
        }
    }
    Ok(v)
}

fn velocity_subdomain(c: Component) -> Option<usize> {
    match c {
        Component::U1 => Some(0),
        Component::U2 => Some(1),
        _ => None,
    }
}

/// Predicted `[(u₁, p₁), (u₂, p₂)]` at `(params, t)` without any
/// optimisation. `models` must hold u1, p1, u2, p2.
pub fn predict_and_reconstruct(
    models: &[PodNnModel],
    bases: &PodBases,
    transient: &TransientConfig,
    params: &[f64],
    t: f64,
) -> Result<[(Vec<f64>, Vec<f64>); 2]> {
    let find = |c: Component| {
        models
            .iter()
            .find(|m| m.component == c)
            .ok_or_else(|| Error::Invalid(format!("no model for {c}")))
    };
    let alpha = amplitude_for(transient, params, t);
    let field = |c: Component| reconstruct(c, &find(c)?.predict(params, t)?, bases, alpha);
    Ok([
        (field(Component::U1)?, field(Component::P1)?),
        (field(Component::U2)?, field(Component::P2)?),
    ])
}

fn amplitude_for(transient: &TransientConfig, params: &[f64], t: f64) -> f64 {
    let mut cfg = *transient;
    if let Some(&u) = params.get(1) {
        cfg.ubar = u;
    }
    cfg.amplitude(t)
}

/// Error of one test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub params: Vec<f64>,
    pub step: usize,
    pub time: f64,
    /// Relative L² error of the reconstruction.
    pub relative_l2: f64,
    /// Relative error of the reconstruction in the POD inner product.
    pub relative_x: f64,
    /// Relative error of the orthogonal projection in the POD inner product.
    pub projection_x: f64,
}

/// Mean relative error over the test parameters at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSeries {
    pub component: Component,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub points: Vec<PointError>,
}

impl ValidationSeries {
    pub fn overall_mean(&self) -> f64 {
        if self.mean_error.is_empty() {
            return 0.0;
        }
        self.mean_error.iter().sum::<f64>() / self.mean_error.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.mean_error.iter().fold(0.0, |m, &v| m.max(v))
    }
}

fn norm_sq(x: &SparseMatrix, v: &[f64]) -> f64 {
    x.bilinear(v, v).max(0.0)
}

/// For every model, relative errors of the reconstruction against the
/// stored snapshots of the `test` parameters inside `window`, averaged over
/// the parameters at each step. `l2[c.index()]` is the L² mass matrix of
/// component `c`.
pub fn validation_study(
    models: &[PodNnModel],
    sets: &[SnapshotSet],
    bases: &PodBases,
    l2: &[SparseMatrix],
    transient: &TransientConfig,
    test: &[Vec<f64>],
    window: StepWindow,
) -> Result<Vec<ValidationSeries>> {
    let mut out = Vec::with_capacity(models.len());
    for model in models {
        let c = model.component;
        let set = &sets[c.index()];
        let basis = bases.get(c);
        let m = &l2[c.index()];
        let x = basis
            .inner_product
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("{c} basis has no inner product")))?;
        let cols = select_columns(set, test, window);
        if cols.is_empty() {
            return Err(Error::Invalid(format!("no {c} test snapshots in the window")));
        }
        let lifting = velocity_subdomain(c).map(|i| &bases.liftings[i]);
        let points: Vec<Result<PointError>> = par::map_slice(&cols, |&j| {
            let meta = &set.meta[j];
            let s0 = set.column(j);
            let input = input_row(meta);
            let (params, t) = (&input[..input.len() - 1], meta.time);
            let pred = basis.reconstruct(&model.predict(params, t)?)?;
            let proj = basis.reconstruct(&basis.project(&s0)?)?;
            let mut full = s0.clone();
            if let Some(l) = lifting {
                let alpha = amplitude_for(transient, params, t);
                full.iter_mut().zip(l).for_each(|(v, li)| *v += alpha * li);
            }
            let d: Vec<f64> = pred.iter().zip(&s0).map(|(a, b)| a - b).collect();
            let dp: Vec<f64> = proj.iter().zip(&s0).map(|(a, b)| a - b).collect();
            let rel = |num: f64, den: f64| if den > 1e-24 { (num / den).sqrt() } else { num.sqrt() };
            Ok(PointError {
                params: meta.params.clone(),
                step: meta.step,
                time: t,
                relative_l2: rel(norm_sq(m, &d), norm_sq(m, &full)),
                relative_x: rel(norm_sq(x, &d), norm_sq(x, &s0)),
                projection_x: rel(norm_sq(x, &dp), norm_sq(x, &s0)),
            })
        });
        let points = points.into_iter().collect::<Result<Vec<_>>>()?;
        let mut steps: Vec<usize> = points.iter().map(|p| p.step).collect();
        steps.sort_unstable();
        steps.dedup();
        let mut times = Vec::with_capacity(steps.len());
        let mut mean_error = Vec::with_capacity(steps.len());
        for &n in &steps {
            let at: Vec<&PointError> = points.iter().filter(|p| p.step == n).collect();
            times.push(at[0].time);
            mean_error.push(at.iter().map(|p| p.relative_l2).sum::<f64>() / at.len() as f64);
        }
        out.push(ValidationSeries {
            component: c,
            steps,
            times,
            mean_error,
            points,
        });
    }
    Ok(out)
}

/// CSV with one row per step and one column per component.
pub fn write_validation_csv<W: Write>(mut w: W, series: &[ValidationSeries]) -> Result<()> {
    let Some(first) = series.first() else {
        return Err(Error::Invalid("no validation series".into()));
    };
    write!(w, "step,time")?;
    for s in series {
        check_len("validation series length", first.steps.len(), s.steps.len())?;
        write!(w, ",{}", s.component)?;
    }
    writeln!(w)?;
    for k in 0..first.steps.len() {
        write!(w, "{},{}", first.steps[k], first.times[k])?;
        for s in series {
            write!(w, ",{:.10e}", s.mean_error[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Loss history CSV (`epoch,loss`).
pub fn write_loss_csv<W: Write>(mut w: W, report: &TrainReport) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (e, l) in report.loss_history.iter().enumerate() {
        writeln!(w, "{e},{l:.10e}")?;
    }
    Ok(())
}

/// Scaled inputs and targets as used by the trainer, for diagnostics.
pub fn scaled_data(set: &SnapshotSet, basis: &ReducedBasis, params: &[Vec<f64>], window: StepWindow) -> Result<(DenseMatrix, DenseMatrix)> {
    let ts = build_training_set(set, basis, params, window)?;
    Ok((ts.scaled_inputs(), ts.scaled_targets()))
}
