//! Non-intrusive POD–NN surrogate: one perceptron per state component
//! mapping `(ν, Ū, t)` to reduced coefficients.

mod data;
mod mlp;
mod model;

pub use data::{
    build_training_set, input_row, restrict_sets, select_columns, split_parameters, InputScaling, StepWindow, TargetScaling,
    TrainingSet,
};
pub use mlp::{adam_train, AdamOptions, Architecture, Mlp, TrainReport};
pub use model::{
    predict_and_reconstruct, reconstruct, scaled_data, train_component, train_state_components, validation_study,
    write_loss_csv, write_validation_csv, ModelMeta, PodNnModel, PodNnOptions, PointError, ValidationSeries,
    STATE_COMPONENTS,
};
