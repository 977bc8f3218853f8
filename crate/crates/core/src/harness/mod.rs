//! Experiment orchestration: the five-step receiver pipeline, Monte-Carlo
//! sweeps over it, the spec-file format and CSV output.

mod experiment;
mod pipeline;
mod specfile;
mod table;

pub use experiment::{grid_label, run_experiment, ExperimentKind, ExperimentSpec};
pub use pipeline::{
    analog_stage, roc_point, run_himap_pipeline, run_pipeline_on, training_covariance, AnalogStage, PhaseErrorModel,
    PipelineConfig, TrialRecord,
};
pub use specfile::{parse_spec, render_spec, KEYS};
pub use table::{emit_csv, ResultTable};
