//! Annotations, training-sample generation and synthetic scenes.

mod annotations;
mod samples;
mod synth;

pub use annotations::{load_annotations, parse_annotations, Annotation};
pub use samples::{
    augment, generate_samples, render_source, rotate_patch, Provenance, Sample, SampleParams, SampleSet, SampleSource,
};
pub use synth::{synth_scene, DecoyTexture, SceneSpec, SceneValidation, SyntheticScene, TrapType};
