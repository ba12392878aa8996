//! Sensor textualization, ECG preparation, prompt rendering, LLM
//! record/replay and evaluation for LLM-on-sensor-data experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod dsp;
pub mod ecg;
pub mod experiment;
pub mod figure;
pub mod llm;
pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod qrs;
pub mod synth;
pub mod sensor;
pub mod wfdb;
