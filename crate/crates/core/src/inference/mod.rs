//! Question decoding: beam search, greedy search and output handling.

mod beam;
mod generate;

pub use beam::{
    beam_search, greedy, BeamResult, DecodeConfig, Hypothesis, PenaltyForm, Specials, StepModel,
};
pub use generate::{
    generate, generate_greedy, model_specials, postprocess, read_generations, write_generations,
    AttentionTrace, GeneratedQuestion, Generation, ModelStepper, StepperState,
};
