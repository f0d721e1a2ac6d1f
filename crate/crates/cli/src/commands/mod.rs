pub mod augment;
pub mod export;
pub mod finetune;
pub mod optimize;
pub mod preprocess;
pub mod synth;
