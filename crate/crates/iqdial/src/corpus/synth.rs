// placeholder until the environment module exists
pub use placeholder::*;
mod placeholder {
    #[derive(Clone, Debug)]
    pub struct SynthConfig;
    pub fn synthesize_corpus() {}
}
