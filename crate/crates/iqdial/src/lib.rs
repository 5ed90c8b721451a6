pub mod corpus;
pub mod dialogue;
pub mod metrics;
pub mod nn;
pub mod policy;
