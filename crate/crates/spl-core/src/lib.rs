//! Simulation laboratory for stable parallel looped (SPL) dynamical
//! networks: activation graphs and their loop/component structure, seeded
//! discrete-time dynamics, fixed-set extraction and growth, membrane
//! detection, prediction-graph continuity, and the physical/chemical SPL
//! family with its rewrite and persistence experiments.

pub mod chemical;
pub mod claim3;
pub mod continuity;
pub mod dynamics;
pub mod fixedset;
pub mod fixtures;
pub mod graph;
pub mod growth;
pub mod membrane;
pub mod network;
pub mod physical;

pub use dynamics::{DynParams, FeedbackRouting, Stimulus, Trace};
pub use fixedset::{FixedSet, FixedSetId, FixedSetKind, FixedSetRegistry, StimulusFamily};
pub use network::{Loop, LoopId, Network, NetworkSpec, NodeId};
