//! Random neuron masks drawn at initialization.
//!
//! [`generate_group_tickets`] gives each agent its own structured mask over
//! the shared root network. [`generate_unstructured_masks`] and
//! [`generate_single_ticket`] are the per-weight and single-mask ablations.

mod file;
mod masks;
mod schedule;

pub use file::MaskFile;
pub use masks::{
    expand_to_weight_mask, generate_group_tickets, generate_single_ticket,
    generate_unstructured_masks, mask_overlap_stats, LayerOverlap, NeuronMask, NeuronMaskGroup,
    WeightMask,
};
pub use schedule::PruningSchedule;
