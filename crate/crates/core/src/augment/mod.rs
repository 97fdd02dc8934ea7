//! Seeded Mixup, CutMix, their switched combination, and AugMix.
//!
//! Every transform takes an explicit 64-bit seed. The `*_with_*` variants
//! accept the mixing weight or box directly and draw nothing else
//! differently, which makes endpoint behaviour testable bit for bit.

mod augmix;
mod batch;
mod mixing;

pub use augmix::{augmix, augmix_with_m, sample_dirichlet, AugmixConfig, AugmixOp};
pub use batch::{augment_dataset, read_soft_labels, AugmentOp, AugmentedSet, AUDIT_FILE, SOFT_LABEL_FILE};
pub use mixing::{
    cutmix, cutmix_mixup_switch, cutmix_with_box, mixup, mixup_with_lambda, BoxRegion, MixAudit, MixBranch, MixPair,
    SoftLabel, SwitchConfig,
};
