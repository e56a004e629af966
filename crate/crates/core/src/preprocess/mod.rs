//! z-score scaling, one-hot label coding, and SMOTE class balancing.

pub mod labels;
pub mod scaler;
pub mod smote;

pub use labels::{LabelCodec, Subtype, NUM_CLASSES};
pub use scaler::Scaler;
pub use smote::{balance_classes, nearest_neighbors, smote, smote_traced, SmotePlan, SyntheticOrigin};
