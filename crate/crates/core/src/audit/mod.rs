//! Label-bias auditing: labeller PPV per protected group and intersection,
//! and classifier calibration against proxy labels.

mod ppv;
mod proxy;

pub use ppv::{audit_dataset, labeller_ppv, Attribute, AuditCell, AuditTable, ALL_LEVELS};
pub use proxy::{proxy_evaluate, proxy_labels, ProxyReport};
