use std::sync::{Arc, RwLock};

use super::RolloutError;
use crate::ace::EnsemblePolicy;

/// An immutable published policy.
#[derive(Debug)]
pub struct PolicySnapshot {
    /// 0 for the initial policy, then one more per publish.
    pub version: u64,
    pub policy: EnsemblePolicy,
}

/// Where the trainer publishes and workers pick up policies. Readers get
/// a whole snapshot behind an `Arc`, never a partially written one.
#[derive(Debug)]
pub struct SnapshotSource {
    current: RwLock<Arc<PolicySnapshot>>,
}

impl SnapshotSource {
    pub fn new(initial: EnsemblePolicy) -> Self {
        Self {
            current: RwLock::new(Arc::new(PolicySnapshot {
                version: 0,
                policy: initial,
            })),
        }
    }

    pub fn latest(&self) -> Arc<PolicySnapshot> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn publish(&self, policy: EnsemblePolicy) -> Result<Arc<PolicySnapshot>, RolloutError> {
        if !policy.is_finite() {
            return Err(RolloutError::NonFiniteSnapshot(format!(
                "{} has non-finite parameters",
                policy.label()
            )));
        }
        let mut slot = self.current.write().unwrap_or_else(|e| e.into_inner());
        let snapshot = Arc::new(PolicySnapshot {
            version: slot.version + 1,
            policy,
        });
        *slot = Arc::clone(&snapshot);
        Ok(snapshot)
    }
}
