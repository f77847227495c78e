//! Name-keyed registries of interchangeable strategies.
//!
//! Every algorithm family in the crate (root solvers, Lloyd cell updates,
//! codebook seeding, Case-(ii) evaluation routes) exposes a trait with a
//! `name()`; the defaults are registered here so that configuration files and
//! the CLI can pick a variant by string.

use std::collections::BTreeMap;
use std::sync::Arc;

/// Anything that can be registered under a stable name.
pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized> {
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registers `entry`, replacing any previous entry of the same name.
    pub fn register(&mut self, entry: Arc<T>) -> &mut Self {
        self.entries.insert(entry.name(), entry);
        self
    }

    pub fn get(&self, name: &str) -> Option<Arc<T>> {
        self.entries.get(name).cloned()
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized + Named> Default for Registry<T> {
    fn default() -> Self {
        Self::new()
    }
}
