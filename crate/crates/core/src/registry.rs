//! Name-keyed registries of trait-object implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Anything that can be registered and looked up by name.
pub trait Named {
    fn name(&self) -> &'static str;

    /// Alternative names accepted by [`Registry::get`].
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    fn description(&self) -> &'static str {
        ""
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("name {0:?} is already registered")]
    Duplicate(String),
    #[error("unknown {kind} {name:?} (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<Arc<T>>,
    by_name: BTreeMap<&'static str, usize>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, item: Arc<T>) -> Result<(), RegistryError> {
        let names: Vec<&'static str> = std::iter::once(item.name())
            .chain(item.aliases().iter().copied())
            .collect();
        if let Some(taken) = names.iter().find(|n| self.by_name.contains_key(*n)) {
            return Err(RegistryError::Duplicate(taken.to_string()));
        }
        let slot = self.entries.len();
        self.entries.push(item);
        for name in names {
            self.by_name.insert(name, slot);
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>, RegistryError> {
        self.by_name
            .get(name)
            .map(|&i| Arc::clone(&self.entries[i]))
            .ok_or_else(|| RegistryError::Unknown {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    /// Primary names in registration order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<T>> {
        self.entries.iter()
    }
}

impl<T: ?Sized + Named> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}
