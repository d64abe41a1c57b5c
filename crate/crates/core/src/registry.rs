//! Name-keyed factories for interchangeable strategies.
//!
//! A spec string is either `name` or `name:argument`; the argument (for
//! example a path) is handed to the factory.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Factory<T> = fn(Option<&str>) -> Result<Box<T>>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Builds the strategy named by `spec`.
    pub fn create(&self, spec: &str) -> Result<Box<T>> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(arg)
    }
}

/// Rejects an argument for strategies that take none.
pub fn no_argument(kind: &str, arg: Option<&str>) -> Result<()> {
    match arg {
        Some(a) => Err(Error::Config(format!("{kind} takes no argument, got `{a}`"))),
        None => Ok(()),
    }
}

/// Requires an argument for strategies that need one.
pub fn required_argument<'a>(kind: &str, arg: Option<&'a str>) -> Result<&'a str> {
    match arg {
        Some(a) if !a.is_empty() => Ok(a),
        _ => Err(Error::Config(format!("{kind} needs an argument (`{kind}:<value>`)"))),
    }
}
