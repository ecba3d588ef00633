//! Named parameter points with interest / nuisance / known tags.

use std::fmt;

use crate::error::{Error, Result};

/// How a parameter takes part in estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Interest,
    Nuisance,
    /// Held fixed at its value; excluded from scores and information matrices.
    Known,
}

/// A parameter point in a model's canonical parameter order.
#[derive(Clone, PartialEq)]
pub struct ParamVector {
    names: &'static [&'static str],
    values: Vec<f64>,
    roles: Vec<Role>,
}

/// Positions of interest and nuisance parameters within the free coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub interest: Vec<usize>,
    pub nuisance: Vec<usize>,
}

impl ParamVector {
    /// All parameters start as `Interest`.
    pub fn new(names: &'static [&'static str], values: &[f64]) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            names,
            values: values.to_vec(),
            roles: vec![Role::Interest; names.len()],
        })
    }

    pub fn names(&self) -> &'static [&'static str] {
        self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.index_of(name)?])
    }

    pub fn role(&self, name: &str) -> Result<Role> {
        Ok(self.roles[self.index_of(name)?])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.index_of(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn with_value(mut self, name: &str, value: f64) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn with_role(mut self, name: &str, role: Role) -> Result<Self> {
        let i = self.index_of(name)?;
        self.roles[i] = role;
        Ok(self)
    }

    /// Marks `name` as known (fixed at its current value).
    pub fn fix(self, name: &str) -> Result<Self> {
        self.with_role(name, Role::Known)
    }

    pub fn nuisance(self, name: &str) -> Result<Self> {
        self.with_role(name, Role::Nuisance)
    }

    /// Indices (into the full vector) of parameters that are not known.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.roles[i] != Role::Known)
            .collect()
    }

    pub fn free_names(&self) -> Vec<&'static str> {
        self.free_indices().into_iter().map(|i| self.names[i]).collect()
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.free_indices().into_iter().map(|i| self.values[i]).collect()
    }

    pub fn free_dim(&self) -> usize {
        self.roles.iter().filter(|r| **r != Role::Known).count()
    }

    /// Copy with the free coordinates replaced.
    pub fn with_free_values(&self, free: &[f64]) -> Result<Self> {
        let idx = self.free_indices();
        if idx.len() != free.len() {
            return Err(Error::DimensionMismatch {
                expected: idx.len(),
                got: free.len(),
            });
        }
        let mut out = self.clone();
        for (k, i) in idx.into_iter().enumerate() {
            out.values[i] = free[k];
        }
        Ok(out)
    }

    /// Interest / nuisance split of the free coordinates.
    pub fn partition(&self) -> Partition {
        let mut interest = Vec::new();
        let mut nuisance = Vec::new();
        for (pos, i) in self.free_indices().into_iter().enumerate() {
            match self.roles[i] {
                Role::Interest => interest.push(pos),
                Role::Nuisance => nuisance.push(pos),
                Role::Known => unreachable!(),
            }
        }
        Partition { interest, nuisance }
    }
}

impl fmt::Debug for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for i in 0..self.len() {
            let tag = match self.roles[i] {
                Role::Interest => "",
                Role::Nuisance => " (nuisance)",
                Role::Known => " (known)",
            };
            m.entry(&format_args!("{}{}", self.names[i], tag), &self.values[i]);
        }
        m.finish()
    }
}
