use std::collections::HashMap;

use rand::Rng;

use crate::autodiff::{Mat, ParamId, Real};
use crate::error::{Error, Result};

/// Which optimizer owns an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Generator,
    Discriminator,
    /// Non-trainable state such as running normalization statistics.
    Buffer,
}

impl Group {
    pub fn tag(self) -> &'static str {
        match self {
            Group::Generator => "gen",
            Group::Discriminator => "disc",
            Group::Buffer => "buf",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "gen" => Some(Group::Generator),
            "disc" => Some(Group::Discriminator),
            "buf" => Some(Group::Buffer),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry<S: Real> {
    name: String,
    group: Group,
    value: Mat<S>,
}

/// Named parameter arrays with fixed shapes.
#[derive(Debug, Clone)]
pub struct ParameterStore<S: Real> {
    entries: Vec<Entry<S>>,
    index: HashMap<String, ParamId>,
    version: u64,
}

impl<S: Real> Default for ParameterStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> ParameterStore<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new(), index: HashMap::new(), version: 0 }
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Mat<S>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        if !value.all_finite() {
            return Err(Error::Config(format!("parameter {name} is not finite")));
        }
        let id = ParamId(self.entries.len());
        self.index.insert(name.clone(), id);
        self.entries.push(Entry { name, group, value });
        Ok(id)
    }

    /// Uniform fan-in scaled weights, `U(-√(6/fan_in), √(6/fan_in))`.
    pub fn add_kaiming(
        &mut self,
        name: impl Into<String>,
        group: Group,
        fan_in: usize,
        fan_out: usize,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let bound = gain * (6.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| S::from_f64_lossy(rng.gen_range(-bound..=bound))).collect();
        self.add(name, group, Mat::from_vec(fan_in, fan_out, data))
    }

    pub fn add_bias(
        &mut self,
        name: impl Into<String>,
        group: Group,
        fan_in: usize,
        width: usize,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..width).map(|_| S::from_f64_lossy(rng.gen_range(-bound..=bound))).collect();
        self.add(name, group, Mat::from_vec(1, width, data))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn get(&self, id: ParamId) -> &Mat<S> {
        &self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.entries[id.0].group
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn ids_in(&self, group: Group) -> Vec<ParamId> {
        self.ids().filter(|&id| self.group(id) == group).collect()
    }

    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.ids().filter(|&id| self.name(id).starts_with(prefix)).collect()
    }

    /// Replaces a value in place; the shape must not change.
    pub fn set(&mut self, id: ParamId, value: Mat<S>) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}: stored {:?}, new {:?}",
                entry.name,
                entry.value.shape(),
                value.shape()
            )));
        }
        entry.value = value;
        self.version += 1;
        Ok(())
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat<S> {
        self.version += 1;
        &mut self.entries[id.0].value
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.all_finite())
    }

    /// First non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries.iter().find(|e| !e.value.all_finite()).map(|e| e.name.as_str())
    }

    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.group != Group::Buffer).map(|e| e.value.len()).sum()
    }

    /// Same names and shapes in another precision.
    pub fn cast<T: Real>(&self) -> ParameterStore<T> {
        ParameterStore {
            entries: self
                .entries
                .iter()
                .map(|e| Entry { name: e.name.clone(), group: e.group, value: e.value.cast() })
                .collect(),
            index: self.index.clone(),
            version: self.version,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_unique_and_shapes_fixed() {
        let mut store = ParameterStore::<f32>::new();
        let id = store.add("w", Group::Generator, Mat::zeros(2, 3)).unwrap();
        assert!(store.add("w", Group::Generator, Mat::zeros(1, 1)).is_err());
        assert!(store.set(id, Mat::zeros(3, 2)).is_err());
        let v0 = store.version();
        store.set(id, Mat::filled(2, 3, 1.0)).unwrap();
        assert!(store.version() > v0);
    }

    #[test]
    fn kaiming_bound() {
        let mut store = ParameterStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let id = store.add_kaiming("w", Group::Generator, 24, 10, 1.0, &mut rng).unwrap();
        let bound = (6.0f64 / 24.0).sqrt();
        assert!(store.get(id).data.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn rejects_non_finite() {
        let mut store = ParameterStore::<f64>::new();
        assert!(store.add("w", Group::Generator, Mat::filled(1, 1, f64::NAN)).is_err());
    }
}
