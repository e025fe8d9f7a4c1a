use crate::error::{Error, Result};

/// One of the two style families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    One,
    Two,
}

impl Domain {
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Domain::One),
            2 => Ok(Domain::Two),
            other => Err(Error::InvalidDomain(other)),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Domain::One => 1,
            Domain::Two => 2,
        }
    }

    pub fn index(self) -> usize {
        self.tag() as usize - 1
    }

    pub fn other(self) -> Self {
        match self {
            Domain::One => Domain::Two,
            Domain::Two => Domain::One,
        }
    }

    pub const BOTH: [Domain; 2] = [Domain::One, Domain::Two];
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.tag())
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Domain-shared content representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentCode(Vec<f64>);

impl ContentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "content code")?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(1 - t)·self + t·other`
    pub fn lerp(&self, other: &ContentCode, t: f64) -> Result<ContentCode> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(ContentCode(self.0.iter().zip(&other.0).map(|(a, b)| (1.0 - t) * a + t * b).collect()))
    }
}

/// Domain-specific style representation. Codes built without a domain tag
/// are rejected by decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleCode {
    values: Vec<f64>,
    domain: Option<Domain>,
}

impl StyleCode {
    pub fn new(values: Vec<f64>, domain: Domain) -> Result<Self> {
        check_finite(&values, "style code")?;
        Ok(Self { values, domain: Some(domain) })
    }

    pub fn untagged(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "style code")?;
        Ok(Self { values, domain: None })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-layer `(γ, β)` pairs for the decoder's adaptive layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaNormParams {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdaNormParams {
    /// `γ = 1`, `β = 0` for each channel count.
    pub fn identity(channels: &[usize]) -> Self {
        Self { layers: channels.iter().map(|&c| (vec![1.0; c], vec![0.0; c])).collect() }
    }

    pub fn channels(&self) -> Vec<usize> {
        self.layers.iter().map(|(g, _)| g.len()).collect()
    }

    pub fn validate(&self, channels: &[usize]) -> Result<()> {
        if self.layers.len() != channels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} adaptive layers supplied, decoder has {}",
                self.layers.len(),
                channels.len()
            )));
        }
        for ((g, b), &c) in self.layers.iter().zip(channels) {
            if g.len() != c || b.len() != c {
                return Err(Error::ShapeMismatch(format!(
                    "adaptive layer of {c} channels got gamma {} / beta {}",
                    g.len(),
                    b.len()
                )));
            }
            check_finite(g, "gamma")?;
            check_finite(b, "beta")?;
        }
        Ok(())
    }
}
