use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of named subsystems and their local dimensions.
///
/// Kronecker products nest left to right, so the first label is the most
/// significant digit of a global basis index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.is_empty() {
            return Err(Error::InvalidLayout("no subsystems".into()));
        }
        if dims.len() != labels.len() {
            return Err(Error::InvalidLayout(format!("{} dims but {} labels", dims.len(), labels.len())));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidLayout(format!("subsystem `{}` has dimension 0", labels[pos])));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidLayout(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { dims, labels })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Self {
        Self::new(vec![dim], vec![label.into()]).expect("single-subsystem layout")
    }

    /// `A, B1, …, Bn` with the given system and ancilla dimensions.
    pub fn system_with_ancillas(dim_a: usize, ancilla_dim: usize, n: usize) -> Result<Self> {
        let mut dims = vec![dim_a];
        let mut labels = vec!["A".to_string()];
        for k in 1..=n {
            dims.push(ancilla_dim);
            labels.push(format!("B{k}"));
        }
        Self::new(dims, labels)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.index_of(label).map(|i| self.dims[i])
    }

    /// Concatenation of several layouts; labels must remain unique.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a SubsystemLayout>) -> Result<Self> {
        let mut dims = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            dims.extend_from_slice(&p.dims);
            labels.extend(p.labels.iter().cloned());
        }
        Self::new(dims, labels)
    }

    /// Sub-layout on `keep`, in this layout's order, plus the kept positions.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> Result<(Self, Vec<usize>)> {
        if keep.is_empty() {
            return Err(Error::EmptyInput("kept subsystem list"));
        }
        let mut positions = Vec::with_capacity(keep.len());
        for k in keep {
            let idx = self.index_of(k.as_ref())?;
            if positions.contains(&idx) {
                return Err(Error::InvalidLayout(format!("label `{}` repeated", k.as_ref())));
            }
            positions.push(idx);
        }
        positions.sort_unstable();
        let dims = positions.iter().map(|&i| self.dims[i]).collect();
        let labels = positions.iter().map(|&i| self.labels[i].clone()).collect();
        Ok((Self { dims, labels }, positions))
    }

    pub fn relabel<S: Into<String>>(&self, labels: Vec<S>) -> Result<Self> {
        Self::new(self.dims.clone(), labels)
    }

    /// Mixed-radix digits of a global basis index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn index_from_digits(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels.iter().zip(&self.dims).map(|(l, d)| format!("{l}:{d}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// A split `left | right` of a layout's labels into two non-empty parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    left: Vec<String>,
    right: Vec<String>,
}

impl Bipartition {
    pub fn new<S: AsRef<str>>(layout: &SubsystemLayout, left: &[S]) -> Result<Self> {
        if left.is_empty() {
            return Err(Error::InvalidBipartition("left side is empty".into()));
        }
        let (_, pos) = layout.restrict(left).map_err(|e| Error::InvalidBipartition(e.to_string()))?;
        if pos.len() == layout.len() {
            return Err(Error::InvalidBipartition("right side is empty".into()));
        }
        let left = pos.iter().map(|&i| layout.labels()[i].clone()).collect();
        let right = (0..layout.len()).filter(|i| !pos.contains(i)).map(|i| layout.labels()[i].clone()).collect();
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &[String] {
        &self.left
    }

    pub fn right(&self) -> &[String] {
        &self.right
    }

    /// Checks that this split exhausts exactly the labels of `layout`.
    pub fn check_against(&self, layout: &SubsystemLayout) -> Result<()> {
        let mut all: Vec<&String> = self.left.iter().chain(&self.right).collect();
        all.sort();
        let mut expected: Vec<&String> = layout.labels().iter().collect();
        expected.sort();
        if all != expected {
            return Err(Error::InvalidBipartition(format!("{self} does not split {layout}")));
        }
        Ok(())
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.left.concat(), self.right.concat())
    }
}
