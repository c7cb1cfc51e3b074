//! Initial quasi-Newton matrices `D`: the identity or a positive diagonal.

#[derive(Debug, Clone, Default)]
pub enum Metric {
    #[default]
    Identity,
    Diagonal(Vec<f64>),
}

impl Metric {
    pub fn is_identity(&self) -> bool {
        matches!(self, Metric::Identity)
    }

    pub fn diag(&self, j: usize) -> f64 {
        match self {
            Metric::Identity => 1.0,
            Metric::Diagonal(d) => d[j],
        }
    }

    /// `D v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Metric::Identity => v.to_vec(),
            Metric::Diagonal(d) => v.iter().zip(d).map(|(a, b)| a * b).collect(),
        }
    }

    /// `D⁻¹ v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Metric::Identity => v.to_vec(),
            Metric::Diagonal(d) => v.iter().zip(d).map(|(a, b)| a / b).collect(),
        }
    }
}
