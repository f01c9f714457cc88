//! Dense univariate polynomials used by every fitted regression row.

use serde::{Deserialize, Serialize};

/// Polynomial stored lowest power first: `[c0, c1, c2, ...]` means
/// `c0 + c1*x + c2*x^2 + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        Self(coeffs.into())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        eval_poly(&self.0, x)
    }

    /// First derivative at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
    }

    /// Second derivative at `x`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + (i * (i - 1)) as f64 * c)
    }
}

/// Evaluates `sum c_i x^i` with `coeffs[0]` as the constant term.
/// An empty slice evaluates to zero.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_term_at_zero() {
        let p = Polynomial::new([0.996, -1.467, 0.8, -0.145]);
        assert_eq!(p.eval(0.0), 0.996);
    }

    #[test]
    fn derivatives_of_cubic() {
        // 1 + 2x + 3x^2 + 4x^3
        let p = Polynomial::new([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.eval(2.0), 1.0 + 4.0 + 12.0 + 32.0);
        assert_eq!(p.derivative(2.0), 2.0 + 12.0 + 48.0);
        assert_eq!(p.second_derivative(2.0), 6.0 + 48.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn linear_has_zero_curvature() {
        let p = Polynomial::new([0.5918, 0.07873]);
        assert_eq!(p.second_derivative(1.3), 0.0);
        assert_eq!(p.derivative(7.0), 0.07873);
    }
}
