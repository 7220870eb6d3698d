use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lp_norm, C64};

/// Norm on the finite-dimensional target space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "lowercase")]
pub enum Norm {
    L2,
    Lp { p: f64 },
}

/// A finite-dimensional Banach space `(ℂ^dim, ‖·‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    pub norm: Norm,
}

impl SpaceSpec {
    pub fn l2(dim: usize) -> Self {
        Self { dim, norm: Norm::L2 }
    }

    /// `ℓᵖ` with `1 ≤ p < ∞`; `p = 2` collapses to [`Norm::L2`].
    pub fn lp(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("space dimension must be positive".into()));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p must lie in [1, inf), got {p}")));
        }
        if p == 2.0 {
            return Ok(Self::l2(dim));
        }
        Ok(Self { dim, norm: Norm::Lp { p } })
    }

    pub fn with_dim(&self, dim: usize) -> Self {
        Self { dim, norm: self.norm }
    }

    pub fn p(&self) -> f64 {
        match self.norm {
            Norm::L2 => 2.0,
            Norm::Lp { p } => p,
        }
    }

    pub fn is_hilbert(&self) -> bool {
        matches!(self.norm, Norm::L2)
    }

    pub fn norm_of(&self, v: impl IntoIterator<Item = C64>) -> f64 {
        lp_norm(v, self.p())
    }

    /// `k = m^{|1/2 − 1/p|}`, so that `‖x‖_p ≤ k‖x‖₂` and `‖x‖₂ ≤ k‖x‖_p`.
    pub fn l2_equivalence(&self) -> f64 {
        (self.dim as f64).powf((0.5 - 1.0 / self.p()).abs())
    }

    pub fn label(&self) -> String {
        match self.norm {
            Norm::L2 => "l2".to_string(),
            Norm::Lp { p } => format!("l{p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_exponents() {
        assert!(SpaceSpec::lp(2, 0.5).is_err());
        assert!(SpaceSpec::lp(2, f64::INFINITY).is_err());
        assert!(SpaceSpec::lp(0, 3.0).is_err());
        assert_eq!(SpaceSpec::lp(3, 2.0).unwrap(), SpaceSpec::l2(3));
    }

    #[test]
    fn equivalence_factor_brackets_norms() {
        let s = SpaceSpec::lp(4, 4.0).unwrap();
        let v = [C64::new(1.0, 0.0), C64::new(-2.0, 1.0), C64::new(0.5, 0.0), C64::new(0.0, 3.0)];
        let p = s.norm_of(v);
        let two = SpaceSpec::l2(4).norm_of(v);
        let k = s.l2_equivalence();
        assert!(p <= k * two + 1e-12 && two <= k * p + 1e-12);
    }
}
