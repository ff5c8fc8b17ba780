use crate::error::{Error, Result};

/// Elementary charge in coulomb (exact in the 2019 SI).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Electron gyromagnetic ratio magnitude, rad·s⁻¹·T⁻¹.
    pub gamma_e: f64,
    /// ħc in eV·m, derived from `hbar` and `c`.
    pub hbar_c: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, c: f64, gamma_e: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("c", c), ("gamma_e", gamma_e)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(PhysicalConstants {
            hbar,
            c,
            gamma_e,
            hbar_c: hbar * c / ELEMENTARY_CHARGE,
        })
    }

    /// CODATA 2018 values.
    pub fn codata() -> Self {
        Self::new(1.054_571_817e-34, 299_792_458.0, 1.760_859_630_23e11)
            .expect("CODATA constants are valid")
    }

    /// Same constants with a different gyromagnetic ratio.
    pub fn with_gamma_e(self, gamma_e: f64) -> Result<Self> {
        Self::new(self.hbar, self.c, gamma_e)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hbar_c_is_consistent() {
        let k = PhysicalConstants::codata();
        let direct = k.hbar * k.c / ELEMENTARY_CHARGE;
        assert!(((k.hbar_c - direct) / direct).abs() < 1e-9);
        // 197.327 eV·nm
        assert!((k.hbar_c - 197.326_980_4e-9).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(PhysicalConstants::new(0.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, -1.0, 1.0).is_err());
        assert!(PhysicalConstants::codata().with_gamma_e(f64::NAN).is_err());
    }
}
