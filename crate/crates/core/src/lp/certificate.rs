//! Farkas certificates and their independent verification.
//!
//! A certificate holds one multiplier per row. Aggregating the rows with
//! those multipliers yields `g·x <= h` with `g = Σ y_i a_i`, `h = Σ y_i b_i`,
//! which is implied by the system when `y_i >= 0` on `<=` rows and
//! `y_i <= 0` on `>=` rows. The system is infeasible when even the smallest
//! value of `g·x` over the variable bounds exceeds `h`.

use thiserror::Error;

use super::{LinearProgram, Sense};

#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CertificateError {
    #[error("certificate has {found} multipliers for {expected} rows")]
    Dimension { expected: usize, found: usize },
}

impl FarkasCertificate {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            multipliers: self.multipliers.iter().map(|y| y * factor).collect(),
        }
    }

    /// Smallest value of the aggregated left-hand side over the variable
    /// bounds minus the aggregated right-hand side. Positive means the
    /// system is contradicted; `-inf` when the bounds allow no contradiction.
    pub fn contradiction(&self, lp: &LinearProgram) -> f64 {
        let mut g = vec![0.0; lp.num_vars()];
        let mut h = 0.0;
        let mut scale: f64 = 0.0;
        for (row, &y) in lp.rows.iter().zip(&self.multipliers) {
            if y == 0.0 {
                continue;
            }
            h += y * row.rhs;
            for &(v, a) in &row.coeffs {
                g[v.0] += y * a;
                scale = scale.max((y * a).abs());
            }
        }
        // Cancellation noise in g is treated as zero.
        let zero = 1e-9 * scale.max(1.0);
        let mut lowest = 0.0;
        for (var, &gj) in lp.variables.iter().zip(&g) {
            if gj.abs() <= zero {
                continue;
            }
            if gj > 0.0 {
                lowest += gj * var.lower;
            } else if var.upper.is_finite() {
                lowest += gj * var.upper;
            } else {
                return f64::NEG_INFINITY;
            }
        }
        lowest - h
    }

    pub fn signs_ok(&self, lp: &LinearProgram) -> bool {
        lp.rows
            .iter()
            .zip(&self.multipliers)
            .all(|(row, &y)| match row.sense {
                Sense::Le => y >= 0.0,
                Sense::Ge => y <= 0.0,
                Sense::Eq => y.is_finite(),
            })
    }
}

/// True iff the multipliers have the right signs and the aggregated row
/// contradicts the bounds by more than `tol_cert`. Recomputed from the model
/// alone.
pub fn verify_certificate(
    lp: &LinearProgram,
    cert: &FarkasCertificate,
    tol_cert: f64,
) -> Result<bool, CertificateError> {
    if cert.multipliers.len() != lp.num_rows() {
        return Err(CertificateError::Dimension {
            expected: lp.num_rows(),
            found: cert.multipliers.len(),
        });
    }
    Ok(cert.signs_ok(lp) && cert.contradiction(lp) > tol_cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contradictory_pair() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        lp.add_row("le", vec![(x, 1.0)], Sense::Le, 1.0);
        lp.add_row("ge", vec![(x, 1.0)], Sense::Ge, 2.0);
        lp
    }

    #[test]
    fn textbook_pair_verifies() {
        let lp = contradictory_pair();
        let cert = FarkasCertificate {
            multipliers: vec![1.0, -1.0],
        };
        assert_eq!(verify_certificate(&lp, &cert, 1e-6), Ok(true));
        assert!((cert.contradiction(&lp) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_multipliers_prove_nothing() {
        let lp = contradictory_pair();
        let cert = FarkasCertificate {
            multipliers: vec![0.0, 0.0],
        };
        assert_eq!(verify_certificate(&lp, &cert, 1e-6), Ok(false));
    }

    #[test]
    fn flipped_multiplier_fails() {
        let lp = contradictory_pair();
        let cert = FarkasCertificate {
            multipliers: vec![1.0, 1.0],
        };
        assert_eq!(verify_certificate(&lp, &cert, 1e-6), Ok(false));
    }

    #[test]
    fn dimension_mismatch() {
        let lp = contradictory_pair();
        let cert = FarkasCertificate {
            multipliers: vec![1.0],
        };
        assert_eq!(
            verify_certificate(&lp, &cert, 1e-6),
            Err(CertificateError::Dimension {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn upper_bounds_can_carry_the_contradiction() {
        // x + y >= 3 with x, y in [0, 1].
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 1.0);
        let y = lp.add_var("y", 0.0, 1.0);
        lp.add_row("r", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let cert = FarkasCertificate {
            multipliers: vec![-1.0],
        };
        assert_eq!(verify_certificate(&lp, &cert, 1e-6), Ok(true));
        lp.variables[1].upper = f64::INFINITY;
        assert_eq!(verify_certificate(&lp, &cert, 1e-6), Ok(false));
    }
}
