use num_complex::Complex64;

use crate::{PhyError, Result};

const SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The unit-energy 4-QAM constellation in Gray-map table order
/// (bit pairs 00, 01, 11, 10).
pub const CONSTELLATION: [Complex64; 4] = [
    Complex64::new(SCALE, SCALE),
    Complex64::new(SCALE, -SCALE),
    Complex64::new(-SCALE, -SCALE),
    Complex64::new(-SCALE, SCALE),
];

/// Gray-mapped 4-QAM, two bits per symbol: the first bit selects the real
/// sign, the second the imaginary sign, `00 -> (1+j)/sqrt(2)`.
pub fn modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(PhyError::InvalidInput(format!(
            "bit string length {} is odd",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|b| **b > 1) {
        return Err(PhyError::InvalidInput(format!("non-binary bit value {b}")));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            Complex64::new(
                (1.0 - 2.0 * f64::from(pair[0])) * SCALE,
                (1.0 - 2.0 * f64::from(pair[1])) * SCALE,
            )
        })
        .collect())
}
