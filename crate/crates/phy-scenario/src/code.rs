use crate::{PhyError, Result, CODED_BITS, FRAME_BITS};

/// Rate-1/2 tail-biting convolutional code over one 8-bit message.
///
/// Generator polynomials are given in octal with the least significant bit
/// tapping the current input; the default (7, 5) code has constraint length
/// 3. Tail biting seeds the encoder state with the last `K - 1` message
/// bits, so 8 information bits map to exactly 16 coded bits with no tail
/// overhead and the codeword is a circular convolution of the message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCode {
    g1: u32,
    g2: u32,
    constraint_len: usize,
}

impl ConvCode {
    pub fn new(g1_octal: u32, g2_octal: u32) -> Result<Self> {
        let g1 = from_octal(g1_octal)?;
        let g2 = from_octal(g2_octal)?;
        let constraint_len = (32 - g1.leading_zeros()).max(32 - g2.leading_zeros()) as usize;
        if constraint_len < 2 || constraint_len > FRAME_BITS {
            return Err(PhyError::InvalidInput(format!(
                "constraint length {constraint_len} outside 2..={FRAME_BITS}"
            )));
        }
        if g1 & 1 == 0 && g2 & 1 == 0 {
            return Err(PhyError::InvalidInput(
                "at least one generator must tap the current input".into(),
            ));
        }
        Ok(Self {
            g1,
            g2,
            constraint_len,
        })
    }

    /// The (7, 5) octal constraint-length-3 code.
    pub fn default_rate_half() -> Self {
        Self::new(7, 5).expect("(7,5) is a valid generator pair")
    }

    pub fn generators_octal(&self) -> (u32, u32) {
        (to_octal(self.g1), to_octal(self.g2))
    }

    /// Encode the 8 message bits (most significant bit first) into 16 coded
    /// bits, two per input bit.
    pub fn encode(&self, message: u8) -> Vec<u8> {
        let k = self.constraint_len;
        let mask = (1u32 << k) - 1;
        let bits: Vec<u32> = (0..FRAME_BITS)
            .map(|i| u32::from(message >> (FRAME_BITS - 1 - i)) & 1)
            .collect();

        // Tail-biting preload: bit j of the window holds the input from
        // j steps ago, so the history starts as the message tail.
        let mut window: u32 = 0;
        for j in 1..k {
            window |= bits[FRAME_BITS - j] << (j - 1);
        }

        let mut out = Vec::with_capacity(CODED_BITS);
        for &b in &bits {
            window = ((window << 1) | b) & mask;
            out.push(((window & self.g1).count_ones() & 1) as u8);
            out.push(((window & self.g2).count_ones() & 1) as u8);
        }
        out
    }
}

fn from_octal(value: u32) -> Result<u32> {
    let mut out = 0u32;
    let mut shift = 0;
    let mut v = value;
    loop {
        let digit = v % 10;
        if digit > 7 {
            return Err(PhyError::InvalidInput(format!(
                "{value} is not a valid octal literal"
            )));
        }
        out |= digit << shift;
        v /= 10;
        if v == 0 {
            break;
        }
        shift += 3;
    }
    if out == 0 {
        return Err(PhyError::InvalidInput("generator must be nonzero".into()));
    }
    Ok(out)
}

fn to_octal(mut taps: u32) -> u32 {
    let mut out = 0;
    let mut place = 1;
    while taps != 0 {
        out += (taps & 7) * place;
        taps >>= 3;
        place *= 10;
    }
    out
}
