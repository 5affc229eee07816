//! Packed batch words.
//!
//! Every data path of the logic processor carries `2m` bits, one bit per
//! sample of the batch. Bit `j` of a word is the Boolean value of sample `j`.

use std::fmt;

use rand::Rng;

/// A `width`-bit packed Boolean vector. Bits above `width` are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BatchWord {
    width: usize,
    limbs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WordParseError {
    #[error("expected {expected} hex digits, found {found}")]
    Length { expected: usize, found: usize },
    #[error("invalid hex digit `{0}`")]
    Digit(char),
    #[error("value does not fit in {0} bits")]
    Overflow(usize),
}

fn limb_count(width: usize) -> usize {
    width.div_ceil(64).max(1)
}

impl BatchWord {
    pub fn zeros(width: usize) -> Self {
        BatchWord {
            width,
            limbs: vec![0; limb_count(width)],
        }
    }

    pub fn ones(width: usize) -> Self {
        let mut w = BatchWord {
            width,
            limbs: vec![u64::MAX; limb_count(width)],
        };
        w.mask();
        w
    }

    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        let mut w = BatchWord {
            width,
            limbs: (0..limb_count(width)).map(|_| rng.gen()).collect(),
        };
        w.mask();
        w
    }

    /// Builds a word from the low `width` bits of `value`.
    pub fn from_u64(width: usize, value: u64) -> Self {
        let mut w = Self::zeros(width);
        w.limbs[0] = value;
        w.mask();
        w
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bit(&self, j: usize) -> bool {
        j < self.width && (self.limbs[j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, j: usize, value: bool) {
        assert!(
            j < self.width,
            "bit {j} out of range for width {}",
            self.width
        );
        let mask = 1u64 << (j % 64);
        if value {
            self.limbs[j / 64] |= mask;
        } else {
            self.limbs[j / 64] &= !mask;
        }
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    fn mask(&mut self) {
        let rem = self.width % 64;
        let full = self.width / 64;
        if self.width == 0 {
            self.limbs.iter_mut().for_each(|l| *l = 0);
            return;
        }
        if rem != 0 {
            self.limbs[full] &= (1u64 << rem) - 1;
        }
        for l in self.limbs.iter_mut().skip(full + usize::from(rem != 0)) {
            *l = 0;
        }
    }

    /// Lane-wise combination of two equal-width words.
    pub fn zip_with(&self, other: &BatchWord, f: impl Fn(u64, u64) -> u64) -> BatchWord {
        debug_assert_eq!(self.width, other.width);
        let mut w = BatchWord {
            width: self.width,
            limbs: self
                .limbs
                .iter()
                .zip(&other.limbs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        };
        w.mask();
        w
    }

    pub fn map(&self, f: impl Fn(u64) -> u64) -> BatchWord {
        let mut w = BatchWord {
            width: self.width,
            limbs: self.limbs.iter().map(|&a| f(a)).collect(),
        };
        w.mask();
        w
    }

    /// Number of hex digits used by [`BatchWord::to_hex`].
    pub fn hex_digits(width: usize) -> usize {
        width.div_ceil(4).max(1)
    }

    /// Big-endian hex rendering, zero padded to `ceil(width / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = Self::hex_digits(self.width);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let bit = d * 4;
            let nibble = (self.limbs[bit / 64] >> (bit % 64)) & 0xf;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    pub fn from_hex(width: usize, text: &str) -> Result<Self, WordParseError> {
        let text = text.strip_prefix("0x").unwrap_or(text);
        let expected = Self::hex_digits(width);
        let found = text.chars().count();
        if found != expected {
            return Err(WordParseError::Length { expected, found });
        }
        let mut w = Self::zeros(width);
        for (i, c) in text.chars().rev().enumerate() {
            let v = c.to_digit(16).ok_or(WordParseError::Digit(c))? as u64;
            let bit = i * 4;
            if bit / 64 < w.limbs.len() {
                w.limbs[bit / 64] |= v << (bit % 64);
            }
        }
        let before = w.clone();
        w.mask();
        if w != before {
            return Err(WordParseError::Overflow(width));
        }
        Ok(w)
    }
}

impl fmt::Display for BatchWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ones_is_masked() {
        let w = BatchWord::ones(8);
        assert_eq!(w.limbs(), &[0xff]);
        assert_eq!(w.to_hex(), "ff");
        assert_eq!(BatchWord::ones(6).to_hex(), "3f");
    }

    #[test]
    fn hex_rejects_wrong_length_and_overflow() {
        assert!(matches!(
            BatchWord::from_hex(8, "fff"),
            Err(WordParseError::Length { .. })
        ));
        assert!(matches!(
            BatchWord::from_hex(6, "7f"),
            Err(WordParseError::Overflow(6))
        ));
        assert!(matches!(
            BatchWord::from_hex(8, "g0"),
            Err(WordParseError::Digit('g'))
        ));
    }

    proptest! {
        #[test]
        fn hex_round_trip(width in 1usize..200, seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = BatchWord::random(width, &mut rng);
            let back = BatchWord::from_hex(width, &w.to_hex()).unwrap();
            prop_assert_eq!(back, w);
        }
    }
}
