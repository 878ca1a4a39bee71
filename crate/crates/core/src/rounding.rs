//! Dependent rounding over a list of bounded values.
//!
//! One left-to-right pass pairs the current entry with a single "pending"
//! entry and randomly pushes mass between the two so that at least one of
//! them lands on `0` or on the cap. The sum of the list is preserved exactly
//! and every entry is preserved in expectation. At the end, `⌊x/m⌋` entries
//! equal the cap `m`, at most one holds the remainder `x − ⌊x/m⌋·m`, and the
//! rest are zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every floating comparison in the crate.
pub const TOLERANCE: f64 = 1e-9;

/// A quantity the rounding pass can move around.
///
/// Implemented for `f64` (probabilities, with snapping to `0`/cap) and `u64`
/// (multiplicities, exact integer arithmetic).
pub trait Amount: Copy + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn is_zero(self) -> bool;
    fn plus(self, other: Self) -> Self;
    fn minus(self, other: Self) -> Self;
    fn fits(self, cap: Self) -> bool;
    fn share(part: Self, whole: Self) -> f64;
    fn snap(self, cap: Self) -> Self;
}

impl Amount for f64 {
    fn zero() -> Self {
        0.0
    }

    fn is_zero(self) -> bool {
        self == 0.0
    }

    fn plus(self, other: Self) -> Self {
        self + other
    }

    fn minus(self, other: Self) -> Self {
        self - other
    }

    fn fits(self, cap: Self) -> bool {
        self <= cap + TOLERANCE
    }

    fn share(part: Self, whole: Self) -> f64 {
        part / whole
    }

    fn snap(self, cap: Self) -> Self {
        if self.abs() <= TOLERANCE {
            0.0
        } else if (self - cap).abs() <= TOLERANCE {
            cap
        } else {
            self
        }
    }
}

impl Amount for u64 {
    fn zero() -> Self {
        0
    }

    fn is_zero(self) -> bool {
        self == 0
    }

    fn plus(self, other: Self) -> Self {
        self + other
    }

    fn minus(self, other: Self) -> Self {
        self - other
    }

    fn fits(self, cap: Self) -> bool {
        self <= cap
    }

    fn share(part: Self, whole: Self) -> f64 {
        part as f64 / whole as f64
    }

    fn snap(self, _cap: Self) -> Self {
        self
    }
}

/// Values to round and the cap they are rounded towards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingInput {
    pub values: Vec<f64>,
    pub cap: f64,
}

impl RoundingInput {
    pub fn new(values: Vec<f64>, cap: f64) -> Result<Self> {
        let input = RoundingInput { values, cap };
        validate_real(&input.values, input.cap)?;
        Ok(input)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Rounded values; `remainder_index` points at the single entry strictly
/// between zero and the cap, if there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutput<A = f64> {
    pub values: Vec<A>,
    pub remainder_index: Option<usize>,
}

impl<A: Amount> RoundingOutput<A> {
    fn from_values(values: Vec<A>, cap: A) -> Self {
        let remainder_index = values
            .iter()
            .position(|&v| !v.is_zero() && v < cap);
        RoundingOutput {
            values,
            remainder_index,
        }
    }
}

impl RoundingOutput<f64> {
    /// Positions whose rounded value is non-zero.
    pub fn nonzero_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

fn validate_real(values: &[f64], cap: f64) -> Result<()> {
    if !cap.is_finite() || cap <= 0.0 {
        return Err(Error::invalid(format!("rounding cap must be positive, got {cap}")));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid(format!("value {i} is not finite")));
        }
        if v < 0.0 {
            return Err(Error::invalid(format!("value {i} = {v} is negative")));
        }
        if v > cap + TOLERANCE {
            return Err(Error::invalid(format!("value {i} = {v} exceeds cap {cap}")));
        }
    }
    Ok(())
}

/// The rounding pass itself, in place, with no validation.
pub(crate) fn round_in_place<A: Amount, R: Rng + ?Sized>(values: &mut [A], cap: A, rng: &mut R) {
    for v in values.iter_mut() {
        *v = v.snap(cap);
    }
    if values.len() < 2 {
        return;
    }
    let mut pending = 0;
    for i in 1..values.len() {
        let a = values[i];
        let b = values[pending];
        if a.is_zero() && b.is_zero() {
            continue;
        }
        let u: f64 = rng.random();
        let total = a.plus(b);
        if total.fits(cap) {
            let total = total.snap(cap);
            if u < A::share(a, total) {
                values[i] = total;
                values[pending] = A::zero();
                pending = i;
            } else {
                values[i] = A::zero();
                values[pending] = total;
            }
        } else {
            let over = total.minus(cap).snap(cap);
            let room_b = cap.minus(b);
            let room = room_b.plus(cap.minus(a));
            // Both entries already at the cap: nothing to move.
            if room.is_zero() || u < A::share(room_b, room) {
                values[i] = cap;
                values[pending] = over;
            } else {
                values[i] = over;
                values[pending] = cap;
                pending = i;
            }
        }
    }
}

/// Validates `values` against `cap` and rounds them in place.
pub(crate) fn round_slice<R: Rng + ?Sized>(values: &mut [f64], cap: f64, rng: &mut R) -> Result<()> {
    validate_real(values, cap)?;
    round_in_place(values, cap, rng);
    Ok(())
}

/// Rounds `input.values` to `{0, cap}` plus at most one remainder.
pub fn dependent_round<R: Rng + ?Sized>(input: &RoundingInput, rng: &mut R) -> Result<RoundingOutput> {
    validate_real(&input.values, input.cap)?;
    let mut values = input.values.clone();
    round_in_place(&mut values, input.cap, rng);
    Ok(RoundingOutput::from_values(values, input.cap))
}

/// Rounding of probabilities. With `cap = 1` and an integral total `k`,
/// exactly `k` entries come out as `1`.
pub fn round_prob<R: Rng + ?Sized>(probs: &[f64], cap: f64, rng: &mut R) -> Result<RoundingOutput> {
    if cap > 1.0 {
        return Err(Error::invalid(format!("probability cap must be at most 1, got {cap}")));
    }
    let input = RoundingInput::new(probs.to_vec(), cap)?;
    dependent_round(&input, rng)
}

/// Rounding of natural numbers towards `cap`, in exact integer arithmetic.
pub fn round_nat<R: Rng + ?Sized>(counts: &[u64], cap: u64, rng: &mut R) -> Result<RoundingOutput<u64>> {
    if cap == 0 {
        return Err(Error::invalid("rounding cap must be at least 1"));
    }
    if let Some((i, c)) = counts.iter().enumerate().find(|(_, &c)| c > cap) {
        return Err(Error::invalid(format!("count {i} = {c} exceeds cap {cap}")));
    }
    let mut values = counts.to_vec();
    round_in_place(&mut values, cap, rng);
    Ok(RoundingOutput::from_values(values, cap))
}
