use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One of the three index axes of a 3-tensor.
///
/// Tenvec contractions follow the cyclic order 1 → 2 → 3 → 1: skipping mode
/// `m` contracts `m.next()` with the first vector and `m.next().next()` with
/// the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "usize", try_from = "usize")]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis index.
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    /// One-based mode number as used in the mathematical notation.
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(i: usize) -> Result<Mode> {
        match i {
            0 => Ok(Mode::One),
            1 => Ok(Mode::Two),
            2 => Ok(Mode::Three),
            _ => Err(Error::InvalidArgument(format!(
                "mode index {i} is not in 0..3"
            ))),
        }
    }

    /// Parses a one-based mode number.
    pub fn from_number(n: usize) -> Result<Mode> {
        match n {
            1..=3 => Mode::from_index(n - 1),
            _ => Err(Error::InvalidArgument(format!(
                "mode {n} is not in {{1,2,3}}"
            ))),
        }
    }

    /// Cyclic successor.
    pub fn next(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::Three,
            Mode::Three => Mode::One,
        }
    }

    /// The two contracted modes of a tenvec that skips `self`, in cyclic order.
    pub fn others(self) -> (Mode, Mode) {
        let a = self.next();
        (a, a.next())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl From<Mode> for usize {
    fn from(m: Mode) -> usize {
        m.number()
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;

    fn try_from(n: usize) -> Result<Mode> {
        Mode::from_number(n)
    }
}
