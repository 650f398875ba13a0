//! The four activeness levels. Level 1 is the most lethargic.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    L1 = 1,
    L2 = 2,
    L3 = 3,
    L4 = 4,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("label {0} is outside 1..=4")]
pub struct LabelOutOfRange(pub i64);

impl Level {
    pub const ALL: [Level; NUM_CLASSES] = [Level::L1, Level::L2, Level::L3, Level::L4];
    pub const LOWEST: Level = Level::L1;

    /// Zero-based class index.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Level {
        Level::ALL[i]
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn tag(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
            Level::L4 => "L4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Level::L1 => "below 25%",
            Level::L2 => "25-50%",
            Level::L3 => "50-75%",
            Level::L4 => "above 75%",
        }
    }
}

impl TryFrom<u8> for Level {
    type Error = LabelOutOfRange;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Level::try_from(v as i64)
    }
}

impl TryFrom<i64> for Level {
    type Error = LabelOutOfRange;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1..=4 => Ok(Level::ALL[v as usize - 1]),
            _ => Err(LabelOutOfRange(v)),
        }
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> u8 {
        l.number()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Level {}", self.number())
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
