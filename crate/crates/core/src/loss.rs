//! Margin losses used for decoding and training diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WltlsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Exponential,
    Squared,
    Log,
    Hinge,
    SquaredHinge,
    /// `(1 - sign z) / 2` with value 0.5 at zero; loss-based decoding with it
    /// is Hamming decoding.
    HammingStep,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Exponential,
        LossKind::Squared,
        LossKind::Log,
        LossKind::Hinge,
        LossKind::SquaredHinge,
        LossKind::HammingStep,
    ];

    /// Evaluates the loss. Callers guarantee `z` is finite; see [`loss`].
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            LossKind::Exponential => (-z).exp(),
            LossKind::Squared => (1.0 - z) * (1.0 - z),
            LossKind::Log => {
                // ln(1 + e^{-z}) = max(-z, 0) + ln(1 + e^{-|z|})
                (-z).max(0.0) + (-z.abs()).exp().ln_1p()
            }
            LossKind::Hinge => (1.0 - z).max(0.0),
            LossKind::SquaredHinge => {
                let h = (1.0 - z).max(0.0);
                h * h
            }
            LossKind::HammingStep => {
                if z > 0.0 {
                    0.0
                } else if z < 0.0 {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }

    pub fn at_zero(self) -> f64 {
        match self {
            LossKind::Log => std::f64::consts::LN_2,
            LossKind::HammingStep => 0.5,
            _ => 1.0,
        }
    }

    /// Stable one-byte tag used by the model file.
    pub fn tag(self) -> u8 {
        match self {
            LossKind::Exponential => 0,
            LossKind::Squared => 1,
            LossKind::Log => 2,
            LossKind::Hinge => 3,
            LossKind::SquaredHinge => 4,
            LossKind::HammingStep => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        LossKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Exponential => "exp",
            LossKind::Squared => "squared",
            LossKind::Log => "log",
            LossKind::Hinge => "hinge",
            LossKind::SquaredHinge => "squaredhinge",
            LossKind::HammingStep => "hamming",
        }
    }
}

/// Checked loss evaluation.
pub fn loss(kind: LossKind, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(WltlsError::NonFinite(z));
    }
    Ok(kind.eval(z))
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = WltlsError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                WltlsError::InvalidParameter(format!(
                    "unknown loss `{}` (expected exp|squared|log|hinge|squaredhinge|hamming)",
                    s
                ))
            })
    }
}
