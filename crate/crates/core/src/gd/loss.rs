use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Exponential,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Logistic, LossKind::Exponential];

    /// ℓ(z); the logistic branch uses `max(z,0) + ln(1+e^{−|z|})`.
    pub fn value(self, z: f64) -> f64 {
        match self {
            LossKind::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            LossKind::Exponential => z.exp(),
        }
    }

    /// ℓ′(z)
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            LossKind::Logistic => sigmoid(z),
            LossKind::Exponential => z.exp(),
        }
    }

    /// ℓ″(z)
    pub fn second(self, z: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                let s = sigmoid(z);
                s * sigmoid(-z)
            }
            LossKind::Exponential => z.exp(),
        }
    }

    /// (ℓ(z), ℓ′(z)) sharing one exponential.
    pub(crate) fn value_deriv(self, z: f64) -> (f64, f64) {
        match self {
            LossKind::Logistic => {
                let e = (-z.abs()).exp();
                let d = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                (z.max(0.0) + e.ln_1p(), d)
            }
            LossKind::Exponential => {
                let e = z.exp();
                (e, e)
            }
        }
    }

    /// The `z` with ℓ(z) = `level`, for `level > 0`.
    pub fn inverse(self, level: f64) -> f64 {
        match self {
            LossKind::Logistic => level.exp_m1().ln(),
            LossKind::Exponential => level.ln(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Logistic => "logistic",
            LossKind::Exponential => "exponential",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "logistic" | "log" => Ok(LossKind::Logistic),
            "exponential" | "exp" => Ok(LossKind::Exponential),
            other => Err(Error::Usage(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// η_j = 1
    ConstantOne,
    /// η_j = 1/√(j+1)
    InvSqrt,
}

impl Schedule {
    pub const ALL: [Schedule; 2] = [Schedule::ConstantOne, Schedule::InvSqrt];

    pub fn eta(self, j: usize) -> f64 {
        match self {
            Schedule::ConstantOne => 1.0,
            Schedule::InvSqrt => 1.0 / ((j + 1) as f64).sqrt(),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::ConstantOne => "constant_one",
            Schedule::InvSqrt => "inv_sqrt",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "constant_one" | "constant" => Ok(Schedule::ConstantOne),
            "inv_sqrt" => Ok(Schedule::InvSqrt),
            other => Err(Error::Usage(format!("unknown schedule '{other}'"))),
        }
    }
}
