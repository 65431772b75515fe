use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A scalar density `t ↦ F(t)`, `t = ½‖R‖² ≥ 0`, with its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    /// `F(t) = √(1+2t) − 1`.
    BornInfeld,
    /// `F(t) = t`.
    YangMills,
    /// `F(t) = ½ (1+2t)^((p−2)/2)`, the integrand of the `F_p` functional.
    Power { p: f64 },
    /// `F(t) = ((1+2t)^(p/2) − 1)/p`, whose Euler–Lagrange operator is
    /// `δᴰ((1+‖R‖²)^((p−2)/2) R)`.
    PowerEl { p: f64 },
}

impl Density {
    pub fn value(&self, t: f64) -> f64 {
        let u = 1.0 + 2.0 * t;
        match *self {
            // cancellation-free forms of √u − 1 and (u^(p/2) − 1)/p
            Density::BornInfeld => 2.0 * t / (u.sqrt() + 1.0),
            Density::YangMills => t,
            Density::Power { p } => 0.5 * u.powf(0.5 * (p - 2.0)),
            Density::PowerEl { p } => (0.5 * p * (2.0 * t).ln_1p()).exp_m1() / p,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        let u = 1.0 + 2.0 * t;
        match *self {
            Density::BornInfeld => 1.0 / u.sqrt(),
            Density::YangMills => 1.0,
            Density::Power { p } => 0.5 * (p - 2.0) * u.powf(0.5 * (p - 4.0)),
            Density::PowerEl { p } => u.powf(0.5 * (p - 2.0)),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        let u = 1.0 + 2.0 * t;
        match *self {
            Density::BornInfeld => -u.powf(-1.5),
            Density::YangMills => 0.0,
            Density::Power { p } => 0.5 * (p - 2.0) * (p - 4.0) * u.powf(0.5 * (p - 6.0)),
            Density::PowerEl { p } => (p - 2.0) * u.powf(0.5 * (p - 4.0)),
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::BornInfeld => write!(f, "born-infeld"),
            Density::YangMills => write!(f, "yang-mills"),
            Density::Power { p } => write!(f, "power:{p}"),
            Density::PowerEl { p } => write!(f, "power-el:{p}"),
        }
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let parse_p = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|p| p.is_finite())
                .ok_or_else(|| Error::Domain(format!("bad exponent in density {s:?}")))
        };
        match s {
            "born-infeld" | "bi" => Ok(Density::BornInfeld),
            "yang-mills" | "ym" => Ok(Density::YangMills),
            _ => {
                if let Some(p) = s.strip_prefix("power-el:") {
                    Ok(Density::PowerEl { p: parse_p(p)? })
                } else if let Some(p) = s.strip_prefix("power:") {
                    Ok(Density::Power { p: parse_p(p)? })
                } else {
                    Err(Error::Domain(format!("unknown density {s:?}")))
                }
            }
        }
    }
}
