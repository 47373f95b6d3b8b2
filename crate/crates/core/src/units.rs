//! Parsing of quantities with unit suffixes and of angles written as
//! fractions of π. Everything is converted to SI on the way in.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::physics::ELECTRON_MASS;
use crate::physics::ELEMENTARY_CHARGE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Frequency,
    Charge,
    Mass,
    FieldGradient,
    Dimensionless,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[
                ("m", 1.0),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("μm", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
            ],
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("μs", 1e-6),
                ("µs", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
            ],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Charge => &[("C", 1.0), ("e", ELEMENTARY_CHARGE)],
            Dimension::Mass => &[("kg", 1.0), ("g", 1e-3), ("me", ELECTRON_MASS)],
            Dimension::FieldGradient => &[("T/m", 1.0)],
            Dimension::Dimensionless => &[],
        }
    }
}

/// Parse `"100um"`, `"1 ns"`, `"-3e"`, `"1e-14kg"` or a bare number (already SI).
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return finite(v, text);
    }
    // longest suffix first so "ms" wins over "s" and "me" over "e"
    let mut units: Vec<_> = dim.units().to_vec();
    units.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
    for (suffix, scale) in units {
        if let Some(num) = t.strip_suffix(suffix) {
            let num = num.trim_end();
            let v = if num.is_empty() || num == "+" {
                1.0
            } else if num == "-" {
                -1.0
            } else {
                match num.parse::<f64>() {
                    Ok(v) => v,
                    Err(_) => continue,
                }
            };
            return finite(apply_scale(v, scale), text);
        }
    }
    let known: Vec<_> = dim.units().iter().map(|(s, _)| *s).collect();
    Err(Error::domain(format!(
        "cannot parse `{text}` as {dim:?} (units: {})",
        if known.is_empty() {
            "none".to_string()
        } else {
            known.join(", ")
        }
    )))
}

// Dividing by an exact power of ten keeps "50um" at the f64 nearest 5e-5.
fn apply_scale(v: f64, scale: f64) -> f64 {
    if scale < 1.0 {
        let inv = (1.0 / scale).round();
        if 10f64.powi(inv.log10().round() as i32) == inv {
            return v / inv;
        }
    }
    v * scale
}

fn finite(v: f64, text: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(format!("`{text}` is not finite")))
    }
}

/// Parse an angle: decimal radians or a multiple of π such as `pi/4`,
/// `3pi/4`, `2*pi/3`, `π/2`, `-pi`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return finite(v, text);
    }
    let bad = || Error::domain(format!("cannot parse `{text}` as an angle"));
    let (pos, pi_len) = t
        .find("pi")
        .map(|p| (p, 2))
        .or_else(|| t.find('π').map(|p| (p, 'π'.len_utf8())))
        .ok_or_else(bad)?;
    let coef = t[..pos].trim().trim_end_matches('*').trim();
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = t[pos + pi_len..].trim();
    let den = if rest.is_empty() {
        1.0
    } else {
        let d = rest.strip_prefix('/').ok_or_else(bad)?.trim();
        d.parse::<f64>().map_err(|_| bad())?
    };
    if den == 0.0 {
        return Err(bad());
    }
    finite(coef * PI / den, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn lengths_and_times() {
        assert_eq!(parse_quantity("100um", Dimension::Length).unwrap(), 1e-4);
        assert_eq!(parse_quantity("100 μm", Dimension::Length).unwrap(), 1e-4);
        assert_eq!(parse_quantity("1e-4", Dimension::Length).unwrap(), 1e-4);
        assert_eq!(parse_quantity("60ns", Dimension::Time).unwrap(), 6e-8);
        assert_eq!(parse_quantity("100ms", Dimension::Time).unwrap(), 0.1);
        assert_eq!(parse_quantity("1kHz", Dimension::Frequency).unwrap(), 1e3);
        assert_eq!(
            parse_quantity("1e6T/m", Dimension::FieldGradient).unwrap(),
            1e6
        );
    }

    #[test]
    fn charges_and_masses() {
        assert_eq!(
            parse_quantity("-3e", Dimension::Charge).unwrap(),
            -3.0 * ELEMENTARY_CHARGE
        );
        assert_eq!(
            parse_quantity("-e", Dimension::Charge).unwrap(),
            -ELEMENTARY_CHARGE
        );
        // scientific notation is not mistaken for elementary charges
        assert_eq!(parse_quantity("1e-19", Dimension::Charge).unwrap(), 1e-19);
        assert_eq!(parse_quantity("2e-19C", Dimension::Charge).unwrap(), 2e-19);
        assert_eq!(parse_quantity("1e-14kg", Dimension::Mass).unwrap(), 1e-14);
        assert_eq!(
            parse_quantity("1me", Dimension::Mass).unwrap(),
            ELECTRON_MASS
        );
    }

    #[test]
    fn decimal_prefixes_round_correctly() {
        assert_eq!(parse_quantity("50um", Dimension::Length).unwrap(), 5e-5);
        assert_eq!(parse_quantity("200um", Dimension::Length).unwrap(), 2e-4);
        assert_eq!(parse_quantity("60ns", Dimension::Time).unwrap(), 6e-8);
        assert_eq!(parse_quantity("100ms", Dimension::Time).unwrap(), 0.1);
    }

    #[test]
    fn rejects_wrong_units() {
        assert!(parse_quantity("10ns", Dimension::Length).is_err());
        assert!(parse_quantity("fast", Dimension::Time).is_err());
        assert!(parse_quantity("inf", Dimension::Time).is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/4").unwrap(), FRAC_PI_4);
        assert_eq!(parse_angle("π/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_angle("pi/3").unwrap(), PI / 3.0);
        assert!((parse_angle("pi/3").unwrap() - FRAC_PI_3).abs() < 1e-15);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("0.122").unwrap(), 0.122);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("quarter").is_err());
    }
}
