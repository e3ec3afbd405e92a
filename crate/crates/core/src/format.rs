//! Plain-text number formatting shared by the CSV writers.

use std::io::{self, Write};

/// Formats `x` with 12 significant digits, `.` as the decimal separator and
/// no grouping; trailing zeros are dropped.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}

/// Writes `# key=value` metadata lines.
pub fn write_metadata<W: Write>(w: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(0.1), "0.1");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(19.3), "19.3");
        assert_eq!(sig12(-2.0), "-2");
        assert_eq!(sig12(123456.7890123456), "123456.789012");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1e-9), "1e-9");
        assert_eq!(sig12(1.5e20), "1.5e20");
        assert_eq!(sig12(-1e-13), "-1e-13");
        assert_eq!(sig12(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
    }
}
