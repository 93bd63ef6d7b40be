//! Fixed-precision float rendering for reproducible text outputs.

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros
/// stripped, scientific notation outside [1e-4, 10^sig).
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Six significant digits, the precision used by every report file.
pub fn g6(x: f64) -> String {
    sig(x, 6)
}

pub fn g6_opt(x: Option<f64>) -> String {
    x.map(g6).unwrap_or_default()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (15.811388300841896, "15.8114"),
            (-0.70710678, "-0.707107"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (999999.6, "1e+06"),
            (0.6, "0.6"),
            (4.0, "4"),
        ];
        for (x, want) in cases {
            assert_eq!(g6(x), want, "{x}");
        }
    }
}
