//! Number formatting shared by the JSON and CSV writers.

/// Formats `v` with `digits` significant digits in the style of C's `%g`.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round-trip representation used in instance files.
pub fn format_f64(v: f64) -> String {
    format_sig(v, 17)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(format_sig(0.1, 6), "0.1");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(0.000012345678, 6), "1.23457e-5");
        assert_eq!(format_sig(-2.5, 6), "-2.5");
        assert_eq!(format_sig(9.9999995, 6), "10");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for &v in &[1.304, 0.1 + 0.2, -7.3440123456789, 1e-300, 6.02214076e23] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
