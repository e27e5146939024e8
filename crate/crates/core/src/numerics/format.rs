/// Significant digits used for every number written to reports.
pub const SIG_DIGITS: usize = 9;

/// `x` rounded to `digits` significant digits, in plain decimal notation for
/// moderate magnitudes and scientific notation otherwise, without trailing
/// zeros.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

/// Shorthand for [`format_sig`] at [`SIG_DIGITS`].
pub fn fmt9(x: f64) -> String {
    format_sig(x, SIG_DIGITS)
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
