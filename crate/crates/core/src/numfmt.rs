//! Rounding shared by the JSON and CSV emitters, so both carry the same digits.

/// Significant digits kept in emitted numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to `digits` significant decimal digits; non-finite values and
/// zero pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal representation of `round_sig(x, SIGNIFICANT_DIGITS)`.
pub fn format_number(x: f64) -> String {
    format!("{}", round_sig(x, SIGNIFICANT_DIGITS))
}
