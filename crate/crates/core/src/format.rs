//! Locale-independent number formatting for text and CSV output.

/// `x` with six significant digits and a `.` decimal separator.
pub fn real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.5}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
