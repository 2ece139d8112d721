//! Deterministic float formatting for CSV and plot output.
//!
//! Output files are compared byte-for-byte across reruns and thread counts,
//! so every float that reaches a file goes through one of these helpers.

/// Format `x` rounded to at most 10 significant digits, using the shortest
/// decimal representation of the rounded value.
pub fn sig10(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let shift = 9 - mag;
    // Values this library emits stay far from the f64 extremes, so the
    // scale-round-unscale trick is exact enough.
    let factor = 10f64.powi(shift);
    let rounded = if factor.is_finite() && factor > 0.0 {
        (x * factor).round() / factor
    } else {
        x
    };
    format!("{rounded}")
}

/// Format `x` with 10 decimal places, then trim trailing zeros (and a
/// trailing decimal point). `0.25` stays `0.25`, `3f64.sqrt()` becomes
/// `1.7320508076`.
pub fn dec10(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let mut s = format!("{x:.10}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Format `x` with 17 significant digits, enough to round-trip any f64.
pub fn full17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig10_basic() {
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(0.25), "0.25");
        assert_eq!(sig10(1.0), "1");
        assert_eq!(sig10(std::f64::consts::SQRT_2), "1.414213562");
        assert_eq!(sig10(-0.5), "-0.5");
        assert_eq!(sig10(f64::INFINITY), "inf");
        assert_eq!(sig10(f64::NEG_INFINITY), "-inf");
        assert_eq!(sig10(12345.678901234), "12345.6789");
    }

    #[test]
    fn dec10_basic() {
        assert_eq!(dec10(0.25), "0.25");
        assert_eq!(dec10(0.75), "0.75");
        assert_eq!(dec10(3f64.sqrt()), "1.7320508076");
        assert_eq!(dec10(0.1), "0.1");
        assert_eq!(dec10(1.0), "1");
        assert_eq!(dec10(f64::INFINITY), "inf");
    }

    #[test]
    fn full17_round_trips() {
        for &x in &[
            0.1,
            -3.0349_f64.sqrt(),
            std::f64::consts::PI,
            1e-300,
            6.022e23,
        ] {
            let s = full17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
