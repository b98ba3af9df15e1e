//! Number formatting shared by reports and CSV files.

/// Six significant digits, keeping trailing zeros (`0.233690`). Scientific
/// notation outside `[1e-5, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

/// Shortest representation that parses back to the same value.
pub fn exact(x: f64) -> String {
    format!("{x:?}")
}
