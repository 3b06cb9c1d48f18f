//! Number formatting for emitted artifacts.

use serde_json::Value;

/// Significant digits of every float in JSON reports.
pub const JSON_DIGITS: usize = 12;
/// Significant digits of every float in surface CSV files.
pub const CSV_DIGITS: usize = 9;

/// Rounds `x` to `digits` significant decimal digits; non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r == 0.0 {
        // normalizes -0
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Rounds every float inside a JSON document in place.
///
/// JSON has no infinities; serde writes them as `null`, which is left untouched.
pub fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(m) = serde_json::Number::from_f64(round_sig(x, digits)) {
                        *n = m;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(o) => o.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

/// Serializes `value` as pretty JSON with floats at [`JSON_DIGITS`] significant digits.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).unwrap_or(Value::Null);
    round_json(&mut v, JSON_DIGITS);
    serde_json::to_string_pretty(&v).unwrap_or_else(|_| "null".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_significant_digits() {
        assert_eq!(round_sig(0.0242340463552, 9), 0.0242340464);
        assert_eq!(round_sig(123456.789, 3), 123000.0);
        assert_eq!(format_sig(-0.0, 9), "0");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert!(round_sig(f64::INFINITY, 9).is_infinite());
    }

    #[test]
    fn json_floats_are_rounded_and_integers_kept() {
        let mut v = serde_json::json!({"a": [1.0 / 3.0, 7], "b": {"c": 2.0f64.sqrt()}});
        round_json(&mut v, 4);
        assert_eq!(v["a"][0].as_f64(), Some(0.3333));
        assert_eq!(v["a"][1].as_u64(), Some(7));
        assert_eq!(v["b"]["c"].as_f64(), Some(1.414));
    }
}
