//! Bit-stable JSON emission: compact layout with every float printed at
//! nine significant digits, so identical reports serialize to identical
//! bytes and numeric fields parse back to the same printed value.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

/// Nine-significant-digit float form, e.g. `1.23456789e2`. Valid JSON and
/// stable under a parse/re-format round trip.
pub fn format_f64_sig9(value: f64) -> String {
    if value == 0.0 {
        return "0.0".to_string();
    }
    format!("{value:.8e}")
}

struct Sig9Formatter;

impl Formatter for Sig9Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64_sig9(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    // everything else keeps the compact defaults
    fn write_null<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// Serialize any value with the nine-digit float convention.
pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig9Formatter);
    value.serialize(&mut ser)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digit_round_trip_is_stable() {
        for v in [1.0, -2.5, 0.1234567891234, 9.87654321e-7, 1234567.891, 30.0] {
            let printed = format_f64_sig9(v);
            let parsed: f64 = printed.parse().unwrap();
            assert_eq!(format_f64_sig9(parsed), printed, "value {v}");
        }
    }

    #[test]
    fn floats_in_json_use_the_convention() {
        let bytes = to_json_bytes(&serde_json::json!({"x": 0.5, "y": [1.25]})).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, r#"{"x":5.00000000e-1,"y":[1.25000000e0]}"#);
    }
}
