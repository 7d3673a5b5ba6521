//! Locale-independent number formatting for the JSON and CSV artifacts.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Formats with `digits` significant digits in scientific notation.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
}

/// JSON formatter writing every float with 17 significant digits, enough to
/// round-trip any `f64`.
#[derive(Debug, Default, Clone, Copy)]
pub struct SigDigitsFormatter;

impl Formatter for SigDigitsFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(sig(value, 17).as_bytes())
    }
}

/// Serializes `value` as JSON with [`SigDigitsFormatter`].
pub fn write_json<W: io::Write, T: ?Sized + Serialize>(writer: W, value: &T) -> serde_json::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, SigDigitsFormatter);
    value.serialize(&mut ser)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(sig(0.1, 17), "1.0000000000000001e-1");
        assert_eq!(sig(-2.0, 12), "-2.00000000000e0");
        let x = std::f64::consts::PI / 7.0;
        assert_eq!(sig(x, 17).parse::<f64>().unwrap(), x);
    }
}
