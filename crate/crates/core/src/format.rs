//! Text formatting shared by the CSV writers.

/// Scientific notation with 17 significant digits, enough to round-trip
/// any `f64`.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Joins already-formatted fields into one LF-terminated CSV line.
pub fn csv_line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut line = fields
        .into_iter()
        .map(|s| s.as_ref().to_owned())
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.0, 0.25, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = sig17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(sig17(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn lines() {
        assert_eq!(csv_line(["a", "b"]), "a,b\n");
    }
}
