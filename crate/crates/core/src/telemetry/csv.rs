use super::{Row, TelemetryError};

pub const CSV_HEADER: &str = "t,ax_mg,ay_mg,az_mg,roll_deg,pitch_deg";

pub fn encode_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(16 + rows.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        r.write_fields(&mut out);
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Vec<Row>, TelemetryError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        other => {
            return Err(TelemetryError::Csv(format!("bad header {other:?}")));
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let mut v = [0.0; 6];
            let mut n = 0;
            for field in line.trim_end().split(',') {
                if n == 6 {
                    return Err(TelemetryError::Csv(format!("line {}: too many fields", i + 2)));
                }
                v[n] =
                    field.parse().map_err(|_| TelemetryError::Csv(format!("line {}: bad number {field:?}", i + 2)))?;
                n += 1;
            }
            if n != 6 {
                return Err(TelemetryError::Csv(format!("line {}: expected 6 fields, got {n}", i + 2)));
            }
            Ok(Row::from_array(v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let rows = [Row { t: 0.009, ax_mg: 1.5, ay_mg: -2.0, az_mg: 1000.0, roll_deg: 0.01, pitch_deg: -0.02 }];
        let text = encode_csv(&rows);
        assert_eq!(
            text,
            "t,ax_mg,ay_mg,az_mg,roll_deg,pitch_deg\n0.009,1.500000,-2.000000,1000.000000,0.010000,-0.020000\n"
        );
        assert_eq!(decode_csv(&text).unwrap(), rows.to_vec());
        assert_eq!(decode_csv(&encode_csv(&[])).unwrap(), vec![]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_csv("a,b\n").is_err());
        assert!(decode_csv("").is_err());
        assert!(decode_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(decode_csv(&format!("{CSV_HEADER}\n1,2,3,4,5,x\n")).is_err());
        assert!(decode_csv(&format!("{CSV_HEADER}\n1,2,3,4,5,6,7\n")).is_err());
    }
}
