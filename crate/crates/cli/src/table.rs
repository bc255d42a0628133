//! CSV layer for the one dialect this tool speaks: comma separated,
//! header row required, UTF-8, `NA` marks a missing value. Floats are
//! rendered with 17 significant digits so written files re-parse to the
//! same bits.

use crate::fail::Fail;
use std::fs;
use std::path::Path;

pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, Fail> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Fail::Data(format!("cannot read {}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Fail::Data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Fail::Data(format!("{}: {e}", path.display())))?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, Fail> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Fail::Data(format!("column '{name}' not found in data header")))
    }
}

pub fn float_cell(x: f64) -> String {
    format!("{x:.16e}")
}

/// `NA` means missing; anything else must parse as a float.
pub fn parse_float(cell: &str, what: &str, row: usize) -> Result<Option<f64>, Fail> {
    if cell == "NA" {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) => Ok(Some(v)),
        Err(_) => Err(Fail::Data(format!(
            "row {row}: {what} '{cell}' is not a number"
        ))),
    }
}

/// `NA` means missing; anything else must be a nonnegative integer.
pub fn parse_count(cell: &str, what: &str, row: usize) -> Result<Option<u64>, Fail> {
    if cell == "NA" {
        return Ok(None);
    }
    match cell.parse::<u64>() {
        Ok(v) => Ok(Some(v)),
        Err(_) => Err(Fail::Data(format!(
            "row {row}: {what} '{cell}' is not a nonnegative integer"
        ))),
    }
}

/// Writes the full file to a temporary sibling and renames it into place,
/// so a failed run never leaves a partial CSV behind.
pub fn write_atomic(path: &Path, headers: &[String], rows: &[Vec<String>]) -> Result<(), Fail> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io_err = |e: &dyn std::fmt::Display| Fail::Io(format!("writing {}: {e}", path.display()));
    writer.write_record(headers).map_err(|e| io_err(&e))?;
    for row in rows {
        writer.write_record(row).map_err(|e| io_err(&e))?;
    }
    let bytes = writer.into_inner().map_err(|e| io_err(&e))?;

    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| io_err(&e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_round_trip_exactly() {
        for x in [
            1.0 / 3.0,
            -0.0,
            6.02e23,
            1e-300,
            core::f64::consts::PI,
            -7.25,
        ] {
            let back: f64 = float_cell(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn na_is_the_only_missing_marker() {
        assert_eq!(parse_float("NA", "y", 1).unwrap(), None);
        assert_eq!(parse_float("2.5", "y", 1).unwrap(), Some(2.5));
        assert!(parse_float("", "y", 1).is_err());
        assert!(parse_float("na", "y", 1).is_err());
        assert_eq!(parse_count("NA", "y", 1).unwrap(), None);
        assert_eq!(parse_count("12", "y", 1).unwrap(), Some(12));
        assert!(parse_count("-3", "y", 1).is_err());
        assert!(parse_count("2.5", "y", 1).is_err());
    }

    #[test]
    fn atomic_write_round_trips_and_leaves_no_droppings() {
        let dir = std::env::temp_dir().join(format!("kdglm-table-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        let headers = vec!["t".to_string(), "value".to_string()];
        let rows = vec![
            vec!["1".to_string(), float_cell(0.1)],
            vec!["2".to_string(), "NA".to_string()],
        ];
        write_atomic(&path, &headers, &rows).unwrap();

        let table = Table::read(&path).unwrap();
        assert_eq!(table.headers, headers);
        assert_eq!(table.rows, rows);
        let leftovers: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() != "out.csv")
            .collect();
        assert!(leftovers.is_empty());
        fs::remove_dir_all(&dir).unwrap();
    }
}
