//! Versioned CSV tables.
//!
//! The first line of every file is `# mixsig-schema <major>.<minor> <table>`, followed by
//! an ordinary CSV header and rows. Readers reject other majors.

use std::fs;
use std::io::Write;
use std::path::Path;

use mixsig::strategy::{BidDataset, BidRecord};

use crate::error::CliError;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        writeln!(out, "# mixsig-schema {SCHEMA_MAJOR}.{SCHEMA_MINOR} {}", self.name)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    /// Parse a versioned table; `expect` names the table kind when given.
    pub fn read(path: &Path, expect: Option<&str>) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, expect).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str, expect: Option<&str>) -> Result<Self, CliError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let mut parts = first.trim().split_whitespace();
        if parts.next() != Some("#") || parts.next() != Some("mixsig-schema") {
            return Err(CliError::config("missing schema-version header line"));
        }
        let version = parts.next().ok_or_else(|| CliError::config("missing schema version"))?;
        let major: u32 = version
            .split('.')
            .next()
            .and_then(|m| m.parse().ok())
            .ok_or_else(|| CliError::config(format!("bad schema version {version:?}")))?;
        if major != SCHEMA_MAJOR {
            return Err(CliError::config(format!("schema major {major} is not supported (expected {SCHEMA_MAJOR})")));
        }
        let name = parts.next().unwrap_or("").to_string();
        if let Some(want) = expect {
            if name != want {
                return Err(CliError::config(format!("expected a {want} table, found {name:?}")));
            }
        }
        let mut r = csv::Reader::from_reader(rest.as_bytes());
        let header = r.headers()?.iter().map(|s| s.to_string()).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(|s| s.to_string()).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { name, header, rows })
    }
}

/// Long-format bids: auction_id, bidder_id (1-based), bid, z_1..z_D.
pub fn dataset_table(data: &BidDataset) -> Table {
    let mut header = vec!["auction_id".to_string(), "bidder_id".into(), "bid".into()];
    header.extend((1..=data.dim).map(|d| format!("z_{d}")));
    let mut t = Table::with_header("bids", header);
    for r in &data.records {
        let mut row = vec![r.auction_id.to_string(), (r.bidder + 1).to_string(), num(r.bid)];
        row.extend(r.z.iter().map(|v| num(*v)));
        t.push(row);
    }
    t
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::config(format!("row {line}: {s:?} is not a number")))
}

pub fn read_dataset(path: &Path) -> Result<BidDataset, CliError> {
    let t = Table::read(path, Some("bids"))?;
    let dim = t.header.len().checked_sub(3).filter(|d| *d >= 1).ok_or_else(|| CliError::config("bids table needs z columns"))?;
    if t.header[..3] != ["auction_id", "bidder_id", "bid"] {
        return Err(CliError::config("bids table must start with auction_id, bidder_id, bid"));
    }
    let mut records = Vec::with_capacity(t.rows.len());
    let mut n = 0;
    for (k, row) in t.rows.iter().enumerate() {
        let auction_id: u64 =
            row[0].trim().parse().map_err(|_| CliError::config(format!("row {}: bad auction_id", k + 1)))?;
        let bidder: usize =
            row[1].trim().parse().map_err(|_| CliError::config(format!("row {}: bad bidder_id", k + 1)))?;
        if bidder == 0 {
            return Err(CliError::config(format!("row {}: bidder_id is 1-based", k + 1)));
        }
        n = n.max(bidder);
        let bid = parse_f64(&row[2], k + 1)?;
        let z = row[3..].iter().map(|s| parse_f64(s, k + 1)).collect::<Result<Vec<_>, _>>()?;
        records.push(BidRecord { auction_id, bidder: bidder - 1, bid, z });
    }
    Ok(BidDataset::new(n, dim, records)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_major_is_rejected() {
        let text = "# mixsig-schema 2.0 bids\na,b\n1,2\n";
        assert!(Table::parse(text, None).is_err());
        let ok = "# mixsig-schema 1.7 bids\na,b\n1,2\n";
        let t = Table::parse(ok, Some("bids")).unwrap();
        assert_eq!(t.rows, vec![vec!["1".to_string(), "2".into()]]);
    }

    #[test]
    fn missing_header_line_is_rejected() {
        assert!(Table::parse("a,b\n1,2\n", None).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let recs = vec![
            BidRecord { auction_id: 0, bidder: 0, bid: 0.25, z: vec![1.0] },
            BidRecord { auction_id: 0, bidder: 1, bid: 0.5, z: vec![1.5] },
        ];
        let data = BidDataset::new(2, 1, recs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bids.csv");
        dataset_table(&data).write(&p).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), data);
    }
}
