use std::collections::BTreeMap;
use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};
use crate::svm::KernelKind;

pub const CSV_HEADER: &str = "feature,dim,kernel,C,sigma,ir,correct,trials";

fn csv_err(e: csv::Error) -> Error {
    Error::format("csv", e.to_string())
}

fn write_rows<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.dim.to_string(),
            r.kernel.to_string(),
            r.c.to_string(),
            r.sigma.map(|s| s.to_string()).unwrap_or_default(),
            r.rate.percent.to_string(),
            r.rate.correct.to_string(),
            r.rate.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("csv", e.to_string()))
}

/// One line per (front-end, kernel) in row order.
pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(std::io::BufWriter::new(file), rows)
}

/// Pivots rows into one line per front-end with a column per kernel.
/// A kernel that was not run shows as `-`.
pub fn markdown_table(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let mut order: Vec<(&str, usize)> = Vec::new();
    let mut cells: BTreeMap<(&str, KernelKind), String> = BTreeMap::new();
    for r in rows {
        if !order.iter().any(|(f, _)| *f == r.feature) {
            order.push((&r.feature, r.dim));
        }
        cells.insert((&r.feature, r.kernel), r.rate.percent.to_string());
    }
    let mut s =
        String::from("| Feature Type | Number | IR linear | IR rbf |\n|---|---:|---:|---:|\n");
    for (feature, dim) in order {
        let cell = |k| cells.get(&(feature, k)).map(String::as_str).unwrap_or("-");
        s.push_str(&format!(
            "| {feature} | {dim} | {} | {} |\n",
            cell(KernelKind::Linear),
            cell(KernelKind::Rbf)
        ));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::rate_from_counts;

    fn row(feature: &str, dim: usize, kernel: KernelKind, k: usize) -> ResultRow {
        ResultRow {
            feature: feature.into(),
            dim,
            kernel,
            c: 10.0,
            sigma: (kernel == KernelKind::Rbf).then_some(2.5),
            rate: rate_from_counts(k, 28),
        }
    }

    #[test]
    fn csv_layout() {
        let rows = [
            row("MFCC", 12, KernelKind::Linear, 27),
            row("MFCC,E", 13, KernelKind::Rbf, 28),
        ];
        let s = csv_string(&rows).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "MFCC,12,linear,10,,96.43,27,28");
        assert_eq!(lines[2], "\"MFCC,E\",13,rbf,10,2.5,100.00,28,28");
        let mut rd = csv::Reader::from_reader(s.as_bytes());
        let back: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(&back[1][0], "MFCC,E");
    }

    #[test]
    fn markdown_pivot() {
        let rows = [
            row("MFCC", 12, KernelKind::Linear, 27),
            row("MFCC", 12, KernelKind::Rbf, 26),
            row("LPC", 12, KernelKind::Linear, 15),
        ];
        let t = markdown_table(&rows).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "| Feature Type | Number | IR linear | IR rbf |");
        assert_eq!(lines[2], "| MFCC | 12 | 96.43 | 92.86 |");
        assert_eq!(lines[3], "| LPC | 12 | 53.57 | - |");
        assert!(matches!(markdown_table(&[]), Err(Error::EmptyRows)));
    }

    #[test]
    fn csv_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = [row("PLP", 13, KernelKind::Linear, 20)];
        write_csv(&p, &rows).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            csv_string(&rows).unwrap()
        );
    }
}
