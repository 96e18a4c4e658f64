//! CSV ingest and plot-ready table output.

use std::io::Write;
use std::path::Path;

use bayeskern::Dataset;

use crate::error::{CellRef, CliError, Result};

/// Reads a header `x1,...,xd,y` followed by numeric rows. Lines starting
/// with `#` are skipped; blank lines are rejected.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    parse_csv(&text, &path.display().to_string())
}

pub fn parse_csv(text: &str, origin: &str) -> Result<Dataset> {
    let parse_err = |line: usize, column: Option<CellRef>, message: String| CliError::Parse {
        path: origin.to_string(),
        line,
        column,
        message,
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            return Err(parse_err(i + 1, None, "blank line".into()));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.position().map_or(1, |p| p.line() as usize), None, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let header_line = reader.position().line() as usize;
    if header.len() < 2 || header.last().map(String::as_str) != Some("y") {
        return Err(parse_err(
            header_line.max(1),
            None,
            format!("header must name input columns then \"y\", found {header:?}"),
        ));
    }
    let d = header.len() - 1;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), None, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(d + 1);
        for (j, cell) in record.iter().enumerate() {
            let at = CellRef {
                column: j + 1,
                name: header[j].clone(),
            };
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, Some(at.clone()), format!("{cell:?} is not a number")))?;
            if !value.is_finite() {
                return Err(parse_err(line, Some(at), format!("{cell:?} is not finite")));
            }
            row.push(value);
        }
        outputs.push(row.pop().expect("header has at least two columns"));
        inputs.push(row);
    }
    Ok(Dataset::new(inputs, outputs)?)
}

/// Shortest round-trip text, switching to exponent form for very large or
/// small magnitudes.
pub fn fmt_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Header, rows and `# key=value` metadata; rows are rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct TableOutput {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra tables written beside the main file, keyed by suffix.
    pub sidecars: Vec<(String, TableOutput)>,
}

impl TableOutput {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            sidecars: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_real(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    /// Dense row-major matrix with columns `c1..cP`.
    pub fn matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut t = TableOutput::new((1..=m.ncols()).map(|j| format!("c{j}")));
        for i in 0..m.nrows() {
            t.push_reals(&m.row(i).iter().copied().collect::<Vec<_>>());
        }
        t
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = out;
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }

    /// Writes the table to `path` and each sidecar to `path` with its suffix
    /// in place of the extension.
    pub fn write_files(&self, path: &Path) -> Result<()> {
        let io = |p: &Path, e| CliError::io(p.display().to_string(), e);
        let file = std::fs::File::create(path).map_err(|e| io(path, e))?;
        self.write_to(std::io::BufWriter::new(file)).map_err(|e| io(path, e))?;
        for (suffix, side) in &self.sidecars {
            let p = sidecar_path(path, suffix);
            let mut side = side.clone();
            side.metadata = self.metadata.clone();
            let file = std::fs::File::create(&p).map_err(|e| io(&p, e))?;
            side.write_to(std::io::BufWriter::new(file)).map_err(|e| io(&p, e))?;
        }
        Ok(())
    }
}

/// `out.csv` with suffix `cov` becomes `out.cov.csv`.
pub fn sidecar_path(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_scalar() {
        let d = parse_csv("x,y\n0,1\n1,2\n2,3.5\n", "t").unwrap();
        assert_eq!((d.len(), d.dim()), (3, 1));
        assert_eq!(d.outputs()[2], 3.5);
    }

    #[test]
    fn two_inputs() {
        let d = parse_csv("x1,x2,y\n0,1,2\n3,4,5\n", "t").unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.inputs()[1], vec![3.0, 4.0]);
    }

    #[test]
    fn blank_line_names_the_line() {
        match parse_csv("x,y\n0,1\n\n1,2\n", "t") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        match parse_csv("x,y\n0,1\n1,abc\n", "t") {
            Err(CliError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column.unwrap().name, "y");
            }
            other => panic!("{other:?}"),
        }
        for bad in ["NaN", "inf", "-inf"] {
            assert!(matches!(parse_csv(&format!("x,y\n0,{bad}\n"), "t"), Err(CliError::Parse { .. })));
        }
    }

    #[test]
    fn header_needs_y_last() {
        assert!(matches!(parse_csv("x,z\n0,1\n", "t"), Err(CliError::Parse { .. })));
        assert!(matches!(parse_csv("y\n1\n", "t"), Err(CliError::Parse { .. })));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse_csv("x,y\n", "t"), Err(CliError::Model(bayeskern::Error::EmptyDataset))));
    }

    #[test]
    fn comments_are_skipped() {
        let d = parse_csv("# seed=1\nx,y\n0,1\n# note\n1,2\n", "t").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.0, 1.5, -3.25e-9, 1e20, 0.1, 123456.789] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("/a/out.csv"), "cov"), Path::new("/a/out.cov.csv"));
    }
}
