//! Deterministic file output: comma-separated values, `\n` line endings,
//! floats printed with 17 significant digits so identical runs are
//! byte-identical and diffable.

use std::io::Write;
use std::path::Path;

pub fn fmt_full(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_full(*x)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}
