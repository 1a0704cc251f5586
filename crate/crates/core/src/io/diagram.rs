use std::path::Path;

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::filtration::{PersistenceDiagram, PersistencePoint, PointKind};

const HEADER: [&str; 6] = ["birth", "death", "dim", "kind", "birth_cell", "death_cell"];

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn diagram_to_csv(d: &PersistenceDiagram) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    let cell = |c: Option<usize>| c.map(|c| c.to_string()).unwrap_or_default();
    for p in &d.points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(p.birth),
            fmt_f64(p.death),
            p.dim,
            p.kind.as_str(),
            cell(p.birth_cell),
            cell(p.death_cell)
        ));
    }
    out
}

pub fn diagram_from_csv(text: &str, source_id: &str) -> Result<PersistenceDiagram> {
    let what = if source_id.is_empty() { "diagram CSV" } else { source_id };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(what, "line 1", e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (bi, di) = match (col("birth"), col("death")) {
        (Some(b), Some(d)) => (b, d),
        _ => return Err(Error::parse(what, "line 1", "header must name 'birth' and 'death' columns")),
    };
    let (dim_i, kind_i, bc_i, dc_i) = (col("dim"), col("kind"), col("birth_cell"), col("death_cell"));
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(what, format!("line {line}"), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let pos = |field: &str| format!("line {line}, column '{field}'");
        let get = |i: Option<usize>| i.and_then(|i| rec.get(i)).filter(|s| !s.is_empty());
        let num = |i: usize, field: &str| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| Error::parse(what, pos(field), format!("'{s}' is not a number")))
        };
        let birth = num(bi, "birth")?;
        let death = num(di, "death")?;
        let dim = match get(dim_i) {
            Some(s) => s
                .parse::<u8>()
                .map_err(|_| Error::parse(what, pos("dim"), format!("'{s}' is not a dimension")))?,
            None => 0,
        };
        let kind = match get(kind_i) {
            Some(s) => s.parse::<PointKind>().map_err(|m| Error::parse(what, pos("kind"), m))?,
            None if death == f64::INFINITY => PointKind::Essential,
            None => PointKind::Ordinary,
        };
        let cell = |i: Option<usize>, field: &str| -> Result<Option<usize>> {
            get(i)
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::parse(what, pos(field), format!("'{s}' is not a cell index")))
                })
                .transpose()
        };
        let p = PersistencePoint::new(birth, death, dim, kind)
            .with_cells(cell(bc_i, "birth_cell")?, cell(dc_i, "death_cell")?);
        p.check()
            .map_err(|e| Error::parse(what, format!("line {line}"), e.to_string()))?;
        points.push(p);
    }
    Ok(PersistenceDiagram::new(points, source_id))
}

pub fn load_diagram(path: &Path) -> Result<PersistenceDiagram> {
    diagram_from_csv(&read_text(path)?, &path.display().to_string())
}

pub fn save_diagram(path: &Path, d: &PersistenceDiagram) -> Result<()> {
    write_atomic(path, diagram_to_csv(d).as_bytes())
}
