//! Flat text tables of sampled spaces: a comment header, then one CSV row per point
//! with optional coordinates, the weight, and named set and field columns.
//!
//! ```text
//! # mmsgeo space dims=2 resolution_h=0.0027 length_space=true
//! x,y,weight,set:disk,field:cone
//! ```

use crate::error::{GeoError, Result};
use crate::space::{SampledSpace, ScalarField, SetIndicator};

const MAGIC: &str = "# mmsgeo space";
const AXES: [&str; 3] = ["x", "y", "z"];

/// Space, sets and fields as a flat text table.
pub fn export_space(space: &SampledSpace, sets: &[(&str, &SetIndicator)], fields: &[(&str, &ScalarField)]) -> Result<String> {
    for (_, s) in sets {
        space.check(s)?;
    }
    for (_, f) in fields {
        space.check_field(f)?;
    }
    let dims = space.dims().unwrap_or(0);
    let mut out = format!("{MAGIC} dims={dims} resolution_h={} length_space={}\n", space.resolution_h(), space.is_length_space());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header: Vec<String> = AXES[..dims].iter().map(|a| a.to_string()).collect();
    header.push("weight".into());
    header.extend(sets.iter().map(|(n, _)| format!("set:{n}")));
    header.extend(fields.iter().map(|(n, _)| format!("field:{n}")));
    w.write_record(&header).map_err(table_err)?;
    for i in 0..space.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(c) = space.coords(i) {
            row.extend(c[..dims].iter().map(|x| x.to_string()));
        }
        row.push(space.weights()[i].to_string());
        row.extend(sets.iter().map(|(_, s)| if s.contains(i) { "1".to_string() } else { "0".to_string() }));
        row.extend(fields.iter().map(|(_, f)| f.values()[i].to_string()));
        w.write_record(&row).map_err(table_err)?;
    }
    let body = w.into_inner().map_err(|e| GeoError::Table(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(table_err)?);
    Ok(out)
}

fn table_err(e: impl std::fmt::Display) -> GeoError {
    GeoError::Table(e.to_string())
}

#[derive(Debug, Clone)]
pub struct ImportedSpace {
    pub space: SampledSpace,
    pub sets: Vec<(String, SetIndicator)>,
    pub fields: Vec<(String, ScalarField)>,
}

/// Rebuilds a Euclidean point cloud from an exported table.
pub fn import_space(text: &str) -> Result<ImportedSpace> {
    let mut lines = text.splitn(2, '\n');
    let head = lines.next().unwrap_or("");
    let body = lines.next().unwrap_or("");
    let meta = head.strip_prefix(MAGIC).ok_or_else(|| GeoError::Table(format!("line 1: expected `{MAGIC} ...`")))?;
    let (mut dims, mut h, mut length) = (None, None, None);
    for kv in meta.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| GeoError::Table(format!("line 1: malformed `{kv}`")))?;
        let bad = |_| GeoError::Table(format!("line 1: bad value for {k}: `{v}`"));
        match k {
            "dims" => dims = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "resolution_h" => h = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "length_space" => length = Some(v.parse::<bool>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(GeoError::Table(format!("line 1: unknown key `{k}`"))),
        }
    }
    let missing = |k: &str| GeoError::Table(format!("line 1: missing `{k}`"));
    let dims = dims.ok_or_else(|| missing("dims"))?;
    let h = h.ok_or_else(|| missing("resolution_h"))?;
    let length = length.ok_or_else(|| missing("length_space"))?;
    if dims == 0 {
        return Err(GeoError::Table("a table without coordinates cannot be rebuilt into a space".into()));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().map_err(table_err)?.iter().map(str::to_string).collect();
    if header.len() < dims + 1 || header[..dims] != AXES[..dims] || header[dims] != "weight" {
        return Err(GeoError::Table(format!("line 2: expected columns {:?} then weight", &AXES[..dims])));
    }
    let extra = &header[dims + 1..];
    for c in extra {
        if !(c.starts_with("set:") || c.starts_with("field:")) {
            return Err(GeoError::Table(format!("line 2: column `{c}` is neither set:NAME nor field:NAME")));
        }
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); extra.len()];
    for (k, rec) in r.records().enumerate() {
        let line = k + 3;
        let rec = rec.map_err(|e| GeoError::Table(format!("line {line}: {e}")))?;
        if rec.len() != header.len() {
            return Err(GeoError::Table(format!("line {line}: expected {} columns, got {}", header.len(), rec.len())));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|_| GeoError::Table(format!("line {line}: `{}` is not a number", &rec[j])))
        };
        let mut c = [0.0; 3];
        for (a, slot) in c.iter_mut().enumerate().take(dims) {
            *slot = num(a)?;
        }
        coords.push(c);
        weights.push(num(dims)?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(num(dims + 1 + j)?);
        }
    }
    let space = SampledSpace::points(dims, coords, weights, h, length)?;
    let mut sets = Vec::new();
    let mut fields = Vec::new();
    for (name, col) in extra.iter().zip(cols) {
        if let Some(n) = name.strip_prefix("set:") {
            if col.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(GeoError::Table(format!("column `{name}` must hold 0 or 1")));
            }
            sets.push((n.to_string(), space.indicator(col.iter().map(|&v| v == 1.0).collect())?));
        } else if let Some(n) = name.strip_prefix("field:") {
            fields.push((n.to_string(), space.field(col)?));
        }
    }
    Ok(ImportedSpace { space, sets, fields })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Density;

    #[test]
    fn roundtrip() {
        let s = SampledSpace::grid_box(2, 8, &[(0.0, 1.0), (0.0, 2.0)], &Density::Unit).unwrap();
        let a = s.indicator_where(|c| c[0] < 0.5);
        let f = s.field_from(|c| c[0] * c[1] + 0.1).unwrap();
        let text = export_space(&s, &[("left", &a)], &[("prod", &f)]).unwrap();
        assert!(text.starts_with("# mmsgeo space dims=2"));
        let back = import_space(&text).unwrap();
        assert_eq!(back.space.len(), s.len());
        assert_eq!(back.space.weights(), s.weights());
        assert_eq!(back.sets[0].1.marks(), a.marks());
        assert_eq!(back.fields[0].1.values(), f.values());
        for (i, j) in [(0, 9), (3, 60)] {
            assert!((back.space.dist(i, j) - s.dist(i, j)).abs() < 1e-12);
        }
        assert_eq!(export_space(&back.space, &[("left", &back.sets[0].1)], &[("prod", &back.fields[0].1)]).unwrap(), text);
    }

    #[test]
    fn rejects_malformed() {
        assert!(import_space("x,weight\n0,1\n").is_err());
        let bad = "# mmsgeo space dims=1 resolution_h=0.5 length_space=true\nx,weight\n0,abc\n";
        let e = import_space(bad).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let bad_set = "# mmsgeo space dims=1 resolution_h=0.5 length_space=true\nx,weight,set:a\n0,1,2\n";
        assert!(import_space(bad_set).is_err());
    }
}
