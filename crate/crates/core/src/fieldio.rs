//! CSV dumps of biquaternion fields.
//!
//! One row per node in flat index order (τ slowest, z fastest):
//!
//! ```text
//! tau,x,y,z,re_f,im_f,re_F1,im_F1,re_F2,im_F2,re_F3,im_F3
//! ```
//!
//! On reading, the grid is rebuilt from the distinct coordinates on each
//! axis, which must be uniformly spaced with one spacing shared by x, y, z.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::biquat::{Biquaternion, C64};
use crate::error::{Error, Result};
use crate::grid::{BiquatField, Grid4};

pub const HEADER: [&str; 12] = [
    "tau", "x", "y", "z", "re_f", "im_f", "re_F1", "im_F1", "re_F2", "im_F2", "re_F3", "im_F3",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_field_to<W: Write>(out: W, field: &BiquatField) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    let g = field.grid();
    let mut row: Vec<String> = Vec::with_capacity(12);
    for (k, v) in field.values().iter().enumerate() {
        row.clear();
        row.extend(g.coord_of(k).iter().map(|c| c.to_string()));
        for c in v.components() {
            row.push(c.re.to_string());
            row.push(c.im.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field(path: &Path, field: &BiquatField) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_field_to(std::io::BufWriter::new(f), field)
}

pub fn read_field_from<R: Read>(input: R) -> Result<BiquatField> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().map(str::trim).ne(HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut coords: Vec<[f64; 4]> = Vec::new();
    let mut values: Vec<Biquaternion> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut x = [0.0f64; 12];
        for (k, cell) in rec.iter().enumerate().take(12) {
            x[k] = cell.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "row {}: column {} is not a number: {cell:?}",
                    line + 2,
                    HEADER[k]
                ))
            })?;
        }
        if rec.len() != 12 {
            return Err(Error::Format(format!(
                "row {}: expected 12 columns, got {}",
                line + 2,
                rec.len()
            )));
        }
        coords.push([x[0], x[1], x[2], x[3]]);
        values.push(Biquaternion::from_components([
            C64::new(x[4], x[5]),
            C64::new(x[6], x[7]),
            C64::new(x[8], x[9]),
            C64::new(x[10], x[11]),
        ]));
    }
    if coords.is_empty() {
        return Err(Error::Format("no rows".into()));
    }
    let grid = infer_grid(&coords)?;
    let mut placed = vec![None; grid.len()];
    for (c, v) in coords.iter().zip(values) {
        let u = grid.locate(*c);
        let mut idx = [0usize; 4];
        for a in 0..4 {
            let r = u[a].round();
            if (u[a] - r).abs() > 1e-6 || r < 0.0 || r as usize >= grid.shape[a] {
                return Err(Error::Format(format!("coordinate {c:?} is off the inferred grid")));
            }
            idx[a] = r as usize;
        }
        let k = grid.index(idx);
        if placed[k].is_some() {
            return Err(Error::Format(format!("duplicate node {c:?}")));
        }
        placed[k] = Some(v);
    }
    let values: Option<Vec<Biquaternion>> = placed.into_iter().collect();
    let values = values.ok_or_else(|| Error::Format("rows do not cover a full grid".into()))?;
    BiquatField::from_values(grid, values)
}

pub fn read_field(path: &Path) -> Result<BiquatField> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_field_from(std::io::BufReader::new(f))
}

fn infer_grid(coords: &[[f64; 4]]) -> Result<Grid4> {
    let mut shape = [0usize; 4];
    let mut origin = [0.0; 4];
    let mut step = [0.0; 4];
    for a in 0..4 {
        let mut xs: Vec<f64> = coords.iter().map(|c| c[a]).collect();
        xs.sort_by(f64::total_cmp);
        let span = xs[xs.len() - 1] - xs[0];
        let tol = 1e-9 * (1.0 + span.abs());
        xs.dedup_by(|b, a| (*b - *a).abs() <= tol);
        shape[a] = xs.len();
        origin[a] = xs[0];
        if xs.len() > 1 {
            let d = span / (xs.len() - 1) as f64;
            if xs.windows(2).any(|w| ((w[1] - w[0]) - d).abs() > 1e-6 * d) {
                return Err(Error::Format(format!("axis {a} is not uniformly spaced")));
            }
            step[a] = d;
        }
    }
    let spatial: Vec<f64> = step[1..].iter().copied().filter(|d| *d > 0.0).collect();
    let h = spatial.first().copied().unwrap_or(1.0);
    if spatial.iter().any(|d| (d - h).abs() > 1e-6 * h) {
        return Err(Error::Format(format!("spatial spacings differ: {:?}", &step[1..])));
    }
    let d_tau = if step[0] > 0.0 { step[0] } else { h };
    Grid4::new(shape, d_tau, h, origin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biquat::tests::random_bq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let g = Grid4::new([3, 4, 2, 5], 0.05, 0.1, [0.25, -0.2, 0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals = (0..g.len()).map(|_| random_bq(&mut rng)).collect();
        let f = BiquatField::from_values(g, vals).unwrap();
        let mut buf = Vec::new();
        write_field_to(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tau,x,y,z,re_f,im_f,re_F1"));
        let back = read_field_from(buf.as_slice()).unwrap();
        assert!(back.grid().same_as(f.grid()));
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            read_field_from("a,b\n1,2\n".as_bytes()),
            Err(Error::Format(_))
        ));
        let head = HEADER.join(",");
        let one = format!("{head}\n0,0,0,0,1,0,0,0,0,0,0,0\n");
        assert_eq!(read_field_from(one.as_bytes()).unwrap().values().len(), 1);
        let gap = format!("{head}\n0,0,0,0,1,0,0,0,0,0,0,0\n0,0.1,0,0,1,0,0,0,0,0,0,0\n0,0.3,0,0,1,0,0,0,0,0,0,0\n");
        assert!(matches!(read_field_from(gap.as_bytes()), Err(Error::Format(_))));
        let nan = format!("{head}\n0,0,0,0,x,0,0,0,0,0,0,0\n");
        assert!(matches!(read_field_from(nan.as_bytes()), Err(Error::Format(_))));
    }
}
