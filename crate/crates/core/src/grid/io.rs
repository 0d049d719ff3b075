//! The `MFLD1` field file format and CSV import.
//!
//! An `MFLD1` file is one JSON header line followed by little-endian `f64`
//! values in (replicate, variable, grid row-major) order: `(re, im)` pairs,
//! or only `re` when the header says `"real": true`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, MultiField};
use crate::error::FieldError;

pub const MAGIC: &str = "MFLD1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    magic: String,
    dims: usize,
    sizes: Vec<usize>,
    spacings: Vec<f64>,
    nvars: usize,
    reps: usize,
    real: bool,
}

pub fn write_field_to<W: Write>(field: &MultiField, mut out: W) -> Result<(), FieldError> {
    let header = Header {
        magic: MAGIC.to_string(),
        dims: field.grid().dims(),
        sizes: field.grid().sizes().to_vec(),
        spacings: field.grid().spacings().to_vec(),
        nvars: field.nvars(),
        reps: field.reps(),
        real: field.is_real(),
    };
    let line =
        serde_json::to_string(&header).map_err(|e| FieldError::MalformedHeader(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    for z in field.values() {
        out.write_all(&z.re.to_le_bytes())?;
        if !header.real {
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_field(field: &MultiField, path: impl AsRef<Path>) -> Result<(), FieldError> {
    let file = File::create(path)?;
    write_field_to(field, BufWriter::new(file))
}

fn check_magic(magic: &str) -> Result<(), FieldError> {
    if magic == MAGIC {
        return Ok(());
    }
    match magic.strip_prefix("MFLD") {
        Some(v) if !v.is_empty() && v.chars().all(|c| c.is_ascii_digit()) => {
            Err(FieldError::UnsupportedVersion(magic.to_string()))
        }
        _ => Err(FieldError::BadMagic(magic.to_string())),
    }
}

pub fn read_field_from<R: BufRead>(mut input: R) -> Result<MultiField, FieldError> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(FieldError::MalformedHeader("missing header line".into()));
    }
    line.pop();
    let text = std::str::from_utf8(&line)
        .map_err(|_| FieldError::MalformedHeader("header is not utf-8".into()))?;
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| FieldError::MalformedHeader(e.to_string()))?;
    // Check the magic before the remaining keys so foreign files get a format error.
    match raw.get("magic").and_then(|m| m.as_str()) {
        Some(m) => check_magic(m)?,
        None => return Err(FieldError::MalformedHeader("missing magic".into())),
    }
    let header: Header =
        serde_json::from_value(raw).map_err(|e| FieldError::MalformedHeader(e.to_string()))?;
    if header.dims != header.sizes.len() || header.dims != header.spacings.len() {
        return Err(FieldError::MalformedHeader(format!(
            "dims {} disagrees with sizes/spacings",
            header.dims
        )));
    }
    let grid = GridSpec::new(header.sizes, header.spacings)?;
    let count = grid.len() * header.nvars * header.reps;
    let width = if header.real { 8 } else { 16 };

    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * width {
        return Err(FieldError::SizeMismatch {
            expected: count,
            got: body.len() / width,
        });
    }
    let word = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    let values = body
        .chunks_exact(width)
        .map(|c| {
            if header.real {
                Complex64::new(word(c), 0.0)
            } else {
                Complex64::new(word(&c[..8]), word(&c[8..]))
            }
        })
        .collect();
    MultiField::new(grid, header.nvars, header.reps, values)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<MultiField, FieldError> {
    read_field_from(BufReader::new(File::open(path)?))
}

/// Import a field from CSV rows `rep,var,i1,...,id,re[,im]` (header row first).
///
/// Rows may come in any order, but every (replicate, variable, cell) must
/// appear exactly once. Grid sizes are inferred from the largest indices.
pub fn read_field_csv_from<R: BufRead>(
    input: R,
    spacings: Option<&[f64]>,
) -> Result<MultiField, FieldError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| FieldError::MalformedCsv("empty input".into()))??;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_lowercase()).collect();
    if cols.len() < 4 || cols[0] != "rep" || cols[1] != "var" {
        return Err(FieldError::MalformedCsv(format!("bad header {header:?}")));
    }
    let has_im = cols.last().map(String::as_str) == Some("im");
    let dims = cols.len() - 3 - usize::from(has_im);
    if dims == 0 || cols[2 + dims] != "re" {
        return Err(FieldError::MalformedCsv(format!("bad header {header:?}")));
    }

    let mut rows: HashMap<(usize, usize, Vec<usize>), Complex64> = HashMap::new();
    let (mut max_rep, mut max_var) = (0, 0);
    let mut max_idx = vec![0usize; dims];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() || cells.iter().any(|c| c.is_empty()) {
            return Err(FieldError::MalformedCsv(format!(
                "row {} has missing cells",
                lineno + 2
            )));
        }
        let int = |s: &str| {
            s.parse::<usize>().map_err(|_| {
                FieldError::MalformedCsv(format!("row {}: bad index {s:?}", lineno + 2))
            })
        };
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                FieldError::MalformedCsv(format!("row {}: bad value {s:?}", lineno + 2))
            })
        };
        let rep = int(cells[0])?;
        let var = int(cells[1])?;
        let idx = cells[2..2 + dims]
            .iter()
            .map(|c| int(c))
            .collect::<Result<Vec<_>, _>>()?;
        let re = num(cells[2 + dims])?;
        let im = if has_im { num(cells[3 + dims])? } else { 0.0 };
        max_rep = max_rep.max(rep);
        max_var = max_var.max(var);
        for (m, &i) in max_idx.iter_mut().zip(&idx) {
            *m = (*m).max(i);
        }
        if rows
            .insert((rep, var, idx), Complex64::new(re, im))
            .is_some()
        {
            return Err(FieldError::MalformedCsv(format!(
                "row {} duplicates an earlier cell",
                lineno + 2
            )));
        }
    }
    if rows.is_empty() {
        return Err(FieldError::MalformedCsv("no data rows".into()));
    }
    let sizes: Vec<usize> = max_idx.iter().map(|m| m + 1).collect();
    let spacings = match spacings {
        Some(s) => s.to_vec(),
        None => vec![1.0; dims],
    };
    let grid = GridSpec::new(sizes, spacings)?;
    let (reps, nvars) = (max_rep + 1, max_var + 1);
    let expected = reps * nvars * grid.len();
    if rows.len() != expected {
        return Err(FieldError::SizeMismatch {
            expected,
            got: rows.len(),
        });
    }
    let mut values = Vec::with_capacity(expected);
    for r in 0..reps {
        for v in 0..nvars {
            for flat in 0..grid.len() {
                let key = (r, v, grid.unravel(flat));
                let z = rows.get(&key).ok_or_else(|| {
                    FieldError::MalformedCsv(format!("missing cell rep={r} var={v} {:?}", key.2))
                })?;
                values.push(*z);
            }
        }
    }
    MultiField::new(grid, nvars, reps, values)
}

pub fn read_field_csv(
    path: impl AsRef<Path>,
    spacings: Option<&[f64]>,
) -> Result<MultiField, FieldError> {
    read_field_csv_from(BufReader::new(File::open(path)?), spacings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn roundtrip(field: &MultiField) -> MultiField {
        let mut buf = Vec::new();
        write_field_to(field, &mut buf).unwrap();
        read_field_from(Cursor::new(buf)).unwrap()
    }

    #[test]
    fn small_real_roundtrip() {
        let g = GridSpec::new(vec![2, 2], vec![0.5, 1.5]).unwrap();
        let f = MultiField::from_real(g, 1, 1, vec![1.0, -2.5, 3.25, 1e-300]).unwrap();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(buf.len() - header_end, 4 * 8);
        let back = read_field_from(Cursor::new(buf.clone())).unwrap();
        assert_eq!(back, f);
        let mut again = Vec::new();
        write_field_to(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn truncated_body_is_size_mismatch() {
        let g = GridSpec::unit(vec![2, 2]).unwrap();
        let f = MultiField::from_real(g, 1, 1, vec![1.0; 4]).unwrap();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        let err = read_field_from(Cursor::new(buf)).unwrap_err();
        assert!(
            matches!(
                err,
                FieldError::SizeMismatch {
                    expected: 4,
                    got: 3
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn header_errors_are_distinct() {
        let body = |magic: &str| {
            format!(
                "{{\"magic\":\"{magic}\",\"dims\":1,\"sizes\":[1],\"spacings\":[1.0],\"nvars\":1,\"reps\":1,\"real\":true}}\n"
            )
            .into_bytes()
            .into_iter()
            .chain(1.0f64.to_le_bytes())
            .collect::<Vec<u8>>()
        };
        assert!(read_field_from(Cursor::new(body("MFLD1"))).is_ok());
        assert!(matches!(
            read_field_from(Cursor::new(body("NOPE"))).unwrap_err(),
            FieldError::BadMagic(_)
        ));
        assert!(matches!(
            read_field_from(Cursor::new(body("MFLD2"))).unwrap_err(),
            FieldError::UnsupportedVersion(_)
        ));
        assert!(matches!(
            read_field_from(Cursor::new(b"{not json\n".to_vec())).unwrap_err(),
            FieldError::MalformedHeader(_)
        ));
        assert!(matches!(
            read_field_from(Cursor::new(b"{\"magic\":\"MFLD1\"}\n".to_vec())).unwrap_err(),
            FieldError::MalformedHeader(_)
        ));
    }

    #[test]
    fn csv_import_any_order() {
        let text = "rep,var,i1,i2,re,im\n0,0,1,0,3,0.5\n0,0,0,0,1,0\n0,0,0,1,2,0\n0,0,1,1,4,-1\n";
        let f = read_field_csv_from(Cursor::new(text), Some(&[2.0, 2.0])).unwrap();
        assert_eq!(f.grid().sizes(), &[2, 2]);
        let got: Vec<Complex64> = f.slice(0, 0).to_vec();
        assert_eq!(
            got,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(3.0, 0.5),
                Complex64::new(4.0, -1.0)
            ]
        );
    }

    #[test]
    fn csv_import_rejects_gaps() {
        let missing = "rep,var,i1,re\n0,0,0,1\n0,0,2,1\n";
        assert!(read_field_csv_from(Cursor::new(missing), None).is_err());
        let blank = "rep,var,i1,re\n0,0,0,\n";
        assert!(read_field_csv_from(Cursor::new(blank), None).is_err());
        let dup = "rep,var,i1,re\n0,0,0,1\n0,0,0,2\n";
        assert!(read_field_csv_from(Cursor::new(dup), None).is_err());
    }

    fn arb_field() -> impl Strategy<Value = MultiField> {
        (
            prop::collection::vec(1usize..5, 1..4),
            1usize..3,
            1usize..3,
            any::<bool>(),
        )
            .prop_flat_map(|(sizes, nvars, reps, real)| {
                let n: usize = sizes.iter().product::<usize>() * nvars * reps;
                let d = sizes.len();
                (
                    Just(sizes),
                    prop::collection::vec(1e-3f64..10.0, d),
                    Just(nvars),
                    Just(reps),
                    prop::collection::vec((any::<f64>(), any::<f64>()), n),
                    Just(real),
                )
            })
            .prop_map(|(sizes, spacings, nvars, reps, vals, real)| {
                let values = vals
                    .into_iter()
                    .map(|(re, im)| Complex64::new(re, if real { 0.0 } else { im }))
                    .collect();
                MultiField::new(GridSpec::new(sizes, spacings).unwrap(), nvars, reps, values)
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(field in arb_field()) {
            let back = roundtrip(&field);
            prop_assert_eq!(back.grid(), field.grid());
            prop_assert_eq!(back.is_real(), field.is_real());
            let bits = |f: &MultiField| f.values().iter()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&field));
        }
    }
}
