//! Field files and CSV export consumed by the plotting scripts.
//!
//! A field file is an ASCII header of `key value` lines closed by `end`, followed
//! by the raw values as little-endian `f64`:
//!
//! ```text
//! SNFIELD 1
//! nx 21
//! ny 21
//! n_groups 2
//! n_local 4
//! ordering group,cell(j*nx+i),local(2*iy+ix)
//! kind fom
//! end
//! <n_groups * nx * ny * n_local doubles>
//! ```
//!
//! Cells are numbered from the bottom-left corner, row by row.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::field::{FieldLayout, MomentField};

pub const FIELD_MAGIC: &str = "SNFIELD";
pub const FIELD_VERSION: u32 = 1;
pub const ORDERING: &str = "group,cell(j*nx+i),local(2*iy+ix)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Fom,
    Rom,
    RelativeError,
}

impl FieldKind {
    pub fn tag(self) -> &'static str {
        match self {
            FieldKind::Fom => "fom",
            FieldKind::Rom => "rom",
            FieldKind::RelativeError => "relerr",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "fom" => Ok(FieldKind::Fom),
            "rom" => Ok(FieldKind::Rom),
            "relerr" => Ok(FieldKind::RelativeError),
            _ => Err(Error::Format(format!("unknown field kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub kind: FieldKind,
    pub field: MomentField,
}

impl FieldFile {
    pub fn new(nx: usize, ny: usize, kind: FieldKind, field: MomentField) -> Result<Self> {
        if nx * ny != field.layout().n_cells {
            return Err(Error::Dimension {
                expected: field.layout().n_cells,
                got: nx * ny,
            });
        }
        Ok(Self { nx, ny, kind, field })
    }

    pub fn layout(&self) -> FieldLayout {
        self.field.layout()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let l = self.layout();
        write!(
            w,
            "{FIELD_MAGIC} {FIELD_VERSION}\nnx {}\nny {}\nn_groups {}\nn_local {}\nordering {ORDERING}\nkind {}\nend\n",
            self.nx,
            self.ny,
            l.n_groups,
            l.n_local,
            self.kind.tag()
        )?;
        for v in self.field.values() {
            w.write_f64::<LE>(*v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let mut next_line = |r: &mut BufReader<R>| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format("field header ended early".into()));
            }
            Ok(line.trim_end_matches('\n').to_string())
        };
        let first = next_line(&mut r)?;
        match first.split_once(' ') {
            Some((FIELD_MAGIC, v)) if v.parse::<u32>() == Ok(FIELD_VERSION) => {}
            Some((FIELD_MAGIC, v)) => return Err(Error::Format(format!("unsupported field version {v}"))),
            _ => return Err(Error::Format("not a field file".into())),
        }
        let (mut nx, mut ny, mut ng, mut nl, mut kind, mut ordering) = (None, None, None, None, None, None);
        loop {
            let l = next_line(&mut r)?;
            if l == "end" {
                break;
            }
            let (key, value) = l
                .split_once(' ')
                .ok_or_else(|| Error::Format(format!("bad header line '{l}'")))?;
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("header '{key}' is not an integer: '{value}'")))
            };
            match key {
                "nx" => nx = Some(num()?),
                "ny" => ny = Some(num()?),
                "n_groups" => ng = Some(num()?),
                "n_local" => nl = Some(num()?),
                "kind" => kind = Some(FieldKind::from_tag(value)?),
                "ordering" => ordering = Some(value.to_string()),
                _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("field header lacks '{k}'"));
        let (nx, ny) = (nx.ok_or_else(|| missing("nx"))?, ny.ok_or_else(|| missing("ny"))?);
        let layout = FieldLayout {
            n_groups: ng.ok_or_else(|| missing("n_groups"))?,
            n_cells: nx * ny,
            n_local: nl.ok_or_else(|| missing("n_local"))?,
        };
        if ordering.as_deref() != Some(ORDERING) {
            return Err(Error::Format(format!("unsupported ordering {ordering:?}")));
        }
        let mut values = vec![0.0; layout.len()];
        r.read_f64_into::<LE>(&mut values)
            .map_err(|_| Error::Format(format!("expected {} values after header", layout.len())))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after field values".into()));
        }
        Self::new(nx, ny, kind.ok_or_else(|| missing("kind"))?, MomentField::from_vec(layout, values)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// Mean of the local values in each cell, `[group][j * nx + i]`.
    pub fn cell_averages(&self) -> Vec<Vec<f64>> {
        let l = self.layout();
        (0..l.n_groups)
            .map(|g| {
                self.field.group(g)
                    .chunks(l.n_local)
                    .map(|c| c.iter().sum::<f64>() / l.n_local as f64)
                    .collect()
            })
            .collect()
    }

    /// Plain CSV: `group,i,j,value` with the cell average as value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let err = |e: csv::Error| Error::Format(format!("field csv: {e}"));
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["group", "i", "j", "value"]).map_err(err)?;
        for (g, avg) in self.cell_averages().iter().enumerate() {
            for (c, v) in avg.iter().enumerate() {
                out.serialize((g, c % self.nx, c / self.nx, v)).map_err(err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Pointwise `|rom - fom| / |fom|`; entries with `fom == 0` report the absolute difference.
pub fn pointwise_relative_error(rom: &MomentField, fom: &MomentField) -> Result<MomentField> {
    if rom.layout() != fom.layout() {
        return Err(Error::Dimension {
            expected: fom.layout().len(),
            got: rom.layout().len(),
        });
    }
    let v = rom
        .values()
        .iter()
        .zip(fom.values())
        .map(|(r, f)| {
            let d = (r - f).abs();
            if *f == 0.0 { d } else { d / f.abs() }
        })
        .collect();
    MomentField::from_vec(fom.layout(), v)
}
