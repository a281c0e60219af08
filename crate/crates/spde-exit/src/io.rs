//! Persistence: CSV tables with provenance headers and a binary snapshot
//! format for replaying recorded paths.
//!
//! Every CSV file starts with a `# key=value` header block (schema id first,
//! remaining keys sorted), then one column-name row, then data rows. The
//! float formatting is canonical (shortest round-trip digits), so re-running
//! the same deterministic computation reproduces the file byte for byte;
//! `body_sha256` hashes from the column row onward so volatile provenance
//! keys can never break body identity.
//!
//! Snapshots carry the magic `SPDEFLD1`, a format version, the full grid,
//! a string metadata block, and little-endian doubles per frame. Node-field
//! frames hold `nx + 1` cumulative values, density frames `nx` cell values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{cumulative_to_measure, Field, MeasurePath};
use crate::grid::SpaceTimeGrid;
use crate::ldp::ControlFunction;
use crate::solver::{PathRecord, Scheme};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"SPDEFLD1";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Canonical float rendering: shortest digits that parse back to the same
/// bits, scientific notation outside a moderate magnitude window.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let a = v.abs();
    if !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("bad float {s:?}")))
}

/// An in-memory CSV table: schema id, sorted provenance keys, columns, rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub schema: String,
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn check_token(what: &str, s: &str, allow_comma: bool) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Format(format!("empty {what}")));
    }
    if s.contains('\n') || s.contains('\r') || (!allow_comma && s.contains(',')) {
        return Err(Error::Format(format!("{what} {s:?} contains a delimiter")));
    }
    Ok(())
}

impl CsvTable {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        CsvTable {
            schema: schema.to_string(),
            meta: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Format(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// The body: column row plus data rows. This is what reproducibility
    /// hashes cover.
    pub fn body_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn body_sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.body_string().as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        check_token("schema", &self.schema, true)?;
        for c in &self.columns {
            check_token("column name", c, false)?;
        }
        writeln!(w, "# schema={}", self.schema)?;
        for (k, v) in &self.meta {
            check_token("meta key", k, true)?;
            check_token("meta value", v, true)?;
            if k == "schema" {
                return Err(Error::Format("meta key 'schema' is reserved".into()));
            }
            if k.contains('=') {
                return Err(Error::Format(format!("meta key {k:?} contains '='")));
            }
            writeln!(w, "# {k}={v}")?;
        }
        w.write_all(self.body_string().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut schema = None;
        let mut meta = BTreeMap::new();
        let mut columns = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("header line {line:?} lacks '='")))?;
                if k == "schema" {
                    schema = Some(v.to_string());
                } else {
                    meta.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if columns.is_empty() {
                columns = line.split(',').map(|c| c.to_string()).collect();
                continue;
            }
            let row: Result<Vec<f64>> = line.split(',').map(parse_float).collect();
            let row = row?;
            if row.len() != columns.len() {
                return Err(Error::Format(format!(
                    "row has {} values for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        let schema = schema.ok_or_else(|| Error::Format("missing '# schema=' line".into()))?;
        if columns.is_empty() {
            return Err(Error::Format("missing column row".into()));
        }
        Ok(CsvTable { schema, meta, columns, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        CsvTable::read_from(&mut f)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("missing column {name:?}")))
    }
}

/// Body hash of a CSV file on disk, byte-faithful: everything after the
/// leading `#` header block is hashed as-is. For files this module wrote,
/// the result equals `CsvTable::body_sha256` of the source table.
pub fn csv_file_body_sha256(path: impl AsRef<Path>) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.starts_with('#') {
            offset += line.len();
        } else {
            break;
        }
    }
    let mut hasher = Sha256::new();
    hasher.update(text[offset..].as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

/// Embed the grid in table metadata so a reader can reconstruct it.
pub fn set_grid_meta(table: &mut CsvTable, grid: &SpaceTimeGrid) {
    table.set_meta("grid.x_min", format_float(grid.x_min));
    table.set_meta("grid.x_max", format_float(grid.x_max));
    table.set_meta("grid.nx", grid.nx);
    table.set_meta("grid.a_min", format_float(grid.a_min));
    table.set_meta("grid.a_max", format_float(grid.a_max));
    table.set_meta("grid.na", grid.na);
    table.set_meta("grid.t_end", format_float(grid.t_end));
    table.set_meta("grid.nt", grid.nt);
}

pub fn grid_from_meta(meta: &BTreeMap<String, String>) -> Result<SpaceTimeGrid> {
    let get = |k: &str| -> Result<&String> {
        meta.get(k)
            .ok_or_else(|| Error::Format(format!("missing grid key {k:?}")))
    };
    let f = |k: &str| -> Result<f64> { parse_float(get(k)?) };
    let n = |k: &str| -> Result<usize> {
        get(k)?
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad integer for {k:?}")))
    };
    SpaceTimeGrid::new(
        f("grid.x_min")?,
        f("grid.x_max")?,
        n("grid.nx")?,
        f("grid.a_min")?,
        f("grid.a_max")?,
        n("grid.na")?,
        f("grid.t_end")?,
        n("grid.nt")?,
    )
}

/// One field as `(t, y, value)` rows over the spatial nodes.
pub fn field_table(field: &Field) -> CsvTable {
    let grid = field.grid();
    let mut t = CsvTable::new("field/v1", &["t", "y", "value"]);
    set_grid_meta(&mut t, grid);
    for i in 0..=grid.nx {
        t.push_row(vec![field.time(), grid.node(i), field.values()[i]])
            .expect("row width fixed above");
    }
    t
}

/// A recorded trajectory as `(t, y, value)` rows, node values per snapshot.
pub fn record_table(rec: &PathRecord) -> CsvTable {
    let grid = &rec.grid;
    let mut t = CsvTable::new("path/v1", &["t", "y", "value"]);
    set_grid_meta(&mut t, grid);
    t.set_meta("model", &rec.model_name);
    t.set_meta("seed", rec.seed);
    t.set_meta("replica", rec.replica_id);
    t.set_meta("epsilon", format_float(rec.epsilon));
    t.set_meta("scheme", scheme_name(rec.scheme));
    t.set_meta("stride", rec.stride);
    for (time, values) in rec.times.iter().zip(&rec.fields) {
        for i in 0..=grid.nx {
            t.push_row(vec![*time, grid.node(i), values[i]])
                .expect("row width fixed above");
        }
    }
    t
}

/// A measure path as `(t, y, value)` rows, densities at cell midpoints.
pub fn measure_table(path: &MeasurePath) -> CsvTable {
    let grid = path.grid();
    let mut t = CsvTable::new("measure-path/v1", &["t", "y", "value"]);
    set_grid_meta(&mut t, grid);
    for (n, time) in path.times().iter().enumerate() {
        let density = &path.densities()[n];
        for j in 0..grid.nx {
            let y = 0.5 * (grid.node(j) + grid.node(j + 1));
            t.push_row(vec![*time, y, density[j]]).expect("row width fixed above");
        }
    }
    t
}

/// A control as `(t, a, value)` rows at step start times and cell midpoints.
pub fn control_table(h: &ControlFunction) -> CsvTable {
    let grid = h.grid();
    let mut t = CsvTable::new("control/v1", &["t", "a", "value"]);
    set_grid_meta(&mut t, grid);
    for n in 0..grid.nt {
        for j in 0..grid.na {
            t.push_row(vec![grid.time(n), grid.a_mid(j), h.row(n)[j]])
                .expect("row width fixed above");
        }
    }
    t
}

fn nearest_index(x: f64, origin: f64, step: f64, count: usize, what: &str) -> Result<usize> {
    let raw = (x - origin) / step;
    let idx = raw.round();
    if (raw - idx).abs() > 1e-6 || idx < 0.0 || idx as usize >= count {
        return Err(Error::Format(format!("{what} value {x} is off the grid")));
    }
    Ok(idx as usize)
}

/// Rebuild a measure path from a `measure-path/v1` table; rows may arrive
/// in any order but must cover every cell of every slice exactly once.
pub fn table_to_measure_path(table: &CsvTable) -> Result<MeasurePath> {
    if table.schema != "measure-path/v1" {
        return Err(Error::Format(format!("expected measure-path/v1, got {}", table.schema)));
    }
    let grid = Arc::new(grid_from_meta(&table.meta)?);
    let (ct, cy, cv) = (
        table.column_index("t")?,
        table.column_index("y")?,
        table.column_index("value")?,
    );
    let mut times: Vec<f64> = Vec::new();
    for row in &table.rows {
        if !times.iter().any(|t| (t - row[ct]).abs() < 1e-12) {
            times.push(row[ct]);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
    let mut densities = vec![vec![f64::NAN; grid.nx]; times.len()];
    let y0 = 0.5 * (grid.node(0) + grid.node(1));
    for row in &table.rows {
        let n = times
            .iter()
            .position(|t| (t - row[ct]).abs() < 1e-12)
            .expect("time collected above");
        let j = nearest_index(row[cy], y0, grid.dx(), grid.nx, "y")?;
        densities[n][j] = row[cv];
    }
    if densities.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Format("measure path table has missing cells".into()));
    }
    MeasurePath::new(grid, times, densities)
}

/// Rebuild a control from a `control/v1` table.
pub fn table_to_control(table: &CsvTable) -> Result<ControlFunction> {
    if table.schema != "control/v1" {
        return Err(Error::Format(format!("expected control/v1, got {}", table.schema)));
    }
    let grid = Arc::new(grid_from_meta(&table.meta)?);
    let (ct, ca, cv) = (
        table.column_index("t")?,
        table.column_index("a")?,
        table.column_index("value")?,
    );
    let mut values = vec![vec![f64::NAN; grid.na]; grid.nt];
    for row in &table.rows {
        let n = nearest_index(row[ct], 0.0, grid.dt(), grid.nt, "t")?;
        let j = nearest_index(row[ca], grid.a_mid(0), grid.da(), grid.na, "a")?;
        values[n][j] = row[cv];
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Format("control table has missing cells".into()));
    }
    ControlFunction::new(grid, values)
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::ExplicitEuler => "explicit-euler",
        Scheme::CrankNicolson => "crank-nicolson",
    }
}

/// What one snapshot frame holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Cumulative node values, `nx + 1` per frame.
    NodeField,
    /// Cell densities, `nx` per frame.
    Density,
}

impl FrameKind {
    fn tag(self) -> u8 {
        match self {
            FrameKind::NodeField => 0,
            FrameKind::Density => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(FrameKind::NodeField),
            1 => Ok(FrameKind::Density),
            _ => Err(Error::Format(format!("unknown frame kind tag {t}"))),
        }
    }

    fn frame_len(self, grid: &SpaceTimeGrid) -> usize {
        match self {
            FrameKind::NodeField => grid.nx + 1,
            FrameKind::Density => grid.nx,
        }
    }
}

/// A replayable stack of frames with its grid and provenance strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Arc<SpaceTimeGrid>,
    pub kind: FrameKind,
    pub meta: BTreeMap<String, String>,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(
        grid: Arc<SpaceTimeGrid>,
        kind: FrameKind,
        times: Vec<f64>,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != frames.len() {
            return Err(Error::Format(format!(
                "{} times for {} frames",
                times.len(),
                frames.len()
            )));
        }
        let want = kind.frame_len(&grid);
        for (n, f) in frames.iter().enumerate() {
            if f.len() != want {
                return Err(Error::Format(format!(
                    "frame {n} has {} values, expected {want}",
                    f.len()
                )));
            }
        }
        Ok(Snapshot { grid, kind, meta: BTreeMap::new(), times, frames })
    }

    pub fn from_record(rec: &PathRecord) -> Self {
        let mut snap = Snapshot::new(
            rec.grid.clone(),
            FrameKind::NodeField,
            rec.times.clone(),
            rec.fields.clone(),
        )
        .expect("record shape is validated by the solver");
        snap.meta.insert("model".into(), rec.model_name.clone());
        snap.meta.insert("seed".into(), rec.seed.to_string());
        snap.meta.insert("replica".into(), rec.replica_id.to_string());
        snap.meta.insert("epsilon".into(), format_float(rec.epsilon));
        snap.meta.insert("scheme".into(), scheme_name(rec.scheme).into());
        snap.meta.insert("stride".into(), rec.stride.to_string());
        snap
    }

    pub fn from_measure_path(path: &MeasurePath) -> Self {
        Snapshot::new(
            path.grid().clone(),
            FrameKind::Density,
            path.times().to_vec(),
            path.densities().to_vec(),
        )
        .expect("path shape is validated on construction")
    }

    /// View the frames as a measure path; node-field frames are converted
    /// through the cumulative-to-density difference.
    pub fn to_measure_path(&self) -> Result<MeasurePath> {
        match self.kind {
            FrameKind::Density => {
                MeasurePath::new(self.grid.clone(), self.times.clone(), self.frames.clone())
            }
            FrameKind::NodeField => {
                let slices: Result<Vec<_>> = self
                    .times
                    .iter()
                    .zip(&self.frames)
                    .map(|(t, values)| {
                        let f = Field::new(self.grid.clone(), *t, values.clone())?;
                        cumulative_to_measure(&f)
                    })
                    .collect();
                MeasurePath::from_slices(&slices?)
            }
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&[self.kind.tag()])?;
        for v in [
            self.grid.x_min,
            self.grid.x_max,
            self.grid.a_min,
            self.grid.a_max,
            self.grid.t_end,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for n in [self.grid.nx, self.grid.na, self.grid.nt] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            for s in [k, v] {
                w.write_all(&(s.len() as u32).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
        }
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        for (t, frame) in self.times.iter().zip(&self.frames) {
            w.write_all(&t.to_le_bytes())?;
            for v in frame {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format(format!(
                "bad snapshot magic {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let version = read_u32(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!(
                "snapshot version {version}, this build reads {SNAPSHOT_VERSION}"
            )));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let kind = FrameKind::from_tag(tag[0])?;
        let x_min = read_f64(r)?;
        let x_max = read_f64(r)?;
        let a_min = read_f64(r)?;
        let a_max = read_f64(r)?;
        let t_end = read_f64(r)?;
        let nx = read_u64(r)? as usize;
        let na = read_u64(r)? as usize;
        let nt = read_u64(r)? as usize;
        let grid = Arc::new(SpaceTimeGrid::new(x_min, x_max, nx, a_min, a_max, na, t_end, nt)?);
        let n_meta = read_u32(r)?;
        let mut meta = BTreeMap::new();
        for _ in 0..n_meta {
            let k = read_string(r)?;
            let v = read_string(r)?;
            meta.insert(k, v);
        }
        let n_frames = read_u64(r)? as usize;
        let frame_len = kind.frame_len(&grid);
        let mut times = Vec::with_capacity(n_frames);
        let mut frames = Vec::with_capacity(n_frames);
        for _ in 0..n_frames {
            times.push(read_f64(r)?);
            let mut frame = Vec::with_capacity(frame_len);
            for _ in 0..frame_len {
                frame.push(read_f64(r)?);
            }
            frames.push(frame);
        }
        let mut snap = Snapshot::new(grid, kind, times, frames)?;
        snap.meta = meta;
        Ok(snap)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Snapshot::read_from(&mut f)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string length {len} is implausible")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::Format("snapshot string is not utf-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::solver::{solve_path, SolverConfig};
    use proptest::prelude::*;

    fn small_grid() -> Arc<SpaceTimeGrid> {
        Arc::new(SpaceTimeGrid::new(-2.0, 2.0, 8, -0.5, 3.0, 4, 0.5, 10).unwrap())
    }

    #[test]
    fn float_formatting_round_trips_hard_cases() {
        for v in [
            0.0,
            -0.0,
            1.0,
            -1.5,
            0.1,
            1e-300,
            -3.25e17,
            f64::MIN_POSITIVE,
            f64::MAX,
            std::f64::consts::PI,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            let s = format_float(v);
            let back = parse_float(&s).unwrap();
            assert!(
                back == v && back.is_sign_negative() == v.is_sign_negative(),
                "{v} -> {s} -> {back}"
            );
        }
        assert!(parse_float("not-a-number").is_err());
        assert!(parse_float("").is_err());
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let mut t = CsvTable::new("demo/v1", &["t", "y", "value"]);
        t.set_meta("model", "branching");
        t.set_meta("seed", 42u64);
        t.push_row(vec![0.0, -1.0, 1e-300]).unwrap();
        t.push_row(vec![0.5, 2.0, -0.125]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = CsvTable::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_header_layout_is_pinned() {
        let mut t = CsvTable::new("demo/v1", &["a", "b"]);
        t.set_meta("zeta", 1u32);
        t.set_meta("alpha", "x");
        t.push_row(vec![1.0, 2.5]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // Schema line first, then meta sorted by key, then columns, then rows.
        assert_eq!(
            text,
            "# schema=demo/v1\n# alpha=x\n# zeta=1\na,b\n1,2.5\n"
        );
        // Byte-stable: a second write is identical.
        let mut again = Vec::new();
        t.write_to(&mut again).unwrap();
        assert_eq!(String::from_utf8(again).unwrap(), text);
    }

    #[test]
    fn body_hash_ignores_meta_but_not_data() {
        let mut a = CsvTable::new("demo/v1", &["x"]);
        a.push_row(vec![1.0]).unwrap();
        let mut b = a.clone();
        b.set_meta("wallclock", "2024-01-01T00:00:00Z");
        assert_eq!(a.body_sha256(), b.body_sha256());
        let mut c = a.clone();
        c.rows[0][0] = 2.0;
        assert_ne!(a.body_sha256(), c.body_sha256());
    }

    #[test]
    fn file_body_hash_matches_table_body_hash() {
        let mut t = CsvTable::new("demo/v1", &["x", "y"]);
        t.set_meta("note", "volatile");
        t.push_row(vec![1.0, -2.5]).unwrap();
        t.push_row(vec![3.0, 1e-300]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.save(&path).unwrap();
        assert_eq!(csv_file_body_sha256(&path).unwrap(), t.body_sha256());
    }

    #[test]
    fn malformed_csv_inputs_error() {
        let read = |s: &str| CsvTable::read_from(&mut s.as_bytes());
        assert!(read("a,b\n1,2\n").is_err(), "missing schema");
        assert!(read("# schema=x/v1\n").is_err(), "missing columns");
        assert!(read("# schema=x/v1\na,b\n1\n").is_err(), "ragged row");
        assert!(read("# schema=x/v1\na,b\n1,dog\n").is_err(), "bad float");
        assert!(read("# schema=x/v1\n# badline\na\n1\n").is_err(), "meta without =");
    }

    #[test]
    fn grid_meta_round_trips() {
        let grid = small_grid();
        let mut t = CsvTable::new("field/v1", &["t", "y", "value"]);
        set_grid_meta(&mut t, &grid);
        let back = grid_from_meta(&t.meta).unwrap();
        assert_eq!(&back, grid.as_ref());
    }

    #[test]
    fn measure_table_round_trips_through_text() {
        let grid = small_grid();
        let model = ModelSpec::sbm(1.0, 1.0).unwrap();
        let initial = model.initial_field(grid.clone()).unwrap();
        let slice = cumulative_to_measure(&initial).unwrap();
        let later = cumulative_to_measure(
            &crate::heat::heat_flow_field(&initial, 0.25).unwrap(),
        )
        .unwrap();
        let path = MeasurePath::from_slices(&[slice, later]).unwrap();
        let table = measure_table(&path);
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = table_to_measure_path(&CsvTable::read_from(&mut buf.as_slice()).unwrap())
            .unwrap();
        assert_eq!(back.times(), path.times());
        assert_eq!(back.densities(), path.densities());
    }

    #[test]
    fn control_table_round_trips_through_text() {
        let grid = small_grid();
        let h = ControlFunction::from_fn(grid.clone(), |t, a| (t + a).sin()).unwrap();
        let table = control_table(&h);
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = table_to_control(&CsvTable::read_from(&mut buf.as_slice()).unwrap()).unwrap();
        for n in 0..grid.nt {
            assert_eq!(back.row(n), h.row(n), "row {n}");
        }
    }

    #[test]
    fn snapshot_round_trips_a_recorded_path() {
        let grid = small_grid();
        let model = ModelSpec::sbm(1.0, 1.0).unwrap();
        let cfg = SolverConfig::new(0.3);
        let stream = crate::noise::NoiseStream::new(7, 0);
        let rec = solve_path(&model, &grid, &cfg, &stream, None, None).unwrap();
        let snap = Snapshot::from_record(&rec);
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let back = Snapshot::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, snap);
        // Bitwise: the doubles survive exactly.
        for (a, b) in snap.frames.iter().flatten().zip(back.frames.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // And the measure view matches the direct conversion.
        let direct = cumulative_to_measure(
            &Field::new(grid.clone(), rec.times[0], rec.fields[0].clone()).unwrap(),
        )
        .unwrap();
        let via_snap = back.to_measure_path().unwrap();
        assert_eq!(via_snap.densities()[0], direct.density());
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let grid = small_grid();
        let snap = Snapshot::new(
            grid,
            FrameKind::Density,
            vec![0.0, 0.5],
            vec![vec![0.0; 8], vec![1.0; 8]],
        )
        .unwrap();
        let mut buf = Vec::new();
        snap.write_to(&mut buf).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] ^= 0xff;
        assert!(Snapshot::read_from(&mut bad_magic.as_slice()).is_err());
        let mut bad_version = buf.clone();
        bad_version[8] = 99;
        assert!(Snapshot::read_from(&mut bad_version.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 4];
        assert!(Snapshot::read_from(&mut &truncated[..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn snapshot_round_trip_random_frames(
            n_frames in 1usize..6,
            seed_vals in proptest::collection::vec(-1e6f64..1e6, 8 * 6),
        ) {
            let grid = small_grid();
            let times: Vec<f64> = (0..n_frames).map(|n| n as f64 * 0.05).collect();
            let frames: Vec<Vec<f64>> = (0..n_frames)
                .map(|n| seed_vals[n * 8..(n + 1) * 8].to_vec())
                .collect();
            let snap = Snapshot::new(grid, FrameKind::Density, times, frames).unwrap();
            let mut buf = Vec::new();
            snap.write_to(&mut buf).unwrap();
            let back = Snapshot::read_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, snap);
        }
    }
}
