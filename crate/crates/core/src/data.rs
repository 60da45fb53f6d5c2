//! Problem schema, mixed inputs, datasets and CSV ingestion.
//!
//! The canonical file layout is a header `x1,...,xp,z1,...,zq,y` followed by
//! one row per run. Qualitative levels are 1-based integers. Lines starting
//! with `#` are ignored.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of a mixed-input problem: `p` quantitative factors and `q`
/// qualitative factors with `levels[h]` levels each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct ProblemSchema {
    p: usize,
    q: usize,
    levels: Vec<usize>,
}

#[derive(Deserialize)]
struct RawSchema {
    p: usize,
    q: usize,
    levels: Vec<usize>,
}

impl TryFrom<RawSchema> for ProblemSchema {
    type Error = Error;
    fn try_from(raw: RawSchema) -> Result<Self> {
        ProblemSchema::new(raw.p, raw.q, raw.levels)
    }
}

impl ProblemSchema {
    pub fn new(p: usize, q: usize, levels: Vec<usize>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidSchema("p must be at least 1".into()));
        }
        if q == 0 {
            return Err(Error::InvalidSchema("q must be at least 1".into()));
        }
        if levels.len() != q {
            return Err(Error::InvalidSchema(format!(
                "{} level counts given for q = {q}",
                levels.len()
            )));
        }
        if let Some(h) = levels.iter().position(|&m| m < 2) {
            return Err(Error::InvalidSchema(format!(
                "factor z{} has {} levels; at least 2 required",
                h + 1,
                levels[h]
            )));
        }
        Ok(Self { p, q, levels })
    }

    /// Schema with `q` factors of `m` levels each.
    pub fn symmetric(p: usize, q: usize, m: usize) -> Result<Self> {
        Self::new(p, q, vec![m; q])
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn total_levels(&self) -> usize {
        self.levels.iter().sum()
    }

    /// Column names in canonical order, without the response column.
    pub fn input_header(&self) -> Vec<String> {
        (1..=self.p)
            .map(|k| format!("x{k}"))
            .chain((1..=self.q).map(|h| format!("z{h}")))
            .collect()
    }

    pub fn validate(&self, w: &MixedInput) -> Result<()> {
        if w.x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: w.x.len(),
            });
        }
        if w.z.len() != self.q {
            return Err(Error::DimensionMismatch {
                expected: self.q,
                got: w.z.len(),
            });
        }
        for (h, (&l, &m)) in w.z.iter().zip(&self.levels).enumerate() {
            if l == 0 || l > m {
                return Err(Error::LevelOutOfRange {
                    row: None,
                    factor: h + 1,
                    level: l,
                    max: m,
                });
            }
        }
        Ok(())
    }
}

/// One design point `w = (x, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedInput {
    pub x: Vec<f64>,
    /// 1-based level indices.
    pub z: Vec<usize>,
}

impl MixedInput {
    pub fn new(x: Vec<f64>, z: Vec<usize>) -> Self {
        Self { x, z }
    }
}

/// Affine record mapping one original quantitative column onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnScaling {
    Identity,
    Affine { min: f64, max: f64 },
    /// Degenerate column; every value maps to 0.5.
    Constant { value: f64 },
}

impl ColumnScaling {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ColumnScaling::Identity => x,
            ColumnScaling::Affine { min, max } => (x - min) / (max - min),
            ColumnScaling::Constant { .. } => 0.5,
        }
    }

    /// Whether `x` (original units) lies inside the range seen in training.
    pub fn in_range(&self, x: f64) -> bool {
        match *self {
            ColumnScaling::Constant { value } => x == value,
            _ => {
                let u = self.apply(x);
                (0.0..=1.0).contains(&u)
            }
        }
    }

    /// The scaling equivalent to applying `self` and then `outer`.
    fn then(self, outer: ColumnScaling) -> ColumnScaling {
        use ColumnScaling::*;
        match (self, outer) {
            (s, Identity) => s,
            (Identity, o) => o,
            (Constant { value }, _) => Constant { value },
            (Affine { min: a, max: b }, Affine { min: c, max: d }) => Affine {
                min: a + c * (b - a),
                max: a + d * (b - a),
            },
            (Affine { min: a, max: b }, Constant { value }) => Constant {
                value: a + value * (b - a),
            },
        }
    }
}

/// Training data: schema, inputs, responses and the quantitative scaling
/// that relates stored inputs to original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: ProblemSchema,
    inputs: Vec<MixedInput>,
    y: Vec<f64>,
    scaling: Vec<ColumnScaling>,
}

impl Dataset {
    /// Builds a dataset in original units (identity scaling).
    pub fn new(schema: ProblemSchema, inputs: Vec<MixedInput>, y: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: y.len(),
            });
        }
        for (i, w) in inputs.iter().enumerate() {
            schema.validate(w).map_err(|e| with_row(e, i + 1))?;
            if w.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    msg: "non-finite quantitative value".into(),
                });
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRow {
                row: i + 1,
                msg: "non-finite response".into(),
            });
        }
        let scaling = vec![ColumnScaling::Identity; schema.p()];
        Ok(Self {
            schema,
            inputs,
            y,
            scaling,
        })
    }

    pub fn schema(&self) -> &ProblemSchema {
        &self.schema
    }

    pub fn inputs(&self) -> &[MixedInput] {
        &self.inputs
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn scaling(&self) -> &[ColumnScaling] {
        &self.scaling
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Columns flagged as constant during normalization.
    pub fn constant_columns(&self) -> Vec<usize> {
        self.scaling
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, ColumnScaling::Constant { .. }))
            .map(|(k, _)| k)
            .collect()
    }

    /// Rows selected by `idx`, keeping this dataset's scaling record.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            scaling: self.scaling.clone(),
        })
    }

    /// Same inputs with a replaced response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: y.len(),
            });
        }
        Ok(Dataset {
            y,
            ..self.clone()
        })
    }

    /// Replaces the scaling record.
    pub(crate) fn with_scaling(mut self, scaling: Vec<ColumnScaling>) -> Result<Dataset> {
        if scaling.len() != self.schema.p() {
            return Err(Error::DimensionMismatch {
                expected: self.schema.p(),
                got: scaling.len(),
            });
        }
        self.scaling = scaling;
        Ok(self)
    }

    /// Maps an original-unit input into the stored (normalized) units.
    pub fn to_model_units(&self, w: &MixedInput) -> MixedInput {
        MixedInput {
            x: w
                .x
                .iter()
                .zip(&self.scaling)
                .map(|(&v, s)| s.apply(v))
                .collect(),
            z: w.z.clone(),
        }
    }

    pub fn response_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    /// Sample variance of the responses (denominator n - 1, or 0 for n = 1).
    pub fn response_variance(&self) -> f64 {
        let n = self.y.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.response_mean();
        self.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    }
}

pub(crate) fn with_row(e: Error, row: usize) -> Error {
    match e {
        Error::LevelOutOfRange {
            factor, level, max, ..
        } => Error::LevelOutOfRange {
            row: Some(row),
            factor,
            level,
            max,
        },
        Error::DimensionMismatch { expected, got } => Error::InvalidRow {
            row,
            msg: format!("expected {expected} values, got {got}"),
        },
        other => other,
    }
}

/// Maps every quantitative column onto `[0, 1]`.
///
/// Columns already inside `[0, 1]` keep identity scaling. Constant columns
/// map to 0.5 and are reported by [`Dataset::constant_columns`].
pub fn normalize_quantitative(d: &Dataset) -> Dataset {
    let p = d.schema.p();
    let mut out = d.clone();
    for k in 0..p {
        let (lo, hi) = d
            .inputs
            .iter()
            .map(|w| w.x[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let step = if hi == lo {
            log::warn!("quantitative column x{} is constant ({lo}); mapping to 0.5", k + 1);
            ColumnScaling::Constant { value: lo }
        } else if lo >= 0.0 && hi <= 1.0 {
            ColumnScaling::Identity
        } else {
            ColumnScaling::Affine { min: lo, max: hi }
        };
        for w in &mut out.inputs {
            w.x[k] = step.apply(w.x[k]);
        }
        out.scaling[k] = d.scaling[k].then(step);
    }
    out
}

fn parse_header(headers: &csv::StringRecord, schema: &ProblemSchema, with_y: Option<bool>) -> Result<bool> {
    let expected = schema.input_header();
    let got: Vec<&str> = headers.iter().collect();
    let has_y = match got.len() {
        l if l == expected.len() + 1 => true,
        l if l == expected.len() => false,
        l => {
            return Err(Error::SchemaMismatch(format!(
                "expected columns {}{}, found {l} columns ({})",
                expected.join(","),
                if with_y == Some(false) { "" } else { ",y" },
                got.join(",")
            )))
        }
    };
    if let Some(required) = with_y {
        if required != has_y {
            return Err(Error::SchemaMismatch(format!(
                "expected header {}{}, found {}",
                expected.join(","),
                if required { ",y" } else { "" },
                got.join(",")
            )));
        }
    }
    for (i, name) in expected.iter().enumerate() {
        if got[i] != name {
            return Err(Error::SchemaMismatch(format!(
                "column {} is '{}', expected '{}'",
                i + 1,
                got[i],
                name
            )));
        }
    }
    if has_y && got[expected.len()] != "y" {
        return Err(Error::SchemaMismatch(format!(
            "last column is '{}', expected 'y'",
            got[expected.len()]
        )));
    }
    Ok(has_y)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn parse_row(
    record: &csv::StringRecord,
    schema: &ProblemSchema,
    has_y: bool,
    row: usize,
) -> Result<(MixedInput, Option<f64>)> {
    let width = schema.p() + schema.q() + usize::from(has_y);
    if record.len() != width {
        return Err(Error::InvalidRow {
            row,
            msg: format!("expected {width} fields, found {}", record.len()),
        });
    }
    let num = |i: usize, name: String| -> Result<f64> {
        record[i].parse::<f64>().map_err(|_| Error::InvalidRow {
            row,
            msg: format!("column {name}: '{}' is not a number", &record[i]),
        })
    };
    let x = (0..schema.p())
        .map(|k| num(k, format!("x{}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let mut z = Vec::with_capacity(schema.q());
    for h in 0..schema.q() {
        let cell = &record[schema.p() + h];
        let level: usize = cell.parse().map_err(|_| Error::InvalidRow {
            row,
            msg: format!("column z{}: '{cell}' is not a level index", h + 1),
        })?;
        z.push(level);
    }
    let y = if has_y {
        Some(num(schema.p() + schema.q(), "y".into())?)
    } else {
        None
    };
    let w = MixedInput { x, z };
    schema.validate(&w).map_err(|e| with_row(e, row))?;
    Ok((w, y))
}

/// Reads a training CSV in original units.
pub fn load_dataset(path: impl AsRef<Path>, schema: &ProblemSchema) -> Result<Dataset> {
    read_dataset(File::open(path)?, schema)
}

pub fn read_dataset<R: Read>(r: R, schema: &ProblemSchema) -> Result<Dataset> {
    let mut rdr = reader(r);
    parse_header(rdr.headers()?, schema, Some(true))?;
    let mut inputs = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let (w, v) = parse_row(&rec, schema, true, row)?;
        inputs.push(w);
        y.push(v.expect("response column present"));
    }
    Dataset::new(schema.clone(), inputs, y)
}

/// Reads prediction targets: `x1..xp,z1..zq` with an optional trailing `y`
/// column, which is ignored. An empty file yields no targets.
pub fn load_inputs(path: impl AsRef<Path>, schema: &ProblemSchema) -> Result<Vec<MixedInput>> {
    read_inputs(File::open(path)?, schema)
}

pub fn read_inputs<R: Read>(mut r: R, schema: &ProblemSchema) -> Result<Vec<MixedInput>> {
    let mut buf = String::new();
    r.read_to_string(&mut buf)?;
    if buf.lines().all(|l| l.trim().is_empty() || l.trim_start().starts_with('#')) {
        return Ok(Vec::new());
    }
    let mut rdr = reader(buf.as_bytes());
    let has_y = parse_header(rdr.headers()?, schema, None)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        out.push(parse_row(&rec, schema, has_y, row)?.0);
    }
    Ok(out)
}

/// Scans a CSV header and its level columns to infer a schema: `p` and `q`
/// from the column names, `m_h` as the largest level observed (at least 2).
pub fn scan_schema(path: impl AsRef<Path>) -> Result<ProblemSchema> {
    let mut rdr = reader(File::open(path)?);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let p = names.iter().take_while(|n| n.starts_with('x')).count();
    let q = names[p..].iter().take_while(|n| n.starts_with('z')).count();
    let mut levels = vec![2usize; q];
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        for (h, m) in levels.iter_mut().enumerate() {
            let cell = rec.get(p + h).ok_or_else(|| Error::InvalidRow {
                row,
                msg: "missing level column".into(),
            })?;
            let l: usize = cell.parse().map_err(|_| Error::InvalidRow {
                row,
                msg: format!("column z{}: '{cell}' is not a level index", h + 1),
            })?;
            *m = (*m).max(l);
        }
    }
    ProblemSchema::new(p, q, levels)
}

/// Writes the dataset as stored (header `x1..xp,z1..zq,y`). Values use the
/// shortest decimal form that parses back to the same `f64`.
pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut f = File::create(path)?;
    write_dataset(d, &mut f)
}

pub fn write_dataset<W: Write>(d: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = d.schema.input_header();
    header.push("y".into());
    wtr.write_record(&header)?;
    for (input, y) in d.inputs.iter().zip(&d.y) {
        let mut rec: Vec<String> = input.x.iter().map(|v| format!("{v:?}")).collect();
        rec.extend(input.z.iter().map(|l| l.to_string()));
        rec.push(format!("{y:?}"));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema11() -> ProblemSchema {
        ProblemSchema::new(1, 1, vec![2]).unwrap()
    }

    #[test]
    fn schema_rejects_degenerate() {
        assert!(ProblemSchema::new(0, 1, vec![2]).is_err());
        assert!(ProblemSchema::new(1, 0, vec![]).is_err());
        assert!(ProblemSchema::new(1, 1, vec![1]).is_err());
        assert!(ProblemSchema::new(1, 2, vec![2]).is_err());
    }

    #[test]
    fn parses_three_rows() {
        let csv = "x1,z1,y\n0.1,1,3.0\n# comment\n0.5,2,4.5\n0.9,1,-1\n";
        let d = read_dataset(csv.as_bytes(), &schema11()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.inputs()[1].z, vec![2]);
        assert_eq!(d.y(), &[3.0, 4.5, -1.0]);
    }

    #[test]
    fn level_out_of_range_is_reported_with_row() {
        let csv = "x1,z1,y\n0.1,1,3.0\n0.5,3,4.5\n";
        match read_dataset(csv.as_bytes(), &schema11()) {
            Err(Error::LevelOutOfRange {
                row: Some(3),
                factor: 1,
                level: 3,
                max: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn column_order_is_enforced() {
        let csv = "z1,x1,y\n1,0.1,3.0\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema11()),
            Err(Error::SchemaMismatch(_))
        ));
        let csv = "x1,z1\n0.1,1\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema11()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn non_numeric_and_empty() {
        let csv = "x1,z1,y\nabc,1,3.0\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema11()),
            Err(Error::InvalidRow { row: 2, .. })
        ));
        let csv = "x1,z1,y\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema11()),
            Err(Error::EmptyDataset)
        ));
    }

    fn column(values: &[f64]) -> Dataset {
        let inputs = values.iter().map(|&v| MixedInput::new(vec![v], vec![1])).collect();
        Dataset::new(schema11(), inputs, vec![0.0; values.len()]).unwrap()
    }

    #[test]
    fn normalize_affine_identity_constant() {
        let d = normalize_quantitative(&column(&[2.0, 6.0, 10.0]));
        let xs: Vec<f64> = d.inputs().iter().map(|w| w.x[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(d.scaling()[0], ColumnScaling::Affine { min: 2.0, max: 10.0 });

        let d = normalize_quantitative(&column(&[0.0, 0.25, 1.0]));
        assert_eq!(d.scaling()[0], ColumnScaling::Identity);
        assert_eq!(d.inputs()[1].x[0], 0.25);

        let d = normalize_quantitative(&column(&[4.0, 4.0, 4.0]));
        assert!(d.inputs().iter().all(|w| w.x[0] == 0.5));
        assert_eq!(d.constant_columns(), vec![0]);
    }

    #[test]
    fn normalize_is_idempotent_and_maps_originals() {
        let d = column(&[-3.0, 1.5, 7.0, 2.0]);
        let once = normalize_quantitative(&d);
        let twice = normalize_quantitative(&once);
        assert_eq!(once, twice);
        let w = MixedInput::new(vec![7.0], vec![1]);
        assert_eq!(once.to_model_units(&w).x[0], 1.0);
    }

    #[test]
    fn targets_may_omit_response_or_be_empty() {
        let t = read_inputs("x1,z1\n0.2,2\n".as_bytes(), &schema11()).unwrap();
        assert_eq!(t, vec![MixedInput::new(vec![0.2], vec![2])]);
        let t = read_inputs("x1,z1,y\n0.2,2,9\n".as_bytes(), &schema11()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(read_inputs("".as_bytes(), &schema11()).unwrap().is_empty());
        assert!(read_inputs("x1,z1\n".as_bytes(), &schema11()).unwrap().is_empty());
    }
}
