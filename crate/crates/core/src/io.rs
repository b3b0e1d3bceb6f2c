//! Canonical text formats for GS adapters, low-rank adapters and dense matrices.
//!
//! Files are JSON documents with a fixed key order. Numbers are written in
//! shortest round-trip form and parsed with exact `f64` reconstruction, so
//! `read(write(a)) == a` bitwise and `write(read(f)) == f` for canonical `f`.
//! The readers additionally accept the bare literals `NaN`, `Infinity` and
//! `-Infinity` so that such files fail with a named [`FormatError::NonFiniteValue`]
//! rather than a syntax error.
//!
//! GS adapter schema (`gs-adapter/v1`):
//!
//! ```text
//! {
//!   "format": "gs-adapter/v1",
//!   "n": <int>, "b": <int>, "k": <int>,
//!   "storage": "orthogonal" | "cayley",
//!   "permutation": {"kind": "perfect_shuffle", "b": <int>, "n": <int>, "convention": "PL=PT,PR=I"},
//!   "left_blocks": [[b·b numbers, row-major], ... k arrays],
//!   "right_blocks": [...],
//!   "metadata": {"seed": <int>, "sigma": <number>, "provenance": <string>}   (optional, all keys optional)
//! }
//! ```
//!
//! Low-rank schema (`lr-adapter/v1`): `n`, `m`, `r`, then `U` (n·r numbers) and
//! `V` (m·r numbers), both row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::linalg::{Matrix, OrthogonalBlock, SkewGenerator};
use crate::lowrank::LowRankFactors;
use crate::structure::{BlockDiagonalFactor, Convention, GsAdapter, Metadata, Storage};

pub const ADAPTER_TAG: &str = "gs-adapter/v1";
pub const LOWRANK_TAG: &str = "lr-adapter/v1";
pub const DENSE_TAG: &str = "dense-matrix/v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("unknown format tag {found:?} (expected {expected:?})")]
    UnknownFormatTag { expected: &'static str, found: String },
    #[error("structural mismatch in {field}: {detail}")]
    StructuralMismatch { field: String, detail: String },
    #[error("non-finite value in {field} block {block} entry {entry}")]
    NonFiniteValue { field: String, block: usize, entry: usize },
}

impl FormatError {
    fn structural(field: impl Into<String>, detail: impl Into<String>) -> Self {
        FormatError::StructuralMismatch {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

// ---------------------------------------------------------------------------
// writing

fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite floats always serialize")
}

fn string_lit(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn number_array(values: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = values.into_iter().map(num).collect();
    format!("[{}]", parts.join(", "))
}

fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn factor_rows(f: &BlockDiagonalFactor) -> Vec<Vec<f64>> {
    match f {
        BlockDiagonalFactor::Orthogonal(v) => v.iter().map(|b| row_major(b.matrix())).collect(),
        BlockDiagonalFactor::Cayley(v) => v.iter().map(|k| row_major(k.matrix())).collect(),
    }
}

fn write_blocks(out: &mut String, key: &str, rows: &[Vec<f64>], last: bool) {
    let _ = writeln!(out, "  \"{key}\": [");
    for (i, r) in rows.iter().enumerate() {
        let sep = if i + 1 == rows.len() { "" } else { "," };
        let _ = writeln!(out, "    {}{sep}", number_array(r.iter().copied()));
    }
    let _ = writeln!(out, "  ]{}", if last { "" } else { "," });
}

/// Canonical serialization of an adapter.
pub fn adapter_to_string(a: &GsAdapter) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"format\": {},", string_lit(ADAPTER_TAG));
    let _ = writeln!(out, "  \"n\": {},", a.n());
    let _ = writeln!(out, "  \"b\": {},", a.block_size());
    let _ = writeln!(out, "  \"k\": {},", a.block_count());
    let _ = writeln!(out, "  \"storage\": {},", string_lit(a.storage().as_str()));
    let _ = writeln!(
        out,
        "  \"permutation\": {{\"kind\": \"perfect_shuffle\", \"b\": {}, \"n\": {}, \"convention\": {}}},",
        a.permutation().block_size(),
        a.permutation().dim(),
        string_lit(a.convention().as_str())
    );
    let has_meta = !a.metadata.is_empty();
    write_blocks(&mut out, "left_blocks", &factor_rows(a.left()), false);
    write_blocks(&mut out, "right_blocks", &factor_rows(a.right()), !has_meta);
    if has_meta {
        let mut fields = Vec::new();
        if let Some(seed) = a.metadata.seed {
            fields.push(format!("\"seed\": {seed}"));
        }
        if let Some(sigma) = a.metadata.sigma {
            fields.push(format!("\"sigma\": {}", num(sigma)));
        }
        if let Some(p) = &a.metadata.provenance {
            fields.push(format!("\"provenance\": {}", string_lit(p)));
        }
        let _ = writeln!(out, "  \"metadata\": {{{}}}", fields.join(", "));
    }
    out.push_str("}\n");
    out
}

pub fn write_adapter(a: &GsAdapter, path: impl AsRef<Path>) -> FormatResult<()> {
    write_text(path.as_ref(), &adapter_to_string(a))
}

pub fn lowrank_to_string(x: &LowRankFactors) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"format\": {},", string_lit(LOWRANK_TAG));
    let _ = writeln!(out, "  \"n\": {},", x.n());
    let _ = writeln!(out, "  \"m\": {},", x.m());
    let _ = writeln!(out, "  \"r\": {},", x.rank());
    let _ = writeln!(out, "  \"U\": {},", number_array(row_major(x.u())));
    let _ = writeln!(out, "  \"V\": {}", number_array(row_major(x.v())));
    out.push_str("}\n");
    out
}

pub fn write_lowrank(x: &LowRankFactors, path: impl AsRef<Path>) -> FormatResult<()> {
    write_text(path.as_ref(), &lowrank_to_string(x))
}

pub fn dense_to_string(m: &Matrix) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"format\": {},", string_lit(DENSE_TAG));
    let _ = writeln!(out, "  \"rows\": {},", m.nrows());
    let _ = writeln!(out, "  \"cols\": {},", m.ncols());
    let _ = writeln!(out, "  \"data\": {}", number_array(row_major(m)));
    out.push_str("}\n");
    out
}

pub fn write_dense(m: &Matrix, path: impl AsRef<Path>) -> FormatResult<()> {
    write_text(path.as_ref(), &dense_to_string(m))
}

fn write_text(path: &Path, text: &str) -> FormatResult<()> {
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> FormatResult<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// reading

/// Rewrites bare `NaN` / `Infinity` / `-Infinity` tokens outside strings into
/// marker strings that serde_json accepts.
fn quote_nonfinite_literals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        let mut matched = false;
        for lit in ["-Infinity", "Infinity", "NaN"] {
            if rest.starts_with(lit) {
                out.push_str(&format!("\"\\u0001nonfinite:{lit}\""));
                rest = &rest[lit.len()..];
                matched = true;
                break;
            }
        }
        if matched {
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

const NONFINITE_MARK: &str = "\u{1}nonfinite:";

fn parse_document(text: &str) -> FormatResult<Map<String, Value>> {
    let value: Value =
        serde_json::from_str(&quote_nonfinite_literals(text)).map_err(|e| FormatError::Syntax(e.to_string()))?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(FormatError::Syntax("top level must be an object".into())),
    }
}

fn check_tag(doc: &Map<String, Value>, expected: &'static str) -> FormatResult<()> {
    match doc.get("format") {
        Some(Value::String(s)) if s == expected => Ok(()),
        Some(Value::String(s)) => Err(FormatError::UnknownFormatTag {
            expected,
            found: s.clone(),
        }),
        Some(other) => Err(FormatError::UnknownFormatTag {
            expected,
            found: other.to_string(),
        }),
        None => Err(FormatError::structural("format", "missing")),
    }
}

fn get_count(doc: &Map<String, Value>, key: &str) -> FormatResult<usize> {
    let v = doc.get(key).ok_or_else(|| FormatError::structural(key, "missing"))?;
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| FormatError::structural(key, format!("expected a non-negative integer, found {v}")))
}

fn get_str<'a>(doc: &'a Map<String, Value>, key: &str) -> FormatResult<&'a str> {
    doc.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| FormatError::structural(key, "expected a string"))
}

/// One number; `Err(None)` marks a non-finite entry for the caller to locate.
fn number(v: &Value) -> std::result::Result<f64, Option<String>> {
    match v {
        Value::Number(n) => {
            // arbitrary_precision keeps the literal; std parsing is correctly rounded
            let x: f64 = n.to_string().parse().map_err(|_| Some(format!("bad number {n}")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(None)
            }
        }
        Value::String(s) if s.starts_with(NONFINITE_MARK) => Err(None),
        other => Err(Some(format!("expected a number, found {other}"))),
    }
}

fn number_list(v: &Value, field: &str, block: usize, len: usize) -> FormatResult<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| FormatError::structural(field, format!("block {block} is not an array")))?;
    if arr.len() != len {
        return Err(FormatError::structural(
            field,
            format!("block {block} has {} entries, expected {len}", arr.len()),
        ));
    }
    arr.iter()
        .enumerate()
        .map(|(entry, x)| {
            number(x).map_err(|e| match e {
                None => FormatError::NonFiniteValue {
                    field: field.to_string(),
                    block,
                    entry,
                },
                Some(detail) => FormatError::structural(field, format!("block {block} entry {entry}: {detail}")),
            })
        })
        .collect()
}

fn read_factor(doc: &Map<String, Value>, field: &str, k: usize, b: usize, storage: Storage) -> FormatResult<BlockDiagonalFactor> {
    let arr = doc
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| FormatError::structural(field, "missing or not an array"))?;
    if arr.len() != k {
        return Err(FormatError::structural(field, format!("found {} blocks, expected k = {k}", arr.len())));
    }
    let mut mats = Vec::with_capacity(k);
    for (i, blk) in arr.iter().enumerate() {
        let vals = number_list(blk, field, i, b * b)?;
        mats.push(Matrix::from_row_slice(b, b, &vals));
    }
    Ok(match storage {
        Storage::Orthogonal => {
            BlockDiagonalFactor::Orthogonal(mats.into_iter().map(OrthogonalBlock::from_matrix_unchecked).collect())
        }
        Storage::Cayley => BlockDiagonalFactor::Cayley(
            mats.into_iter()
                .enumerate()
                .map(|(i, m)| {
                    SkewGenerator::from_matrix(m)
                        .map_err(|_| FormatError::structural(field, format!("block {i} is not exactly skew-symmetric")))
                })
                .collect::<FormatResult<Vec<_>>>()?,
        ),
    })
}

fn read_metadata(doc: &Map<String, Value>) -> FormatResult<Metadata> {
    let Some(meta) = doc.get("metadata") else {
        return Ok(Metadata::default());
    };
    let meta = meta
        .as_object()
        .ok_or_else(|| FormatError::structural("metadata", "expected an object"))?;
    let seed = match meta.get("seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| FormatError::structural("metadata.seed", "expected an unsigned integer"))?,
        ),
    };
    let sigma = match meta.get("sigma") {
        None => None,
        Some(v) => Some(number(v).map_err(|e| match e {
            None => FormatError::NonFiniteValue {
                field: "metadata.sigma".into(),
                block: 0,
                entry: 0,
            },
            Some(d) => FormatError::structural("metadata.sigma", d),
        })?),
    };
    let provenance = match meta.get("provenance") {
        None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| FormatError::structural("metadata.provenance", "expected a string"))?
                .to_string(),
        ),
    };
    Ok(Metadata { seed, sigma, provenance })
}

pub fn adapter_from_str(text: &str) -> FormatResult<GsAdapter> {
    let doc = parse_document(text)?;
    check_tag(&doc, ADAPTER_TAG)?;
    let n = get_count(&doc, "n")?;
    let b = get_count(&doc, "b")?;
    let k = get_count(&doc, "k")?;
    if b == 0 || n % b != 0 || k * b != n {
        return Err(FormatError::structural("k", format!("need b | n and k = n/b (n={n}, b={b}, k={k})")));
    }
    let storage_s = get_str(&doc, "storage")?;
    let storage = Storage::parse(storage_s)
        .ok_or_else(|| FormatError::structural("storage", format!("unknown storage mode {storage_s:?}")))?;

    let perm = doc
        .get("permutation")
        .and_then(Value::as_object)
        .ok_or_else(|| FormatError::structural("permutation", "missing or not an object"))?;
    if get_str(perm, "kind")? != "perfect_shuffle" {
        return Err(FormatError::structural("permutation.kind", "only perfect_shuffle is supported"));
    }
    if get_count(perm, "b")? != b || get_count(perm, "n")? != n {
        return Err(FormatError::structural("permutation", "b/n disagree with the adapter"));
    }
    let conv = get_str(perm, "convention")?;
    Convention::parse(conv)
        .ok_or_else(|| FormatError::structural("permutation.convention", format!("unsupported convention {conv:?}")))?;

    let left = read_factor(&doc, "left_blocks", k, b, storage)?;
    let right = read_factor(&doc, "right_blocks", k, b, storage)?;
    let metadata = read_metadata(&doc)?;
    let adapter = GsAdapter::new(left, right).map_err(|e| FormatError::structural("blocks", e.to_string()))?;
    Ok(adapter.with_metadata(metadata))
}

pub fn read_adapter(path: impl AsRef<Path>) -> FormatResult<GsAdapter> {
    adapter_from_str(&read_text(path.as_ref())?)
}

fn flat_matrix(doc: &Map<String, Value>, field: &str, rows: usize, cols: usize) -> FormatResult<Matrix> {
    let v = doc.get(field).ok_or_else(|| FormatError::structural(field, "missing"))?;
    let vals = number_list(v, field, 0, rows * cols)?;
    Ok(Matrix::from_row_slice(rows, cols, &vals))
}

pub fn lowrank_from_str(text: &str) -> FormatResult<LowRankFactors> {
    let doc = parse_document(text)?;
    check_tag(&doc, LOWRANK_TAG)?;
    let n = get_count(&doc, "n")?;
    let m = get_count(&doc, "m")?;
    let r = get_count(&doc, "r")?;
    if r == 0 {
        return Err(FormatError::structural("r", "rank must be >= 1"));
    }
    if n == 0 || m == 0 || r > n.min(m) {
        return Err(FormatError::structural("r", format!("need 1 <= r <= min(n, m) (n={n}, m={m}, r={r})")));
    }
    let u = flat_matrix(&doc, "U", n, r)?;
    let v = flat_matrix(&doc, "V", m, r)?;
    LowRankFactors::new(u, v).map_err(|e| FormatError::structural("factors", e.to_string()))
}

pub fn read_lowrank(path: impl AsRef<Path>) -> FormatResult<LowRankFactors> {
    lowrank_from_str(&read_text(path.as_ref())?)
}

pub fn dense_from_str(text: &str) -> FormatResult<Matrix> {
    let doc = parse_document(text)?;
    check_tag(&doc, DENSE_TAG)?;
    let rows = get_count(&doc, "rows")?;
    let cols = get_count(&doc, "cols")?;
    if rows == 0 || cols == 0 {
        return Err(FormatError::structural("rows", "matrix must be non-empty"));
    }
    flat_matrix(&doc, "data", rows, cols)
}

pub fn read_dense(path: impl AsRef<Path>) -> FormatResult<Matrix> {
    dense_from_str(&read_text(path.as_ref())?)
}
