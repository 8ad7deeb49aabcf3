//! Tensor file formats.
//!
//! Text formats (all indices 0-based, `#` starts a comment):
//!
//! - `coo`: header `n1 n2 n3 [nnz]`, then one `i j k value` line per entry.
//!   Duplicate entries are summed.
//! - `coo4`: header `n1 n2 m1 m2 [nnz]`, then `i j p q value` lines. The
//!   last two indices are folded into `p + m1 * q`, giving an
//!   `n1 × n2 × m1·m2` tensor. Input only.
//! - `canonical`: header `canonical n1 n2 n3 R`, then the rows of the three
//!   factor matrices (`n1`, `n2`, `n3` rows of `R` values).
//! - `tucker`: header `tucker n1 n2 n3 r1 r2 r3`, then the core (first index
//!   fastest) and the rows of the three factors.
//! - `dense`: header `dense n1 n2 n3`, then all entries, first index fastest.
//!
//! The binary format starts with the magic bytes `TKV1` and a kind byte
//! (0 dense, 1 coo, 2 canonical, 3 tucker). Sizes follow as little-endian
//! `u64`, values as little-endian `f64`; matrices are stored column-major.

use std::fs;
use std::path::Path;

use tenkrylov::source::check_tenvec_args;
use tenkrylov::{
    CanonicalTensor, DenseTensor3, HadamardTuckerSource, Matrix, Mode, SparseTensor3, TenvecSource,
    TuckerTensor, Vector,
};

pub const MAGIC: &[u8; 4] = b"TKV1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary input: {0}")]
    Binary(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] tenkrylov::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Coo,
    Coo4,
    Canonical,
    Tucker,
    Dense,
    Binary,
}

impl Format {
    /// Guesses the format from the content: binary magic, a keyword header,
    /// or plain COO otherwise. `coo4` is never guessed.
    pub fn sniff(bytes: &[u8]) -> Format {
        if bytes.starts_with(MAGIC) {
            return Format::Binary;
        }
        let text = String::from_utf8_lossy(&bytes[..bytes.len().min(4096)]);
        let first = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .find(|l| !l.is_empty())
            .and_then(|l| l.split_whitespace().next());
        match first {
            Some("canonical") => Format::Canonical,
            Some("tucker") => Format::Tucker,
            Some("dense") => Format::Dense,
            _ => Format::Coo,
        }
    }
}

/// Any tensor the harness can hold.
#[derive(Debug)]
pub enum Tensor {
    Dense(DenseTensor3),
    Sparse(SparseTensor3),
    Canonical(CanonicalTensor),
    Tucker(TuckerTensor),
    Hadamard(HadamardTuckerSource),
}

impl Tensor {
    pub fn kind(&self) -> &'static str {
        match self {
            Tensor::Dense(_) => "dense",
            Tensor::Sparse(_) => "sparse",
            Tensor::Canonical(_) => "canonical",
            Tensor::Tucker(_) => "tucker",
            Tensor::Hadamard(_) => "hadamard",
        }
    }

    /// Number of entries of the densified tensor.
    pub fn dense_len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        match self {
            Tensor::Dense(t) => t.clone(),
            Tensor::Sparse(t) => t.to_dense(),
            Tensor::Canonical(t) => t.to_dense(),
            Tensor::Tucker(t) => t.reconstruct(),
            Tensor::Hadamard(t) => t.to_dense(),
        }
    }
}

impl TenvecSource for Tensor {
    fn shape(&self) -> [usize; 3] {
        match self {
            Tensor::Dense(t) => t.shape(),
            Tensor::Sparse(t) => t.shape(),
            Tensor::Canonical(t) => t.shape(),
            Tensor::Tucker(t) => t.shape(),
            Tensor::Hadamard(t) => t.shape(),
        }
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> tenkrylov::Result<Vector> {
        check_tenvec_args(self.shape(), skip, p, q)?;
        match self {
            Tensor::Dense(t) => t.tenvec(skip, p, q),
            Tensor::Sparse(t) => t.tenvec(skip, p, q),
            Tensor::Canonical(t) => t.tenvec(skip, p, q),
            Tensor::Tucker(t) => t.tenvec(skip, p, q),
            Tensor::Hadamard(t) => t.tenvec(skip, p, q),
        }
    }
}

pub fn load_tensor(path: &Path, format: Option<Format>) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    parse_tensor(&bytes, format.unwrap_or_else(|| Format::sniff(&bytes)))
}

pub fn parse_tensor(bytes: &[u8], format: Format) -> Result<Tensor> {
    if format == Format::Binary {
        return read_binary(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Parse {
        line: 1 + bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count(),
        msg: "invalid UTF-8".into(),
    })?;
    match format {
        Format::Coo => parse_coo(text, false).map(Tensor::Sparse),
        Format::Coo4 => parse_coo(text, true).map(Tensor::Sparse),
        Format::Canonical => parse_canonical(text).map(Tensor::Canonical),
        Format::Tucker => parse_tucker(text).map(Tensor::Tucker),
        Format::Dense => parse_dense(text).map(Tensor::Dense),
        Format::Binary => unreachable!(),
    }
}

pub fn save_tensor(path: &Path, t: &Tensor, format: Format) -> Result<()> {
    fs::write(path, encode_tensor(t, format)?)?;
    Ok(())
}

/// Serializes `t`. Dense and COO output accept any tensor; `canonical` and
/// `tucker` need that representation (a dense tensor is stored as a
/// full-rank Tucker tensor).
pub fn encode_tensor(t: &Tensor, format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Binary => write_binary(t)?,
        Format::Coo => write_coo(&as_sparse(t)).into_bytes(),
        Format::Dense => write_dense(&t.to_dense()).into_bytes(),
        Format::Canonical => match t {
            Tensor::Canonical(c) => write_canonical(c).into_bytes(),
            other => {
                return unsupported(format!(
                    "a {} tensor has no canonical form on file",
                    other.kind()
                ))
            }
        },
        Format::Tucker => match t {
            Tensor::Tucker(tk) => write_tucker(tk).into_bytes(),
            Tensor::Dense(d) => write_tucker(&TuckerTensor::from_dense(d)).into_bytes(),
            other => {
                return unsupported(format!(
                    "a {} tensor has no Tucker form on file",
                    other.kind()
                ))
            }
        },
        Format::Coo4 => return unsupported("coo4 is an input-only format".into()),
    })
}

fn unsupported<T>(msg: String) -> Result<T> {
    Err(FormatError::Unsupported(msg))
}

fn as_sparse(t: &Tensor) -> SparseTensor3 {
    match t {
        Tensor::Sparse(s) => s.clone(),
        other => SparseTensor3::from_dense(&other.to_dense()),
    }
}

// ---------------------------------------------------------------- text input

/// Whitespace tokens tagged with their 1-based line numbers.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut last_line = 1;
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                items.push((n + 1, tok));
            }
            last_line = n + 1;
        }
        Self {
            items,
            pos: 0,
            last_line,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let item = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| FormatError::Parse {
                line: self.last_line,
                msg: format!("unexpected end of input, expected {what}"),
            })?;
        self.pos += 1;
        Ok(item)
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        let (line, tok) = self.next(word)?;
        if tok != word {
            return Err(FormatError::Parse {
                line,
                msg: format!("expected `{word}`, found `{tok}`"),
            });
        }
        Ok(())
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, tok) = self.next(what)?;
        parse_usize(line, tok, what)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let (line, tok) = self.next(what)?;
        parse_f64(line, tok, what)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.f64(what)?;
            }
        }
        Ok(m)
    }

    fn finish(&self) -> Result<()> {
        match self.items.get(self.pos) {
            Some(&(line, tok)) => Err(FormatError::Parse {
                line,
                msg: format!("unexpected trailing token `{tok}`"),
            }),
            None => Ok(()),
        }
    }
}

fn parse_usize(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| FormatError::Parse {
        line,
        msg: format!("expected {what} (non-negative integer), found `{tok}`"),
    })
}

fn parse_f64(line: usize, tok: &str, what: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FormatError::Parse {
            line,
            msg: format!("expected {what} (finite number), found `{tok}`"),
        }),
    }
}

fn positive_dims(line: usize, dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(FormatError::Parse {
            line,
            msg: format!("sizes must be positive, got {dims:?}"),
        });
    }
    Ok(())
}

fn parse_coo(text: &str, four: bool) -> Result<SparseTensor3> {
    let dims = if four { 4 } else { 3 };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(FormatError::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != dims && head.len() != dims + 1 {
        return Err(FormatError::Parse {
            line: hline,
            msg: format!(
                "header needs {dims} sizes and an optional entry count, found {} fields",
                head.len()
            ),
        });
    }
    let sizes = head[..dims]
        .iter()
        .map(|t| parse_usize(hline, t, "mode size"))
        .collect::<Result<Vec<_>>>()?;
    positive_dims(hline, &sizes)?;
    let nnz = head
        .get(dims)
        .map(|t| parse_usize(hline, t, "entry count"))
        .transpose()?;
    let shape = if four {
        [sizes[0], sizes[1], sizes[2] * sizes[3]]
    } else {
        [sizes[0], sizes[1], sizes[2]]
    };

    let mut entries = Vec::new();
    let mut last = hline;
    for (line, body) in lines {
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != dims + 1 {
            return Err(FormatError::Parse {
                line,
                msg: format!(
                    "expected {} indices and a value, found {} fields",
                    dims,
                    fields.len()
                ),
            });
        }
        let mut idx = [0usize; 4];
        for d in 0..dims {
            idx[d] = parse_usize(line, fields[d], "index")?;
            if idx[d] >= sizes[d] {
                return Err(FormatError::Parse {
                    line,
                    msg: format!("index {} = {} out of range 0..{}", d + 1, idx[d], sizes[d]),
                });
            }
        }
        let value = parse_f64(line, fields[dims], "value")?;
        let pos = if four {
            [idx[0], idx[1], idx[2] + sizes[2] * idx[3]]
        } else {
            [idx[0], idx[1], idx[2]]
        };
        entries.push((pos, value));
        last = line;
    }
    if let Some(n) = nnz {
        if n != entries.len() {
            return Err(FormatError::Parse {
                line: last,
                msg: format!("header announces {n} entries, found {}", entries.len()),
            });
        }
    }
    Ok(SparseTensor3::new(shape, entries)?)
}

fn parse_canonical(text: &str) -> Result<CanonicalTensor> {
    let mut tok = Tokens::new(text);
    tok.keyword("canonical")?;
    let line = tok.items.first().map_or(1, |t| t.0);
    let n = [tok.usize("n1")?, tok.usize("n2")?, tok.usize("n3")?];
    let rank = tok.usize("rank")?;
    positive_dims(line, &[n[0], n[1], n[2], rank])?;
    let u = tok.matrix(n[0], rank, "mode-1 factor entry")?;
    let v = tok.matrix(n[1], rank, "mode-2 factor entry")?;
    let w = tok.matrix(n[2], rank, "mode-3 factor entry")?;
    tok.finish()?;
    Ok(CanonicalTensor::new([u, v, w])?)
}

fn parse_tucker(text: &str) -> Result<TuckerTensor> {
    let mut tok = Tokens::new(text);
    tok.keyword("tucker")?;
    let line = tok.items.first().map_or(1, |t| t.0);
    let n = [tok.usize("n1")?, tok.usize("n2")?, tok.usize("n3")?];
    let r = [tok.usize("r1")?, tok.usize("r2")?, tok.usize("r3")?];
    positive_dims(line, &[n[0], n[1], n[2], r[0], r[1], r[2]])?;
    let mut core = Vec::with_capacity(r.iter().product());
    for _ in 0..r.iter().product::<usize>() {
        core.push(tok.f64("core entry")?);
    }
    let factors = [
        tok.matrix(n[0], r[0], "mode-1 factor entry")?,
        tok.matrix(n[1], r[1], "mode-2 factor entry")?,
        tok.matrix(n[2], r[2], "mode-3 factor entry")?,
    ];
    tok.finish()?;
    Ok(TuckerTensor::new(
        DenseTensor3::from_vec(r, core)?,
        factors,
    )?)
}

fn parse_dense(text: &str) -> Result<DenseTensor3> {
    let mut tok = Tokens::new(text);
    tok.keyword("dense")?;
    let line = tok.items.first().map_or(1, |t| t.0);
    let n = [tok.usize("n1")?, tok.usize("n2")?, tok.usize("n3")?];
    positive_dims(line, &n)?;
    let mut values = Vec::with_capacity(n.iter().product());
    for _ in 0..n.iter().product::<usize>() {
        values.push(tok.f64("entry")?);
    }
    tok.finish()?;
    Ok(DenseTensor3::from_vec(n, values)?)
}

// --------------------------------------------------------------- text output

// `{}` on f64 prints the shortest representation that parses back exactly.

fn write_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let row: Vec<String> = values.map(|v| v.to_string()).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

fn write_matrix(out: &mut String, m: &Matrix) {
    for row in m.row_iter() {
        write_row(out, row.iter().copied());
    }
}

fn write_coo(t: &SparseTensor3) -> String {
    let [n1, n2, n3] = t.shape();
    let mut out = format!("{n1} {n2} {n3} {}\n", t.nnz());
    for ([i, j, k], v) in t.entries() {
        out.push_str(&format!("{i} {j} {k} {v}\n"));
    }
    out
}

fn write_canonical(t: &CanonicalTensor) -> String {
    let [n1, n2, n3] = t.shape();
    let mut out = format!("canonical {n1} {n2} {n3} {}\n", t.rank());
    for f in t.factors() {
        write_matrix(&mut out, f);
    }
    out
}

fn write_tucker(t: &TuckerTensor) -> String {
    let [n1, n2, n3] = t.shape();
    let [r1, r2, r3] = t.ranks();
    let mut out = format!("tucker {n1} {n2} {n3} {r1} {r2} {r3}\n");
    for fibre in t.core().values().chunks(r1) {
        write_row(&mut out, fibre.iter().copied());
    }
    for f in t.factors() {
        write_matrix(&mut out, f);
    }
    out
}

fn write_dense(t: &DenseTensor3) -> String {
    let [n1, n2, n3] = t.shape();
    let mut out = format!("dense {n1} {n2} {n3}\n");
    for fibre in t.values().chunks(n1) {
        write_row(&mut out, fibre.iter().copied());
    }
    out
}

// -------------------------------------------------------------------- binary

const KIND_DENSE: u8 = 0;
const KIND_COO: u8 = 1;
const KIND_CANONICAL: u8 = 2;
const KIND_TUCKER: u8 = 3;

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn write_binary(t: &Tensor) -> Result<Vec<u8>> {
    let mut w = Writer(MAGIC.to_vec());
    match t {
        Tensor::Dense(d) => {
            w.0.push(KIND_DENSE);
            d.shape().iter().for_each(|&n| w.u64(n));
            w.f64s(d.values());
        }
        Tensor::Sparse(s) => {
            w.0.push(KIND_COO);
            s.shape().iter().for_each(|&n| w.u64(n));
            w.u64(s.nnz());
            for (idx, v) in s.entries() {
                idx.iter().for_each(|&i| w.u64(i));
                w.f64s(&[*v]);
            }
        }
        Tensor::Canonical(c) => {
            w.0.push(KIND_CANONICAL);
            c.shape().iter().for_each(|&n| w.u64(n));
            w.u64(c.rank());
            c.factors().iter().for_each(|f| w.f64s(f.as_slice()));
        }
        Tensor::Tucker(tk) => {
            w.0.push(KIND_TUCKER);
            tk.shape().iter().for_each(|&n| w.u64(n));
            tk.ranks().iter().for_each(|&r| w.u64(r));
            w.f64s(tk.core().values());
            tk.factors().iter().for_each(|f| w.f64s(f.as_slice()));
        }
        Tensor::Hadamard(_) => {
            return unsupported("an implicit Hadamard product cannot be saved".into())
        }
    }
    Ok(w.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                FormatError::Binary(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let b = self.take(8, what)?;
        let v = u64::from_le_bytes(b.try_into().expect("8 bytes"));
        usize::try_from(v)
            .map_err(|_| FormatError::Binary(format!("{what} {v} does not fit in memory")))
    }

    fn sizes<const N: usize>(&mut self, what: &str) -> Result<[usize; N]> {
        let mut out = [0; N];
        for o in &mut out {
            *o = self.u64(what)?;
            if *o == 0 {
                return Err(FormatError::Binary(format!("{what} must be positive")));
            }
        }
        Ok(out)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| FormatError::Binary(format!("{what} count overflows")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        Ok(Matrix::from_vec(rows, cols, self.f64s(rows * cols, what)?))
    }
}

fn read_binary(bytes: &[u8]) -> Result<Tensor> {
    if !bytes.starts_with(MAGIC) {
        return Err(FormatError::Binary("missing TKV1 magic".into()));
    }
    let mut r = Reader {
        bytes,
        pos: MAGIC.len(),
    };
    let kind = r.take(1, "kind")?[0];
    let t = match kind {
        KIND_DENSE => {
            let n = r.sizes::<3>("mode size")?;
            Tensor::Dense(DenseTensor3::from_vec(
                n,
                r.f64s(n.iter().product(), "entries")?,
            )?)
        }
        KIND_COO => {
            let n = r.sizes::<3>("mode size")?;
            let nnz = r.u64("entry count")?;
            let mut entries = Vec::with_capacity(nnz.min(bytes.len() / 32));
            for _ in 0..nnz {
                let idx = [r.u64("index")?, r.u64("index")?, r.u64("index")?];
                let v = r.f64s(1, "value")?[0];
                entries.push((idx, v));
            }
            Tensor::Sparse(SparseTensor3::new(n, entries)?)
        }
        KIND_CANONICAL => {
            let n = r.sizes::<3>("mode size")?;
            let rank = r.sizes::<1>("rank")?[0];
            let f = [0, 1, 2].map(|l| r.matrix(n[l], rank, "factor"));
            let [u, v, w] = f;
            Tensor::Canonical(CanonicalTensor::new([u?, v?, w?])?)
        }
        KIND_TUCKER => {
            let n = r.sizes::<3>("mode size")?;
            let ranks = r.sizes::<3>("rank")?;
            let core = DenseTensor3::from_vec(ranks, r.f64s(ranks.iter().product(), "core")?)?;
            let f = [0, 1, 2].map(|l| r.matrix(n[l], ranks[l], "factor"));
            let [u, v, w] = f;
            Tensor::Tucker(TuckerTensor::new(core, [u?, v?, w?])?)
        }
        other => return Err(FormatError::Binary(format!("unknown kind byte {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(FormatError::Binary(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(t)
}
