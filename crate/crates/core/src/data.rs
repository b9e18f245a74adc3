//! Datasets stored as groups of identical examples.
//!
//! The constructions use thousands of copies of a handful of points, so a
//! dataset is a list of `(x, y, count)` groups and every sum over examples
//! runs over groups with weight `count / N`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub x: Vec<f64>,
    /// Label, always `-1.0` or `+1.0`.
    pub y: f64,
    pub count: u64,
}

impl Group {
    pub fn new(x: Vec<f64>, y: f64, count: u64) -> Self {
        Group { x, y, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    groups: Vec<Group>,
    total: u64,
}

impl Dataset {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        let first = groups.first().ok_or(Error::EmptyInput)?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::InvalidDataset("dimension must be positive".into()));
        }
        let mut total = 0u64;
        let mut any_nonzero = false;
        for (i, g) in groups.iter().enumerate() {
            if g.x.len() != dim {
                return Err(Error::Dimension { expected: dim, got: g.x.len() });
            }
            if g.count == 0 {
                return Err(Error::InvalidDataset(format!("group {i} has zero count")));
            }
            if g.y != 1.0 && g.y != -1.0 {
                return Err(Error::InvalidDataset(format!("group {i} has label {} (expected +1 or -1)", g.y)));
            }
            if g.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("group {i} has a non-finite feature")));
            }
            any_nonzero |= g.x.iter().any(|&v| v != 0.0);
            total = total.checked_add(g.count).ok_or_else(|| Error::InvalidDataset("total count overflows".into()))?;
        }
        if !any_nonzero {
            return Err(Error::InvalidDataset("all feature vectors are zero".into()));
        }
        Ok(Dataset { dim, groups, total })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// `N`, the number of examples counting multiplicities.
    pub fn total_count(&self) -> u64 {
        self.total
    }

    /// Multiplies every count by `factor`; the objective is unchanged.
    pub fn scale_counts(&self, factor: u64) -> Result<Dataset> {
        if factor == 0 {
            return Err(Error::InvalidArgument("count factor must be positive".into()));
        }
        let groups = self.groups.iter().map(|g| Group::new(g.x.clone(), g.y, g.count * factor)).collect();
        Dataset::new(groups)
    }

    /// Drops groups for which `keep` returns false.
    pub fn filter(&self, keep: impl Fn(&Group) -> bool) -> Result<Dataset> {
        Dataset::new(self.groups.iter().filter(|g| keep(g)).cloned().collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LibsvmOptions {
    /// Map label `0` to `-1`. Off by default so that 0/1 files fail loudly.
    pub zero_as_negative: bool,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses LIBSVM sparse text into a dense dataset.
///
/// Missing indices are zeros; `dim` is the largest index seen. Identical
/// `(x, y)` rows are merged into one group, in order of first appearance.
pub fn parse_libsvm(text: &str, opts: LibsvmOptions) -> Result<Dataset> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label '{label_tok}'")))?;
        let y = if label == 1.0 {
            1.0
        } else if label == -1.0 || (label == 0.0 && opts.zero_as_negative) {
            -1.0
        } else if label == 0.0 {
            return Err(err("label 0 requires the zero-as-negative option".into()));
        } else {
            return Err(err(format!("label {label_tok} is not one of +1, -1, 0")));
        };
        let mut feats = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected <index>:<value>, got '{tok}'")))?;
            let idx: usize = i.parse().map_err(|_| err(format!("bad index '{i}'")))?;
            let val: f64 = v.parse().map_err(|_| err(format!("bad value '{v}'")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} not ascending (after {last})")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value '{v}'")));
            }
            last = idx;
            feats.push((idx, val));
        }
        dim = dim.max(last);
        rows.push((y, feats));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dim == 0 {
        return Err(Error::InvalidDataset("all feature vectors are zero".into()));
    }

    let mut groups: Vec<Group> = Vec::new();
    let mut index: HashMap<(Vec<u64>, bool), usize> = HashMap::new();
    for (y, feats) in rows {
        let mut x = vec![0.0; dim];
        for (i, v) in feats {
            // + 0.0 folds -0.0 into 0.0 so that the bit-pattern key merges them
            x[i - 1] = v + 0.0;
        }
        let key = (x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y > 0.0);
        match index.get(&key) {
            Some(&g) => groups[g].count += 1,
            None => {
                index.insert(key, groups.len());
                groups.push(Group::new(x, y, 1));
            }
        }
    }
    Dataset::new(groups)
}

/// Parses the compact replicated-point format: one group per line,
/// `<count> <y> <x1> [<x2> ...]`, `#` comments allowed.
pub fn parse_compact(text: &str) -> Result<Dataset> {
    let mut groups = Vec::new();
    let mut arity: Option<usize> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(err("expected <count> <y> <x1> ...".into()));
        }
        match arity {
            None => arity = Some(toks.len()),
            Some(a) if a != toks.len() => {
                return Err(err(format!("ragged line: {} fields, expected {a}", toks.len())));
            }
            _ => {}
        }
        let count: i64 = toks[0].parse().map_err(|_| err(format!("bad count '{}'", toks[0])))?;
        if count <= 0 {
            return Err(err(format!("count must be positive, got {count}")));
        }
        let y: f64 = toks[1].parse().map_err(|_| err(format!("bad label '{}'", toks[1])))?;
        if y != 1.0 && y != -1.0 {
            return Err(err(format!("label must be +1 or -1, got {}", toks[1])));
        }
        let x = toks[2..]
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(format!("bad feature '{t}'"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        groups.push(Group::new(x, y, count as u64));
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    Dataset::new(groups)
}

/// Serializes to the compact format; `parse_compact` reads it back exactly.
pub fn to_compact(ds: &Dataset) -> String {
    let mut out = String::new();
    for g in ds.groups() {
        write!(out, "{} {}", g.count, if g.y > 0.0 { "1" } else { "-1" }).unwrap();
        for v in &g.x {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Separable,
    NonSeparable,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separability {
    pub verdict: Verdict,
    /// A `w` with `y_i w.x_i > 0` for every example, when separable.
    pub witness: Option<Vec<f64>>,
    pub method: &'static str,
}

fn min_margin(signed: &[Vec<f64>], w: &[f64]) -> f64 {
    signed.iter().map(|a| a.iter().zip(w).map(|(p, q)| p * q).sum::<f64>()).fold(f64::INFINITY, f64::min)
}

fn separable(w: Vec<f64>, method: &'static str) -> Separability {
    Separability { verdict: Verdict::Separable, witness: Some(w), method }
}

fn non_separable(method: &'static str) -> Separability {
    Separability { verdict: Verdict::NonSeparable, witness: None, method }
}

/// Decides whether some `w` has `y_i w.x_i > 0` for all examples.
///
/// Exact for `d = 1` (sign test) and `d = 2` (the feasible set is an open
/// cone whose boundary rays are perpendicular to some `y_i x_i`, so testing
/// the bisectors of consecutive candidate rays is exhaustive). For `d >= 3`
/// a perceptron either finds a witness or the verdict is `Unknown`; the only
/// non-separability certificates are a zero example or an antiparallel pair.
pub fn check_separable(ds: &Dataset) -> Separability {
    let signed: Vec<Vec<f64>> = ds.groups().iter().map(|g| g.x.iter().map(|v| g.y * v).collect()).collect();
    if signed.iter().any(|a| a.iter().all(|&v| v == 0.0)) {
        return non_separable("zero-example");
    }
    match ds.dim() {
        1 => {
            if signed.iter().all(|a| a[0] > 0.0) {
                separable(vec![1.0], "sign-1d")
            } else if signed.iter().all(|a| a[0] < 0.0) {
                separable(vec![-1.0], "sign-1d")
            } else {
                non_separable("sign-1d")
            }
        }
        2 => separable_2d(&signed),
        _ => perceptron(&signed, ds.total_count()),
    }
}

fn separable_2d(signed: &[Vec<f64>]) -> Separability {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let mut angles: Vec<f64> = Vec::with_capacity(2 * signed.len());
    for a in signed {
        let t = a[1].atan2(a[0]);
        for s in [t + FRAC_PI_2, t - FRAC_PI_2] {
            angles.push(s.rem_euclid(TAU));
        }
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup();
    let mut candidates: Vec<f64> = Vec::with_capacity(angles.len() + signed.len());
    for (i, &a) in angles.iter().enumerate() {
        let b = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + TAU };
        let mid = if angles.len() == 1 { a + PI } else { 0.5 * (a + b) };
        candidates.push(mid);
    }
    candidates.extend(signed.iter().map(|a| a[1].atan2(a[0])));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for t in candidates {
        let w = vec![t.cos(), t.sin()];
        let m = min_margin(signed, &w);
        if m > 0.0 && best.as_ref().is_none_or(|(bm, _)| m > *bm) {
            best = Some((m, w));
        }
    }
    match best {
        Some((_, w)) => separable(w, "angular-2d"),
        None => non_separable("angular-2d"),
    }
}

fn perceptron(signed: &[Vec<f64>], total: u64) -> Separability {
    const METHOD: &str = "perceptron";
    let dim = signed[0].len();
    for (i, a) in signed.iter().enumerate() {
        let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        for b in &signed[i + 1..] {
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            if dot <= -na * nb * (1.0 - 1e-15) {
                let antiparallel = a.iter().zip(b).all(|(p, q)| (p / na + q / nb).abs() <= 1e-15);
                if antiparallel {
                    return non_separable("antiparallel-pair");
                }
            }
        }
    }
    let normed: Vec<Vec<f64>> = signed
        .iter()
        .map(|a| {
            let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            a.iter().map(|v| v / n).collect()
        })
        .collect();
    let cap = (10 * total).min(1_000_000);
    let mut w = vec![0.0; dim];
    let mut updates = 0u64;
    loop {
        let mut clean = true;
        for a in &normed {
            let m: f64 = a.iter().zip(&w).map(|(p, q)| p * q).sum();
            if m <= 0.0 {
                clean = false;
                for (wi, ai) in w.iter_mut().zip(a) {
                    *wi += ai;
                }
                updates += 1;
                if updates >= cap {
                    break;
                }
            }
        }
        if clean || updates >= cap {
            break;
        }
    }
    if min_margin(signed, &w) > 0.0 {
        separable(w, METHOD)
    } else {
        Separability { verdict: Verdict::Unknown, witness: None, method: METHOD }
    }
}
