//! Reading and writing rankings, PrefLib files, models and report tables.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::ModelFit;
use crate::inference::{ComparisonInterval, Summary};
use crate::network::AdjacencyMatrix;
use crate::rankings::{OrderingsTable, RankingsTable};
use crate::scalar::Scalar;
use crate::tree::{CovariateFrame, PLTree};

/// Contents of a PrefLib "strict orders, complete list" file.
#[derive(Debug, Clone, PartialEq)]
pub struct SocData {
    pub items: Vec<String>,
    pub orderings: OrderingsTable,
    pub frequencies: Vec<f64>,
    pub voters: usize,
    pub vote_sum: usize,
    pub unique_orders: usize,
}

impl SocData {
    /// One weighted ranking per distinct ordering.
    pub fn to_rankings<T: Scalar>(&self) -> Result<RankingsTable<T>> {
        RankingsTable::from_orderings(&self.orderings, self.items.clone())?
            .with_weights(self.frequencies.iter().map(|&f| T::lit(f)).collect())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("expected a non-negative integer, got `{}`", s.trim())))
}

fn unquote(s: &str) -> String {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        t[1..t.len() - 1].replace("\"\"", "\"")
    } else {
        t.to_string()
    }
}

/// Parses SOC text. Both the classic layout (item count, `id,name` lines,
/// totals line, `freq,id,...` lines) and the commented header layout
/// (`# ALTERNATIVE NAME i: name`, `freq: id,...`) are accepted.
pub fn parse_preflib_soc(text: &str) -> Result<SocData> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.first().is_some_and(|(_, l)| l.starts_with('#')) {
        return parse_soc_commented(&lines);
    }
    let mut it = lines.into_iter();
    let (ln, first) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let n = parse_usize(first, ln)?;
    if n < 2 {
        return Err(parse_err(ln, "need at least two items"));
    }
    let mut items = vec![String::new(); n];
    for _ in 0..n {
        let (ln, l) = it.next().ok_or_else(|| parse_err(ln, "missing item lines"))?;
        let (id, name) = l.split_once(',').ok_or_else(|| parse_err(ln, "expected `id,name`"))?;
        let id = parse_usize(id, ln)?;
        if id == 0 || id > n {
            return Err(parse_err(ln, format!("item id {id} out of range 1..={n}")));
        }
        items[id - 1] = unquote(name);
    }
    let (tl, totals) = it.next().ok_or_else(|| parse_err(ln, "missing totals line"))?;
    let t: Vec<&str> = totals.split(',').collect();
    if t.len() != 3 {
        return Err(parse_err(tl, "totals line must be `voters,vote_sum,unique_orders`"));
    }
    let (voters, vote_sum, unique) = (parse_usize(t[0], tl)?, parse_usize(t[1], tl)?, parse_usize(t[2], tl)?);
    let mut rows = Vec::new();
    for (ln, l) in it {
        let mut parts = l.split(',');
        let freq = parse_usize(parts.next().unwrap_or(""), ln)?;
        rows.push((ln, freq, parts.map(|p| parse_usize(p, ln)).collect::<Result<Vec<_>>>()?));
    }
    finish_soc(items, rows, voters, vote_sum, unique)
}

fn parse_soc_commented(lines: &[(usize, &str)]) -> Result<SocData> {
    let mut n = None;
    let mut named = Vec::new();
    let mut voters = None;
    let mut unique = None;
    let mut rows = Vec::new();
    for &(ln, l) in lines {
        if let Some(meta) = l.strip_prefix('#') {
            let (key, value) = meta.split_once(':').unwrap_or((meta, ""));
            let key = key.trim().to_ascii_uppercase();
            if key == "NUMBER ALTERNATIVES" {
                n = Some(parse_usize(value, ln)?);
            } else if key == "NUMBER VOTERS" {
                voters = Some(parse_usize(value, ln)?);
            } else if key == "NUMBER UNIQUE ORDERS" {
                unique = Some(parse_usize(value, ln)?);
            } else if let Some(id) = key.strip_prefix("ALTERNATIVE NAME") {
                named.push((parse_usize(id, ln)?, unquote(value), ln));
            }
            continue;
        }
        let (freq, order) = l.split_once(':').ok_or_else(|| parse_err(ln, "expected `freq: id,...`"))?;
        let ids = order.split(',').map(|p| parse_usize(p, ln)).collect::<Result<Vec<_>>>()?;
        rows.push((ln, parse_usize(freq, ln)?, ids));
    }
    let n = n.ok_or_else(|| parse_err(1, "missing NUMBER ALTERNATIVES"))?;
    let mut items: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    for (id, name, ln) in named {
        if id == 0 || id > n {
            return Err(parse_err(ln, format!("item id {id} out of range 1..={n}")));
        }
        items[id - 1] = name;
    }
    let total: usize = rows.iter().map(|r| r.1).sum();
    let count = rows.len();
    finish_soc(items, rows, voters.unwrap_or(total), total, unique.unwrap_or(count))
}

fn finish_soc(items: Vec<String>, rows: Vec<(usize, usize, Vec<usize>)>, voters: usize, vote_sum: usize, unique: usize) -> Result<SocData> {
    let n = items.len();
    let mut orderings = Vec::with_capacity(rows.len());
    let mut frequencies = Vec::with_capacity(rows.len());
    for (ln, freq, ids) in rows {
        if freq == 0 {
            return Err(parse_err(ln, "frequencies must be positive"));
        }
        let mut seen = vec![false; n];
        if ids.len() != n {
            return Err(parse_err(ln, format!("ordering has {} items, expected {n}", ids.len())));
        }
        for &id in &ids {
            if id == 0 || id > n || seen[id - 1] {
                return Err(parse_err(ln, "ordering is not a permutation of the item ids"));
            }
            seen[id - 1] = true;
        }
        orderings.push(ids.iter().map(|&id| vec![items[id - 1].clone()]).collect());
        frequencies.push(freq as f64);
    }
    let total: f64 = frequencies.iter().sum();
    if total != vote_sum as f64 {
        log::warn!("frequencies sum to {total} but the totals line gives {vote_sum}");
    }
    if orderings.len() != unique {
        log::warn!("{} orderings read but the totals line gives {unique}", orderings.len());
    }
    Ok(SocData {
        items,
        orderings: OrderingsTable::new(orderings),
        frequencies,
        voters,
        vote_sum,
        unique_orders: unique,
    })
}

pub fn read_preflib_soc(path: impl AsRef<Path>) -> Result<SocData> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_preflib_soc(&text)
}

/// Default name of the weight column in rank CSV files.
pub const WEIGHT_COLUMN: &str = "weight";

/// Special columns of a rank CSV.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankCsvOptions {
    /// Ranking weights; defaults to a column named `weight` when present.
    pub weight_col: Option<String>,
    /// One-based group index per row.
    pub group_col: Option<String>,
}

/// Rank table plus the group index column, if one was requested.
pub type GroupedCsv<T> = (RankingsTable<T>, Option<Vec<usize>>);

/// Reads a rank CSV: a header of item names and one row of integer rank
/// codes per ranking.
pub fn read_rank_csv_with<T: Scalar>(reader: impl Read, opts: &RankCsvOptions) -> Result<GroupedCsv<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let wpos = match &opts.weight_col {
        Some(w) => Some(find(w).ok_or_else(|| parse_err(1, format!("no weight column `{w}`")))?),
        None => find(WEIGHT_COLUMN),
    };
    let gpos = match &opts.group_col {
        Some(g) => Some(find(g).ok_or_else(|| parse_err(1, format!("no group column `{g}`")))?),
        None => None,
    };
    let special = |i: usize| Some(i) == wpos || Some(i) == gpos;
    let items: Vec<String> = header.iter().enumerate().filter(|(i, _)| !special(*i)).map(|(_, h)| h.clone()).collect();
    let mut matrix = Vec::new();
    let mut weights = Vec::new();
    let mut groups = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(parse_err(line, format!("{} fields, expected {}", rec.len(), header.len())));
        }
        let mut row = Vec::with_capacity(items.len());
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == wpos {
                let w: f64 = cell.parse().map_err(|_| parse_err(line, format!("invalid weight `{cell}`")))?;
                weights.push(T::lit(w));
            } else if Some(c) == gpos {
                groups.push(cell.parse::<usize>().map_err(|_| parse_err(line, format!("invalid group `{cell}`")))?);
            } else {
                row.push(cell.parse::<i64>().map_err(|_| parse_err(line, format!("rank `{cell}` is not an integer")))?);
            }
        }
        matrix.push(row);
    }
    if matrix.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut table = RankingsTable::from_rank_matrix(&matrix, items)?;
    if wpos.is_some() {
        table = table.with_weights(weights)?;
    }
    Ok((table, gpos.map(|_| groups)))
}

/// [`read_rank_csv_with`] without a group column.
pub fn read_rank_csv<T: Scalar>(reader: impl Read, weight_col: Option<&str>) -> Result<RankingsTable<T>> {
    let opts = RankCsvOptions {
        weight_col: weight_col.map(str::to_string),
        group_col: None,
    };
    Ok(read_rank_csv_with(reader, &opts)?.0)
}

/// Reads paired-comparison counts with columns `i`, `j`, `w_ij`, `w_ji` and
/// `t_ij` (and optionally `r_ij`, which must equal their sum). Each pair
/// becomes three weighted rankings: `i` wins, `j` wins, and a tie. Items are
/// ordered by first appearance.
pub fn read_paired_counts_csv<T: Scalar>(reader: impl Read) -> Result<RankingsTable<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (ci, cj, cwij, cwji, ctij) = (col("i")?, col("j")?, col("w_ij")?, col("w_ji")?, col("t_ij")?);
    let crij = col("r_ij").ok();
    let mut items: Vec<String> = Vec::new();
    let mut pairs = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        let count = |c: usize| -> Result<f64> {
            let cell = rec.get(c).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
                _ => Err(parse_err(line, format!("invalid count `{cell}`"))),
            }
        };
        let (wij, wji, tij) = (count(cwij)?, count(cwji)?, count(ctij)?);
        if let Some(c) = crij {
            if count(c)? != wij + wji + tij {
                return Err(parse_err(line, "r_ij is not w_ij + w_ji + t_ij"));
            }
        }
        let mut index = |name: &str| match items.iter().position(|x| x == name) {
            Some(k) => k,
            None => {
                items.push(name.to_string());
                items.len() - 1
            }
        };
        let (a, b) = (index(rec.get(ci).unwrap_or("")), index(rec.get(cj).unwrap_or("")));
        if a == b {
            return Err(parse_err(line, "an item is compared with itself"));
        }
        pairs.push((a, b, wij, wji, tij));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut rows = Vec::with_capacity(3 * pairs.len());
    let mut weights = Vec::with_capacity(3 * pairs.len());
    for (a, b, wij, wji, tij) in pairs {
        for (ra, rb, w) in [(1, 2, wij), (2, 1, wji), (1, 1, tij)] {
            let mut row = vec![0i64; items.len()];
            row[a] = ra;
            row[b] = rb;
            rows.push(row);
            weights.push(T::lit(w));
        }
    }
    RankingsTable::from_rank_matrix(&rows, items)?.with_weights(weights)
}

pub fn read_rank_csv_path<T: Scalar>(path: impl AsRef<Path>, weight_col: Option<&str>) -> Result<RankingsTable<T>> {
    read_rank_csv(File::open(path)?, weight_col)
}

/// Writes a rank CSV with a trailing `weight` column.
pub fn write_rank_csv<T: Scalar>(table: &RankingsTable<T>, writer: impl Write) -> Result<()> {
    if table.items().iter().any(|i| i == WEIGHT_COLUMN) {
        return Err(Error::Config(format!("an item is named `{WEIGHT_COLUMN}`")));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.items().iter().map(String::as_str).collect();
    header.push(WEIGHT_COLUMN);
    w.write_record(&header)?;
    for r in 0..table.n_rows() {
        let mut rec: Vec<String> = table.row(r).iter().map(u32::to_string).collect();
        rec.push(table.weight(r).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rank_csv_path<T: Scalar>(table: &RankingsTable<T>, path: impl AsRef<Path>) -> Result<()> {
    write_rank_csv(table, File::create(path)?)
}

/// Reads one covariate row per group. Columns whose values all parse as
/// numbers are numeric unless listed in `factors`; the rest are categorical.
/// Columns in `ordered` are ordered categorical.
pub fn read_covariates_csv(reader: impl Read, factors: &[String], ordered: &[String]) -> Result<CovariateFrame> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (c, cell) in rec.iter().enumerate() {
            cols[c].push(cell.to_string());
        }
    }
    let mut frame = CovariateFrame::new();
    for (name, values) in header.iter().zip(cols) {
        let is_ordered = ordered.contains(name);
        let numeric: Option<Vec<f64>> = if factors.contains(name) || is_ordered {
            None
        } else {
            values.iter().map(|v| v.parse::<f64>().ok()).collect()
        };
        match numeric {
            Some(x) => frame.push_numeric(name, x)?,
            None => frame.push_categorical(name, values, is_ordered, None)?,
        }
    }
    Ok(frame)
}

/// Current model file format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum ModelArtifact<T: Scalar> {
    Fit(ModelFit<T>),
    Tree(PLTree<T>),
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelFile<T: Scalar> {
    version: u32,
    model: ModelArtifact<T>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

pub fn write_model_json<T: Scalar>(model: &ModelArtifact<T>, writer: impl Write) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

pub fn read_model_json<T: Scalar>(reader: impl Read) -> Result<ModelArtifact<T>> {
    let value: serde_json::Value = serde_json::from_reader(reader)?;
    let probe: VersionProbe = serde_json::from_value(value.clone())?;
    if probe.version != MODEL_VERSION {
        return Err(Error::Version {
            found: probe.version,
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile<T> = serde_json::from_value(value)?;
    Ok(file.model)
}

pub fn write_model_json_path<T: Scalar>(model: &ModelArtifact<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    write_model_json(model, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn read_model_json_path<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelArtifact<T>> {
    read_model_json(BufReader::new(File::open(path)?))
}

fn opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Columns: name, estimate, se, z, p.
pub fn write_summary_csv<T: Scalar>(summary: &Summary<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["name", "estimate", "se", "z", "p"])?;
    for c in &summary.coefficients {
        w.write_record([c.name.clone(), c.estimate.to_string(), opt(c.se), opt(c.z), opt(c.p)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: item, estimate, se, quasi_se, lower, upper.
pub fn write_intervals_csv<T: Scalar>(intervals: &[ComparisonInterval<T>], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["item", "estimate", "se", "quasi_se", "lower", "upper"])?;
    for c in intervals {
        w.write_record([
            c.item.clone(),
            c.estimate.to_string(),
            c.se.to_string(),
            c.quasi_se.to_string(),
            c.lower.to_string(),
            c.upper.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix with item names as header and first column.
pub fn write_adjacency_csv<T: Scalar>(adj: &AdjacencyMatrix<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(adj.items().iter().cloned());
    w.write_record(&header)?;
    for (i, name) in adj.items().iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(adj.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-leaf worths for dot charts. Columns: node, n, item, worth.
pub fn write_tree_worths_csv<T: Scalar>(tree: &PLTree<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "n", "item", "worth"])?;
    for leaf in tree.leaves() {
        if let Some(model) = &leaf.fit {
            for (item, worth) in model.items().iter().zip(model.worth()) {
                w.write_record([leaf.id.to_string(), leaf.n().to_string(), item.clone(), worth.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `path` line by line, skipping blank lines and `#` comments.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push(t.to_string());
        }
    }
    Ok(out)
}
