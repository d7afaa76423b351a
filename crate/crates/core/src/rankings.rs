//! Rankings with ties and partial (subset) rankings.
//!
//! A [`RankingsTable`] stores one dense rank code per item and ranking:
//! `0` marks an item that was not ranked, `1` the best tie group, `2` the
//! next, and so on. Rows with fewer than two ranked items carry no
//! information and are flagged as NA; they stay in the table so that row
//! indices and group alignment are preserved, but every computation skips
//! them.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reserved name of the hypothetical item used by pseudo-rankings.
pub const GHOST_ITEM: &str = "<ghost>";

/// Default display width used when formatting rankings.
pub const DEFAULT_FORMAT_WIDTH: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RankingsTable<T> {
    items: Vec<String>,
    ranks: Vec<u32>,
    weights: Vec<T>,
    na: Vec<bool>,
}

fn validate_items(items: &[String]) -> Result<()> {
    if items.len() < 2 {
        return Err(Error::TooFewItems(items.len()));
    }
    let mut seen = HashSet::with_capacity(items.len());
    for name in items {
        if name.is_empty() {
            return Err(Error::EmptyItemName);
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateItem(name.clone()));
        }
    }
    Ok(())
}

/// Closes gaps in a row of rank codes, keeping order and ties. Returns the
/// number of ranked items.
fn dense_recode(row: &mut [u32]) -> usize {
    let levels: BTreeSet<u32> = row.iter().copied().filter(|&r| r > 0).collect();
    if levels.is_empty() {
        return 0;
    }
    let map: HashMap<u32, u32> = levels
        .iter()
        .enumerate()
        .map(|(k, &level)| (level, k as u32 + 1))
        .collect();
    let mut n = 0;
    for r in row.iter_mut() {
        if *r > 0 {
            *r = map[r];
            n += 1;
        }
    }
    n
}

impl<T: Scalar> RankingsTable<T> {
    /// Builds a table from a matrix of rank codes (rows = rankings).
    ///
    /// Rows are recoded to dense rankings; rows with fewer than two ranked
    /// items are flagged NA.
    pub fn from_rank_matrix(matrix: &[Vec<i64>], items: Vec<String>) -> Result<Self> {
        validate_items(&items)?;
        let j = items.len();
        let mut rows = Vec::with_capacity(matrix.len());
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != j {
                return Err(Error::RowLength {
                    row: r,
                    got: row.len(),
                    expected: j,
                });
            }
            let mut out = Vec::with_capacity(j);
            for (c, &v) in row.iter().enumerate() {
                if v < 0 {
                    return Err(Error::NegativeRank {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                out.push(u32::try_from(v).map_err(|_| Error::NegativeRank {
                    row: r,
                    col: c,
                    value: v,
                })?);
            }
            rows.push(out);
        }
        let weights = vec![T::one(); rows.len()];
        Self::from_code_rows(rows, items, weights)
    }

    /// Builds a table from unsigned rank codes and explicit weights.
    pub fn from_code_rows(rows: Vec<Vec<u32>>, items: Vec<String>, weights: Vec<T>) -> Result<Self> {
        validate_items(&items)?;
        let j = items.len();
        if weights.len() != rows.len() {
            return Err(Error::WeightLength {
                got: weights.len(),
                expected: rows.len(),
            });
        }
        check_weights(&weights)?;
        let mut ranks = Vec::with_capacity(rows.len() * j);
        let mut na = Vec::with_capacity(rows.len());
        for (r, mut row) in rows.into_iter().enumerate() {
            if row.len() != j {
                return Err(Error::RowLength {
                    row: r,
                    got: row.len(),
                    expected: j,
                });
            }
            let n = dense_recode(&mut row);
            na.push(n < 2);
            ranks.extend_from_slice(&row);
        }
        let table = Self {
            items,
            ranks,
            weights,
            na,
        };
        let flagged = table.na_count();
        if flagged > 0 {
            log::warn!("{flagged} rankings with fewer than 2 items set to NA");
        }
        Ok(table)
    }

    /// Builds a table from orderings: slot `k` of a row holds the items
    /// ranked `k`-th, several items in one slot form a tie and empty slots
    /// are skipped.
    pub fn from_orderings(orderings: &OrderingsTable, items: Vec<String>) -> Result<Self> {
        validate_items(&items)?;
        let index: HashMap<&str, usize> = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(orderings.len());
        for (r, slots) in orderings.rows().iter().enumerate() {
            let mut row = vec![0u32; items.len()];
            let mut rank = 0u32;
            for slot in slots {
                if slot.is_empty() {
                    continue;
                }
                rank += 1;
                for name in slot {
                    let &i = index
                        .get(name.as_str())
                        .ok_or_else(|| Error::UnknownItem(name.clone()))?;
                    if row[i] != 0 {
                        return Err(Error::DuplicateInRow {
                            row: r,
                            item: name.clone(),
                        });
                    }
                    row[i] = rank;
                }
            }
            rows.push(row);
        }
        let weights = vec![T::one(); rows.len()];
        Self::from_code_rows(rows, items, weights)
    }

    /// Replaces the ranking weights.
    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.n_rows() {
            return Err(Error::WeightLength {
                got: weights.len(),
                expected: self.n_rows(),
            });
        }
        check_weights(&weights)?;
        self.weights = weights;
        Ok(self)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_rows(&self) -> usize {
        self.na.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        let j = self.items.len();
        &self.ranks[r * j..(r + 1) * j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.ranks.chunks(self.items.len().max(1))
    }

    pub fn weight(&self, r: usize) -> T {
        self.weights[r]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn is_na(&self, r: usize) -> bool {
        self.na[r]
    }

    pub fn na_count(&self) -> usize {
        self.na.iter().filter(|&&b| b).count()
    }

    /// Rows that take part in estimation (non-NA, positive weight).
    pub fn active_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_rows()).filter(|&r| !self.na[r] && self.weights[r] > T::zero())
    }

    pub fn item_index(&self, name: &str) -> Option<usize> {
        self.items.iter().position(|s| s == name)
    }

    /// The tie groups of row `r`, best first, each listing item indices in
    /// column order.
    pub fn ordering(&self, r: usize) -> Vec<Vec<usize>> {
        row_ordering(self.row(r))
    }

    /// Largest tie group across non-NA rows (1 when there are no ties).
    pub fn max_tie_size(&self) -> usize {
        (0..self.n_rows())
            .filter(|&r| !self.na[r])
            .flat_map(|r| self.ordering(r).into_iter().map(|g| g.len()))
            .max()
            .unwrap_or(1)
    }

    /// Display string: items joined by `" > "` between rank levels and by
    /// `" = "` within a level. Strings longer than `width` characters keep
    /// their first `width - 4` characters followed by `" ..."`.
    pub fn format_ranking(&self, r: usize, width: Option<usize>) -> String {
        if self.na[r] {
            return "NA".to_string();
        }
        let text = format_row(self.row(r), &self.items);
        match width {
            Some(w) => truncate_display(&text, w),
            None => text,
        }
    }

    /// Parses a string produced by [`format_ranking`](Self::format_ranking)
    /// (without truncation) back into a row of rank codes.
    pub fn parse_ranking(text: &str, items: &[String]) -> Result<Vec<u32>> {
        let mut row = vec![0u32; items.len()];
        if text.trim() == "NA" {
            return Ok(row);
        }
        for (level, group) in text.split(" > ").enumerate() {
            for name in group.split(" = ") {
                let name = name.trim();
                let i = items
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| Error::UnknownItem(name.to_string()))?;
                if row[i] != 0 {
                    return Err(Error::DuplicateInRow {
                        row: 0,
                        item: name.to_string(),
                    });
                }
                row[i] = level as u32 + 1;
            }
        }
        Ok(row)
    }

    /// Keeps only the named items (in table order). Rows are recoded to
    /// dense rankings and rows left with fewer than two ranked items become
    /// NA. Returns the new table and the number of rows newly set to NA.
    pub fn subset_items(&self, keep: &[String]) -> Result<(Self, usize)> {
        if keep.is_empty() {
            return Err(Error::TooFewItems(0));
        }
        let mut cols = Vec::with_capacity(keep.len());
        for name in keep {
            let i = self
                .item_index(name)
                .ok_or_else(|| Error::UnknownItem(name.clone()))?;
            if cols.contains(&i) {
                return Err(Error::DuplicateItem(name.clone()));
            }
            cols.push(i);
        }
        cols.sort_unstable();
        if cols.len() < 2 {
            return Err(Error::TooFewItems(cols.len()));
        }
        let items: Vec<String> = cols.iter().map(|&c| self.items[c].clone()).collect();
        let mut ranks = Vec::with_capacity(self.n_rows() * cols.len());
        let mut na = Vec::with_capacity(self.n_rows());
        let mut newly = 0;
        for r in 0..self.n_rows() {
            let src = self.row(r);
            let mut row: Vec<u32> = cols.iter().map(|&c| src[c]).collect();
            let n = dense_recode(&mut row);
            let flag = self.na[r] || n < 2;
            if flag && !self.na[r] {
                newly += 1;
            }
            na.push(flag);
            ranks.extend_from_slice(&row);
        }
        if newly > 0 {
            log::warn!("Rankings with only 1 item set to `NA` ({newly} rows)");
        }
        Ok((
            Self {
                items,
                ranks,
                weights: self.weights.clone(),
                na,
            },
            newly,
        ))
    }

    /// Table restricted to the given rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        let j = self.n_items();
        let mut ranks = Vec::with_capacity(rows.len() * j);
        for &r in rows {
            ranks.extend_from_slice(self.row(r));
        }
        Self {
            items: self.items.clone(),
            ranks,
            weights: rows.iter().map(|&r| self.weights[r]).collect(),
            na: rows.iter().map(|&r| self.na[r]).collect(),
        }
    }

    /// Row-wise concatenation of two tables over the same items.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.items != other.items {
            return Err(Error::Config("cannot concatenate tables with different items".into()));
        }
        let mut out = self.clone();
        out.ranks.extend_from_slice(&other.ranks);
        out.weights.extend_from_slice(&other.weights);
        out.na.extend_from_slice(&other.na);
        Ok(out)
    }

    /// Table with an extra (unranked everywhere) item column appended.
    pub(crate) fn with_extra_item(&self, name: &str) -> Self {
        let j = self.n_items();
        let mut ranks = Vec::with_capacity(self.n_rows() * (j + 1));
        for r in 0..self.n_rows() {
            ranks.extend_from_slice(self.row(r));
            ranks.push(0);
        }
        let mut items = self.items.clone();
        items.push(name.to_string());
        Self {
            items,
            ranks,
            weights: self.weights.clone(),
            na: self.na.clone(),
        }
    }

    /// Appends already dense rows (used for pseudo-rankings).
    pub(crate) fn push_dense_row(&mut self, row: Vec<u32>, weight: T) {
        debug_assert_eq!(row.len(), self.n_items());
        let ranked = row.iter().filter(|&&x| x > 0).count();
        self.ranks.extend(row);
        self.weights.push(weight);
        self.na.push(ranked < 2);
    }

    /// Orderings view: each row as tie groups of item names.
    pub fn to_orderings(&self) -> OrderingsTable {
        OrderingsTable::new(
            (0..self.n_rows())
                .map(|r| {
                    self.ordering(r)
                        .into_iter()
                        .map(|g| g.into_iter().map(|i| self.items[i].clone()).collect())
                        .collect()
                })
                .collect(),
        )
    }

    /// Checks that no user-facing item uses the reserved ghost name.
    pub fn check_no_reserved_names(&self) -> Result<()> {
        match self.items.iter().find(|s| s.as_str() == GHOST_ITEM) {
            Some(s) => Err(Error::ReservedItemName(s.clone())),
            None => Ok(()),
        }
    }
}

fn check_weights<T: Scalar>(weights: &[T]) -> Result<()> {
    for (r, &w) in weights.iter().enumerate() {
        if !(w >= T::zero()) || !w.is_finite() {
            return Err(Error::InvalidWeight {
                row: r,
                value: w.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

pub(crate) fn row_ordering(row: &[u32]) -> Vec<Vec<usize>> {
    let m = row.iter().copied().max().unwrap_or(0) as usize;
    let mut groups = vec![Vec::new(); m];
    for (i, &rank) in row.iter().enumerate() {
        if rank > 0 {
            groups[rank as usize - 1].push(i);
        }
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn format_row(row: &[u32], items: &[String]) -> String {
    row_ordering(row)
        .iter()
        .map(|g| {
            g.iter()
                .map(|&i| items[i].as_str())
                .collect::<Vec<_>>()
                .join(" = ")
        })
        .collect::<Vec<_>>()
        .join(" > ")
}

fn truncate_display(text: &str, width: usize) -> String {
    if text.chars().count() <= width {
        return text.to_string();
    }
    let keep: String = text.chars().take(width.saturating_sub(4)).collect();
    format!("{keep} ...")
}

/// Rows of ordered slots; each slot is a set of item names (a multi-item
/// slot is a tie, an empty slot is missing).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OrderingsTable {
    rows: Vec<Vec<Vec<String>>>,
}

impl OrderingsTable {
    pub fn new(rows: Vec<Vec<Vec<String>>>) -> Self {
        Self { rows }
    }

    /// One item per slot.
    pub fn from_simple(rows: Vec<Vec<String>>) -> Self {
        Self {
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(|s| vec![s]).collect())
                .collect(),
        }
    }

    pub fn rows(&self) -> &[Vec<Vec<String>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Rankings mapped onto groups (e.g. one group per judge or record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupedRankings<T> {
    rankings: RankingsTable<T>,
    group: Vec<usize>,
    n_groups: usize,
}

/// Groups rankings by `index` (ids `1..=G`, every id must occur).
pub fn group_rankings<T: Scalar>(table: RankingsTable<T>, index: &[usize]) -> Result<GroupedRankings<T>> {
    if index.len() != table.n_rows() {
        return Err(Error::InvalidGroup(format!(
            "index has length {}, expected {}",
            index.len(),
            table.n_rows()
        )));
    }
    let n_groups = index.iter().copied().max().unwrap_or(0);
    let mut seen = vec![false; n_groups];
    for &g in index {
        if g == 0 {
            return Err(Error::InvalidGroup("group ids start at 1".into()));
        }
        seen[g - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidGroup(format!("group id {} has no rankings", missing + 1)));
    }
    Ok(GroupedRankings {
        rankings: table,
        group: index.iter().map(|&g| g - 1).collect(),
        n_groups,
    })
}

impl<T: Scalar> GroupedRankings<T> {
    pub fn rankings(&self) -> &RankingsTable<T> {
        &self.rankings
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Zero-based group of each ranking.
    pub fn group_of(&self) -> &[usize] {
        &self.group
    }

    /// Ranking rows belonging to zero-based group `g`.
    pub fn group_rows(&self, g: usize) -> Vec<usize> {
        (0..self.group.len()).filter(|&r| self.group[r] == g).collect()
    }

    /// Rankings of zero-based group `g` as a table.
    pub fn group_table(&self, g: usize) -> RankingsTable<T> {
        self.rankings.subset_rows(&self.group_rows(g))
    }

    /// Restricts to the listed zero-based groups, renumbering them `0..n` in
    /// the given order.
    pub fn subset_groups(&self, groups: &[usize]) -> Self {
        let mut new_id = vec![usize::MAX; self.n_groups];
        for (k, &g) in groups.iter().enumerate() {
            new_id[g] = k;
        }
        let rows: Vec<usize> = (0..self.group.len())
            .filter(|&r| new_id[self.group[r]] != usize::MAX)
            .collect();
        Self {
            rankings: self.rankings.subset_rows(&rows),
            group: rows.iter().map(|&r| new_id[self.group[r]]).collect(),
            n_groups: groups.len(),
        }
    }

    /// Formatted rankings of group `g`, joined by `", "` and truncated to
    /// `width` characters.
    pub fn format_group(&self, g: usize, width: Option<usize>) -> String {
        let text = self
            .group_rows(g)
            .into_iter()
            .map(|r| self.rankings.format_ranking(r, None))
            .collect::<Vec<_>>()
            .join(", ");
        match width {
            Some(w) => truncate_display(&text, w),
            None => text,
        }
    }
}

/// Replaces coded positions by item names: the code at position `p` of
/// `codes` selects column `p` of that row's `item_columns`.
pub fn decode_orderings(
    coded: &[Vec<String>],
    item_columns: &[Vec<String>],
    codes: &[String],
) -> Result<OrderingsTable> {
    if coded.len() != item_columns.len() {
        return Err(Error::Decode {
            row: coded.len().min(item_columns.len()),
            msg: format!(
                "{} coded rows but {} item rows",
                coded.len(),
                item_columns.len()
            ),
        });
    }
    let mut rows = Vec::with_capacity(coded.len());
    for (r, (cells, names)) in coded.iter().zip(item_columns).enumerate() {
        let mut row = Vec::with_capacity(cells.len());
        for cell in cells {
            let p = codes.iter().position(|c| c == cell).ok_or_else(|| Error::Decode {
                row: r,
                msg: format!("value `{cell}` is not one of the codes"),
            })?;
            let name = names.get(p).ok_or_else(|| Error::Decode {
                row: r,
                msg: format!("no item column for code `{cell}`"),
            })?;
            row.push(vec![name.clone()]);
        }
        rows.push(row);
    }
    Ok(OrderingsTable::new(rows))
}

/// For rows naming all but one of `codes`, returns the missing code.
pub fn complete_orderings(partial: &[Vec<String>], codes: &[String]) -> Result<Vec<String>> {
    partial
        .iter()
        .enumerate()
        .map(|(r, row)| {
            for cell in row {
                if !codes.contains(cell) {
                    return Err(Error::Decode {
                        row: r,
                        msg: format!("value `{cell}` is not one of the codes"),
                    });
                }
            }
            let missing: Vec<&String> = codes.iter().filter(|c| !row.contains(c)).collect();
            if missing.len() != 1 {
                return Err(Error::Complete {
                    row: r,
                    missing: missing.len(),
                });
            }
            Ok(missing[0].clone())
        })
        .collect()
}
