//! Full rankings, the rank-of-scores map and the normalized Kendall tau
//! distance, plus the ranking panel and its CSV schema.
//!
//! Ranks are 1-based and rank 1 is the most preferred item. A latent score
//! vector maps to a ranking by ascending score: the smallest score gets rank 1.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A permutation of `1..=N`; `ranks[i]` is the rank of item `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Ranking {
    ranks: Vec<u32>,
}

impl TryFrom<Vec<u32>> for Ranking {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        let raw: Vec<i64> = v.into_iter().map(i64::from).collect();
        validate_ranking(&raw)
    }
}

impl From<Ranking> for Vec<u32> {
    fn from(r: Ranking) -> Self {
        r.ranks
    }
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn rank(&self, item: usize) -> u32 {
        self.ranks[item]
    }

    /// Items listed from most to least preferred.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (item, &r) in self.ranks.iter().enumerate() {
            order[r as usize - 1] = item;
        }
        order
    }

    pub fn identity(n: usize) -> Self {
        Ranking {
            ranks: (1..=n as u32).collect(),
        }
    }

    pub fn from_order(order: &[usize]) -> Result<Self> {
        let mut ranks = vec![0i64; order.len()];
        for (pos, &item) in order.iter().enumerate() {
            if item >= order.len() {
                return Err(Error::Validation(format!("item {item} out of range")));
            }
            ranks[item] = pos as i64 + 1;
        }
        validate_ranking(&ranks)
    }
}

impl std::fmt::Display for Ranking {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, r) in self.ranks.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

/// Checks that `raw` is a permutation of `1..=N`.
pub fn validate_ranking(raw: &[i64]) -> Result<Ranking> {
    let n = raw.len();
    let mut seen = vec![false; n + 1];
    for &r in raw {
        if r < 1 || r as usize > n {
            return Err(Error::Validation(format!("rank {r} out of range 1..={n}")));
        }
        if seen[r as usize] {
            return Err(Error::Validation(format!("duplicate rank {r}")));
        }
        seen[r as usize] = true;
    }
    if let Some(missing) = (1..=n).find(|&r| !seen[r]) {
        return Err(Error::Validation(format!("missing rank {missing}")));
    }
    Ok(Ranking {
        ranks: raw.iter().map(|&r| r as u32).collect(),
    })
}

/// Ranks scores in ascending order; equal scores are ordered by item index.
pub fn rank_of_scores(z: &[f64]) -> Result<Ranking> {
    if let Some((i, v)) = z.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("score {i} is not finite ({v})")));
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; z.len()];
    for (pos, &item) in order.iter().enumerate() {
        ranks[item] = pos as u32 + 1;
    }
    Ok(Ranking { ranks })
}

/// Like [`rank_of_scores`] with a secondary key consulted on exact ties.
pub fn rank_of_scores_with_tiebreak(primary: &[f64], secondary: &[f64]) -> Result<Ranking> {
    if primary.len() != secondary.len() {
        return Err(Error::Dimension(format!(
            "{} primary scores but {} tie-break scores",
            primary.len(),
            secondary.len()
        )));
    }
    for v in primary.iter().chain(secondary) {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {v}")));
        }
    }
    let mut order: Vec<usize> = (0..primary.len()).collect();
    order.sort_by(|&a, &b| {
        primary[a]
            .total_cmp(&primary[b])
            .then(secondary[a].total_cmp(&secondary[b]))
            .then(a.cmp(&b))
    });
    Ranking::from_order(&order)
}

/// Fraction of item pairs ordered differently by `a` and `b`.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::Dimension(format!(
            "rankings of {} and {} items",
            a.len(),
            b.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "Kendall tau needs at least two items".into(),
        ));
    }
    let (ra, rb) = (a.ranks(), b.ranks());
    let mut discordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (ra[i] < ra[j]) != (rb[i] < rb[j]) {
                discordant += 1;
            }
        }
    }
    Ok(discordant as f64 / (n * (n - 1) / 2) as f64)
}

/// Exogenous covariates of a panel.
///
/// Layouts: item `[N][T][K_a]`, ranker `[M][T][K_r]`, pair `[N][M][T][K_w]`,
/// all row-major.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateSet {
    pub n_items: usize,
    pub n_rankers: usize,
    pub n_times: usize,
    pub item_dim: usize,
    pub ranker_dim: usize,
    pub pair_dim: usize,
    pub item: Vec<f64>,
    pub ranker: Vec<f64>,
    pub pair: Vec<f64>,
    pub pair_names: Vec<String>,
    /// Append the previous period's observed rank to every design row.
    pub lagged_rank_flag: bool,
}

impl CovariateSet {
    pub fn empty(n_items: usize, n_rankers: usize, n_times: usize) -> Self {
        CovariateSet {
            n_items,
            n_rankers,
            n_times,
            ..Default::default()
        }
    }

    pub fn with_pair(
        n_items: usize,
        n_rankers: usize,
        n_times: usize,
        names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut c = Self::empty(n_items, n_rankers, n_times);
        c.pair_dim = names.len();
        c.pair_names = names;
        c.pair = values;
        c.validate()?;
        Ok(c)
    }

    /// Number of exogenous columns (excluding the lagged rank).
    pub fn exogenous_dim(&self) -> usize {
        self.item_dim + self.ranker_dim + self.pair_dim
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, t) = (self.n_items, self.n_rankers, self.n_times);
        let checks = [
            ("item", self.item.len(), n * t * self.item_dim),
            ("ranker", self.ranker.len(), m * t * self.ranker_dim),
            ("pair", self.pair.len(), n * m * t * self.pair_dim),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Dimension(format!(
                    "{name} covariates hold {got} values, expected {want}"
                )));
            }
        }
        if self.pair_names.len() != self.pair_dim {
            return Err(Error::Dimension("pair covariate names".into()));
        }
        if let Some(v) = self
            .item
            .iter()
            .chain(&self.ranker)
            .chain(&self.pair)
            .find(|v| !v.is_finite())
        {
            return Err(Error::Validation(format!("non-finite covariate {v}")));
        }
        Ok(())
    }

    /// Appends the exogenous covariates of cell `(item, ranker, time)` to `out`.
    pub fn extend_row(&self, item: usize, ranker: usize, time: usize, out: &mut Vec<f64>) {
        let t_n = self.n_times;
        if self.item_dim > 0 {
            let o = (item * t_n + time) * self.item_dim;
            out.extend_from_slice(&self.item[o..o + self.item_dim]);
        }
        if self.ranker_dim > 0 {
            let o = (ranker * t_n + time) * self.ranker_dim;
            out.extend_from_slice(&self.ranker[o..o + self.ranker_dim]);
        }
        if self.pair_dim > 0 {
            let o = ((item * self.n_rankers + ranker) * t_n + time) * self.pair_dim;
            out.extend_from_slice(&self.pair[o..o + self.pair_dim]);
        }
    }

    /// Keeps periods `start..end`.
    pub fn slice_times(&self, start: usize, end: usize) -> Self {
        let t_new = end - start;
        let mut c = CovariateSet {
            n_times: t_new,
            item: Vec::new(),
            ranker: Vec::new(),
            pair: Vec::new(),
            ..self.clone()
        };
        for i in 0..self.n_items {
            for t in start..end {
                let o = (i * self.n_times + t) * self.item_dim;
                c.item.extend_from_slice(&self.item[o..o + self.item_dim]);
            }
        }
        for j in 0..self.n_rankers {
            for t in start..end {
                let o = (j * self.n_times + t) * self.ranker_dim;
                c.ranker.extend_from_slice(&self.ranker[o..o + self.ranker_dim]);
            }
        }
        for i in 0..self.n_items {
            for j in 0..self.n_rankers {
                for t in start..end {
                    let o = ((i * self.n_rankers + j) * self.n_times + t) * self.pair_dim;
                    c.pair.extend_from_slice(&self.pair[o..o + self.pair_dim]);
                }
            }
        }
        c
    }

    pub fn select_rankers(&self, rankers: &[usize]) -> Self {
        let mut c = CovariateSet {
            n_rankers: rankers.len(),
            ranker: Vec::new(),
            pair: Vec::new(),
            ..self.clone()
        };
        for &j in rankers {
            let o = j * self.n_times * self.ranker_dim;
            c.ranker
                .extend_from_slice(&self.ranker[o..o + self.n_times * self.ranker_dim]);
        }
        for i in 0..self.n_items {
            for &j in rankers {
                let o = (i * self.n_rankers + j) * self.n_times * self.pair_dim;
                c.pair
                    .extend_from_slice(&self.pair[o..o + self.n_times * self.pair_dim]);
            }
        }
        c
    }
}

/// Observed rankings for every `(ranker, time)` cell, plus covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingPanel {
    n_items: usize,
    n_rankers: usize,
    n_times: usize,
    item_labels: Vec<String>,
    ranker_labels: Vec<String>,
    time_labels: Vec<String>,
    /// Indexed `[t * M + j]`.
    rankings: Vec<Ranking>,
    pub covariates: CovariateSet,
}

impl RankingPanel {
    /// `rankings[t][j]` is the ranking of ranker `j` at period `t`.
    pub fn new(rankings: Vec<Vec<Ranking>>, covariates: Option<CovariateSet>) -> Result<Self> {
        let n_times = rankings.len();
        if n_times == 0 || rankings[0].is_empty() {
            return Err(Error::InvalidInput("empty ranking panel".into()));
        }
        let n_rankers = rankings[0].len();
        let n_items = rankings[0][0].len();
        if n_items == 0 {
            return Err(Error::InvalidInput("rankings over zero items".into()));
        }
        let mut flat = Vec::with_capacity(n_times * n_rankers);
        for (t, row) in rankings.into_iter().enumerate() {
            if row.len() != n_rankers {
                return Err(Error::Dimension(format!(
                    "period {t} has {} rankers, expected {n_rankers}",
                    row.len()
                )));
            }
            for (j, r) in row.into_iter().enumerate() {
                if r.len() != n_items {
                    return Err(Error::Dimension(format!(
                        "ranking (ranker {j}, period {t}) has {} items, expected {n_items}",
                        r.len()
                    )));
                }
                flat.push(r);
            }
        }
        let covariates =
            covariates.unwrap_or_else(|| CovariateSet::empty(n_items, n_rankers, n_times));
        if (covariates.n_items, covariates.n_rankers, covariates.n_times)
            != (n_items, n_rankers, n_times)
        {
            return Err(Error::Dimension(
                "covariate dimensions do not match the ranking panel".into(),
            ));
        }
        covariates.validate()?;
        Ok(RankingPanel {
            n_items,
            n_rankers,
            n_times,
            item_labels: (1..=n_items).map(|i| format!("item{i}")).collect(),
            ranker_labels: (1..=n_rankers).map(|j| format!("ranker{j}")).collect(),
            time_labels: (1..=n_times).map(|t| t.to_string()).collect(),
            rankings: flat,
            covariates,
        })
    }

    /// Static panel: one period.
    pub fn cross_section(rankings: Vec<Ranking>, covariates: Option<CovariateSet>) -> Result<Self> {
        Self::new(vec![rankings], covariates)
    }

    pub fn with_labels(
        mut self,
        items: Vec<String>,
        rankers: Vec<String>,
        times: Vec<String>,
    ) -> Result<Self> {
        if items.len() != self.n_items
            || rankers.len() != self.n_rankers
            || times.len() != self.n_times
        {
            return Err(Error::Dimension("label counts do not match the panel".into()));
        }
        self.item_labels = items;
        self.ranker_labels = rankers;
        self.time_labels = times;
        Ok(self)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }
    pub fn n_rankers(&self) -> usize {
        self.n_rankers
    }
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }
    pub fn ranker_labels(&self) -> &[String] {
        &self.ranker_labels
    }
    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn ranking(&self, ranker: usize, time: usize) -> &Ranking {
        &self.rankings[time * self.n_rankers + ranker]
    }

    /// All rankings of one period, in ranker order.
    pub fn period(&self, time: usize) -> &[Ranking] {
        &self.rankings[time * self.n_rankers..(time + 1) * self.n_rankers]
    }

    /// Periods `start..end` as a new panel.
    pub fn slice_times(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_times {
            return Err(Error::InvalidInput(format!(
                "period range {start}..{end} outside 0..{}",
                self.n_times
            )));
        }
        Ok(RankingPanel {
            n_times: end - start,
            time_labels: self.time_labels[start..end].to_vec(),
            rankings: self.rankings[start * self.n_rankers..end * self.n_rankers].to_vec(),
            covariates: self.covariates.slice_times(start, end),
            ..self.clone()
        })
    }

    pub fn select_rankers(&self, rankers: &[usize]) -> Result<Self> {
        if rankers.is_empty() || rankers.iter().any(|&j| j >= self.n_rankers) {
            return Err(Error::InvalidInput("invalid ranker selection".into()));
        }
        let mut rankings = Vec::with_capacity(self.n_times * rankers.len());
        for t in 0..self.n_times {
            for &j in rankers {
                rankings.push(self.ranking(j, t).clone());
            }
        }
        Ok(RankingPanel {
            n_rankers: rankers.len(),
            ranker_labels: rankers.iter().map(|&j| self.ranker_labels[j].clone()).collect(),
            rankings,
            covariates: self.covariates.select_rankers(rankers),
            ..self.clone()
        })
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    /// Reads the `time,ranker,item,rank[,cov_*...]` schema.
    ///
    /// Labels are mapped to dense indices in order of first appearance. Every
    /// `cov_*` column becomes a pair (item x ranker x time) covariate.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["time", "ranker", "item", "rank"];
        for (k, want) in expected.iter().enumerate() {
            if headers.get(k) != Some(*want) {
                return Err(Error::Validation(format!(
                    "line 1: expected column {} to be `{want}`, found `{}`",
                    k + 1,
                    headers.get(k).unwrap_or("")
                )));
            }
        }
        let mut cov_names = Vec::new();
        for h in headers.iter().skip(4) {
            if !h.starts_with("cov_") {
                return Err(Error::Validation(format!(
                    "line 1: unexpected column `{h}` (extra columns must start with cov_)"
                )));
            }
            cov_names.push(h.to_string());
        }
        let k_w = cov_names.len();

        struct Row {
            line: u64,
            t: usize,
            j: usize,
            i: usize,
            rank: i64,
            cov: Vec<f64>,
        }
        let mut times = LabelMap::default();
        let mut rankers = LabelMap::default();
        let mut items = LabelMap::default();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != headers.len() {
                return Err(Error::Validation(format!(
                    "line {line}: expected {} fields, found {}",
                    headers.len(),
                    rec.len()
                )));
            }
            let rank: i64 = rec[3]
                .parse()
                .map_err(|_| Error::Validation(format!("line {line}: rank `{}` is not an integer", &rec[3])))?;
            let mut cov = Vec::with_capacity(k_w);
            for k in 0..k_w {
                let v: f64 = rec[4 + k].parse().map_err(|_| {
                    Error::Validation(format!(
                        "line {line}: covariate {} value `{}` is not a number",
                        cov_names[k],
                        &rec[4 + k]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "line {line}: covariate {} is not finite",
                        cov_names[k]
                    )));
                }
                cov.push(v);
            }
            rows.push(Row {
                line,
                t: times.index(&rec[0]),
                j: rankers.index(&rec[1]),
                i: items.index(&rec[2]),
                rank,
                cov,
            });
        }
        if rows.is_empty() {
            return Err(Error::Validation("no data rows".into()));
        }
        let (n, m, t_n) = (items.len(), rankers.len(), times.len());
        let mut cells: Vec<Option<(u64, i64)>> = vec![None; n * m * t_n];
        let mut pair = vec![0.0; n * m * t_n * k_w];
        for r in &rows {
            let cell = (r.t * m + r.j) * n + r.i;
            if let Some((prev, _)) = cells[cell] {
                return Err(Error::Validation(format!(
                    "line {}: duplicate entry for time `{}`, ranker `{}`, item `{}` (first seen on line {prev})",
                    r.line, times.labels[r.t], rankers.labels[r.j], items.labels[r.i]
                )));
            }
            cells[cell] = Some((r.line, r.rank));
            let o = ((r.i * m + r.j) * t_n + r.t) * k_w;
            pair[o..o + k_w].copy_from_slice(&r.cov);
        }
        let mut panel = Vec::with_capacity(t_n);
        for t in 0..t_n {
            let mut period = Vec::with_capacity(m);
            for j in 0..m {
                let mut raw = Vec::with_capacity(n);
                let mut first_line = u64::MAX;
                for i in 0..n {
                    match cells[(t * m + j) * n + i] {
                        Some((line, rank)) => {
                            first_line = first_line.min(line);
                            raw.push(rank);
                        }
                        None => {
                            return Err(Error::Validation(format!(
                                "incomplete panel: no rank for item `{}` from ranker `{}` at time `{}` (partial rankings are not supported)",
                                items.labels[i], rankers.labels[j], times.labels[t]
                            )))
                        }
                    }
                }
                let ranking = validate_ranking(&raw).map_err(|e| {
                    Error::Validation(format!(
                        "line {first_line}: ranker `{}` at time `{}`: {e}",
                        rankers.labels[j], times.labels[t]
                    ))
                })?;
                period.push(ranking);
            }
            panel.push(period);
        }
        let covariates = split_covariates((n, m, t_n), &cov_names, &pair, |i, j, t| {
            format!(
                "item `{}`, ranker `{}`, time `{}`",
                items.labels[i], rankers.labels[j], times.labels[t]
            )
        })?;
        RankingPanel::new(panel, Some(covariates))?.with_labels(
            items.labels,
            rankers.labels,
            times.labels,
        )
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Writes the CSV schema; item, ranker and pair covariates are all
    /// flattened into `cov_*` columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cov = &self.covariates;
        let mut names: Vec<String> = Vec::new();
        names.extend((1..=cov.item_dim).map(|k| format!("cov_item_{k}")));
        names.extend((1..=cov.ranker_dim).map(|k| format!("cov_ranker_{k}")));
        names.extend(cov.pair_names.iter().map(|n| {
            if n.starts_with("cov_") {
                n.clone()
            } else {
                format!("cov_{n}")
            }
        }));
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "ranker".into(), "item".into(), "rank".into()];
        header.extend(names);
        w.write_record(&header)?;
        let mut row_cov = Vec::new();
        for t in 0..self.n_times {
            for j in 0..self.n_rankers {
                let r = self.ranking(j, t);
                for i in 0..self.n_items {
                    row_cov.clear();
                    cov.extend_row(i, j, t, &mut row_cov);
                    let mut rec = vec![
                        self.time_labels[t].clone(),
                        self.ranker_labels[j].clone(),
                        self.item_labels[i].clone(),
                        r.rank(i).to_string(),
                    ];
                    rec.extend(row_cov.iter().map(|v| v.to_string()));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Sorts `cov_*` columns read as pair values into item (`cov_item_*`),
/// ranker (`cov_ranker_*`) and pair covariates. Item columns must not vary
/// across rankers and ranker columns must not vary across items.
fn split_covariates(
    (n, m, t_n): (usize, usize, usize),
    names: &[String],
    pair: &[f64],
    cell: impl Fn(usize, usize, usize) -> String,
) -> Result<CovariateSet> {
    let k_w = names.len();
    let at = |i: usize, j: usize, t: usize, k: usize| pair[((i * m + j) * t_n + t) * k_w + k];
    let item_cols: Vec<usize> = (0..k_w).filter(|&k| names[k].starts_with("cov_item_")).collect();
    let ranker_cols: Vec<usize> = (0..k_w).filter(|&k| names[k].starts_with("cov_ranker_")).collect();
    let pair_cols: Vec<usize> = (0..k_w)
        .filter(|k| !item_cols.contains(k) && !ranker_cols.contains(k))
        .collect();
    let mut c = CovariateSet::empty(n, m, t_n);
    for i in 0..n {
        for t in 0..t_n {
            for &k in &item_cols {
                let v = at(i, 0, t, k);
                if let Some(j) = (1..m).find(|&j| at(i, j, t, k) != v) {
                    return Err(Error::Validation(format!("{} varies across rankers at {}", names[k], cell(i, j, t))));
                }
                c.item.push(v);
            }
        }
    }
    for j in 0..m {
        for t in 0..t_n {
            for &k in &ranker_cols {
                let v = at(0, j, t, k);
                if let Some(i) = (1..n).find(|&i| at(i, j, t, k) != v) {
                    return Err(Error::Validation(format!("{} varies across items at {}", names[k], cell(i, j, t))));
                }
                c.ranker.push(v);
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            for t in 0..t_n {
                c.pair.extend(pair_cols.iter().map(|&k| at(i, j, t, k)));
            }
        }
    }
    c.item_dim = item_cols.len();
    c.ranker_dim = ranker_cols.len();
    c.pair_dim = pair_cols.len();
    c.pair_names = pair_cols.iter().map(|&k| names[k].clone()).collect();
    c.validate()?;
    Ok(c)
}

#[derive(Default)]
struct LabelMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelMap {
    fn index(&mut self, label: &str) -> usize {
        if let Some(&k) = self.index.get(label) {
            return k;
        }
        let k = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), k);
        k
    }
    fn len(&self) -> usize {
        self.labels.len()
    }
}
