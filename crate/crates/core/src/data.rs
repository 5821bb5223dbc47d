//! Relevance matrices, item groupings, and their CSV formats.
//!
//! Relevance CSV: a header row `consumer_id,<item_1>,...,<item_n>` followed by
//! one row per consumer holding its id and `n` scores. Group CSV: header
//! `item_id,group_id` and one row per item.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

/// Dense consumer × item relevance scores `R(d, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    consumer_ids: Vec<String>,
    item_ids: Vec<String>,
    /// Row-major, `m * n`.
    scores: Vec<f64>,
    /// Position of each item in lexicographic id order; used for tie-breaks.
    item_lex_rank: Vec<usize>,
    item_pos: HashMap<String, usize>,
    consumer_pos: HashMap<String, usize>,
}

impl RelevanceMatrix {
    /// Builds a validated matrix from rows of scores.
    pub fn new(
        consumer_ids: Vec<String>,
        item_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = item_ids.len();
        if rows.len() != consumer_ids.len() {
            return Err(Error::Config(format!(
                "{} consumer ids but {} score rows",
                consumer_ids.len(),
                rows.len()
            )));
        }
        let mut scores = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::RaggedRow {
                    row: r + 2,
                    found: row.len() + 1,
                    expected: n + 1,
                });
            }
            scores.extend(row);
        }
        Self::from_flat(consumer_ids, item_ids, scores)
    }

    /// Builds a validated matrix from row-major scores.
    pub fn from_flat(
        consumer_ids: Vec<String>,
        item_ids: Vec<String>,
        scores: Vec<f64>,
    ) -> Result<Self> {
        let (m, n) = (consumer_ids.len(), item_ids.len());
        if m == 0 || n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if scores.len() != m * n {
            return Err(Error::Config(format!(
                "expected {} scores for a {m}x{n} matrix, got {}",
                m * n,
                scores.len()
            )));
        }
        let consumer_pos = index_unique("consumer", &consumer_ids)?;
        let item_pos = index_unique("item", &item_ids)?;
        for (idx, &value) in scores.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                // Report in file coordinates: header is row 1, ids are column 1.
                return Err(Error::InvalidScore {
                    row: idx / n + 2,
                    column: idx % n + 2,
                    value,
                });
            }
        }

        let mut by_id: Vec<usize> = (0..n).collect();
        by_id.sort_by(|&a, &b| item_ids[a].cmp(&item_ids[b]));
        let mut item_lex_rank = vec![0; n];
        for (rank, &item) in by_id.iter().enumerate() {
            item_lex_rank[item] = rank;
        }

        Ok(Self {
            consumer_ids,
            item_ids,
            scores,
            item_lex_rank,
            item_pos,
            consumer_pos,
        })
    }

    pub fn n_consumers(&self) -> usize {
        self.consumer_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn consumer_ids(&self) -> &[String] {
        &self.consumer_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_pos.get(id).copied()
    }

    pub fn consumer_index(&self, id: &str) -> Option<usize> {
        self.consumer_pos.get(id).copied()
    }

    #[inline]
    pub fn score(&self, consumer: usize, item: usize) -> f64 {
        self.scores[consumer * self.n_items() + item]
    }

    #[inline]
    pub fn row(&self, consumer: usize) -> &[f64] {
        let n = self.n_items();
        &self.scores[consumer * n..(consumer + 1) * n]
    }

    /// Average relevance `R(d)` of every item under uniform consumer weights.
    pub fn average_relevance(&self) -> Vec<f64> {
        let n = self.n_items();
        let mut sums = vec![0.0; n];
        for c in 0..self.n_consumers() {
            for (s, &v) in sums.iter_mut().zip(self.row(c)) {
                *s += v;
            }
        }
        let m = self.n_consumers() as f64;
        sums.into_iter().map(|s| s / m).collect()
    }

    /// Orders two items by their ids.
    #[inline]
    pub fn cmp_items_by_id(&self, a: usize, b: usize) -> Ordering {
        self.item_lex_rank[a].cmp(&self.item_lex_rank[b])
    }

    /// Preference order for `consumer`: higher relevance first, then ascending
    /// item id.
    #[inline]
    pub fn cmp_preference(&self, consumer: usize, a: usize, b: usize) -> Ordering {
        self.score(consumer, b)
            .total_cmp(&self.score(consumer, a))
            .then_with(|| self.cmp_items_by_id(a, b))
    }

    /// Returns a copy with every score multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_flat(
            self.consumer_ids.clone(),
            self.item_ids.clone(),
            self.scores.iter().map(|s| s * factor).collect(),
        )
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = csv.records();

        let header = match records.next() {
            Some(rec) => rec?,
            None => {
                return Err(Error::Parse {
                    row: 1,
                    column: 1,
                    message: "empty file".into(),
                })
            }
        };
        if header.len() < 2 {
            return Err(Error::Parse {
                row: 1,
                column: header.len().max(1),
                message: "header needs `consumer_id` followed by at least one item id".into(),
            });
        }
        let item_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let n = item_ids.len();

        let mut consumer_ids = Vec::new();
        let mut scores = Vec::new();
        for (r, rec) in records.enumerate() {
            let rec = rec?;
            let row = r + 2;
            if rec.len() != n + 1 {
                return Err(Error::RaggedRow {
                    row,
                    found: rec.len(),
                    expected: n + 1,
                });
            }
            consumer_ids.push(rec[0].to_owned());
            for (c, field) in rec.iter().enumerate().skip(1) {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                scores.push(value);
            }
        }
        Self::from_flat(consumer_ids, item_ids, scores)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.n_items() + 1);
        header.push("consumer_id".to_string());
        header.extend(self.item_ids.iter().cloned());
        csv.write_record(&header)?;
        for (c, id) in self.consumer_ids.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.n_items() + 1);
            rec.push(id.clone());
            // `Display` for f64 is shortest round-trip, so this is lossless.
            rec.extend(self.row(c).iter().map(|v| v.to_string()));
            csv.write_record(&rec)?;
        }
        csv.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }
}

fn index_unique(kind: &'static str, ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut pos = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if pos.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(pos)
}

pub fn load_relevance(path: impl AsRef<Path>) -> Result<RelevanceMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    RelevanceMatrix::from_reader(file)
}

/// Total item → group assignment over a relevance matrix's items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMap {
    group_ids: Vec<String>,
    item_group: Vec<usize>,
}

impl GroupMap {
    /// Builds a map from `(item_id, group_id)` pairs. Group order follows first
    /// appearance.
    pub fn from_pairs<I, S, T>(items: &RelevanceMatrix, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let item_pos: HashMap<&str, usize> = items
            .item_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut group_pos: HashMap<String, usize> = HashMap::new();
        let mut group_ids = Vec::new();
        let mut item_group: Vec<Option<usize>> = vec![None; items.n_items()];

        for (item, group) in pairs {
            let (item, group) = (item.as_ref(), group.as_ref());
            let &idx = item_pos
                .get(item)
                .ok_or_else(|| Error::UnknownItem(item.to_owned()))?;
            if item_group[idx].is_some() {
                return Err(Error::DuplicateItemRow(item.to_owned()));
            }
            let g = *group_pos.entry(group.to_owned()).or_insert_with(|| {
                group_ids.push(group.to_owned());
                group_ids.len() - 1
            });
            item_group[idx] = Some(g);
        }

        let item_group = item_group
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.ok_or_else(|| Error::MissingItem(items.item_ids()[i].clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            group_ids,
            item_group,
        })
    }

    pub fn from_reader<R: Read>(reader: R, items: &RelevanceMatrix) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv.headers()?.clone();
        if header.len() != 2 || &header[0] != "item_id" || &header[1] != "group_id" {
            return Err(Error::Parse {
                row: 1,
                column: 1,
                message: "expected header `item_id,group_id`".into(),
            });
        }
        let mut pairs = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            pairs.push((rec[0].to_owned(), rec[1].to_owned()));
        }
        Self::from_pairs(items, pairs)
    }

    pub fn to_writer<W: Write>(&self, writer: W, items: &RelevanceMatrix) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["item_id", "group_id"])?;
        for (i, id) in items.item_ids().iter().enumerate() {
            csv.write_record([id.as_str(), self.group_ids[self.item_group[i]].as_str()])?;
        }
        csv.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, items: &RelevanceMatrix) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file, items)
    }

    pub fn n_groups(&self) -> usize {
        self.group_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_group.len()
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    #[inline]
    pub fn group_of(&self, item: usize) -> usize {
        self.item_group[item]
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.item_group
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(i, _)| i)
    }

    /// True when every item is its own group, in item order.
    pub fn is_identity(&self) -> bool {
        self.group_ids.len() == self.item_group.len()
            && self.item_group.iter().enumerate().all(|(i, &g)| i == g)
    }

    /// Sums a per-item vector into a per-group vector, adding items in index order.
    pub fn aggregate(&self, per_item: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_groups()];
        for (i, &v) in per_item.iter().enumerate() {
            out[self.item_group[i]] += v;
        }
        out
    }
}

pub fn load_groups(path: impl AsRef<Path>, items: &RelevanceMatrix) -> Result<GroupMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    GroupMap::from_reader(file, items)
}

/// One singleton group per item; group ids equal item ids.
pub fn identity_groups(items: &RelevanceMatrix) -> GroupMap {
    GroupMap {
        group_ids: items.item_ids().to_vec(),
        item_group: (0..items.n_items()).collect(),
    }
}

/// Score distribution for synthetic matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDistribution {
    Uniform,
    Beta { a: f64, b: f64 },
}

fn padded_ids(prefix: &str, count: usize) -> Vec<String> {
    let width = count.to_string().len();
    (0..count).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Seeded synthetic matrix with scores in `[0, 1]`.
///
/// Ids are zero-padded (`u0007`, `i042`) so lexicographic order matches index
/// order.
pub fn synth_relevance(
    m: usize,
    n: usize,
    distribution: ScoreDistribution,
    seed: u64,
) -> Result<RelevanceMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores: Vec<f64> = match distribution {
        ScoreDistribution::Uniform => (0..m * n).map(|_| rng.random::<f64>()).collect(),
        ScoreDistribution::Beta { a, b } => {
            let beta =
                Beta::new(a, b).map_err(|e| Error::Config(format!("beta({a}, {b}): {e}")))?;
            (0..m * n).map(|_| beta.sample(&mut rng)).collect()
        }
    };
    RelevanceMatrix::from_flat(padded_ids("u", m), padded_ids("i", n), scores)
}

/// Seeded assignment of items to `n_groups` groups (`g0`, `g1`, ...), every
/// group non-empty. Requires `1 <= n_groups <= n`.
pub fn synth_groups(items: &RelevanceMatrix, n_groups: usize, seed: u64) -> Result<GroupMap> {
    let n = items.n_items();
    if n_groups == 0 || n_groups > n {
        return Err(Error::Config(format!(
            "cannot split {n} items into {n_groups} non-empty groups"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_names = padded_ids("g", n_groups);
    let mut assignment: Vec<usize> = (0..n)
        .map(|i| {
            if i < n_groups {
                i
            } else {
                rng.random_range(0..n_groups)
            }
        })
        .collect();
    rand::seq::SliceRandom::shuffle(assignment.as_mut_slice(), &mut rng);
    GroupMap::from_pairs(
        items,
        items
            .item_ids()
            .iter()
            .zip(assignment)
            .map(|(item, g)| (item.as_str(), group_names[g].as_str())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const VERTICAL_EXAMPLE: &str =
        "consumer_id,A,B,C\n1,0.90,0.70,0.60\n2,0.55,0.70,0.90\n3,0.65,0.70,0.60\n";

    #[test]
    fn loads_example_with_equal_averages() {
        let rel = RelevanceMatrix::from_reader(VERTICAL_EXAMPLE.as_bytes()).unwrap();
        assert_eq!(rel.n_consumers(), 3);
        assert_eq!(rel.item_ids(), ["A", "B", "C"]);
        for avg in rel.average_relevance() {
            assert!((avg - 0.70).abs() < 1e-12, "{avg}");
        }
    }

    #[test]
    fn single_zero_cell_is_valid() {
        let rel = RelevanceMatrix::from_reader("consumer_id,x\nu,0\n".as_bytes()).unwrap();
        assert_eq!((rel.n_consumers(), rel.n_items()), (1, 1));
        assert_eq!(rel.score(0, 0), 0.0);
    }

    #[test]
    fn negative_score_names_the_cell() {
        let err =
            RelevanceMatrix::from_reader("consumer_id,a,b\nu1,0.1,0.2\nu2,0.3,-1\n".as_bytes())
                .unwrap_err();
        match err {
            Error::InvalidScore { row, column, value } => {
                assert_eq!((row, column), (3, 3));
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows_duplicates_and_garbage() {
        let ragged = RelevanceMatrix::from_reader("consumer_id,a,b\nu1,0.1\n".as_bytes());
        assert!(matches!(ragged, Err(Error::RaggedRow { row: 2, .. })));

        let dup = RelevanceMatrix::from_reader("consumer_id,a,a\nu1,0.1,0.2\n".as_bytes());
        assert!(matches!(dup, Err(Error::DuplicateId { kind: "item", .. })));

        let dup_c = RelevanceMatrix::from_reader("consumer_id,a\nu1,0.1\nu1,0.2\n".as_bytes());
        assert!(matches!(
            dup_c,
            Err(Error::DuplicateId {
                kind: "consumer",
                ..
            })
        ));

        let nan = RelevanceMatrix::from_reader("consumer_id,a\nu1,NaN\n".as_bytes());
        assert!(matches!(
            nan,
            Err(Error::InvalidScore {
                row: 2,
                column: 2,
                ..
            })
        ));

        let text = RelevanceMatrix::from_reader("consumer_id,a\nu1,high\n".as_bytes());
        assert!(matches!(
            text,
            Err(Error::Parse {
                row: 2,
                column: 2,
                ..
            })
        ));

        let empty = RelevanceMatrix::from_reader("consumer_id,a\n".as_bytes());
        assert!(matches!(empty, Err(Error::EmptyMatrix)));
    }

    #[test]
    fn group_file_validation() {
        let rel = RelevanceMatrix::from_reader(VERTICAL_EXAMPLE.as_bytes()).unwrap();
        let ok =
            GroupMap::from_reader("item_id,group_id\nA,g1\nB,g2\nC,g1\n".as_bytes(), &rel).unwrap();
        assert_eq!(ok.group_ids(), ["g1", "g2"]);
        assert_eq!(ok.group_of(2), 0);
        assert_eq!(ok.members(0).collect::<Vec<_>>(), vec![0, 2]);

        let missing = GroupMap::from_reader("item_id,group_id\nA,g1\nC,g1\n".as_bytes(), &rel);
        assert!(matches!(missing, Err(Error::MissingItem(ref id)) if id == "B"));

        let unknown =
            GroupMap::from_reader("item_id,group_id\nA,g\nB,g\nC,g\nZ,g\n".as_bytes(), &rel);
        assert!(matches!(unknown, Err(Error::UnknownItem(ref id)) if id == "Z"));

        let dup = GroupMap::from_reader("item_id,group_id\nA,g\nA,h\nB,g\nC,g\n".as_bytes(), &rel);
        assert!(matches!(dup, Err(Error::DuplicateItemRow(ref id)) if id == "A"));
    }

    #[test]
    fn distinct_groups_equal_identity() {
        let rel = RelevanceMatrix::from_reader(VERTICAL_EXAMPLE.as_bytes()).unwrap();
        let explicit = GroupMap::from_pairs(&rel, [("A", "A"), ("B", "B"), ("C", "C")]).unwrap();
        let id = identity_groups(&rel);
        assert_eq!(explicit, id);
        assert!(id.is_identity());
        assert_eq!(id.n_groups(), 3);
    }

    #[test]
    fn hundred_items_in_five_groups() {
        let rel = synth_relevance(10, 100, ScoreDistribution::Uniform, 3).unwrap();
        let groups = synth_groups(&rel, 5, 3).unwrap();
        assert_eq!(groups.n_groups(), 5);
        for g in 0..5 {
            assert!(groups.members(g).count() >= 1);
        }
        let mut buf = Vec::new();
        groups.to_writer(&mut buf, &rel).unwrap();
        let back = GroupMap::from_reader(buf.as_slice(), &rel).unwrap();
        for i in 0..100 {
            assert_eq!(
                back.group_ids()[back.group_of(i)],
                groups.group_ids()[groups.group_of(i)]
            );
        }
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let a = synth_relevance(3, 3, ScoreDistribution::Uniform, 7).unwrap();
        let b = synth_relevance(3, 3, ScoreDistribution::Uniform, 7).unwrap();
        assert_eq!(a, b);

        let one = synth_relevance(1, 1, ScoreDistribution::Uniform, 0).unwrap();
        assert!((0.0..=1.0).contains(&one.score(0, 0)));

        let beta = synth_relevance(20, 5, ScoreDistribution::Beta { a: 2.0, b: 5.0 }, 1).unwrap();
        assert!((0..20).all(|c| beta.row(c).iter().all(|v| (0.0..=1.0).contains(v))));

        let big = synth_relevance(10_000, 100, ScoreDistribution::Uniform, 1).unwrap();
        assert_eq!((big.n_consumers(), big.n_items()), (10_000, 100));
        assert_eq!(big.item_ids()[7], "i007");
    }
}
