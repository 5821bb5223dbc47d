//! Slate sets produced by allocators and their CSV dump format.
//!
//! A dump starts with one run-header line, e.g.
//!
//! ```text
//! #method=verfair-ind,alpha=1,eta=0,k=2,seed=7,order=default
//! consumer_id,rank,item_id,phase_tag
//! 1,1,A,allocation
//! ```
//!
//! followed by one row per slot. Ranks are 1-based.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::data::RelevanceMatrix;
use crate::error::{Error, Result};
use crate::quota::{AnchorPoint, QuotaTable};

/// How a slot was filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Quota-constrained vertical allocation.
    Allocation,
    /// Relevance-greedy fill of the remaining slots.
    Appending,
    /// Built in one pass by a baseline allocator.
    Direct,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Allocation => "allocation",
            Phase::Appending => "appending",
            Phase::Direct => "direct",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "allocation" => Ok(Phase::Allocation),
            "appending" => Ok(Phase::Appending),
            "direct" => Ok(Phase::Direct),
            other => Err(Error::Config(format!("unknown phase tag `{other}`"))),
        }
    }
}

/// One filled slot. `placed_rank` is the 1-based rank the item was written to
/// before re-sorting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub item: usize,
    pub phase: Phase,
    pub placed_rank: usize,
}

/// The ranked list shown to one consumer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slate {
    pub consumer: usize,
    pub slots: Vec<Placement>,
}

impl Slate {
    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().map(|p| p.item)
    }

    pub fn item_vec(&self) -> Vec<usize> {
        self.items().collect()
    }
}

/// Book-keeping from the quota-constrained allocation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationReport {
    pub anchor: Option<AnchorPoint>,
    pub quotas: QuotaTable,
    /// `Ẽ(G)`: exposure credited to each group during the allocation phase.
    pub allocated_exposure: Vec<f64>,
    /// Number of allocation slots where no quota-eligible item was available.
    pub fallback_count: usize,
}

/// The `m` ranked lists produced by one allocator run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlateSet {
    k: usize,
    /// Consumer indices in the order they were processed.
    pub order: Vec<usize>,
    /// One slate per consumer, sorted by consumer index.
    pub slates: Vec<Slate>,
    pub allocation: Option<AllocationReport>,
}

impl SlateSet {
    pub fn new(k: usize, order: Vec<usize>, mut slates: Vec<Slate>) -> Self {
        slates.sort_by_key(|s| s.consumer);
        Self {
            k,
            order,
            slates,
            allocation: None,
        }
    }

    pub fn empty(k: usize) -> Self {
        Self::new(k, Vec::new(), Vec::new())
    }

    /// Builds a baseline slate set from plain item lists, indexed by consumer.
    pub fn from_item_lists(k: usize, order: Vec<usize>, lists: Vec<Vec<usize>>) -> Self {
        let slates = lists
            .into_iter()
            .enumerate()
            .map(|(consumer, items)| Slate {
                consumer,
                slots: items
                    .into_iter()
                    .enumerate()
                    .map(|(r, item)| Placement {
                        item,
                        phase: Phase::Direct,
                        placed_rank: r + 1,
                    })
                    .collect(),
            })
            .collect();
        Self::new(k, order, slates)
    }

    /// Builds a slate set from id lists, validating every id against `rel`.
    pub fn from_id_lists<S: AsRef<str>>(
        rel: &RelevanceMatrix,
        k: usize,
        lists: &[(S, Vec<S>)],
    ) -> Result<Self> {
        let mut slates = Vec::with_capacity(lists.len());
        for (consumer, items) in lists {
            let consumer = consumer.as_ref();
            let c = rel
                .consumer_index(consumer)
                .ok_or_else(|| Error::Config(format!("unknown consumer id `{consumer}`")))?;
            let slots = items
                .iter()
                .enumerate()
                .map(|(r, id)| {
                    let id = id.as_ref();
                    rel.item_index(id)
                        .map(|item| Placement {
                            item,
                            phase: Phase::Direct,
                            placed_rank: r + 1,
                        })
                        .ok_or_else(|| Error::UnknownItem(id.to_owned()))
                })
                .collect::<Result<Vec<_>>>()?;
            slates.push(Slate { consumer: c, slots });
        }
        let order = slates.iter().map(|s| s.consumer).collect();
        Ok(Self::new(k, order, slates))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.slates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slates.is_empty()
    }

    pub fn slate_for(&self, consumer: usize) -> Option<&Slate> {
        self.slates
            .binary_search_by_key(&consumer, |s| s.consumer)
            .ok()
            .map(|i| &self.slates[i])
    }

    /// Item lists indexed by position in `slates`.
    pub fn item_lists(&self) -> Vec<Vec<usize>> {
        self.slates.iter().map(Slate::item_vec).collect()
    }

    /// Checks slate length, id ranges and distinctness.
    pub fn validate(&self, rel: &RelevanceMatrix) -> Result<()> {
        let n = rel.n_items();
        for slate in &self.slates {
            let consumer = rel
                .consumer_ids()
                .get(slate.consumer)
                .cloned()
                .unwrap_or_else(|| format!("#{}", slate.consumer));
            let invalid = |reason: String| Error::InvalidSlate {
                consumer: consumer.clone(),
                reason,
            };
            if slate.slots.len() != self.k {
                return Err(invalid(format!(
                    "length {} differs from k = {}",
                    slate.slots.len(),
                    self.k
                )));
            }
            let mut seen = vec![false; n];
            for p in &slate.slots {
                if p.item >= n {
                    return Err(Error::UnknownItem(format!("#{}", p.item)));
                }
                if std::mem::replace(&mut seen[p.item], true) {
                    return Err(invalid(format!(
                        "item `{}` appears twice",
                        rel.item_ids()[p.item]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Metadata line written ahead of a slate dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHeader {
    pub method: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: f64,
    pub k: usize,
    pub seed: Option<u64>,
    /// Consumer order policy name.
    pub order: Option<String>,
}

impl fmt::Display for RunHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#method={}", self.method)?;
        if let Some(a) = self.alpha {
            write!(f, ",alpha={a}")?;
        }
        if let Some(l) = self.lambda {
            write!(f, ",lambda={l}")?;
        }
        write!(f, ",eta={},k={}", self.eta, self.k)?;
        if let Some(s) = self.seed {
            write!(f, ",seed={s}")?;
        }
        if let Some(o) = &self.order {
            write!(f, ",order={o}")?;
        }
        Ok(())
    }
}

impl FromStr for RunHeader {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse {
            row: 1,
            column: 1,
            message: msg,
        };
        let body = line
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| bad("run header must start with `#`".into()))?;
        let mut header = RunHeader {
            method: String::new(),
            alpha: None,
            lambda: None,
            eta: f64::NAN,
            k: 0,
            seed: None,
            order: None,
        };
        for kv in body.split(',') {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header field `{kv}`")))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad value for {key}: `{v}`")))
            };
            match key.trim() {
                "method" => header.method = value.to_owned(),
                "alpha" => header.alpha = Some(num(value)?),
                "lambda" => header.lambda = Some(num(value)?),
                "eta" => header.eta = num(value)?,
                "k" => header.k = value.parse().map_err(|_| bad(format!("bad k `{value}`")))?,
                "seed" => {
                    header.seed = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad seed `{value}`")))?,
                    )
                }
                "order" => header.order = Some(value.to_owned()),
                other => return Err(bad(format!("unknown header field `{other}`"))),
            }
        }
        if header.method.is_empty() || header.eta.is_nan() || header.k == 0 {
            return Err(bad("run header needs method, eta and k".into()));
        }
        Ok(header)
    }
}

/// Writes the run header and one `consumer_id,rank,item_id,phase_tag` row per slot.
pub fn write_slates<W: Write>(
    mut writer: W,
    header: &RunHeader,
    slates: &SlateSet,
    rel: &RelevanceMatrix,
) -> Result<()> {
    writeln!(writer, "{header}").map_err(|e| Error::io("<writer>", e))?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["consumer_id", "rank", "item_id", "phase_tag"])?;
    for slate in &slates.slates {
        let consumer = &rel.consumer_ids()[slate.consumer];
        for (r, p) in slate.slots.iter().enumerate() {
            csv.write_record([
                consumer.as_str(),
                &(r + 1).to_string(),
                &rel.item_ids()[p.item],
                p.phase.as_str(),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Reads a dump written by [`write_slates`]. `placed_rank` is not part of the
/// format and is set to the final rank.
pub fn read_slates<R: Read>(reader: R, rel: &RelevanceMatrix) -> Result<(RunHeader, SlateSet)> {
    let mut buf = BufReader::new(reader);
    let mut first = String::new();
    buf.read_line(&mut first)
        .map_err(|e| Error::io("<reader>", e))?;
    let header: RunHeader = first.parse()?;

    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(buf);
    let mut rows: Vec<(usize, usize, usize, Phase)> = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec?;
        let row = i + 3;
        let parse_err = |column: usize, message: String| Error::Parse {
            row,
            column,
            message,
        };
        if rec.len() != 4 {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: 4,
            });
        }
        let c = rel
            .consumer_index(&rec[0])
            .ok_or_else(|| parse_err(1, format!("unknown consumer id `{}`", &rec[0])))?;
        let rank: usize = rec[1]
            .parse()
            .map_err(|_| parse_err(2, format!("bad rank `{}`", &rec[1])))?;
        let item = rel
            .item_index(&rec[2])
            .ok_or_else(|| Error::UnknownItem(rec[2].to_owned()))?;
        let phase: Phase = rec[3].parse()?;
        rows.push((c, rank, item, phase));
    }

    let mut slates: Vec<Slate> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut order = Vec::new();
    for (c, rank, item, phase) in rows {
        let idx = *index.entry(c).or_insert_with(|| {
            order.push(c);
            slates.push(Slate {
                consumer: c,
                slots: Vec::new(),
            });
            slates.len() - 1
        });
        let slate = &mut slates[idx];
        if rank != slate.slots.len() + 1 {
            return Err(Error::InvalidSlate {
                consumer: rel.consumer_ids()[c].clone(),
                reason: format!("rank {rank} out of sequence"),
            });
        }
        slate.slots.push(Placement {
            item,
            phase,
            placed_rank: rank,
        });
    }
    let set = SlateSet::new(header.k, order, slates);
    set.validate(rel)?;
    Ok((header, set))
}
